from django.db import models


class ExperimentCell(models.Model):
    """Ячейка сетки эксперимента: Original, Retrain или метод для одного seed"""

    KIND_CHOICES = [
        ('original', 'Original'),
        ('retrain', 'Retrain'),
        ('unlearn', 'Разучивание'),
    ]

    STATUS_CHOICES = [
        ('done', 'Готово'),
        ('failed', 'Ошибка'),
    ]

    config_hash = models.CharField(
        max_length=64,
        db_index=True,
        verbose_name='Хэш конфигурации'
    )
    key = models.CharField(
        max_length=200,
        verbose_name='Ключ ячейки',
        help_text='Например: unlearn:coun:3'
    )
    kind = models.CharField(
        max_length=20,
        choices=KIND_CHOICES,
        verbose_name='Тип'
    )
    method = models.CharField(
        max_length=64,
        verbose_name='Метод',
        help_text='Метка метода, например neggrad_plus+CL'
    )
    seed = models.IntegerField(
        verbose_name='Seed'
    )
    status = models.CharField(
        max_length=10,
        choices=STATUS_CHOICES,
        verbose_name='Статус'
    )
    result = models.JSONField(
        default=dict,
        verbose_name='Результат',
        help_text='Метрики по стадиям, распределения предсказаний, чекпоинты'
    )
    error = models.TextField(
        blank=True,
        default='',
        verbose_name='Текст ошибки'
    )
    elapsed = models.FloatField(
        default=0.0,
        verbose_name='Время (с)'
    )
    created_at = models.DateTimeField(
        auto_now_add=True,
        verbose_name='Создана'
    )
    updated_at = models.DateTimeField(
        auto_now=True,
        verbose_name='Обновлена'
    )

    class Meta:
        verbose_name = 'Ячейка эксперимента'
        verbose_name_plural = 'Ячейки эксперимента'
        ordering = ['config_hash', 'kind', 'method', 'seed']
        constraints = [
            models.UniqueConstraint(fields=['config_hash', 'key'], name='unique_cell_per_config'),
        ]

    def __str__(self):
        return f"{self.config_hash[:12]} {self.key} ({self.status})"

    @property
    def is_done(self):
        return self.status == 'done'
