# Generated by Django 5.2.6 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentCell',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_hash', models.CharField(db_index=True, max_length=64, verbose_name='Хэш конфигурации')),
                ('key', models.CharField(help_text='Например: unlearn:coun:3', max_length=200, verbose_name='Ключ ячейки')),
                ('kind', models.CharField(choices=[('original', 'Original'), ('retrain', 'Retrain'), ('unlearn', 'Разучивание')], max_length=20, verbose_name='Тип')),
                ('method', models.CharField(help_text='Метка метода, например neggrad_plus+CL', max_length=64, verbose_name='Метод')),
                ('seed', models.IntegerField(verbose_name='Seed')),
                ('status', models.CharField(choices=[('done', 'Готово'), ('failed', 'Ошибка')], max_length=10, verbose_name='Статус')),
                ('result', models.JSONField(default=dict, help_text='Метрики по стадиям, распределения предсказаний, чекпоинты', verbose_name='Результат')),
                ('error', models.TextField(blank=True, default='', verbose_name='Текст ошибки')),
                ('elapsed', models.FloatField(default=0.0, verbose_name='Время (с)')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='Создана')),
                ('updated_at', models.DateTimeField(auto_now=True, verbose_name='Обновлена')),
            ],
            options={
                'verbose_name': 'Ячейка эксперимента',
                'verbose_name_plural': 'Ячейки эксперимента',
                'ordering': ['config_hash', 'kind', 'method', 'seed'],
                'constraints': [models.UniqueConstraint(fields=('config_hash', 'key'), name='unique_cell_per_config')],
            },
        ),
    ]
