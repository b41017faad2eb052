"""
Файл: apps.py
Описание: Конфигурация Django приложения evaluation
"""

from django.apps import AppConfig


class EvaluationConfig(AppConfig):
    """Конфигурация приложения evaluation (метрики разучивания)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'evaluation'
