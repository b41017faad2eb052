"""
Файл: apps.py
Описание: Конфигурация Django приложения unlearn
"""

from django.apps import AppConfig


class UnlearnConfig(AppConfig):
    """Конфигурация приложения unlearn (методы разучивания)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'unlearn'
