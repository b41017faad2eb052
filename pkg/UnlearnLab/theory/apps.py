"""
Файл: apps.py
Описание: Конфигурация Django приложения theory
"""

from django.apps import AppConfig


class TheoryConfig(AppConfig):
    """Конфигурация приложения theory (оценки для границ)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'theory'
