"""
Файл: apps.py
Описание: Конфигурация Django приложения harness
"""

from django.apps import AppConfig


class HarnessConfig(AppConfig):
    """Конфигурация приложения harness (эксперименты и отчеты)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'harness'
