"""
Файл: apps.py
Описание: Конфигурация Django приложения losses
"""

from django.apps import AppConfig


class LossesConfig(AppConfig):
    """Конфигурация приложения losses (InfoNCE, CE, комбинированная цель)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'losses'
