"""
Файл: apps.py
Описание: Конфигурация Django приложения network
"""

from django.apps import AppConfig


class NetworkConfig(AppConfig):
    """Конфигурация приложения network (модель, чекпоинты, FLOPs)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'network'
