"""
Файл: apps.py
Описание: Конфигурация Django приложения diffcore
"""

from django.apps import AppConfig


class DiffcoreConfig(AppConfig):
    """Конфигурация приложения diffcore (тензоры, autodiff, оптимизатор)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'diffcore'
