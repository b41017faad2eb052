"""
Файл: apps.py
Описание: Конфигурация Django приложения datagen
"""

from django.apps import AppConfig


class DatagenConfig(AppConfig):
    """Конфигурация приложения datagen (датасеты, разбиения, аугментации)"""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'datagen'
