"""
Файл: __init__.py
Описание: Инициализация приложения network

Экстрактор признаков f (MLP), линейная голова h, проекционная голова
для CL, чекпоинты и аналитический подсчет FLOPs.
"""
