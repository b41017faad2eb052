"""
Файл: __init__.py
Описание: Инициализация пакета utils

- gradcheck.py: сверка autodiff-градиентов с центральными конечными разностями
"""
