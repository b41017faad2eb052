"""
Файл: __init__.py
Описание: Инициализация пакета utils

- rounding.py: округление для таблиц (половина вверх, 2 знака)
"""
