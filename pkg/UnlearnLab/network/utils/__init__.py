"""
Файл: __init__.py
Описание: Инициализация пакета utils

- checkpoint.py: бинарный формат MULAB (сохранение и загрузка)
- flops.py: стоимость проходов в FLOPs
"""
