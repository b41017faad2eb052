"""
Файл: __init__.py
Описание: Инициализация пакета utils

- budget.py: подбор эпох бейзлайна под FLOPs CoUn
- tables.py: запись CSV
"""
