"""
Файл: __init__.py
Описание: Инициализация пакета utils

- saliency.py: маски SalUn и случайная переразметка forget
- manifest.py: JSON-манифесты запусков
"""
