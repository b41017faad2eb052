"""
Файл: __init__.py
Описание: Инициализация пакета utils

- rng.py: производные RNG-потоки по (seed, tag)
- io.py: экспорт/импорт датасета в CSV с JSON-паспортом
"""
