"""
Файл: __init__.py
Описание: Инициализация пакета services

- synthetic.py: SyntheticSpec, Dataset, make_synthetic()
- splits.py: Split и сценарии забывания (random, classwise, sequential)
- transforms.py: распределения аугментаций, d_T, оценка sigma
"""
