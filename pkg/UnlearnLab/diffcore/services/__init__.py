"""
Файл: __init__.py
Описание: Инициализация пакета services

- tensor.py: Tensor, Graph и замкнутый набор примитивов для функций потерь
- optim.py: состояние SGD, шаг оптимизатора, расписания learning rate
"""
