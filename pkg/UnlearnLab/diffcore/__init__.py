"""
Файл: __init__.py
Описание: Инициализация приложения diffcore

Минимальное ядро численных вычислений:
- плотные f64 тензоры и обратное автодифференцирование
- SGD с моментом и расписания learning rate
- проверка градиентов конечными разностями
"""
