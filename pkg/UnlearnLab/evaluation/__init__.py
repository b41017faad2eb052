"""
Файл: __init__.py
Описание: Инициализация приложения evaluation

Протокол оценки: RA / UA / TA, MIA по уверенности, средний разрыв
до Retrain, распределение предсказаний на forget и FLOPs.
"""
