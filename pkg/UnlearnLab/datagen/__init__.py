"""
Файл: __init__.py
Описание: Инициализация приложения datagen

Синтетические кластерные датасеты, разбиения retain/forget/test,
распределения аугментаций и оценки d_T и sigma.
"""
