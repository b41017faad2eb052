"""
Файл: __init__.py
Описание: Инициализация приложения losses

Функции потерь: InfoNCE для одного якоря, симметричный CL loss,
кросс-энтропия и их комбинация L = L_CE + lambda * L_CL.
"""
