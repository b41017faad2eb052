"""
Файл: __init__.py
Описание: Инициализация приложения theory

Эмпирические оценки величин из гарантии разделимости классов:
центры классов, R[eps], локальные константы Липшица, rho_max,
условие разделимости и проверка R_r <= R_u.
"""
