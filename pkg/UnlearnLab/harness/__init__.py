"""
Файл: __init__.py
Описание: Инициализация приложения harness

Конфигурация экспериментов, сетка (метод x seed), кэш ячеек в БД,
отчеты в CSV/JSON и management-команды.
"""
