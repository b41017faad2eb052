"""
Файл: __init__.py
Описание: Инициализация пакета services

- model.py: ModelConfig, Model, init_model(), features(), logits(), predict(), negate_layer()
"""
