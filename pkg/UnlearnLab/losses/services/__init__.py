"""
Файл: __init__.py
Описание: Инициализация пакета services

- contrastive.py: CLConfig, info_nce_anchor(), cl_loss()
- supervised.py: ce_loss(), combined_loss(), цели бейзлайнов (NegGrad+, l1)
"""
