"""
Файл: __init__.py
Описание: Инициализация приложения unlearn

Обучение Original, точное разучивание (Retrain), CoUn, бейзлайны
(FT, NegGrad, NegGrad+, l1-sparse, SalUn, NoT), CL-модуль и
последовательное разучивание.
"""
