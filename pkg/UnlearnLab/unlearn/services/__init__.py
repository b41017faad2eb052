"""
Файл: __init__.py
Описание: Инициализация пакета services

- config.py: TrainConfig, MethodConfig, with_cl_module()
- engine.py: AccessLog, BatchLoader, Objective, UnlearnRun, UnlearnEngine
- methods.py: train_original, retrain, coun, ft, neggrad, neggrad_plus,
  l1_sparse, salun, not_unlearn, sequential_unlearn, run_method
"""
