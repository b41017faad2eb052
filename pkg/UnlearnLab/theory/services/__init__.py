"""
Файл: __init__.py
Описание: Инициализация пакета services

- estimators.py: feature_map, class_centers, view_gaps, estimate_R,
  estimate_lipschitz, spectral_bound, center_distances
- bounds.py: rho_max, err_bound, separation_condition
- report.py: TheoryEstimates, lemma1_check, estimate_theory
"""
