"""
Файл: bounds.py
Описание: Формулы гарантии разделимости

- rho_max = 2(1 - sigma) + R / min_k P[C_k] + sigma * (L * delta + 2 * eps)
- err_bound = (1 - sigma) + R
- условие: mu_l . mu_k < 1/2 min_k' ||mu_k'||^2 - rho_max - sqrt(2 rho_max) для l != k
"""

import math

import numpy as np


def rho_max(sigma: float, delta: float, eps: float, L: float, R: float, min_class_prob: float) -> float:
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    if min_class_prob <= 0:
        raise ValueError(f"min class probability must be > 0, got {min_class_prob}")
    for name, value in (('delta', delta), ('eps', eps), ('L', L), ('R', R)):
        if value < 0:
            raise ValueError(f"{name} must be >= 0, got {value}")
    return 2.0 * (1.0 - sigma) + R / min_class_prob + sigma * (L * delta + 2.0 * eps)


def err_bound(sigma: float, R: float) -> float:
    """Верхняя граница ошибки головы"""
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    return (1.0 - sigma) + R


def separation_margin(mu: np.ndarray, rho: float) -> float:
    """Правая часть условия: 1/2 min ||mu_k||^2 - rho - sqrt(2 rho)"""
    mu = np.asarray(mu, dtype=np.float64)
    return 0.5 * float(np.min(np.sum(mu * mu, axis=1))) - rho - math.sqrt(2.0 * rho)


def separation_condition(mu: np.ndarray, rho: float) -> np.ndarray:
    """
    K x K матрица: выполняется ли mu_l . mu_k < margin

    Диагональ (l = k) не проверяется и заполнена True.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    holds = mu @ mu.T < separation_margin(mu, rho)
    np.fill_diagonal(holds, True)
    return holds
