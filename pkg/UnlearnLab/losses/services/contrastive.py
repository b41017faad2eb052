"""
Файл: contrastive.py
Описание: Контрастивная функция потерь

Этот файл содержит:
- CLConfig: температура tau и вес lambda
- info_nce_anchor(): потеря одной положительной пары
- cl_loss(): симметричная потеря по всем якорям обоих видов

Знаменатель InfoNCE идет по всем j = 1..N противоположного вида,
включая положительную пару; негативы из того же вида не добавляются.
Все вычисления - через log-softmax по строкам (стабилизация максимумом).
"""

import logging
from dataclasses import dataclass

import numpy as np

from diffcore.exceptions import ShapeError
from diffcore.services.tensor import (
    Tensor, as_tensor, log_softmax_rows, matmul, mul, neg, reshape, scale, tensor_sum, transpose,
)

logger = logging.getLogger(__name__)

# Значения по умолчанию (tau=0.1 лучший в абляции по температуре)
DEFAULT_TAU = 0.1
DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class CLConfig:
    """Параметры CL: tau > 0 (температура), lam >= 0 (вес в комбинированной цели)"""
    tau: float = DEFAULT_TAU
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")


def _positive_log_probs(similarities: Tensor) -> Tensor:
    """log-softmax по строкам, взятый на диагонали: N x 1"""
    n = similarities.shape[0]
    return tensor_sum(mul(log_softmax_rows(similarities), np.eye(n)), axis=1)


def info_nce_anchor(z_n, z_prime, n: int, tau: float) -> Tensor:
    """
    -log( exp(z_n . z'_n / tau) / sum_j exp(z_n . z'_j / tau) )

    Args:
        z_n: вектор якоря (D,) или (1, D)
        z_prime: N x D, противоположный вид
        n: номер положительной пары
        tau: температура
    Returns:
        скалярный Tensor
    """
    _check_tau(tau)
    z_n, z_prime = as_tensor(z_n), as_tensor(z_prime)
    if z_n.data.ndim == 1:
        z_n = reshape(z_n, (1, z_n.shape[0]))
    if not 0 <= n < z_prime.shape[0]:
        raise IndexError(f"anchor index {n} outside [0, {z_prime.shape[0]})")
    row = log_softmax_rows(scale(matmul(z_n, transpose(z_prime)), 1.0 / tau))
    pick = np.zeros(row.shape)
    pick[0, n] = 1.0
    return neg(tensor_sum(mul(row, pick)))


def anchor_losses(Z, Z_prime, tau: float) -> Tensor:
    """Потери всех якорей Z против вида Z': N x 1"""
    _check_tau(tau)
    Z, Z_prime = as_tensor(Z), as_tensor(Z_prime)
    if Z.shape != Z_prime.shape or Z.data.ndim != 2:
        raise ShapeError('anchor_losses', Z.shape, Z_prime.shape)
    similarities = scale(matmul(Z, transpose(Z_prime)), 1.0 / tau)
    return neg(_positive_log_probs(similarities))


def cl_loss(Z, Z_prime, tau: float) -> Tensor:
    """
    Симметричный CL loss: (1/2N) sum_n [ l(z_n) + l(z'_n) ]

    Строки Z и Z' должны быть нормированы (или нулевые).
    Матрица сходств считается один раз; для якорей из Z' берется ее транспонирование.
    """
    _check_tau(tau)
    Z, Z_prime = as_tensor(Z), as_tensor(Z_prime)
    if Z.shape != Z_prime.shape or Z.data.ndim != 2:
        raise ShapeError('cl_loss', Z.shape, Z_prime.shape)
    n = Z.shape[0]
    similarities = scale(matmul(Z, transpose(Z_prime)), 1.0 / tau)
    forward_terms = tensor_sum(_positive_log_probs(similarities))
    backward_terms = tensor_sum(_positive_log_probs(transpose(similarities)))
    return scale(forward_terms + backward_terms, -1.0 / (2 * n))
