"""
Файл: supervised.py
Описание: Кросс-энтропия, комбинированная цель и цели бейзлайнов

Этот файл содержит:
- ce_loss(): средняя -log softmax на истинном классе (по логитам)
- ce_loss_from_probs(): та же величина по готовым вероятностям
- combined_loss(): L_CE + lambda * L_CL
- neggrad_plus_loss(): beta * CE(retain) - (1 - beta) * CE(forget)
- l1_penalty(): gamma * sum |theta|
"""

import logging
from typing import Sequence

import numpy as np

from diffcore.exceptions import ShapeError
from diffcore.services.tensor import (
    Tensor, absolute, as_tensor, log, log_softmax_rows, mul, scale, tensor_sum,
)
from losses.services.contrastive import CLConfig, cl_loss

logger = logging.getLogger(__name__)


def _check_labels(Y: np.ndarray, other: Tensor, op: str):
    if Y.shape != other.shape or Y.ndim != 2:
        raise ShapeError(op, Y.shape, other.shape)


def ce_loss(Y, logits) -> Tensor:
    """
    -(1/N) sum_n sum_k y_nk log softmax(logits)_nk

    Args:
        Y: one-hot метки N x K (numpy)
        logits: N x K
    """
    logits = as_tensor(logits)
    Y = np.asarray(Y, dtype=np.float64)
    _check_labels(Y, logits, 'ce_loss')
    picked = tensor_sum(mul(log_softmax_rows(logits), Y))
    return scale(picked, -1.0 / Y.shape[0])


def ce_loss_from_probs(Y, probs) -> Tensor:
    """CE по строкам вероятностей: log берется только на истинном классе"""
    probs = as_tensor(probs)
    Y = np.asarray(Y, dtype=np.float64)
    _check_labels(Y, probs, 'ce_loss_from_probs')
    true_class = tensor_sum(mul(probs, Y), axis=1)
    return scale(tensor_sum(log(true_class)), -1.0 / Y.shape[0])


def combined_loss(Y, logits, Z, Z_prime, cfg: CLConfig) -> Tensor:
    """
    L = L_CE + lambda * L_CL

    При lambda = 0 возвращается ровно ce_loss (CL-ветка не строится).
    """
    ce = ce_loss(Y, logits)
    if cfg.lam == 0:
        return ce
    return ce + scale(cl_loss(Z, Z_prime, cfg.tau), cfg.lam)


def neggrad_plus_loss(Y_retain, logits_retain, Y_forget, logits_forget, beta: float) -> Tensor:
    """
    beta * CE(retain) - (1 - beta) * CE(forget)

    При beta = 1 forget-слагаемое не строится.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    retain = scale(ce_loss(Y_retain, logits_retain), beta)
    if beta == 1.0:
        return retain
    return retain - scale(ce_loss(Y_forget, logits_forget), 1.0 - beta)


def l1_penalty(params: Sequence[Tensor], gamma: float) -> Tensor:
    """gamma * sum ||theta||_1 (субградиент sign(theta), sign(0) = 0)"""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    total = None
    for param in params:
        term = tensor_sum(absolute(param))
        total = term if total is None else total + term
    return scale(total, gamma)
