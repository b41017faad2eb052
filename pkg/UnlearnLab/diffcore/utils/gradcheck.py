"""
Файл: gradcheck.py
Описание: Проверка градиентов центральными конечными разностями

finite_diff_check() сравнивает градиенты обратного прохода с оценкой
(f(theta + h) - f(theta - h)) / 2h по каждой координате каждого параметра.
Худшая ошибка берется по двум мерам: по норме параметра и по отдельной координате.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from diffcore.services.tensor import Tensor, backward

logger = logging.getLogger(__name__)

# Шаг центральной разности
DEFAULT_STEP = 1e-6


@dataclass(frozen=True)
class GradCheckReport:
    """
    Ошибки autodiff-градиента относительно конечных разностей

    normwise: max по параметрам ||g_ad - g_fd|| / (||g_fd|| + 1e-12)
    coordinatewise: max по координатам |g_ad - g_fd| / max(1, |g_ad|, |g_fd|)
    """
    normwise: float
    coordinatewise: float

    @property
    def worst(self) -> float:
        return max(self.normwise, self.coordinatewise)


def numeric_gradient(loss_fn: Callable[[], Tensor], param: Tensor, h: float = DEFAULT_STEP) -> np.ndarray:
    """
    Градиент по одному параметру конечными разностями

    Значения параметра меняются на месте и восстанавливаются побитово.
    """
    grad = np.zeros_like(param.data)
    for index in np.ndindex(*param.data.shape):
        original = param.data[index]
        param.data[index] = original + h
        plus = loss_fn().item()
        param.data[index] = original - h
        minus = loss_fn().item()
        param.data[index] = original
        grad[index] = (plus - minus) / (2.0 * h)
    return grad


def coordinate_error(g_ad: np.ndarray, g_fd: np.ndarray) -> float:
    """Худшая по координатам ошибка; для малых градиентов она абсолютная"""
    if g_fd.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.maximum(np.abs(g_ad), np.abs(g_fd)))
    return float(np.max(np.abs(g_ad - g_fd) / scale))


def gradient_report(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = DEFAULT_STEP,
) -> GradCheckReport:
    """
    Обе меры ошибки для набора параметров

    Args:
        loss_fn: функция без аргументов, строящая скалярный loss заново
        params: листья с requires_grad=True
        h: шаг разности
    """
    for param in params:
        param.zero_grad()
    backward(loss_fn())
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    normwise = 0.0
    coordinatewise = 0.0
    for param, g_ad in zip(params, analytic):
        g_fd = numeric_gradient(loss_fn, param, h)
        normwise = max(normwise, float(np.linalg.norm(g_ad - g_fd) / (np.linalg.norm(g_fd) + 1e-12)))
        coordinatewise = max(coordinatewise, coordinate_error(g_ad, g_fd))
    return GradCheckReport(normwise, coordinatewise)


def finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    tol: float = 1e-5,
    h: float = DEFAULT_STEP,
) -> float:
    """
    Худшая ошибка autodiff-градиента (максимум из двух мер GradCheckReport)

    Args:
        tol: порог, выше которого пишется предупреждение
    """
    report = gradient_report(loss_fn, params, h)
    if report.worst > tol:
        logger.warning(
            f"Gradient check failed: normwise {report.normwise:.3e}, "
            f"coordinatewise {report.coordinatewise:.3e} > tol {tol:.1e}"
        )
    else:
        logger.debug(f"Gradient check passed: worst error {report.worst:.3e}")
    return report.worst
