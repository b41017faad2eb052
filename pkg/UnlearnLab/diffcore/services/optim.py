"""
Файл: optim.py
Описание: SGD с моментом и расписания learning rate

- OptimizerState: learning rate, момент, weight decay, скорости по параметрам
- sgd_step(): v <- m*v + g + wd*theta; theta <- theta - lr*v
- lr_schedule(): cosine (с минимумом 1e-4) и multistep (x0.1 на 50% и 75% эпох)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from diffcore.exceptions import ShapeError
from diffcore.services.tensor import Tensor

logger = logging.getLogger(__name__)

# Минимальный learning rate для cosine-расписания
COSINE_MIN_LR = 1e-4

# Доли эпох, после которых multistep делит lr на 10
MULTISTEP_MILESTONES = (0.5, 0.75)


@dataclass
class OptimizerState:
    """
    Состояние SGD

    learning_rate = 0 допускается и означает "замороженную" модель
    (шаг не меняет параметры): на этом держится равенство NegGrad с lr = 0
    исходной модели. Отрицательный learning rate - ошибка.
    """
    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    @classmethod
    def for_parameters(cls, params: Mapping[str, Tensor], learning_rate, momentum=0.9, weight_decay=0.0):
        """Состояние с нулевыми скоростями под заданные параметры"""
        velocity = {name: np.zeros_like(p.data) for name, p in params.items()}
        return cls(learning_rate, momentum, weight_decay, velocity)


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    masks: Optional[Mapping[str, np.ndarray]] = None,
) -> Mapping[str, Tensor]:
    """
    Шаг SGD с моментом и weight decay (на месте)

    Args:
        params: имя -> Tensor параметра
        grads: имя -> градиент той же формы
        state: состояние оптимизатора (скорости обновляются)
        masks: необязательные бинарные маски; вне маски ни скорость,
            ни параметр не меняются
    Returns:
        тот же params
    """
    lr = state.learning_rate
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.data.shape:
            raise ShapeError('sgd_step', param.data.shape, grad.shape)

        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(param.data)
        elif velocity.shape != param.data.shape:
            raise ShapeError('sgd_step.velocity', param.data.shape, velocity.shape)

        new_velocity = state.momentum * velocity + grad
        if state.weight_decay:
            new_velocity = new_velocity + state.weight_decay * param.data
        new_data = param.data - lr * new_velocity

        if masks is not None and name in masks:
            keep = masks[name].astype(bool)
            new_velocity = np.where(keep, new_velocity, velocity)
            new_data = np.where(keep, new_data, param.data)

        state.velocity[name] = new_velocity
        param.data = new_data
    return params


def lr_schedule(kind: str, epoch: int, total: int, base_lr: float, min_lr: float = COSINE_MIN_LR) -> float:
    """
    Learning rate для эпохи

    Args:
        kind: 'cosine' или 'multistep'
        epoch: номер эпохи, 0 <= epoch <= total
        total: всего эпох
        base_lr: начальный learning rate
    Returns:
        float
    """
    if total < 1:
        raise ValueError(f"total epochs must be >= 1, got {total}")
    if epoch < 0 or epoch > total:
        raise ValueError(f"epoch {epoch} outside [0, {total}]")

    if kind == 'cosine':
        # Если base_lr ниже минимума, расписание вырождается в константу
        if base_lr <= min_lr:
            return base_lr
        return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * epoch / total))

    if kind == 'multistep':
        passed = sum(1 for fraction in MULTISTEP_MILESTONES if epoch >= fraction * total)
        return base_lr * 0.1 ** passed

    raise ValueError(f"unknown schedule kind: {kind!r}")


def mean_abs_parameter(params: Sequence[Tensor]) -> float:
    """Средний |theta| по всем параметрам (для отчетов l1-sparse)"""
    total = sum(float(np.abs(p.data).sum()) for p in params)
    count = sum(p.size for p in params)
    return total / max(count, 1)
