"""
Файл: budget.py
Описание: FLOPs-бюджет для сравнения при равных вычислениях

Счетчики эпохи строятся по размерам батчей так же, как их считает
UnlearnEngine. Для NegGrad+ и l1-sparse берется верхняя оценка (каждый
шаг с полным forget-батчем и l1-штрафом), поэтому подобранное число
эпох не выводит бейзлайн за бюджет.
"""

import logging

from datagen.services.splits import Split
from network.services.model import ModelConfig, init_model
from network.utils.flops import PassCounters, training_flops
from unlearn.services.config import MethodConfig

logger = logging.getLogger(__name__)


def batch_sizes(rows: int, batch_size: int):
    full, rest = divmod(rows, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def epoch_counters(method: MethodConfig, split: Split, batch_size: int) -> PassCounters:
    """Счетчики одной эпохи метода (для части методов - сверху)"""
    n_retain, n_forget = split.retain_idx.size, split.forget_idx.size
    if method.method == 'neggrad':
        rows = n_forget
    elif method.method == 'salun':
        rows = n_retain + n_forget
    else:
        rows = n_retain
    sizes = batch_sizes(rows, batch_size)
    counters = PassCounters(supervised_rows=rows)

    cl = method.contrastive()
    if cl is not None and cl.lam > 0:
        counters.view_rows = rows
        counters.cl_pairs = sum(b * b for b in sizes)
    if method.method == 'neggrad_plus' and method.beta < 1.0:
        counters.supervised_rows += len(sizes) * min(batch_size, n_forget)
    if method.method == 'l1_sparse' and method.gamma > 0 and method.l1_epochs > 0:
        counters.l1_steps = len(sizes)
    return counters


def scaled(counters: PassCounters, epochs: int) -> PassCounters:
    return PassCounters(
        counters.supervised_rows * epochs,
        counters.view_rows * epochs,
        counters.cl_pairs * epochs,
        counters.l1_steps * epochs,
    )


def planned_flops(model_config: ModelConfig, method: MethodConfig, split: Split, batch_size: int, epochs: int) -> int:
    num_parameters = init_model(model_config).num_parameters()
    return training_flops(model_config, scaled(epoch_counters(method, split, batch_size), epochs), num_parameters)


def matched_epochs(model_config: ModelConfig, method: MethodConfig, reference: MethodConfig, split: Split,
                   batch_size: int, reference_epochs: int) -> int:
    """
    Наибольшее число эпох method, при котором его FLOPs не больше
    FLOPs reference за reference_epochs (не меньше 1)
    """
    budget = planned_flops(model_config, reference, split, batch_size, reference_epochs)
    per_epoch = planned_flops(model_config, method, split, batch_size, 1)
    epochs = max(1, budget // per_epoch)
    if per_epoch > budget:
        logger.warning(f"[{method.label}] one epoch ({per_epoch}) exceeds the budget ({budget}); using 1 epoch")
    logger.debug(f"[{method.label}] matched to {reference.label}: {epochs} epochs, budget {budget}")
    return int(epochs)
