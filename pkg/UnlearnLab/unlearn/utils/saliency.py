"""
Файл: saliency.py
Описание: Маски весов и случайная перемаркировка для SalUn
"""

import logging
import math
from typing import Dict

import numpy as np

from datagen.services.synthetic import Dataset
from datagen.utils.rng import derive_rng
from diffcore.services.tensor import backward
from losses.services.supervised import ce_loss
from network.services.model import Model, features, logits, snapshot

logger = logging.getLogger(__name__)


def gradient_saliency(model: Model, dataset: Dataset, forget_idx) -> Dict[str, np.ndarray]:
    """|dCE/dtheta| на всем forget-подмножестве без аугментаций"""
    probe = snapshot(model)
    forget_idx = np.asarray(forget_idx, dtype=np.int64)
    loss = ce_loss(dataset.labels[forget_idx], logits(probe, features(probe, dataset.inputs[forget_idx])))
    probe.zero_grad()
    backward(loss)
    return {
        name: np.abs(p.grad) if p.grad is not None else np.zeros_like(p.data)
        for name, p in probe.parameters()
    }


def mask_size(threshold: float, num_parameters: int) -> int:
    """round(threshold * P) с округлением половины вверх, не меньше 1"""
    return min(num_parameters, max(1, int(math.floor(threshold * num_parameters + 0.5))))


def saliency_masks(saliency: Dict[str, np.ndarray], threshold: float) -> Dict[str, np.ndarray]:
    """
    Бинарные маски: верхняя доля threshold всех координат по |градиенту|

    Порядок при равных значениях стабилен (по имени параметра и позиции),
    так что размер маски всегда ровно mask_size(threshold, P).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"mask threshold must be in (0, 1], got {threshold}")
    names = list(saliency)
    flat = np.concatenate([saliency[name].ravel() for name in names])
    keep = mask_size(threshold, flat.size)
    order = np.argsort(-flat, kind='stable')
    chosen = np.zeros(flat.size, dtype=bool)
    chosen[order[:keep]] = True

    masks, offset = {}, 0
    for name in names:
        size = saliency[name].size
        masks[name] = chosen[offset:offset + size].reshape(saliency[name].shape)
        offset += size
    logger.debug(f"Saliency mask: {keep}/{flat.size} coordinates (threshold={threshold})")
    return masks


def random_wrong_labels(dataset: Dataset, indices, seed: int) -> np.ndarray:
    """Новый класс для каждого индекса, равномерно среди K - 1 неверных"""
    indices = np.asarray(indices, dtype=np.int64)
    K = dataset.num_classes
    shift = derive_rng(seed, 'salun_relabel').integers(1, K, size=indices.size)
    return (dataset.class_of[indices] + shift) % K


def relabeled_targets(dataset: Dataset, indices, seed: int) -> np.ndarray:
    """Копия one-hot меток, где строки indices заменены случайными неверными классами"""
    indices = np.asarray(indices, dtype=np.int64)
    labels = dataset.labels.copy()
    labels[indices] = 0.0
    labels[indices, random_wrong_labels(dataset, indices, seed)] = 1.0
    return labels
