"""
Файл: estimators.py
Описание: Монте-Карло оценки по энкодеру

Энкодер - любой callable (n x d) -> (n x D). feature_map(model) превращает
Model в такой callable; в тестах подставляются аналитические энкодеры
вроде f(x) = 2x.

Пара видов m получает seed от (seed, m), поэтому пары при меньшем M
являются префиксом пар при большем M.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from datagen.services.splits import Split
from datagen.services.synthetic import Dataset
from datagen.services.transforms import TransformDistribution, view_seed
from datagen.utils.rng import derive_rng
from network.services.model import Model, embed

logger = logging.getLogger(__name__)

Encoder = Callable[[np.ndarray], np.ndarray]

# Пары входов ближе этого расстояния не участвуют в оценке Липшица
MIN_PAIR_DISTANCE = 1e-9


def feature_map(model: Model) -> Encoder:
    """Энкодер f модели (без нормировки и проекционной головы)"""
    return lambda inputs: embed(model, inputs)


def _check_samples(samples: int):
    if samples < 1:
        raise ValueError(f"Monte-Carlo samples must be >= 1, got {samples}")


def class_centers(encoder: Encoder, dataset: Dataset, indices, distribution: TransformDistribution,
                  samples: int = 64, seed: int = 0, classes: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    mu_k = E_{i in C_k} E_{x ~ t(i)} f(x)

    Args:
        indices: подмножество dataset, по которому считаются центры
        classes: классы (по умолчанию все K); пустой класс - ошибка
    Returns:
        len(classes) x D
    """
    _check_samples(samples)
    indices = np.asarray(indices, dtype=np.int64)
    classes = range(dataset.num_classes) if classes is None else classes
    centers = []
    for k in classes:
        members = indices[dataset.class_of[indices] == k]
        if members.size == 0:
            raise ValueError(f"class {k} has no samples in the subset")
        inputs = dataset.inputs[members]
        total = None
        for m in range(samples):
            t = distribution.sample(view_seed(seed, 'class_centers', int(k), m))
            view_mean = encoder(t(inputs)).mean(axis=0)
            total = view_mean if total is None else total + view_mean
        centers.append(total / samples)
    logger.debug(f"Class centers: {len(centers)} classes, M={samples}, seed={seed}")
    return np.vstack(centers)


def view_gaps(encoder: Encoder, inputs: np.ndarray, distribution: TransformDistribution,
              samples: int = 64, seed: int = 0) -> np.ndarray:
    """Для каждого сэмпла max по M парам (t, t') ||f(t(i)) - f(t'(i))||"""
    _check_samples(samples)
    inputs = np.asarray(inputs, dtype=np.float64)
    gaps = np.zeros(inputs.shape[0])
    for m in range(samples):
        first = encoder(distribution.sample(view_seed(seed, 'view_gap', m, 0))(inputs))
        second = encoder(distribution.sample(view_seed(seed, 'view_gap', m, 1))(inputs))
        gaps = np.maximum(gaps, np.linalg.norm(first - second, axis=1))
    return gaps


def estimate_R(encoder: Encoder, inputs: np.ndarray, distribution: TransformDistribution, eps: float,
               samples: int = 64, seed: int = 0) -> float:
    """R[eps]: доля сэмплов, у которых разрыв между видами превышает eps"""
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    gaps = view_gaps(encoder, inputs, distribution, samples, seed)
    if gaps.size == 0:
        raise ValueError("R[eps] of an empty subset is undefined")
    return float(np.mean(gaps > eps))


def estimate_lipschitz(encoder: Encoder, inputs: np.ndarray, distribution: TransformDistribution,
                       samples: int = 64, seed: int = 0) -> float:
    """
    Нижняя оценка локальной константы Липшица

    На каждой итерации берутся два вида подмножества; пары - (вид сэмпла,
    другой вид того же сэмпла) и (вид сэмпла, вид случайного партнера).
    Возвращается max ||f(x1) - f(x2)|| / ||x1 - x2|| по невырожденным парам.
    """
    _check_samples(samples)
    inputs = np.asarray(inputs, dtype=np.float64)
    best, used = 0.0, 0
    for m in range(samples):
        first = distribution.sample(view_seed(seed, 'lipschitz', m, 0))(inputs)
        second = distribution.sample(view_seed(seed, 'lipschitz', m, 1))(inputs)
        partners = derive_rng(seed, 'lipschitz_partner', m).permutation(inputs.shape[0])
        f_first, f_second = encoder(first), encoder(second)
        for x2, f2 in ((second, f_second), (second[partners], f_second[partners])):
            dx = np.linalg.norm(first - x2, axis=1)
            keep = dx >= MIN_PAIR_DISTANCE
            if keep.any():
                ratios = np.linalg.norm(f_first - f2, axis=1)[keep] / dx[keep]
                best = max(best, float(ratios.max()))
                used += int(keep.sum())
    if used == 0:
        raise ValueError("all sampled pairs are degenerate; Lipschitz estimate undefined")
    logger.debug(f"Lipschitz estimate {best:.4f} over {used} pairs, M={samples}, seed={seed}")
    return best


def spectral_bound(model: Model) -> float:
    """Произведение спектральных норм весов экстрактора (relu 1-липшицева)"""
    bound = 1.0
    for weight, _ in model.extractor_layers():
        bound *= float(np.linalg.norm(weight.data, 2))
    return bound


def center_distances(encoder: Encoder, dataset: Dataset, split: Split, distribution: TransformDistribution,
                     samples: int = 64, seed: int = 0) -> Dict[int, float]:
    """||mu_k(retain) - mu_k(forget)|| для классов, присутствующих в обоих подмножествах"""
    shared = np.intersect1d(dataset.class_of[split.retain_idx], dataset.class_of[split.forget_idx])
    if shared.size == 0:
        return {}
    retain = class_centers(encoder, dataset, split.retain_idx, distribution, samples, seed, shared)
    forget = class_centers(encoder, dataset, split.forget_idx, distribution, samples, seed, shared)
    return {int(k): float(np.linalg.norm(r - f)) for k, r, f in zip(shared, retain, forget)}
