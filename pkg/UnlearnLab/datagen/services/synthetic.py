"""
Файл: synthetic.py
Описание: Синтетические кластерные датасеты

Этот файл содержит:
- SyntheticSpec: описание генератора (K классов, центры, разброс, размеры)
- Dataset: входы, one-hot метки и номера классов
- make_synthetic(): обучающая и тестовая выборки из гауссовых кластеров

По умолчанию центры лежат на кольце в плоскости первых двух координат,
так что соседние по кольцу классы являются ближайшими ("семантически похожими").
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from datagen.utils.rng import derive_rng

logger = logging.getLogger(__name__)

# Радиус кольца центров по умолчанию
RING_RADIUS = 1.5


def ring_centers(num_classes: int, input_dim: int, radius: float = RING_RADIUS) -> np.ndarray:
    """
    Центры классов на кольце в плоскости координат 0 и 1

    Соседние классы (k, k+1 mod K) находятся на минимальном расстоянии.
    """
    if input_dim < 2:
        raise ValueError(f"ring layout needs input_dim >= 2, got {input_dim}")
    centers = np.zeros((num_classes, input_dim))
    for k in range(num_classes):
        angle = 2.0 * math.pi * k / num_classes
        centers[k, 0] = radius * math.cos(angle)
        centers[k, 1] = radius * math.sin(angle)
    return centers


def ring_neighbors(num_classes: int, k: int) -> Tuple[int, int]:
    """Два соседа класса k на кольце"""
    return (k - 1) % num_classes, (k + 1) % num_classes


@dataclass
class SyntheticSpec:
    """
    Параметры генератора

    class_centers=None означает кольцевую раскладку (ring_centers).
    samples_per_class относится к обучающей части; тестовая часть на класс
    равна max(1, round(samples_per_class * test_fraction / (1 - test_fraction))).
    """
    num_classes: int
    input_dim: int
    per_class_std: float = 0.3
    samples_per_class: int = 200
    test_fraction: float = 0.2
    seed: int = 0
    class_centers: Optional[np.ndarray] = None
    ring_radius: float = RING_RADIUS

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.samples_per_class < 4:
            raise ValueError(f"samples_per_class must be >= 4, got {self.samples_per_class}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.per_class_std < 0:
            raise ValueError(f"per_class_std must be >= 0, got {self.per_class_std}")

        if self.class_centers is None:
            self.class_centers = ring_centers(self.num_classes, self.input_dim, self.ring_radius)
        else:
            self.class_centers = np.array(self.class_centers, dtype=np.float64)

        expected = (self.num_classes, self.input_dim)
        if self.class_centers.shape != expected:
            raise ValueError(f"class_centers shape {self.class_centers.shape} != {expected}")
        for a in range(self.num_classes):
            for b in range(a + 1, self.num_classes):
                if np.array_equal(self.class_centers[a], self.class_centers[b]):
                    raise ValueError(f"class centers {a} and {b} coincide")

    @property
    def test_per_class(self) -> int:
        ratio = self.test_fraction / (1.0 - self.test_fraction)
        return max(1, int(round(self.samples_per_class * ratio)))

    def to_dict(self) -> dict:
        return {
            'num_classes': self.num_classes,
            'input_dim': self.input_dim,
            'per_class_std': self.per_class_std,
            'samples_per_class': self.samples_per_class,
            'test_fraction': self.test_fraction,
            'seed': self.seed,
            'ring_radius': self.ring_radius,
            'class_centers': self.class_centers.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SyntheticSpec':
        return cls(**data)


@dataclass
class Dataset:
    """
    Размеченная выборка

    Args:
        inputs: n x input_dim
        class_of: n номеров классов
        num_classes: K
    """
    inputs: np.ndarray
    class_of: np.ndarray
    num_classes: int
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.class_of = np.asarray(self.class_of, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.class_of.shape[0]:
            raise ValueError(
                f"inputs {self.inputs.shape} do not match class_of {self.class_of.shape}"
            )
        if self.class_of.size and (self.class_of.min() < 0 or self.class_of.max() >= self.num_classes):
            raise ValueError(f"class labels outside [0, {self.num_classes})")
        self.labels = np.eye(self.num_classes)[self.class_of]

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[indices], self.class_of[indices], self.num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.class_of, minlength=self.num_classes)


def make_synthetic(spec: SyntheticSpec) -> Tuple[Dataset, Dataset]:
    """
    Обучающая и тестовая выборки вокруг центров классов

    Сэмплы i.i.d. N(mu_k, std^2 I); порядок: класс за классом.

    Returns:
        (train, test)
    """
    rng = derive_rng(spec.seed, 'make_synthetic')
    n_train, n_test = spec.samples_per_class, spec.test_per_class

    train_x, test_x = [], []
    for k in range(spec.num_classes):
        noise = rng.standard_normal((n_train + n_test, spec.input_dim))
        points = spec.class_centers[k] + spec.per_class_std * noise
        train_x.append(points[:n_train])
        test_x.append(points[n_train:])

    train_y = np.repeat(np.arange(spec.num_classes), n_train)
    test_y = np.repeat(np.arange(spec.num_classes), n_test)

    logger.info(
        f"Synthetic dataset: K={spec.num_classes}, dim={spec.input_dim}, "
        f"train={len(train_y)}, test={len(test_y)}, seed={spec.seed}"
    )
    return (
        Dataset(np.concatenate(train_x), train_y, spec.num_classes),
        Dataset(np.concatenate(test_x), test_y, spec.num_classes),
    )
