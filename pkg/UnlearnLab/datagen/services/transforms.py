"""
Файл: transforms.py
Описание: Распределения аугментаций и аугментированное расстояние

Этот файл содержит:
- AugmentOp: одна операция (noise, mask, scale, identity) с параметрами
- TransformDistribution: упорядоченный набор операций, из которого сэмплируется t
- ConcreteTransform: конкретное t = (операции, seed), детерминированное
- preset(): identity / simple / strong
- apply_transform(), augmented_distance(), estimate_sigma()

Векторные аналоги картиночных аугментаций: гауссов шум вместо color jitter,
маска координат вместо кропа, масштаб вместо яркости.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from datagen.services.synthetic import Dataset
from datagen.utils.rng import derive_seed

logger = logging.getLogger(__name__)

OP_KINDS = ('identity', 'noise', 'mask', 'scale')


@dataclass(frozen=True)
class AugmentOp:
    """
    Операция аугментации

    noise: params = (std,); mask: params = (drop_prob,);
    scale: params = (low, high); identity: params = ()
    """
    kind: str
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ValueError(f"unknown augmentation op {self.kind!r}")
        expected = {'identity': 0, 'noise': 1, 'mask': 1, 'scale': 2}[self.kind]
        if len(self.params) != expected:
            raise ValueError(f"{self.kind} expects {expected} params, got {self.params}")
        if self.kind == 'noise' and self.params[0] < 0:
            raise ValueError(f"noise std must be >= 0, got {self.params[0]}")
        if self.kind == 'mask' and not 0.0 <= self.params[0] < 1.0:
            raise ValueError(f"mask probability must be in [0, 1), got {self.params[0]}")
        if self.kind == 'scale' and not 0.0 < self.params[0] <= self.params[1]:
            raise ValueError(f"scale range must satisfy 0 < low <= high, got {self.params}")

    @property
    def is_identity(self) -> bool:
        if self.kind == 'identity':
            return True
        if self.kind in ('noise', 'mask'):
            return self.params[0] == 0.0
        return self.params == (1.0, 1.0)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'params': list(self.params)}


@dataclass(frozen=True)
class TransformDistribution:
    """Распределение T над аугментациями"""
    ops: Tuple[AugmentOp, ...] = ()
    strength_tag: str = 'identity'

    @property
    def is_identity(self) -> bool:
        return all(op.is_identity for op in self.ops)

    def sample(self, seed: int) -> 'ConcreteTransform':
        """Конкретное t ~ T; одинаковый seed дает одинаковое t"""
        return ConcreteTransform(self.ops, int(seed))

    def to_dict(self) -> dict:
        return {'strength_tag': self.strength_tag, 'ops': [op.to_dict() for op in self.ops]}


@dataclass(frozen=True)
class ConcreteTransform:
    """Конкретная аугментация: операции плюс seed собственного RNG-потока"""
    ops: Tuple[AugmentOp, ...]
    seed: int

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return apply_transform(self, batch)


_PRESETS: Dict[str, TransformDistribution] = {
    'identity': TransformDistribution((), 'identity'),
    'simple': TransformDistribution(
        (AugmentOp('noise', (0.05,)), AugmentOp('mask', (0.1,))),
        'simple',
    ),
    'strong': TransformDistribution(
        (AugmentOp('noise', (0.2,)), AugmentOp('mask', (0.3,)), AugmentOp('scale', (0.8, 1.25))),
        'strong',
    ),
}


def preset(name: str) -> TransformDistribution:
    """Готовое распределение по имени: identity, simple, strong"""
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown transform preset {name!r}; choose from {sorted(_PRESETS)}") from None


def parse_transform(value: Union[str, dict, TransformDistribution]) -> TransformDistribution:
    """
    Распределение из конфигурации

    Принимает имя пресета или {"strength_tag": ..., "ops": [{"kind": ..., "params": [...]}]}.
    """
    if isinstance(value, TransformDistribution):
        return value
    if isinstance(value, str):
        return preset(value)
    if not isinstance(value, dict):
        raise ValueError(f"transform must be a preset name or an object, got {type(value).__name__}")
    unknown = set(value) - {'strength_tag', 'ops'}
    if unknown:
        raise ValueError(f"unknown transform keys: {sorted(unknown)}")
    ops = tuple(AugmentOp(op['kind'], tuple(float(p) for p in op.get('params', ()))) for op in value.get('ops', []))
    return TransformDistribution(ops, value.get('strength_tag', 'custom'))


def apply_transform(t: ConcreteTransform, batch: np.ndarray) -> np.ndarray:
    """
    Применяет t к батчу (n x d или один вектор d)

    Шум и маска тянутся поэлементно, масштаб - один на строку.
    Вырожденные операции пропускаются, поэтому тождественное t
    возвращает побитовую копию входа.
    """
    x = np.array(batch, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]

    rng = np.random.default_rng(t.seed)
    for op in t.ops:
        if op.is_identity:
            continue
        if op.kind == 'noise':
            x = x + op.params[0] * rng.standard_normal(x.shape)
        elif op.kind == 'mask':
            keep = rng.random(x.shape) >= op.params[0]
            x = np.where(keep, x, 0.0)
        elif op.kind == 'scale':
            x = x * rng.uniform(op.params[0], op.params[1], size=(x.shape[0], 1))
    return x[0] if single else x


def view_seed(seed: int, tag: str, *keys: int) -> int:
    """Seed конкретной аугментации для (seed, tag, ключи)"""
    return derive_seed(seed, tag, *keys)


def augmented_distance(
    i1: np.ndarray,
    i2: np.ndarray,
    distribution: TransformDistribution,
    samples: int = 64,
    seed: int = 0,
) -> float:
    """
    Монте-Карло оценка d_T(i1, i2)

    Минимум ||t(i1) - t'(i2)|| по samples парам (t, t'); пара m зависит
    только от (seed, m), поэтому пары при меньшем samples - префикс пар при большем.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    a = np.asarray(i1, dtype=np.float64)
    b = np.asarray(i2, dtype=np.float64)
    best = np.inf
    for m in range(samples):
        t = distribution.sample(view_seed(seed, 'augmented_distance', m, 0))
        t_prime = distribution.sample(view_seed(seed, 'augmented_distance', m, 1))
        best = min(best, float(np.linalg.norm(t(a) - t_prime(b))))
    return best


def augmented_distance_matrix(
    points: np.ndarray,
    distribution: TransformDistribution,
    samples: int = 64,
    seed: int = 0,
) -> np.ndarray:
    """
    Матрица d_T для набора точек

    На каждую пару (t_m, t'_m) аугментируется весь набор сразу, затем
    берется поэлементный минимум матриц попарных расстояний.
    """
    points = np.asarray(points, dtype=np.float64)
    best = np.full((points.shape[0], points.shape[0]), np.inf)
    for m in range(samples):
        left = distribution.sample(view_seed(seed, 'distance_matrix', m, 0))(points)
        right = distribution.sample(view_seed(seed, 'distance_matrix', m, 1))(points)
        diff = left[:, None, :] - right[None, :, :]
        best = np.minimum(best, np.sqrt(np.sum(diff * diff, axis=2)))
    return best


@dataclass
class SigmaEstimate:
    """Жадная оценка sigma (нижняя граница достижимого sigma)"""
    per_class: Tuple[float, ...]
    sigma_min: float
    delta: float
    samples: int
    seed: int
    medoids: Tuple[int, ...] = ()
    approximate: bool = True

    def to_dict(self) -> dict:
        return {
            'per_class': list(self.per_class),
            'sigma_min': self.sigma_min,
            'delta': self.delta,
            'samples': self.samples,
            'seed': self.seed,
            'medoids': list(self.medoids),
            'approximate': self.approximate,
        }


def estimate_sigma(
    dataset: Dataset,
    distribution: TransformDistribution,
    delta: float,
    samples: int = 64,
    seed: int = 0,
    classes: Optional[Sequence[int]] = None,
) -> SigmaEstimate:
    """
    Оценка sigma для (sigma, delta)-аугментации

    Для каждого класса берется медоид (минимум максимального d_T до
    одноклассников) и считается доля одноклассников в шаре радиуса delta/2
    вокруг него (сам медоид всегда покрыт). Диаметр такого шара <= delta,
    поэтому результат - нижняя граница.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    classes = range(dataset.num_classes) if classes is None else classes

    per_class, medoids = [], []
    for k in classes:
        members = np.flatnonzero(dataset.class_of == k)
        if members.size == 0:
            raise ValueError(f"class {k} is empty")
        distances = augmented_distance_matrix(dataset.inputs[members], distribution, samples, seed + int(k))
        medoid = int(np.argmin(distances.max(axis=1)))
        covered = distances[medoid] <= delta / 2.0
        covered[medoid] = True
        per_class.append(float(covered.sum()) / members.size)
        medoids.append(int(members[medoid]))

    estimate = SigmaEstimate(
        per_class=tuple(per_class),
        sigma_min=min(per_class),
        delta=delta,
        samples=samples,
        seed=seed,
        medoids=tuple(medoids),
    )
    logger.debug(f"Sigma estimate: min={estimate.sigma_min:.4f}, delta={delta}, M={samples}, seed={seed}")
    return estimate
