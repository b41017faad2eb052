"""
Файл: splits.py
Описание: Разбиения обучающей выборки на retain и forget

Этот файл содержит:
- Split: непересекающиеся индексы retain/forget/test и сценарий
- split_random(): случайное забывание доли ratio
- split_classwise(): забывание целого класса
- sequential_schedule(): вложенные forget-множества, растущие по стадиям

Индексы retain/forget относятся к обучающему Dataset, test_idx - к тестовому.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from datagen.services.synthetic import Dataset
from datagen.utils.rng import derive_rng

logger = logging.getLogger(__name__)

SCENARIOS = ('random', 'classwise', 'sequential')


@dataclass
class Split:
    """Разбиение retain / forget / test"""
    retain_idx: np.ndarray
    forget_idx: np.ndarray
    test_idx: np.ndarray
    forget_ratio: float
    scenario: str = 'random'
    target_class: Optional[int] = None
    stage: Optional[int] = None

    def __post_init__(self):
        self.retain_idx = np.asarray(self.retain_idx, dtype=np.int64)
        self.forget_idx = np.asarray(self.forget_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if np.intersect1d(self.retain_idx, self.forget_idx).size:
            raise ValueError("retain and forget indices overlap")

    @property
    def train_size(self) -> int:
        return self.retain_idx.size + self.forget_idx.size

    def check_partition(self, n_train: int):
        """retain U forget должно совпасть с range(n_train)"""
        merged = np.sort(np.concatenate([self.retain_idx, self.forget_idx]))
        if merged.size != n_train or not np.array_equal(merged, np.arange(n_train)):
            raise ValueError("retain and forget do not partition the training set")

    def label(self) -> str:
        if self.scenario == 'classwise':
            return f"classwise[{self.target_class}]"
        if self.scenario == 'sequential':
            return f"sequential[{self.stage}]"
        return 'random'

    def to_dict(self) -> dict:
        return {
            'scenario': self.scenario,
            'forget_ratio': self.forget_ratio,
            'target_class': self.target_class,
            'stage': self.stage,
            'retain_size': int(self.retain_idx.size),
            'forget_size': int(self.forget_idx.size),
            'test_size': int(self.test_idx.size),
        }


def _test_indices(test: Optional[Dataset]) -> np.ndarray:
    return np.arange(len(test)) if test is not None else np.zeros(0, dtype=np.int64)


def _forget_count(ratio: float, n: int) -> int:
    # округление half-up; хотя бы один сэмпл в каждой части
    count = int(np.floor(ratio * n + 0.5))
    return min(max(count, 1), n - 1)


def split_random(dataset: Dataset, ratio: float, seed: int, test: Optional[Dataset] = None) -> Split:
    """
    Случайное забывание доли ratio обучающей выборки

    Args:
        dataset: обучающая выборка
        ratio: доля forget, 0 < ratio < 1
        seed: seed разбиения
        test: тестовая выборка (для test_idx)
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"forget ratio must be in (0, 1), got {ratio}")
    n = len(dataset)
    count = _forget_count(ratio, n)
    order = derive_rng(seed, 'split_random').permutation(n)
    split = Split(
        retain_idx=np.sort(order[count:]),
        forget_idx=np.sort(order[:count]),
        test_idx=_test_indices(test),
        forget_ratio=count / n,
        scenario='random',
    )
    logger.debug(f"Random split: forget={count}/{n}, seed={seed}")
    return split


def split_classwise(dataset: Dataset, target_class: int, test: Optional[Dataset] = None) -> Split:
    """Забывание всех обучающих сэмплов класса target_class"""
    if not 0 <= target_class < dataset.num_classes:
        raise ValueError(f"class {target_class} outside [0, {dataset.num_classes})")
    in_class = dataset.class_of == target_class
    forget = np.flatnonzero(in_class)
    if forget.size == 0:
        raise ValueError(f"class {target_class} has no training samples")
    return Split(
        retain_idx=np.flatnonzero(~in_class),
        forget_idx=forget,
        test_idx=_test_indices(test),
        forget_ratio=forget.size / len(dataset),
        scenario='classwise',
        target_class=target_class,
    )


def sequential_schedule(
    dataset: Dataset,
    step_ratio: float,
    stages: int,
    seed: int,
    test: Optional[Dataset] = None,
) -> List[Split]:
    """
    Вложенные разбиения для последовательного забывания

    Стадия s (с 1) забывает долю s * step_ratio. Все стадии берут префиксы одной
    перестановки, поэтому forget стадии s входит в forget стадии s + 1,
    а первая стадия совпадает с split_random(dataset, step_ratio, seed).
    """
    if stages < 1:
        raise ValueError(f"stages must be >= 1, got {stages}")
    if not 0.0 < step_ratio < 1.0:
        raise ValueError(f"step_ratio must be in (0, 1), got {step_ratio}")
    if step_ratio * stages >= 1.0 + 1e-12:
        raise ValueError(f"schedule over-full: {stages} x {step_ratio} > 1")

    n = len(dataset)
    order = derive_rng(seed, 'split_random').permutation(n)
    schedule = []
    previous = 0
    for stage in range(1, stages + 1):
        count = _forget_count(step_ratio * stage, n) if step_ratio * stage < 1.0 else n
        if count >= n:
            raise ValueError(f"stage {stage} would forget the whole training set")
        if count <= previous:
            raise ValueError(f"stage {stage} adds no new forget samples")
        previous = count
        schedule.append(Split(
            retain_idx=np.sort(order[count:]),
            forget_idx=np.sort(order[:count]),
            test_idx=_test_indices(test),
            forget_ratio=count / n,
            scenario='sequential',
            stage=stage,
        ))
    logger.info(f"Sequential schedule: {stages} stages x {step_ratio:.2f}, n={n}")
    return schedule


def is_nested(schedule: List[Split]) -> bool:
    """Каждое forget-множество содержит предыдущее"""
    for earlier, later in zip(schedule, schedule[1:]):
        if np.setdiff1d(earlier.forget_idx, later.forget_idx).size:
            return False
    return True
