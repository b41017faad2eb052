"""
Файл: metrics.py
Описание: Метрики разучивания

Этот файл содержит:
- MetricsRecord: RA, UA, TA, MIA (в %), средний разрыв и FLOPs
- accuracy(), core_metrics(): точности на retain / forget / test
- avg_gap(): среднее |разностей| четырех метрик до эталона Retrain
- flops_of_run(), evaluate_run()
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from datagen.services.splits import Split
from datagen.services.synthetic import Dataset
from evaluation.services.mia import mia_efficacy
from network.services.model import Model, predict
from network.utils.flops import training_flops

logger = logging.getLogger(__name__)

METRIC_FIELDS = ('ra', 'ua', 'ta', 'mia')


@dataclass
class MetricsRecord:
    """Одна строка таблицы результатов (проценты)"""
    ra: float
    ua: float
    ta: float
    mia: float
    avg_gap: Optional[float] = None
    flops: int = 0

    def __post_init__(self):
        for name in METRIC_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} must be a percentage in [0, 100], got {value}")
        if self.avg_gap is not None and self.avg_gap < 0:
            raise ValueError(f"avg_gap must be >= 0, got {self.avg_gap}")

    def values(self) -> Tuple[float, float, float, float]:
        return self.ra, self.ua, self.ta, self.mia

    def deltas(self, reference: 'MetricsRecord') -> Tuple[float, ...]:
        """|метрика - метрика Retrain| для каждой из четырех"""
        return tuple(abs(a - b) for a, b in zip(self.values(), reference.values()))

    def with_gap(self, reference: 'MetricsRecord') -> 'MetricsRecord':
        return MetricsRecord(self.ra, self.ua, self.ta, self.mia, avg_gap(self, reference), self.flops)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'MetricsRecord':
        return cls(**data)


def accuracy(model: Model, dataset: Dataset, indices=None) -> float:
    """100 * доля верных argmax-предсказаний"""
    if indices is None:
        indices = np.arange(len(dataset))
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("accuracy of an empty subset is undefined")
    correct = np.count_nonzero(predict(model, dataset.inputs[indices]) == dataset.class_of[indices])
    return 100.0 * correct / indices.size


def core_metrics(model: Model, train: Dataset, split: Split, test: Dataset) -> Tuple[float, float, float]:
    """
    (RA, UA, TA)

    RA = acc(retain), UA = 100 - acc(forget), TA = acc(test)
    """
    test_idx = split.test_idx if split.test_idx.size else None
    ra = accuracy(model, train, split.retain_idx)
    ua = 100.0 - accuracy(model, train, split.forget_idx)
    ta = accuracy(model, test, test_idx)
    return ra, ua, ta


def avg_gap(record: MetricsRecord, reference: MetricsRecord) -> float:
    return sum(record.deltas(reference)) / len(METRIC_FIELDS)


def flops_of_run(run) -> int:
    """Аналитические FLOPs запуска по его счетчикам проходов"""
    model = run.final_model
    return training_flops(model.config, run.counters, model.num_parameters())


def evaluate_model(model: Model, train: Dataset, split: Split, test: Dataset, flops: int = 0,
                   reference: Optional[MetricsRecord] = None) -> MetricsRecord:
    ra, ua, ta = core_metrics(model, train, split, test)
    record = MetricsRecord(ra, ua, ta, mia_efficacy(model, train, split, test), flops=int(flops))
    if reference is not None:
        record = record.with_gap(reference)
    logger.debug(f"Metrics: RA={ra:.2f}, UA={ua:.2f}, TA={ta:.2f}, MIA={record.mia:.2f}")
    return record


def evaluate_run(run, train: Dataset, test: Dataset, reference: Optional[MetricsRecord] = None) -> MetricsRecord:
    """Метрики итоговой модели запуска на его split, FLOPs из счетчиков"""
    return evaluate_model(run.final_model, train, run.split, test, flops_of_run(run), reference)
