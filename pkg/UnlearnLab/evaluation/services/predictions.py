"""
Файл: predictions.py
Описание: Куда уходят предсказания forget-сэмплов

Для каждого класса - процент forget-сэмплов, предсказанных этим классом.
Сравнение с распределением Retrain: |разность| по классам и среднее по
выбранному подмножеству классов (по умолчанию все K).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from datagen.services.synthetic import Dataset
from network.services.model import Model, predict

logger = logging.getLogger(__name__)


@dataclass
class PredictionDistribution:
    percentages: np.ndarray
    count: int
    diffs: Optional[np.ndarray] = None
    avg_diff: Optional[float] = None
    classes: Optional[Sequence[int]] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.percentages = np.asarray(self.percentages, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return self.percentages.size

    def compare(self, reference: 'PredictionDistribution', classes: Optional[Sequence[int]] = None
                ) -> 'PredictionDistribution':
        """Копия с |разностями| до reference и их средним по classes"""
        if reference.num_classes != self.num_classes:
            raise ValueError(f"distributions over {self.num_classes} and {reference.num_classes} classes")
        chosen = list(range(self.num_classes)) if classes is None else [int(k) for k in classes]
        if not chosen:
            raise ValueError("class subset for the average difference is empty")
        diffs = np.abs(self.percentages - reference.percentages)
        return PredictionDistribution(
            self.percentages, self.count, diffs, float(np.mean(diffs[chosen])), chosen,
        )

    def to_dict(self) -> dict:
        data = {'count': self.count, 'percentages': self.percentages.tolist()}
        if self.diffs is not None:
            data.update(diffs=self.diffs.tolist(), avg_diff=self.avg_diff, classes=list(self.classes))
        return data


def prediction_distribution(model: Model, dataset: Dataset, indices,
                            reference: Optional[PredictionDistribution] = None,
                            classes: Optional[Sequence[int]] = None) -> PredictionDistribution:
    """
    Распределение предсказаний модели на dataset[indices]

    Args:
        indices: forget-сэмплы (или их часть одного класса при случайном забывании)
        reference: распределение Retrain на тех же сэмплах
        classes: классы для среднего разрыва
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("prediction distribution of an empty forget set is undefined")
    counts = np.bincount(predict(model, dataset.inputs[indices]), minlength=dataset.num_classes)
    distribution = PredictionDistribution(100.0 * counts / indices.size, int(indices.size))
    if reference is not None:
        distribution = distribution.compare(reference, classes)
    return distribution
