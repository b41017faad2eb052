"""
Файл: mia.py
Описание: Атака на членство по уверенности модели

Признак атакующего - максимальная softmax-вероятность сэмпла.
Порог подбирается на retain (члены) против test (не члены) по максимуму
сбалансированной точности; при равенстве берется меньший порог.
Сэмпл считается членом, если его уверенность >= порога.

MIA efficacy = доля forget-сэмплов, которые атакующий считает НЕ членами (в %).
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import roc_curve

from datagen.services.splits import Split
from datagen.services.synthetic import Dataset
from network.services.model import Model, head_scores

logger = logging.getLogger(__name__)

ATTACKER = 'max-softmax-threshold'


def confidences(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Максимальная softmax-вероятность для каждой строки"""
    scores = head_scores(model, inputs)
    scores = scores - scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs.max(axis=1)


@dataclass
class ThresholdAttack:
    """Подобранный порог и его сбалансированная точность на retain/test"""
    threshold: float
    balanced_accuracy: float
    degenerate: bool = False

    def is_member(self, conf: np.ndarray) -> np.ndarray:
        return np.asarray(conf) >= self.threshold


def fit_threshold(member_conf, nonmember_conf) -> ThresholdAttack:
    """
    Перебор всех различных значений уверенности как порогов

    Сбалансированная точность сравнивается в целых числах
    (tp * N_neg + tn * N_pos), поэтому ничьи разрешаются точно.
    """
    member_conf = np.asarray(member_conf, dtype=np.float64)
    nonmember_conf = np.asarray(nonmember_conf, dtype=np.float64)
    if member_conf.size == 0 or nonmember_conf.size == 0:
        raise ValueError("MIA needs nonempty member (retain) and non-member (test) sets")

    scores = np.concatenate([member_conf, nonmember_conf])
    if np.all(scores == scores[0]):
        logger.warning(f"MIA degenerate: all {scores.size} confidences equal {scores[0]:.6f}")
        return ThresholdAttack(float(scores[0]), 0.5, degenerate=True)

    truth = np.concatenate([np.ones(member_conf.size), np.zeros(nonmember_conf.size)])
    fpr, tpr, thresholds = roc_curve(truth, scores, drop_intermediate=False)
    positives, negatives = member_conf.size, nonmember_conf.size
    tp = np.rint(tpr * positives).astype(np.int64)
    tn = negatives - np.rint(fpr * negatives).astype(np.int64)
    score = tp * negatives + tn * positives

    # первый порог roc_curve искусственный (никто не член), он не из наблюдаемых значений
    thresholds, score = thresholds[1:], score[1:]
    best = score.max()
    candidates = thresholds[score == best]
    threshold = float(candidates.min())
    return ThresholdAttack(threshold, float(best) / (2.0 * positives * negatives))


def mia_from_confidences(retain_conf, test_conf, forget_conf) -> float:
    """MIA efficacy по готовым уверенностям"""
    forget_conf = np.asarray(forget_conf, dtype=np.float64)
    if forget_conf.size == 0:
        raise ValueError("MIA needs a nonempty forget set")
    attack = fit_threshold(retain_conf, test_conf)
    if attack.degenerate:
        return 50.0
    non_members = np.count_nonzero(~attack.is_member(forget_conf))
    logger.debug(
        f"MIA threshold={attack.threshold:.6f}, balanced acc={attack.balanced_accuracy:.4f}, "
        f"non-members={non_members}/{forget_conf.size}"
    )
    return 100.0 * non_members / forget_conf.size


def mia_efficacy(model: Model, train: Dataset, split: Split, test: Dataset) -> float:
    """MIA efficacy модели: retain - члены, test - не члены, оценка на forget"""
    test_idx = split.test_idx if split.test_idx.size else np.arange(len(test))
    return mia_from_confidences(
        confidences(model, train.inputs[split.retain_idx]),
        confidences(model, test.inputs[test_idx]),
        confidences(model, train.inputs[split.forget_idx]),
    )
