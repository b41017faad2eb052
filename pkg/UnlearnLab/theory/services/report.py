"""
Файл: report.py
Описание: Сводка теоретических оценок для обученной модели

Все значения - оценки (Монте-Карло с M видами и фиксированным seed);
выполнение условия означает "выполняется при этих оценках", а не
доказанную границу.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from datagen.services.splits import Split
from datagen.services.synthetic import Dataset
from datagen.services.transforms import TransformDistribution, estimate_sigma
from network.services.model import Model
from theory.services.bounds import err_bound, rho_max, separation_condition, separation_margin
from theory.services.estimators import (
    Encoder, center_distances, class_centers, estimate_R, estimate_lipschitz, feature_map,
    spectral_bound, view_gaps,
)

logger = logging.getLogger(__name__)


@dataclass
class TheoryEstimates:
    mu: np.ndarray
    sigma_hat: float
    delta: float
    eps: float
    L_r: float
    L_u: float
    R_r: float
    R_u: float
    rho_max: float
    err_bound: float
    condition_holds: np.ndarray
    margin: float
    min_class_prob: float
    spectral_bound: Optional[float] = None
    center_distances: Dict[int, float] = field(default_factory=dict)
    samples: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ('R_r', 'R_u'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.L_r < 0 or self.L_u < 0:
            raise ValueError("Lipschitz estimates must be >= 0")
        if not 0.0 < self.sigma_hat <= 1.0:
            raise ValueError(f"sigma_hat must be in (0, 1], got {self.sigma_hat}")

    @property
    def lemma_holds(self) -> bool:
        return self.R_r <= self.R_u

    def to_dict(self) -> dict:
        return {
            'mu': self.mu.tolist(),
            'sigma_hat': self.sigma_hat,
            'delta': self.delta,
            'eps': self.eps,
            'L_r': self.L_r,
            'L_u': self.L_u,
            'R_r': self.R_r,
            'R_u': self.R_u,
            'rho_max': self.rho_max,
            'err_bound': self.err_bound,
            'margin': self.margin,
            'condition_holds': self.condition_holds.tolist(),
            'min_class_prob': self.min_class_prob,
            'spectral_bound': self.spectral_bound,
            'center_distances': {str(k): v for k, v in self.center_distances.items()},
            'lemma_holds': self.lemma_holds,
            'estimator': {'samples': self.samples, 'seed': self.seed, 'kind': 'monte-carlo estimate'},
        }


def lemma1_check(encoder: Encoder, dataset: Dataset, split: Split, distribution: TransformDistribution,
                 eps: float, samples: int = 64, seed: int = 0) -> Tuple[float, float, bool]:
    """(R_r, R_u, R_r <= R_u) с общим seed для обоих подмножеств"""
    R_r = estimate_R(encoder, dataset.inputs[split.retain_idx], distribution, eps, samples, seed)
    R_u = estimate_R(encoder, dataset.inputs[split.forget_idx], distribution, eps, samples, seed)
    logger.debug(f"R_r={R_r:.4f}, R_u={R_u:.4f}, eps={eps:.6f}")
    return R_r, R_u, R_r <= R_u


def median_view_gap(encoder: Encoder, dataset: Dataset, split: Split, distribution: TransformDistribution,
                    samples: int = 64, seed: int = 0) -> float:
    """eps по умолчанию: медиана разрывов между видами на retain"""
    return float(np.median(view_gaps(encoder, dataset.inputs[split.retain_idx], distribution, samples, seed)))


def estimate_theory(model: Model, dataset: Dataset, split: Split, distribution: TransformDistribution,
                    delta: float = 1.0, eps: Optional[float] = None, samples: Optional[int] = None,
                    seed: int = 0) -> TheoryEstimates:
    """
    Все оценки для модели, обученной на retain

    R и min_k P[C_k] берутся по retain; L = max(L_r, L_u);
    sigma - жадная оценка по retain-подмножеству.
    """
    samples = samples or settings.LAB_SETTINGS['MC_SAMPLES']
    encoder = feature_map(model)
    if eps is None:
        eps = median_view_gap(encoder, dataset, split, distribution, samples, seed)
    if eps <= 0:
        eps = np.finfo(np.float64).tiny
        logger.warning("Median view gap is zero; using the smallest positive eps")

    retain = dataset.subset(split.retain_idx)
    present = np.flatnonzero(retain.class_counts())
    sigma = estimate_sigma(retain, distribution, delta, samples, seed, classes=present)
    min_class_prob = float(retain.class_counts()[present].min()) / len(retain)

    mu = class_centers(encoder, dataset, split.retain_idx, distribution, samples, seed, present)
    L_r = estimate_lipschitz(encoder, dataset.inputs[split.retain_idx], distribution, samples, seed)
    L_u = estimate_lipschitz(encoder, dataset.inputs[split.forget_idx], distribution, samples, seed)
    R_r, R_u, _ = lemma1_check(encoder, dataset, split, distribution, eps, samples, seed)

    rho = rho_max(sigma.sigma_min, delta, eps, max(L_r, L_u), R_r, min_class_prob)
    estimates = TheoryEstimates(
        mu=mu,
        sigma_hat=sigma.sigma_min,
        delta=delta,
        eps=eps,
        L_r=L_r,
        L_u=L_u,
        R_r=R_r,
        R_u=R_u,
        rho_max=rho,
        err_bound=err_bound(sigma.sigma_min, R_r),
        condition_holds=separation_condition(mu, rho),
        margin=separation_margin(mu, rho),
        min_class_prob=min_class_prob,
        spectral_bound=spectral_bound(model),
        center_distances=center_distances(encoder, dataset, split, distribution, samples, seed),
        samples=samples,
        seed=seed,
    )
    logger.info(
        f"Theory: sigma={estimates.sigma_hat:.3f}, R_r={R_r:.3f}, R_u={R_u:.3f}, "
        f"rho_max={rho:.4f}, err<={estimates.err_bound:.3f}"
    )
    return estimates
