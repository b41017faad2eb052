"""
Файл: tuning.py
Описание: Подбор гиперпараметров методов по avg_gap к Retrain

Этот файл содержит:
- candidates(): сетка кандидатов одного метода
- TuningResult: выбор по одной метке метода и средние разрывы кандидатов
- MethodTuner: оценка кандидатов в пуле потоков, tuning.json в каталоге эксперимента
- tune_methods(): короткий вызов для ExperimentRunner

lr перебирается у всех методов, кроме тех, где он задан явно (NegGrad
идет со своим рецептом). У CoUn и CL-модулей вместе с lr перебираются
lambda и tau. Кандидат получает средний avg_gap по seed подбора;
при равенстве побеждает первый в порядке сетки.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from evaluation.services.metrics import MetricsRecord, avg_gap, evaluate_model, flops_of_run
from harness.services.cells import LabContext, budgeted_method
from harness.services.experiment_config import ConfigError, TuningSection
from losses.services.contrastive import CLConfig
from unlearn.services.config import MethodConfig
from unlearn.services.methods import retrain_run, run_method

logger = logging.getLogger(__name__)

TUNING_FILE = 'tuning.json'


def with_contrastive(method: MethodConfig, lam: float, tau: float) -> MethodConfig:
    if method.method == 'coun':
        return method.replace(lam=lam, tau=tau)
    return method.replace(cl_module=CLConfig(tau=tau, lam=lam))


def choice_of(method: MethodConfig) -> dict:
    """Подбираемые значения кандидата: lr и, у CL-методов, lam и tau"""
    choice = {'lr': method.lr}
    cl = method.contrastive()
    if cl is not None:
        choice.update(lam=cl.lam, tau=cl.tau)
    return choice


def apply_choice(method: MethodConfig, choice: dict) -> MethodConfig:
    method = method.replace(lr=choice['lr'])
    if 'lam' in choice:
        method = with_contrastive(method, choice['lam'], choice['tau'])
    return method


def candidates(method: MethodConfig, section: TuningSection) -> List[MethodConfig]:
    """Кандидаты в порядке перебора: lr, затем lambda, затем tau"""
    rates = (method.lr,) if method.lr is not None else section.lr
    if method.contrastive() is None:
        return [method.replace(lr=lr) for lr in rates]
    return [
        with_contrastive(method.replace(lr=lr), lam, tau)
        for lr, lam, tau in product(rates, section.lam, section.tau)
    ]


@dataclass
class TuningResult:
    label: str
    choice: dict
    mean_gap: Optional[float] = None
    candidates: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'label': self.label, 'choice': self.choice, 'mean_gap': self.mean_gap, 'candidates': self.candidates}


def select(label: str, grid: List[MethodConfig], gaps: List[List[float]]) -> TuningResult:
    """Кандидат с наименьшим средним avg_gap; min() оставляет первый из равных"""
    means = [float(np.mean(values)) for values in gaps]
    best = min(range(len(grid)), key=lambda i: means[i])
    rows = [
        {**choice_of(method), 'mean_gap': means[i], 'std': float(np.std(gaps[i]))}
        for i, method in enumerate(grid)
    ]
    return TuningResult(label, choice_of(grid[best]), means[best], rows)


class MethodTuner:
    """
    Подбор гиперпараметров всех методов конфигурации

    Args:
        context: общие данные эксперимента (θ_o по seed)
        jobs: число потоков (по умолчанию settings.DEFAULT_JOBS)
    """

    def __init__(self, context: LabContext, jobs: Optional[int] = None):
        self.context = context
        self.config = context.config
        self.section = self.config.tuning
        self.seeds = self.section.seeds or self.config.seeds
        self.jobs = max(1, int(jobs or settings.DEFAULT_JOBS))
        self._references: Dict[int, MetricsRecord] = {}

    @property
    def path(self) -> Path:
        return self.config.experiment_dir / TUNING_FILE

    def reference(self, seed: int) -> MetricsRecord:
        """Метрики Retrain того же рецепта, что и в ячейке 'retrain'"""
        context = self.context
        split = context.splits(seed)[0]
        run = retrain_run(context.train, split, context.model_config, self.config.original_config(seed), seed)
        return evaluate_model(run.final_model, context.train, split, context.test, flops_of_run(run))

    def score(self, method: MethodConfig, seed: int) -> float:
        context = self.context
        split = context.splits(seed)[0]
        budgeted = budgeted_method(context, method, split, seed)
        run = run_method(budgeted, context.original(seed), context.train, split, self.config.unlearn_config(seed), seed)
        metrics = evaluate_model(run.final_model, context.train, split, context.test, flops_of_run(run))
        return avg_gap(metrics, self._references[seed])

    def load(self) -> Optional[Dict[str, dict]]:
        if not self.path.exists():
            return None
        try:
            data = json.loads(self.path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            logger.warning(f"[tuning] unreadable {self.path} ({e}); tuning again")
            return None
        if data.get('config_hash') != self.config.hash:
            logger.warning(f"[tuning] {self.path} belongs to another config; tuning again")
            return None
        return {item['label']: item['choice'] for item in data['methods']}

    def write(self, results: List[TuningResult]) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        data = {
            'config_hash': self.config.hash,
            'seeds': list(self.seeds),
            'methods': [result.to_dict() for result in results],
        }
        self.path.write_text(json.dumps(data, indent=2, ensure_ascii=False), encoding='utf-8')
        logger.info(f"[tuning] written: {self.path}")
        return self.path

    def search(self) -> List[TuningResult]:
        """Оценка всех кандидатов с более чем одним вариантом"""
        grids = {method.label: candidates(method, self.section) for method in self.config.methods}
        tasks = [
            (label, i, seed)
            for label, grid in grids.items() if len(grid) > 1
            for i in range(len(grid))
            for seed in self.seeds
        ]
        logger.info(f"[tuning] {len(tasks)} runs over {len(self.seeds)} seeds on {self.jobs} threads")

        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            self._references = dict(zip(self.seeds, executor.map(self.reference, self.seeds)))
            futures = {(label, i, seed): executor.submit(self.score, grids[label][i], seed) for label, i, seed in tasks}
            scores = {key: future.result() for key, future in futures.items()}

        results = []
        for label, grid in grids.items():
            if len(grid) == 1:
                results.append(TuningResult(label, choice_of(grid[0])))
                continue
            gaps = [[scores[(label, i, seed)] for seed in self.seeds] for i in range(len(grid))]
            result = select(label, grid, gaps)
            logger.info(f"[tuning] {label}: {result.choice} (mean avg_gap {result.mean_gap:.3f})")
            results.append(result)
        return results

    def tune(self) -> Tuple[MethodConfig, ...]:
        """Методы конфигурации с подобранными значениями; tuning.json читается, если он есть"""
        choices = self.load()
        if choices is None or set(choices) != set(self.config.method_labels()):
            results = self.search()
            self.write(results)
            choices = {result.label: result.choice for result in results}
        else:
            logger.info(f"[tuning] using cached {self.path}")
        return tuple(apply_choice(method, choices[method.label]) for method in self.config.methods)


def tune_methods(context: LabContext, jobs: Optional[int] = None) -> Tuple[MethodConfig, ...]:
    if context.config.scenario.kind == 'sequential':
        raise ConfigError("[tuning] is not supported for the sequential scenario")
    return MethodTuner(context, jobs).tune()
