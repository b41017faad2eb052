"""
Файл: cells.py
Описание: Ячейки эксперимента и их выполнение

Ячейка - это (вид, метод, seed): 'original', 'retrain' или 'unlearn'.
Результат ячейки - список записей по стадиям сценария (у random и
classwise одна стадия). Ячейки выполняются в потоках пула и не
обращаются к базе данных: запись делает ExperimentRunner в главном потоке.
"""

import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from datagen.services.splits import Split, sequential_schedule, split_classwise, split_random
from datagen.services.synthetic import Dataset, make_synthetic
from datagen.utils.rng import derive_seed
from evaluation.services.metrics import evaluate_model, flops_of_run
from evaluation.services.predictions import prediction_distribution
from harness.services.experiment_config import ExperimentConfig
from harness.utils.budget import matched_epochs
from network.services.model import Model
from network.utils.checkpoint import load_checkpoint, save_checkpoint
from network.utils.flops import PassCounters, training_flops
from theory.services.report import estimate_theory
from unlearn.services.config import MethodConfig, default_method_config
from unlearn.services.engine import UnlearnRun
from unlearn.services.methods import original_run, retrain_run, run_method, sequential_unlearn
from unlearn.utils.manifest import write_manifest

logger = logging.getLogger(__name__)

CELL_KINDS = ('original', 'retrain', 'unlearn')


@dataclass(frozen=True)
class CellSpec:
    kind: str
    seed: int
    method: Optional[MethodConfig] = None

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if (self.kind == 'unlearn') != (self.method is not None):
            raise ValueError("only 'unlearn' cells carry a method")

    @property
    def label(self) -> str:
        return self.method.label if self.method is not None else self.kind

    @property
    def key(self) -> str:
        return f"{self.kind}:{self.label}:{self.seed}"


@dataclass
class CellOutcome:
    """Что поток возвращает главному потоку"""
    spec: CellSpec
    status: str
    result: dict
    error: str = ''
    elapsed: float = 0.0


def stage_seed(seed: int, stage: int) -> int:
    return derive_seed(seed, 'sequential_stage', stage)


def scenario_splits(config: ExperimentConfig, train: Dataset, seed: int, test: Optional[Dataset] = None) -> List[Split]:
    """Разбиения сценария для seed: одно для random и classwise, по стадии для sequential"""
    scenario = config.scenario
    if scenario.kind == 'classwise':
        return [split_classwise(train, scenario.target_class, test)]
    if scenario.kind == 'sequential':
        return sequential_schedule(train, scenario.step_ratio, scenario.stages, seed, test)
    return [split_random(train, scenario.forget_ratio, seed, test)]


class LabContext:
    """
    Общие для всех ячеек данные одного эксперимента

    Синтетическая выборка строится один раз; θ_o для каждого seed
    обучается (или читается из чекпоинта) один раз под блокировкой seed.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.train, self.test = make_synthetic(config.dataset)
        self.model_config = config.model_config()
        self._originals: Dict[int, Model] = {}
        self._guard = threading.Lock()
        self._seed_locks: Dict[int, threading.Lock] = {}

    @property
    def checkpoint_dir(self) -> Path:
        return self.config.experiment_dir / 'ckpt'

    @property
    def runs_dir(self) -> Path:
        return self.config.experiment_dir / 'runs'

    def checkpoint_path(self, label: str, seed: int, stage: Optional[int] = None) -> Path:
        suffix = f"_stage{stage}" if stage is not None else ''
        return self.checkpoint_dir / f"{label}_seed{seed}{suffix}.mulab"

    def splits(self, seed: int) -> List[Split]:
        return scenario_splits(self.config, self.train, seed, self.test)

    def original_flops(self) -> int:
        epochs = self.config.original_config(0).epochs
        counters = PassCounters(supervised_rows=len(self.train) * epochs)
        return training_flops(self.model_config, counters)

    def original(self, seed: int) -> Model:
        with self._guard:
            lock = self._seed_locks.setdefault(seed, threading.Lock())
        with lock:
            if seed not in self._originals:
                self._originals[seed] = self._load_or_train_original(seed)
            return self._originals[seed]

    def _load_or_train_original(self, seed: int) -> Model:
        path = self.checkpoint_path('original', seed)
        model_config = self.model_config.with_seed(derive_seed(seed, 'original_init'))
        if path.exists():
            try:
                model = load_checkpoint(path, model_config)
                logger.info(f"[original] seed {seed}: loaded {path}")
                return model
            except ValueError as e:
                logger.warning(f"[original] seed {seed}: unreadable checkpoint {path} ({e}); retraining")
        run = original_run(self.train, self.model_config, self.config.original_config(seed), seed)
        if self.config.checkpoints:
            save_checkpoint(run.final_model, path)
        return run.final_model

    def prediction_indices(self, split: Split) -> np.ndarray:
        """forget-сэмплы для распределения предсказаний"""
        target = self.config.scenario.prediction_class
        if split.scenario == 'classwise' or target is None:
            return split.forget_idx
        chosen = split.forget_idx[self.train.class_of[split.forget_idx] == target]
        return chosen if chosen.size else split.forget_idx


def _stage_record(context: LabContext, spec: CellSpec, model: Model, split: Split, flops: int,
                  stage: Optional[int], run: Optional[UnlearnRun] = None) -> dict:
    config = context.config
    metrics = evaluate_model(model, context.train, split, context.test, flops)
    predictions = prediction_distribution(model, context.train, context.prediction_indices(split))
    record = {
        'stage': stage,
        'scenario': split.label(),
        'forget_ratio': split.forget_ratio,
        'metrics': metrics.to_dict(),
        'predictions': predictions.to_dict(),
        'epochs': run.epochs if run is not None else config.original_config(spec.seed).epochs,
        'data_access': run.access_log.summary() if run is not None else {},
        'theory': None,
        'checkpoint': None,
    }

    if config.theory.enabled and spec.label in config.theory.methods:
        distribution = config.unlearn_config(spec.seed).transform_cl
        estimates = estimate_theory(
            model, context.train, split, distribution,
            delta=config.theory.delta, eps=config.theory.eps, samples=config.theory.samples, seed=spec.seed,
        )
        record['theory'] = estimates.to_dict()

    if config.checkpoints and spec.kind != 'original':
        path = context.checkpoint_path(spec.label, spec.seed, stage)
        save_checkpoint(model, path)
        record['checkpoint'] = str(path)
        if run is not None:
            run.checkpoint_paths['final'] = str(path)
    if run is not None:
        suffix = f"_stage{stage}" if stage is not None else ''
        write_manifest(run, context.runs_dir / f"{spec.label}_seed{spec.seed}{suffix}.json")
    return record


def budgeted_method(context: LabContext, method: MethodConfig, split: Split, seed: int) -> MethodConfig:
    """Бейзлайн с числом эпох, не превышающим FLOPs CoUn"""
    if not context.config.match_flops or method.method == 'coun':
        return method
    train_cfg = context.config.unlearn_config(seed)
    reference = default_method_config('coun')
    epochs = matched_epochs(
        context.model_config, method, reference, split, train_cfg.batch_size, train_cfg.epochs,
    )
    return method.replace(epochs=epochs)


def _original_records(context: LabContext, spec: CellSpec) -> List[dict]:
    model = context.original(spec.seed)
    flops = context.original_flops()
    records = []
    for split in context.splits(spec.seed):
        record = _stage_record(context, spec, model, split, flops, split.stage)
        record['checkpoint'] = str(context.checkpoint_path('original', spec.seed)) if context.config.checkpoints else None
        records.append(record)
    return records


def _retrain_records(context: LabContext, spec: CellSpec) -> List[dict]:
    records = []
    for split in context.splits(spec.seed):
        seed = spec.seed if split.stage is None else stage_seed(spec.seed, split.stage - 1)
        run = retrain_run(context.train, split, context.model_config, context.config.original_config(seed), seed)
        records.append(_stage_record(context, spec, run.final_model, split, flops_of_run(run), split.stage, run))
    return records


def _unlearn_records(context: LabContext, spec: CellSpec) -> List[dict]:
    config = context.config
    original = context.original(spec.seed)
    splits = context.splits(spec.seed)
    train_cfg = config.unlearn_config(spec.seed)

    if config.scenario.kind == 'sequential':
        runs = sequential_unlearn(
            original, context.train, splits, spec.method, train_cfg, spec.seed,
            epochs_per_stage=config.scenario.epochs_per_stage,
        )
    else:
        method = budgeted_method(context, spec.method, splits[0], spec.seed)
        runs = [run_method(method, original, context.train, splits[0], train_cfg, spec.seed)]

    return [
        _stage_record(context, spec, run.final_model, split, flops_of_run(run), split.stage, run)
        for run, split in zip(runs, splits)
    ]


EXECUTORS = {
    'original': _original_records,
    'retrain': _retrain_records,
    'unlearn': _unlearn_records,
}


def execute_cell(context: LabContext, spec: CellSpec) -> CellOutcome:
    """
    Выполняет одну ячейку; исключения не пробрасываются,
    а превращаются в статус 'failed' с текстом ошибки
    """
    started = time.perf_counter()
    logger.info(f"Cell {spec.key} started")
    try:
        records = EXECUTORS[spec.kind](context, spec)
    except Exception as e:
        elapsed = time.perf_counter() - started
        logger.error(f"Cell {spec.key} failed after {elapsed:.2f}s: {e}", exc_info=True)
        return CellOutcome(spec, 'failed', {}, f"{type(e).__name__}: {e}", elapsed)

    elapsed = time.perf_counter() - started
    result = {
        'kind': spec.kind,
        'label': spec.label,
        'seed': spec.seed,
        'method_config': spec.method.to_dict() if spec.method is not None else {'method': spec.kind},
        'stages': records,
    }
    logger.info(f"Cell {spec.key} done in {elapsed:.2f}s")
    return CellOutcome(spec, 'done', result, '', elapsed)
