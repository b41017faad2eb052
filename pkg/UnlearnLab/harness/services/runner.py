"""
Файл: runner.py
Описание: Запуск сетки эксперимента и сводка результатов

Этот файл содержит:
- CellRecord: сохраненная ячейка (из БД или manifest.json)
- RunManifest: все ячейки конфигурации, строки results.csv, агрегаты
- ExperimentRunner: подбор (tuning), план ячеек, пул потоков, запись в БД, выходные файлы
- run_experiment(): короткий вызов для CLI и абляций

Пул потоков только считает. Записи ExperimentCell создает главный поток,
поэтому уже посчитанные ячейки (status='done' для того же хэша)
при повторном запуске пропускаются.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from django.conf import settings
from django.db import transaction

from evaluation.services.metrics import METRIC_FIELDS, MetricsRecord, avg_gap
from evaluation.services.mia import ATTACKER
from evaluation.utils.rounding import format_metric, report_round
from harness.models import ExperimentCell
from harness.services.cells import CellOutcome, CellSpec, LabContext, execute_cell
from harness.services.experiment_config import ExperimentConfig
from harness.services.tuning import tune_methods
from harness.utils.tables import write_csv

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    'dataset', 'method', 'cl_module', 'seed', 'forget_ratio', 'scenario',
    'RA', 'UA', 'TA', 'MIA', 'avg_gap', 'flops',
)
PREDICTION_COLUMNS = ('method', 'seed', 'scenario', 'class', 'percentage', 'retrain_percentage', 'diff')


def mean_std(values: Iterable[float]) -> Tuple[float, float]:
    """Среднее и стандартное отклонение по seed (ddof=0)"""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        return float('nan'), float('nan')
    return float(values.mean()), float(values.std())


@dataclass
class CellRecord:
    key: str
    kind: str
    label: str
    seed: int
    status: str
    result: dict = field(default_factory=dict)
    error: str = ''
    elapsed: float = 0.0

    @classmethod
    def from_model(cls, cell: ExperimentCell) -> 'CellRecord':
        return cls(cell.key, cell.kind, cell.method, cell.seed, cell.status, cell.result, cell.error, cell.elapsed)

    @property
    def is_done(self) -> bool:
        return self.status == 'done'

    @property
    def stages(self) -> List[dict]:
        return self.result.get('stages', [])

    def metrics(self, position: int) -> MetricsRecord:
        return MetricsRecord.from_dict(self.stages[position]['metrics'])


@dataclass
class RunManifest:
    """Сводка одной конфигурации: ячейки, их порядок и метаданные"""
    config_hash: str
    config: dict
    labels: List[str]
    seeds: List[int]
    dataset: str
    cells: List[CellRecord]
    output_dir: str = ''
    attacker: str = ATTACKER
    created_at: str = ''

    @property
    def failed(self) -> List[CellRecord]:
        return [cell for cell in self.cells if not cell.is_done]

    def cell(self, label: str, seed: int) -> Optional[CellRecord]:
        for cell in self.cells:
            if cell.label == label and cell.seed == seed and cell.is_done:
                return cell
        return None

    def done_cells(self, label: str) -> List[CellRecord]:
        return [cell for seed in self.seeds if (cell := self.cell(label, seed)) is not None]

    def num_stages(self) -> int:
        return max((len(cell.stages) for cell in self.cells if cell.is_done), default=0)

    def reference(self, seed: int, position: int) -> Optional[MetricsRecord]:
        """Метрики Retrain того же seed и той же стадии"""
        cell = self.cell('retrain', seed)
        if cell is None or position >= len(cell.stages):
            return None
        return cell.metrics(position)

    def gap(self, cell: CellRecord, position: int) -> Optional[float]:
        reference = self.reference(cell.seed, position)
        return avg_gap(cell.metrics(position), reference) if reference is not None else None

    def result_rows(self) -> List[dict]:
        rows = []
        for label in self.labels:
            for position in range(self.num_stages()):
                for cell in self.done_cells(label):
                    if position >= len(cell.stages):
                        continue
                    stage = cell.stages[position]
                    metrics = cell.metrics(position)
                    gap = self.gap(cell, position)
                    method = cell.result.get('method_config', {})
                    module = method.get('cl_module')
                    rows.append({
                        'dataset': self.dataset,
                        'method': method.get('method', cell.kind),
                        'cl_module': f"lam={module['lam']},tau={module['tau']}" if module else '',
                        'seed': cell.seed,
                        'forget_ratio': f"{stage['forget_ratio']:.4f}",
                        'scenario': stage['scenario'],
                        'RA': format_metric(metrics.ra),
                        'UA': format_metric(metrics.ua),
                        'TA': format_metric(metrics.ta),
                        'MIA': format_metric(metrics.mia),
                        'avg_gap': format_metric(gap) if gap is not None else '',
                        'flops': metrics.flops,
                    })
        return rows

    def prediction_rows(self) -> List[dict]:
        rows = []
        for label in self.labels:
            for cell in self.done_cells(label):
                reference = self.cell('retrain', cell.seed)
                for position, stage in enumerate(cell.stages):
                    percentages = stage['predictions']['percentages']
                    retrain = None
                    if reference is not None and position < len(reference.stages):
                        retrain = reference.stages[position]['predictions']['percentages']
                    for k, value in enumerate(percentages):
                        rows.append({
                            'method': label,
                            'seed': cell.seed,
                            'scenario': stage['scenario'],
                            'class': k,
                            'percentage': format_metric(value),
                            'retrain_percentage': format_metric(retrain[k]) if retrain else '',
                            'diff': format_metric(abs(value - retrain[k])) if retrain else '',
                        })
        return rows

    def aggregate(self, label: str, position: int) -> Optional[dict]:
        """
        Среднее и std метрик по seed для одной стадии метода

        Разрыв avg_gap считается для каждого seed к Retrain того же seed,
        затем усредняется.
        """
        cells = [cell for cell in self.done_cells(label) if position < len(cell.stages)]
        if not cells:
            return None
        records = [cell.metrics(position) for cell in cells]
        summary = {'method': label, 'stage': position, 'scenario': cells[0].stages[position]['scenario'],
                   'seeds': len(cells)}
        for name in METRIC_FIELDS:
            summary[name], summary[f"{name}_std"] = mean_std(getattr(r, name) for r in records)
        gaps = [gap for cell in cells if (gap := self.gap(cell, position)) is not None]
        summary['avg_gap'], summary['avg_gap_std'] = mean_std(gaps) if gaps else (None, None)
        summary['flops'] = float(np.mean([r.flops for r in records]))
        return summary

    def summary(self) -> List[dict]:
        rows = []
        for label in self.labels:
            for position in range(self.num_stages()):
                item = self.aggregate(label, position)
                if item is not None:
                    rows.append(item)
        return rows

    def to_dict(self) -> dict:
        data = asdict(self)
        data['aggregates'] = [
            {k: report_round(v) if isinstance(v, float) and np.isfinite(v) else v for k, v in row.items()}
            for row in self.summary()
        ]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'RunManifest':
        data = dict(data)
        data.pop('aggregates', None)
        data['cells'] = [CellRecord(**cell) for cell in data['cells']]
        return cls(**data)

    @classmethod
    def load(cls, path) -> 'RunManifest':
        path = Path(path)
        if path.is_dir():
            path = path / 'manifest.json'
        return cls.from_dict(json.loads(path.read_text(encoding='utf-8')))

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_csv(directory / 'results.csv', RESULT_COLUMNS, self.result_rows())
        write_csv(directory / 'preds.csv', PREDICTION_COLUMNS, self.prediction_rows())
        path = directory / 'manifest.json'
        path.write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False), encoding='utf-8')
        logger.info(f"Manifest written: {path}")
        return path


class ExperimentRunner:
    """
    Выполнение сетки (Original, Retrain, методы) x seeds

    Args:
        config: разобранная конфигурация
        jobs: число потоков (по умолчанию settings.DEFAULT_JOBS)
    """

    def __init__(self, config: ExperimentConfig, jobs: Optional[int] = None):
        self.config = config
        self.jobs = max(1, int(jobs or settings.DEFAULT_JOBS))

    def plan(self, kinds: Optional[Iterable[str]] = None, labels: Optional[Iterable[str]] = None,
             seeds: Optional[Iterable[int]] = None) -> List[CellSpec]:
        """Ячейки в порядке запуска: сначала θ_o всех seed, затем Retrain и методы"""
        specs = [CellSpec('original', seed) for seed in self.config.seeds]
        specs += [CellSpec('retrain', seed) for seed in self.config.seeds]
        specs += [CellSpec('unlearn', seed, method) for method in self.config.methods for seed in self.config.seeds]
        if kinds is not None:
            kinds = set(kinds)
            specs = [spec for spec in specs if spec.kind in kinds]
        if labels is not None:
            labels = set(labels)
            specs = [spec for spec in specs if spec.label in labels]
        if seeds is not None:
            seeds = set(seeds)
            specs = [spec for spec in specs if spec.seed in seeds]
        return specs

    def pending(self, specs: List[CellSpec]) -> List[CellSpec]:
        done = set(
            ExperimentCell.objects.filter(
                config_hash=self.config.hash, status='done', key__in=[spec.key for spec in specs],
            ).values_list('key', flat=True)
        )
        return [spec for spec in specs if spec.key not in done]

    def run(self, kinds: Optional[Iterable[str]] = None, labels: Optional[Iterable[str]] = None,
            seeds: Optional[Iterable[int]] = None) -> RunManifest:
        context = None
        if self.config.tuning.enabled and (kinds is None or 'unlearn' in set(kinds)):
            context = LabContext(self.config)
            self.config = self.config.with_methods(tune_methods(context, self.jobs))

        specs = self.plan(kinds, labels, seeds)
        pending = self.pending(specs)
        logger.info(
            f"Experiment {self.config.hash[:12]}: {len(specs)} cells, "
            f"{len(specs) - len(pending)} cached, {len(pending)} to run on {self.jobs} threads"
        )
        if pending:
            context = context or LabContext(self.config)
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                futures = [executor.submit(execute_cell, context, spec) for spec in pending]
                for future in as_completed(futures):
                    self._store(future.result())

        manifest = self.collect()
        manifest.write(self.config.experiment_dir)
        if manifest.failed:
            logger.warning(f"{len(manifest.failed)} cells failed: {[cell.key for cell in manifest.failed]}")
        return manifest

    def _store(self, outcome: CellOutcome):
        spec = outcome.spec
        with transaction.atomic():
            ExperimentCell.objects.update_or_create(
                config_hash=self.config.hash,
                key=spec.key,
                defaults={
                    'kind': spec.kind,
                    'method': spec.label,
                    'seed': spec.seed,
                    'status': outcome.status,
                    'result': outcome.result,
                    'error': outcome.error,
                    'elapsed': outcome.elapsed,
                },
            )

    def collect(self) -> RunManifest:
        """RunManifest по всем сохраненным ячейкам плана"""
        by_key: Dict[str, ExperimentCell] = {
            cell.key: cell for cell in ExperimentCell.objects.filter(config_hash=self.config.hash)
        }
        cells = [CellRecord.from_model(by_key[spec.key]) for spec in self.plan() if spec.key in by_key]
        dataset = self.config.dataset
        return RunManifest(
            config_hash=self.config.hash,
            config=self.config.raw,
            labels=['original', 'retrain', *self.config.method_labels()],
            seeds=list(self.config.seeds),
            dataset=f"synthetic-{dataset.num_classes}c-{dataset.input_dim}d",
            cells=cells,
            output_dir=str(self.config.experiment_dir),
            created_at=datetime.now(timezone.utc).isoformat(timespec='seconds'),
        )


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None, kinds=None, labels=None,
                   seeds=None) -> RunManifest:
    return ExperimentRunner(config, jobs).run(kinds, labels, seeds)
