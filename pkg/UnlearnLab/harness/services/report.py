"""
Файл: report.py
Описание: Итоговые таблицы по manifest.json

Этот файл содержит:
- table2.csv: среднее +- std по seed для RA/UA/TA/MIA, |разница| с Retrain,
  средний разрыв и FLOPs
- table1.csv: распределение предсказаний на forget и средняя разница с Retrain
- theory.json: теоретические оценки ячеек и доля R_r <= R_u
- representations.csv: признаки retain/forget для первого seed и последней стадии

Без Retrain отчет не строится: все разрывы считаются к нему.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from datagen.services.synthetic import make_synthetic
from evaluation.services.metrics import METRIC_FIELDS
from evaluation.utils.rounding import format_metric
from harness.services.cells import scenario_splits
from harness.services.experiment_config import ExperimentConfig, parse_config
from harness.services.runner import RunManifest
from harness.utils.tables import write_csv
from network.services.model import embed
from network.utils.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)

TABLE2_COLUMNS = ('method', 'scenario', 'seeds') + tuple(
    f"{name.upper()}{suffix}" for name in METRIC_FIELDS for suffix in ('', '_std', '_delta')
) + ('avg_gap', 'avg_gap_std', 'flops')


class ReportError(ValueError):
    """Отчет невозможен (нет Retrain или нет ячеек)"""


def _check_reference(manifest: RunManifest):
    if not manifest.done_cells('retrain'):
        raise ReportError(f"experiment {manifest.config_hash[:12]} has no finished Retrain cells; run it first")


def table2_rows(manifest: RunManifest) -> List[dict]:
    _check_reference(manifest)
    rows = []
    for position in range(manifest.num_stages()):
        reference = manifest.aggregate('retrain', position)
        for label in manifest.labels:
            summary = manifest.aggregate(label, position)
            if summary is None:
                continue
            row = {'method': label, 'scenario': summary['scenario'], 'seeds': summary['seeds']}
            for name in METRIC_FIELDS:
                column = name.upper()
                row[column] = format_metric(summary[name])
                row[f"{column}_std"] = format_metric(summary[f"{name}_std"])
                if reference is not None:
                    row[f"{column}_delta"] = format_metric(abs(summary[name] - reference[name]))
            if summary['avg_gap'] is not None:
                row['avg_gap'] = format_metric(summary['avg_gap'])
                row['avg_gap_std'] = format_metric(summary['avg_gap_std'])
            row['flops'] = f"{summary['flops']:.6g}"
            rows.append(row)
    return rows


def mean_predictions(manifest: RunManifest, label: str, position: int) -> Optional[np.ndarray]:
    cells = [cell for cell in manifest.done_cells(label) if position < len(cell.stages)]
    if not cells:
        return None
    return np.mean([cell.stages[position]['predictions']['percentages'] for cell in cells], axis=0)


def table1_rows(manifest: RunManifest) -> List[dict]:
    _check_reference(manifest)
    rows = []
    for position in range(manifest.num_stages()):
        reference = mean_predictions(manifest, 'retrain', position)
        for label in manifest.labels:
            percentages = mean_predictions(manifest, label, position)
            if percentages is None:
                continue
            scenario = manifest.done_cells(label)[0].stages[position]['scenario']
            row = {'method': label, 'scenario': scenario}
            row.update({f"class_{k}": format_metric(value) for k, value in enumerate(percentages)})
            if reference is not None:
                row['avg_diff'] = format_metric(float(np.mean(np.abs(percentages - reference))))
            rows.append(row)
    return rows


def theory_summary(manifest: RunManifest) -> Dict:
    entries = []
    for cell in manifest.cells:
        if not cell.is_done:
            continue
        for stage in cell.stages:
            if stage.get('theory'):
                entries.append({'method': cell.label, 'seed': cell.seed, 'scenario': stage['scenario'], **stage['theory']})
    holds = sum(1 for entry in entries if entry['lemma_holds'])
    return {
        'config_hash': manifest.config_hash,
        'entries': entries,
        'lemma': {'holds': holds, 'total': len(entries)},
    }


def representation_rows(manifest: RunManifest, config: ExperimentConfig) -> List[dict]:
    """Признаки f(x) из чекпоинтов первого seed на последней стадии"""
    train, _ = make_synthetic(config.dataset)
    model_config = config.model_config()
    seed = manifest.seeds[0]
    position = manifest.num_stages() - 1
    rows = []
    for label in manifest.labels:
        cell = manifest.cell(label, seed)
        if cell is None or position >= len(cell.stages):
            continue
        path = cell.stages[position].get('checkpoint')
        if not path or not Path(path).exists():
            logger.warning(f"[{label}] no checkpoint for seed {seed}; skipped in representations")
            continue
        model = load_checkpoint(path, model_config)
        retain, forget = _stage_indices(config, train, seed, position)
        for subset, indices in (('retain', retain), ('forget', forget)):
            vectors = embed(model, train.inputs[indices])
            for index, vector in zip(indices, vectors):
                row = {'method': label, 'subset': subset, 'index': int(index), 'class': int(train.class_of[index])}
                row.update({f"z{j}": f"{v:.6f}" for j, v in enumerate(vector)})
                rows.append(row)
    return rows


def _stage_indices(config: ExperimentConfig, train, seed: int, position: int):
    split = scenario_splits(config, train, seed)[position]
    return split.retain_idx, split.forget_idx


def generate_report(manifest: RunManifest, config: Optional[ExperimentConfig] = None, output_dir=None) -> Dict[str, Path]:
    """
    Пишет таблицы в папку эксперимента (или output_dir)

    Raises:
        ReportError: нет завершенных ячеек Retrain
    """
    config = config or parse_config(manifest.config)
    directory = Path(output_dir or manifest.output_dir or config.experiment_dir)
    written = {
        'table2': write_csv(directory / 'table2.csv', TABLE2_COLUMNS, table2_rows(manifest)),
    }
    num_classes = config.dataset.num_classes
    table1_columns = ('method', 'scenario') + tuple(f"class_{k}" for k in range(num_classes)) + ('avg_diff',)
    written['table1'] = write_csv(directory / 'table1.csv', table1_columns, table1_rows(manifest))

    theory = theory_summary(manifest)
    if theory['entries']:
        path = directory / 'theory.json'
        path.write_text(json.dumps(theory, indent=2, ensure_ascii=False), encoding='utf-8')
        written['theory'] = path

    if config.representations and config.checkpoints:
        rows = representation_rows(manifest, config)
        if rows:
            dim = config.model_config().repr_dim
            columns = ('method', 'subset', 'index', 'class') + tuple(f"z{j}" for j in range(dim))
            written['representations'] = write_csv(directory / 'representations.csv', columns, rows)

    logger.info(f"Report for {manifest.config_hash[:12]}: {sorted(written)} in {directory}")
    return written
