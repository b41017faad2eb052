"""
Файл: sweep.py
Описание: Абляции по одной оси

Оси:
- lambda, tau: вес и температура CL у CoUn и у CL-модулей бейзлайнов
- transform: распределение аугментаций CL-ветки (unlearn.transform_cl)
- batch: размер батча разучивания
- projection: проекционная голова [hidden, out] или null

Каждое значение - отдельная конфигурация со своим хэшем, поэтому
абляция из одного значения равна обычному run с этим значением.
При включенном tuning ось lambda или tau сужает сетку подбора до одного значения.
"""

import copy
import logging
from typing import List, Optional, Sequence

from harness.services.experiment_config import SWEEP_AXES, ConfigError, ExperimentConfig, parse_config
from harness.services.runner import mean_std, run_experiment
from harness.utils.tables import write_csv

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ('axis', 'value', 'method', 'mean_gap', 'std', 'config_hash')

CL_PARAMETERS = {'lambda': 'lam', 'tau': 'tau'}


def _set_cl_parameter(entry, name: str, value):
    if isinstance(entry, str):
        if entry != 'coun':
            return entry
        entry = {'method': entry}
    entry = dict(entry)
    if entry['method'] == 'coun':
        entry[name] = value
    elif entry.get('cl_module') is not None:
        entry['cl_module'] = {**entry['cl_module'], name: value}
    return entry


def apply_axis(raw: dict, axis: str, value) -> dict:
    """Копия сырой конфигурации с одним измененным значением оси"""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"[sweep] axis must be one of {SWEEP_AXES}, got {axis!r}")
    raw = copy.deepcopy(raw)
    raw.pop('sweep', None)
    if axis in CL_PARAMETERS:
        raw['methods'] = [_set_cl_parameter(entry, CL_PARAMETERS[axis], value) for entry in raw.get('methods', [])]
        if raw.get('tuning'):
            raw['tuning'] = {**raw['tuning'], CL_PARAMETERS[axis]: [value]}
    elif axis == 'transform':
        raw.setdefault('unlearn', {})['transform_cl'] = value
    elif axis == 'batch':
        raw.setdefault('unlearn', {})['batch_size'] = value
    elif axis == 'projection':
        raw.setdefault('model', {})['projection'] = value
    return raw


def final_gaps(manifest, label: str) -> List[float]:
    """avg_gap каждого seed на последней стадии сценария"""
    position = manifest.num_stages() - 1
    gaps = []
    for cell in manifest.done_cells(label):
        if position < len(cell.stages):
            gap = manifest.gap(cell, position)
            if gap is not None:
                gaps.append(gap)
    return gaps


def run_sweep(config: ExperimentConfig, axis: Optional[str] = None, values: Optional[Sequence] = None,
              jobs: Optional[int] = None) -> List[dict]:
    """
    Прогон всех значений оси и запись sweep_<axis>.csv

    Ось и значения берутся из аргументов или из секции sweep конфигурации.
    """
    section = config.sweep or {}
    axis = axis or section.get('axis')
    values = list(values if values is not None else section.get('values') or [])
    if axis not in SWEEP_AXES:
        raise ConfigError(f"[sweep] axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("[sweep] no values to sweep")

    rows = []
    for value in values:
        derived = parse_config(apply_axis(config.raw, axis, value), output_dir=config.output_dir)
        logger.info(f"Sweep {axis}={value!r}: config {derived.hash[:12]}")
        manifest = run_experiment(derived, jobs)
        for label in derived.method_labels():
            gaps = final_gaps(manifest, label)
            mean, std = mean_std(gaps)
            rows.append({
                'axis': axis,
                'value': value,
                'method': label,
                'mean_gap': f"{mean:.4f}" if gaps else '',
                'std': f"{std:.4f}" if gaps else '',
                'config_hash': derived.hash,
            })

    path = config.experiment_dir / f"sweep_{axis}.csv"
    write_csv(path, SWEEP_COLUMNS, rows)
    logger.info(f"Sweep written: {path}")
    return rows
