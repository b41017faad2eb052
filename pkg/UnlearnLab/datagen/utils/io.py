"""
Файл: io.py
Описание: Экспорт и импорт датасета

CSV: колонки x_0..x_{d-1}, class; значения в repr-формате (без потерь для f64).
Рядом кладется JSON-паспорт <имя>.json с SyntheticSpec и числом классов.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from datagen.services.synthetic import Dataset, SyntheticSpec

logger = logging.getLogger(__name__)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix('.json')


def save_dataset_csv(dataset: Dataset, path, spec: Optional[SyntheticSpec] = None) -> Path:
    """Сохраняет выборку в CSV и паспорт в JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"x_{j}" for j in range(dataset.input_dim)] + ['class']
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row, label in zip(dataset.inputs, dataset.class_of):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])

    sidecar = {
        'num_classes': dataset.num_classes,
        'size': len(dataset),
        'spec': spec.to_dict() if spec is not None else None,
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True), encoding='utf-8')
    logger.info(f"Dataset saved: {path} ({len(dataset)} rows)")
    return path


def load_dataset_csv(path) -> Tuple[Dataset, Optional[SyntheticSpec]]:
    """Загружает выборку и (если есть) SyntheticSpec из паспорта"""
    path = Path(path)
    meta_file = sidecar_path(path)
    meta = json.loads(meta_file.read_text(encoding='utf-8')) if meta_file.exists() else {}

    with path.open(newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if not header or header[-1] != 'class':
            raise ValueError(f"{path}: last column must be 'class'")
        rows = [row for row in reader if row]

    inputs = np.array([[float(v) for v in row[:-1]] for row in rows], dtype=np.float64)
    inputs = inputs.reshape(len(rows), len(header) - 1)
    classes = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    num_classes = meta.get('num_classes') or int(classes.max()) + 1
    spec = SyntheticSpec.from_dict(meta['spec']) if meta.get('spec') else None
    return Dataset(inputs, classes, num_classes), spec
