"""
Файл: tables.py
Описание: Запись CSV-таблиц (фиксированный порядок колонок, перевод строки \\n)
"""

import csv
import logging
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, '') for key in fieldnames})
    logger.debug(f"CSV written: {path}")
    return path


def read_csv(path) -> list:
    with Path(path).open(encoding='utf-8', newline='') as handle:
        return list(csv.DictReader(handle))
