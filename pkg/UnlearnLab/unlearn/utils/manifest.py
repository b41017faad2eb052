"""
Файл: manifest.py
Описание: JSON-манифест запуска (метод, конфигурации, seed, FLOPs, журнал эпох, чекпоинты)
"""

import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)


def run_manifest(run) -> dict:
    """Словарь для JSON по UnlearnRun"""
    return {
        'method': run.method,
        'label': (run.method_config or {}).get('label', run.method),
        'seed': run.seed,
        'flops': int(run.flops),
        'epochs': run.epochs,
        'counters': run.counters.to_dict(),
        'train_config': run.train_config.to_dict() if run.train_config else None,
        'method_config': run.method_config,
        'model_config': run.final_model.config.to_dict(),
        'split': run.split.to_dict() if run.split is not None else None,
        'per_epoch_log': run.per_epoch_log,
        'data_access': run.access_log.summary(),
        'checkpoints': dict(run.checkpoint_paths),
        'elapsed_seconds': round(run.elapsed, 3),
        'extra': run.extra,
    }


def write_manifest(run, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(run_manifest(run), indent=2, ensure_ascii=False), encoding='utf-8')
    logger.info(f"Manifest written: {path}")
    return path
