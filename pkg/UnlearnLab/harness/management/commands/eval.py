"""
Файл: eval.py
Описание: RA / UA / TA / MIA для чекпоинта на разбиении конфигурации

Использование:
    python manage.py eval --config configs/random10.json --checkpoint out/<hash>/ckpt/coun_seed0.mulab --seed 0
"""

import json
from pathlib import Path

from django.core.management.base import CommandError

from datagen.services.synthetic import make_synthetic
from evaluation.services.metrics import evaluate_model
from evaluation.services.mia import ATTACKER
from harness.management.commands._base import LabCommand
from harness.services.cells import scenario_splits
from network.utils.checkpoint import load_checkpoint


class Command(LabCommand):
    help = 'Evaluate a checkpoint on the retain/forget/test split of the config'

    def add_lab_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='Path to a .mulab checkpoint')
        parser.add_argument('--stage', type=int, default=None, help='Sequential stage (1-based, default: last)')

    def handle_lab(self, config, options):
        path = Path(options['checkpoint'])
        if not path.exists():
            raise CommandError(f"Checkpoint not found: {path}", returncode=1)
        seed = (options['seeds'] or config.seeds)[0]
        train, test = make_synthetic(config.dataset)
        splits = scenario_splits(config, train, seed, test)
        stage = options['stage'] or len(splits)
        if not 1 <= stage <= len(splits):
            raise CommandError(f"--stage must be in [1, {len(splits)}]", returncode=2)
        split = splits[stage - 1]
        try:
            model = load_checkpoint(path, config.model_config())
        except (ValueError, KeyError) as e:
            raise CommandError(f"Cannot load {path}: {e}", returncode=1) from e

        metrics = evaluate_model(model, train, split, test)
        payload = {'checkpoint': str(path), 'seed': seed, 'scenario': split.label(),
                   'attacker': ATTACKER, **metrics.to_dict()}
        self.stdout.write(json.dumps(payload, indent=2))
