"""
Файл: theory.py
Описание: Теоретические оценки для чекпоинта

Использование:
    python manage.py theory --config configs/random10.json --checkpoint out/<hash>/ckpt/coun_seed0.mulab
"""

import json
from pathlib import Path

from django.core.management.base import CommandError

from datagen.services.synthetic import make_synthetic
from harness.management.commands._base import LabCommand
from harness.services.cells import scenario_splits
from network.utils.checkpoint import load_checkpoint
from theory.services.report import estimate_theory


class Command(LabCommand):
    help = 'Estimate sigma, R, L, rho_max and the error bound for a checkpoint'

    def add_lab_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='Path to a .mulab checkpoint')
        parser.add_argument('--stage', type=int, default=None, help='Sequential stage (1-based, default: last)')
        parser.add_argument('--output', default=None, help='Write JSON here instead of stdout')

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
        try:
            model = load_checkpoint(path, config.model_config())
        except (ValueError, KeyError) as e:
            raise CommandError(f"Cannot load {path}: {e}", returncode=1) from e

        section = config.theory
        estimates = estimate_theory(
            model, train, splits[stage - 1], config.unlearn_config(seed).transform_cl,
            delta=section.delta, eps=section.eps, samples=section.samples, seed=seed,
        )
        text = json.dumps({'checkpoint': str(path), 'seed': seed, **estimates.to_dict()}, indent=2)
        if options['output']:
            Path(options['output']).write_text(text, encoding='utf-8')
            self.stdout.write(self.style.SUCCESS(f"✓ Theory written: {options['output']}"))
        else:
            self.stdout.write(text)
