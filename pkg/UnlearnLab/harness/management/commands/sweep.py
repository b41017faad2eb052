"""
Файл: sweep.py
Описание: Абляция по одной оси

Использование:
    python manage.py sweep --config configs/random10.json --axis lambda --values "[0, 0.5, 1, 2]"

Без --axis/--values берется секция sweep конфигурации.
"""

import json

from harness.management.commands._base import LabCommand
from harness.services.experiment_config import SWEEP_AXES, ConfigError
from harness.services.sweep import run_sweep


class Command(LabCommand):
    help = 'Sweep one axis (lambda, tau, transform, batch, projection) and write sweep_<axis>.csv'

    def add_lab_arguments(self, parser):
        parser.add_argument('--axis', choices=SWEEP_AXES, default=None)
        parser.add_argument('--values', default=None, help='JSON list of axis values')

    def handle_lab(self, config, options):
        values = None
        if options['values'] is not None:
            try:
                values = json.loads(options['values'])
            except json.JSONDecodeError as e:
                raise ConfigError(f"--values is not valid JSON: {e.msg}") from e
            if not isinstance(values, list):
                raise ConfigError("--values must be a JSON list")
        rows = run_sweep(config, options['axis'], values, options['jobs'])
        for row in rows:
            self.stdout.write(f"  {row['axis']}={row['value']} {row['method']}: {row['mean_gap']} +- {row['std']}")
        self.stdout.write(self.style.SUCCESS(f"✓ {len(rows)} sweep rows"))
