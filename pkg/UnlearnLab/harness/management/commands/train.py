"""
Файл: train.py
Описание: Обучение θ_o для каждого seed

Использование:
    python manage.py train --config configs/random10.json --seed 0
"""

from harness.management.commands._base import LabCommand
from harness.services.runner import run_experiment


class Command(LabCommand):
    help = 'Train the original model for every seed of the config'

    def handle_lab(self, config, options):
        manifest = run_experiment(config, options['jobs'], kinds=('original',), seeds=options['seeds'])
        for cell in manifest.done_cells('original'):
            metrics = cell.metrics(0)
            self.stdout.write(f"  seed {cell.seed}: RA={metrics.ra:.2f} TA={metrics.ta:.2f}")
        self.finish(manifest)
