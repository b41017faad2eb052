"""
Файл: unlearn.py
Описание: Запуск Retrain и методов разучивания без итоговых таблиц

Использование:
    python manage.py unlearn --config configs/random10.json --method coun --method ft
"""

from harness.management.commands._base import LabCommand
from harness.services.experiment_config import ConfigError
from harness.services.runner import run_experiment


class Command(LabCommand):
    help = 'Run Retrain and the unlearning methods of the config'

    def add_lab_arguments(self, parser):
        parser.add_argument(
            '--method', action='append', dest='methods',
            help='Method label to run (repeatable, default: all); Retrain always runs',
        )

    def handle_lab(self, config, options):
        labels = None
        if options['methods']:
            unknown = sorted(set(options['methods']) - set(config.method_labels()))
            if unknown:
                raise ConfigError(f"--method {unknown} not in the config methods {list(config.method_labels())}")
            labels = ('retrain', *options['methods'])
        manifest = run_experiment(config, options['jobs'], kinds=('retrain', 'unlearn'), labels=labels,
                                  seeds=options['seeds'])
        for label in labels or ('retrain', *config.method_labels()):
            for cell in manifest.done_cells(label):
                gaps = [manifest.gap(cell, p) for p in range(len(cell.stages))]
                shown = ', '.join(f"{g:.2f}" for g in gaps if g is not None) or '-'
                self.stdout.write(f"  {label} seed {cell.seed}: avg_gap {shown}")
        self.finish(manifest)
