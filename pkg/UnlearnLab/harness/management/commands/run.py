"""
Файл: run.py
Описание: Полная сетка эксперимента и итоговые таблицы

Использование:
    python manage.py run --config configs/random10.json --jobs 4

Ячейки, уже посчитанные для того же хэша конфигурации, пропускаются.
"""

from harness.management.commands._base import LabCommand
from harness.services.report import ReportError, generate_report
from harness.services.runner import run_experiment


class Command(LabCommand):
    help = 'Run Original, Retrain and every method for every seed, then write the tables'

    def handle_lab(self, config, options):
        manifest = run_experiment(config, options['jobs'], seeds=options['seeds'])
        try:
            written = generate_report(manifest, config)
            for name, path in sorted(written.items()):
                self.stdout.write(f"  {name}: {path}")
        except ReportError as e:
            self.stdout.write(self.style.WARNING(f"Report skipped: {e}"))
        self.finish(manifest)
