"""
Файл: report.py
Описание: Таблицы по manifest.json уже посчитанного эксперимента

Использование:
    python manage.py report --config configs/random10.json
"""

from django.core.management.base import CommandError

from harness.management.commands._base import LabCommand
from harness.services.report import ReportError, generate_report
from harness.services.runner import RunManifest


class Command(LabCommand):
    help = 'Write table1/table2/theory/representations from an existing manifest'

    def handle_lab(self, config, options):
        path = config.experiment_dir / 'manifest.json'
        if not path.exists():
            raise CommandError(f"No manifest at {path}; run the experiment first", returncode=1)
        manifest = RunManifest.load(path)
        try:
            written = generate_report(manifest, config)
        except ReportError as e:
            raise CommandError(str(e), returncode=1) from e
        for name, item in sorted(written.items()):
            self.stdout.write(f"  {name}: {item}")
        self.stdout.write(self.style.SUCCESS("✓ Report written"))
