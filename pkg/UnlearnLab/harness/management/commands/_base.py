"""
Файл: _base.py
Описание: Общая основа команд лаборатории

Все команды принимают --config, --seed, --out и --jobs.
Коды выхода: 0 - успех, 1 - есть упавшие ячейки, 2 - ошибка конфигурации.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from harness.services.experiment_config import ConfigError, ExperimentConfig, load_config

logger = logging.getLogger(__name__)


class LabCommand(BaseCommand):
    """BaseCommand с загрузкой конфигурации и общими аргументами"""

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the experiment JSON config')
        parser.add_argument(
            '--seed', type=int, action='append', dest='seeds',
            help='Run only this seed (repeatable); the config hash is unchanged',
        )
        parser.add_argument('--out', default=None, help='Output root (default: MULAB_OUT or ./out)')
        parser.add_argument('--jobs', type=int, default=None, help='Worker threads (default: MULAB_JOBS)')
        self.add_lab_arguments(parser)

    def add_lab_arguments(self, parser):
        """Аргументы конкретной команды"""

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], options['out'])
            unknown = sorted(set(options['seeds'] or ()) - set(config.seeds))
            if unknown:
                raise ConfigError(f"--seed {unknown} not in the config seeds {list(config.seeds)}")
            return self.handle_lab(config, options)
        except ConfigError as e:
            raise CommandError(f"Config error: {e}", returncode=2) from e

    def handle_lab(self, config: ExperimentConfig, options):
        raise NotImplementedError

    def finish(self, manifest):
        """Итоговая строка и код выхода по упавшим ячейкам"""
        done = len(manifest.cells) - len(manifest.failed)
        self.stdout.write(f"Results: {manifest.output_dir}")
        if manifest.failed:
            for cell in manifest.failed:
                self.stdout.write(self.style.ERROR(f"✗ {cell.key}: {cell.error}"))
            raise CommandError(f"{len(manifest.failed)} cells failed ({done} done)", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"✓ {done} cells done"))
