"""
Файл: tests.py
Описание: Тесты для приложения harness

Проверяются:
- разбор конфигурации и хэш
- FLOPs-бюджет при сравнении с CoUn
- сетка ячеек: выходные файлы, кэш по хэшу, детерминизм при разном числе потоков
- упавшие ячейки, отчет без Retrain, команды manage.py
- подбор lr, lambda, tau и кэш tuning.json
- (slow) порядок методов после подбора и R_r <= R_u у CoUn на 10 seed
"""

import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from datagen.services.splits import is_nested, split_classwise, split_random
from datagen.services.synthetic import SyntheticSpec, make_synthetic, ring_neighbors
from evaluation.services.metrics import core_metrics
from evaluation.services.predictions import prediction_distribution
from harness.models import ExperimentCell
from harness.services.cells import scenario_splits
from harness.services.experiment_config import ConfigError, TuningSection, config_hash, load_config, parse_config
from harness.services.report import ReportError, generate_report
from harness.services.runner import RESULT_COLUMNS, RunManifest, mean_std, run_experiment
from harness.services.sweep import apply_axis
from harness.services.tuning import TUNING_FILE, apply_choice, candidates, choice_of, select
from harness.utils.budget import batch_sizes, matched_epochs, planned_flops
from harness.utils.tables import read_csv
from network.services.model import ModelConfig
from unlearn.services.config import default_method_config, original_train_config, with_cl_module
from unlearn.services.methods import retrain_run


def tiny_raw(**changes):
    raw = {
        'dataset': {'num_classes': 4, 'input_dim': 8, 'samples_per_class': 16, 'seed': 3},
        'scenario': {'kind': 'random', 'forget_ratio': 0.25},
        'model': {'hidden_dims': [16], 'repr_dim': 8},
        'train': {'epochs': 5, 'batch_size': 16},
        'unlearn': {'epochs': 2, 'batch_size': 16},
        'methods': ['ft', 'coun'],
        'seeds': [0, 1],
    }
    raw.update(changes)
    return raw


class TempOutputMixin:
    def make_output(self) -> Path:
        path = Path(tempfile.mkdtemp(prefix='mulab-test-'))
        self.addCleanup(shutil.rmtree, path, ignore_errors=True)
        return path


class ConfigTests(TempOutputMixin, SimpleTestCase):
    """Разбор JSON-конфигурации"""

    def test_defaults_and_labels(self):
        raw = tiny_raw(methods=['ft', {'method': 'ft', 'cl_module': {'lam': 0.5}}, 'coun'])
        config = parse_config(raw)
        self.assertEqual(config.method_labels(), ('ft', 'ft+CL', 'coun'))
        self.assertEqual(config.methods[1].cl_module.lam, 0.5)
        self.assertEqual(config.seeds, (0, 1))
        self.assertEqual(config.model_config().hidden_dims, (16,))

    def test_integer_seeds_mean_range(self):
        self.assertEqual(parse_config(tiny_raw(seeds=3)).seeds, (0, 1, 2))

    def test_hash_ignores_key_order(self):
        raw = tiny_raw()
        reordered = dict(reversed(list(raw.items())))
        self.assertEqual(config_hash(raw), config_hash(reordered))
        self.assertNotEqual(config_hash(raw), config_hash(tiny_raw(seeds=[0])))

    def test_derive_changes_hash(self):
        config = parse_config(tiny_raw())
        derived = config.derive({('unlearn', 'batch_size'): 8})
        self.assertEqual(derived.unlearn['batch_size'], 8)
        self.assertNotEqual(config.hash, derived.hash)
        self.assertEqual(config.raw['unlearn']['batch_size'], 16)

    def test_rejects_bad_configs(self):
        bad = [
            tiny_raw(extra={}),
            tiny_raw(methods=[{'method': 'ft', 'alpha': 1}]),
            tiny_raw(methods=['retrain']),
            tiny_raw(methods=['ft', 'ft']),
            tiny_raw(methods=[]),
            tiny_raw(methods=['coun'], seeds=[0, 0]),
            tiny_raw(scenario={'kind': 'classwise', 'target_class': 9}),
            tiny_raw(scenario={'kind': 'nearest'}),
            tiny_raw(methods=[{'method': 'salun', 'cl_module': {'lam': 1.0}}]),
            tiny_raw(sweep={'axis': 'depth', 'values': [1]}),
        ]
        for raw in bad:
            with self.subTest(raw=raw):
                with self.assertRaises(ConfigError):
                    parse_config(raw)

    def test_load_config_errors(self):
        out = self.make_output()
        with self.assertRaises(ConfigError):
            load_config(out / 'missing.json')
        broken = out / 'broken.json'
        broken.write_text('{"methods": [', encoding='utf-8')
        with self.assertRaises(ConfigError):
            load_config(broken)


class BudgetTests(SimpleTestCase):
    """Подбор эпох бейзлайна под FLOPs CoUn"""

    def setUp(self):
        self.config = parse_config(tiny_raw())
        train, test = make_synthetic(self.config.dataset)
        self.split = split_random(train, 0.25, seed=0, test=test)
        self.model_config = self.config.model_config()
        self.coun = default_method_config('coun')

    def test_batch_sizes(self):
        self.assertEqual(batch_sizes(10, 4), [4, 4, 2])
        self.assertEqual(batch_sizes(8, 4), [4, 4])

    def test_ft_fits_into_coun_budget(self):
        ft = default_method_config('ft')
        budget = planned_flops(self.model_config, self.coun, self.split, 16, 10)
        epochs = matched_epochs(self.model_config, ft, self.coun, self.split, 16, 10)
        self.assertGreater(epochs, 10)
        self.assertLessEqual(planned_flops(self.model_config, ft, self.split, 16, epochs), budget)
        self.assertGreater(planned_flops(self.model_config, ft, self.split, 16, epochs + 1), budget)

    def test_coun_matched_to_itself(self):
        self.assertEqual(matched_epochs(self.model_config, self.coun, self.coun, self.split, 16, 7), 7)


class SweepAxisTests(SimpleTestCase):
    def test_lambda_touches_only_contrastive_methods(self):
        raw = tiny_raw(methods=['ft', {'method': 'l1_sparse', 'cl_module': {'lam': 1.0, 'tau': 0.1}}, 'coun'])
        changed = apply_axis(raw, 'lambda', 2.0)
        self.assertEqual(changed['methods'][0], 'ft')
        self.assertEqual(changed['methods'][1]['cl_module'], {'lam': 2.0, 'tau': 0.1})
        self.assertEqual(changed['methods'][2], {'method': 'coun', 'lam': 2.0})
        self.assertEqual(raw['methods'][0], 'ft')

    def test_other_axes(self):
        raw = tiny_raw()
        self.assertEqual(apply_axis(raw, 'batch', 8)['unlearn']['batch_size'], 8)
        self.assertEqual(apply_axis(raw, 'projection', [8, 4])['model']['projection'], [8, 4])
        self.assertEqual(apply_axis(raw, 'transform', 'strong')['unlearn']['transform_cl'], 'strong')
        parse_config(apply_axis(raw, 'projection', [8, 4]))

    def test_single_value_sweep_is_a_plain_run(self):
        raw = tiny_raw(sweep={'axis': 'tau', 'values': [0.2]})
        swept = parse_config(apply_axis(raw, 'tau', 0.2))
        plain = tiny_raw(methods=['ft', {'method': 'coun', 'tau': 0.2}])
        self.assertEqual(swept.hash, parse_config(plain).hash)

    def test_unknown_axis(self):
        with self.assertRaises(ConfigError):
            apply_axis(tiny_raw(), 'depth', 3)


class MeanStdTests(SimpleTestCase):
    def test_population_std(self):
        mean, std = mean_std([1.0, 3.0])
        self.assertEqual(mean, 2.0)
        self.assertEqual(std, 1.0)


class RunnerTests(TempOutputMixin, TestCase):
    """Сетка ячеек, кэш и выходные файлы"""

    def config(self, **changes):
        return parse_config(tiny_raw(**changes), output_dir=self.make_output())

    def test_run_writes_outputs(self):
        config = self.config()
        manifest = run_experiment(config, jobs=2)
        self.assertEqual(manifest.failed, [])
        self.assertEqual(ExperimentCell.objects.filter(config_hash=config.hash).count(), 8)

        directory = config.experiment_dir
        for name in ('manifest.json', 'results.csv', 'preds.csv', 'ckpt/original_seed0.mulab', 'ckpt/coun_seed1.mulab'):
            self.assertTrue((directory / name).exists(), name)
        self.assertTrue((directory / 'runs' / 'coun_seed0.json').exists())

        rows = read_csv(directory / 'results.csv')
        self.assertEqual(len(rows), 8)
        self.assertEqual(tuple(rows[0]), RESULT_COLUMNS)
        self.assertEqual([row['method'] for row in rows[::2]], ['original', 'retrain', 'ft', 'coun'])
        for row in rows:
            if row['method'] == 'retrain':
                self.assertEqual(row['avg_gap'], '0.00')

        coun = [row for row in rows if row['method'] == 'coun']
        ft = [row for row in rows if row['method'] == 'ft']
        self.assertGreater(int(coun[0]['flops']), int(ft[0]['flops']))

    def test_rerun_uses_cached_cells(self):
        config = self.config(methods=['ft'])
        run_experiment(config, jobs=1)
        first = (config.experiment_dir / 'results.csv').read_bytes()
        with mock.patch('harness.services.runner.execute_cell') as execute:
            manifest = run_experiment(config, jobs=1)
            execute.assert_not_called()
        self.assertEqual(manifest.failed, [])
        self.assertEqual((config.experiment_dir / 'results.csv').read_bytes(), first)

    def test_results_do_not_depend_on_thread_count(self):
        raw = tiny_raw(methods=['ft', 'neggrad_plus'])
        serial = parse_config(raw, output_dir=self.make_output())
        run_experiment(serial, jobs=1)
        ExperimentCell.objects.all().delete()
        parallel = parse_config(raw, output_dir=self.make_output())
        run_experiment(parallel, jobs=3)
        self.assertEqual(
            (serial.experiment_dir / 'results.csv').read_bytes(),
            (parallel.experiment_dir / 'results.csv').read_bytes(),
        )

    def test_failed_cells_are_recorded_and_retried(self):
        config = self.config(methods=['ft'], seeds=[0])
        with mock.patch('harness.services.cells.run_method', side_effect=RuntimeError('boom')):
            manifest = run_experiment(config, jobs=1)
        self.assertEqual([cell.key for cell in manifest.failed], ['unlearn:ft:0'])
        self.assertIn('boom', manifest.failed[0].error)

        manifest = run_experiment(config, jobs=1)
        self.assertEqual(manifest.failed, [])
        self.assertTrue(ExperimentCell.objects.get(config_hash=config.hash, key='unlearn:ft:0').is_done)

    def test_sequential_scenario_has_a_row_per_stage(self):
        config = self.config(
            scenario={'kind': 'sequential', 'step_ratio': 0.2, 'stages': 2, 'epochs_per_stage': 1},
            methods=['ft'], seeds=[0],
        )
        manifest = run_experiment(config, jobs=1)
        self.assertEqual(manifest.failed, [])
        rows = read_csv(config.experiment_dir / 'results.csv')
        self.assertEqual(len(rows), 6)
        self.assertEqual([row['scenario'] for row in rows if row['method'] == 'ft'], ['sequential[1]', 'sequential[2]'])
        self.assertTrue((config.experiment_dir / 'ckpt' / 'ft_seed0_stage2.mulab').exists())

    def test_report_tables(self):
        config = self.config(
            scenario={'kind': 'classwise', 'target_class': 1},
            methods=['coun'], seeds=[0],
            theory={'enabled': True, 'methods': ['coun'], 'samples': 4},
        )
        manifest = run_experiment(config, jobs=1)
        written = generate_report(manifest, config)
        self.assertEqual(sorted(written), ['representations', 'table1', 'table2', 'theory'])

        table2 = {row['method']: row for row in read_csv(written['table2'])}
        self.assertEqual(table2['retrain']['RA_delta'], '0.00')
        self.assertEqual(table2['retrain']['avg_gap'], '0.00')
        table1 = read_csv(written['table1'])
        self.assertEqual(len(table1), 3)
        self.assertIn('class_3', table1[0])

        theory = json.loads(written['theory'].read_text(encoding='utf-8'))
        self.assertEqual(theory['lemma']['total'], 1)
        subsets = {row['subset'] for row in read_csv(written['representations'])}
        self.assertEqual(subsets, {'retain', 'forget'})

        reloaded = RunManifest.load(config.experiment_dir)
        self.assertEqual(reloaded.result_rows(), manifest.result_rows())

    def test_report_requires_retrain(self):
        config = self.config(methods=['ft'], seeds=[0])
        manifest = run_experiment(config, jobs=1, kinds=('original',))
        with self.assertRaises(ReportError):
            generate_report(manifest, config)


class TuningTests(TempOutputMixin, TestCase):
    """Подбор lr, lambda и tau по avg_gap к Retrain"""

    section = TuningSection(lr=(0.01, 0.05), lam=(0.1, 1.0), tau=(0.3,))

    def test_candidate_grids(self):
        ft = candidates(default_method_config('ft'), self.section)
        self.assertEqual([m.lr for m in ft], [0.01, 0.05])

        coun = candidates(default_method_config('coun'), self.section)
        self.assertEqual([choice_of(m) for m in coun][:2], [
            {'lr': 0.01, 'lam': 0.1, 'tau': 0.3},
            {'lr': 0.01, 'lam': 1.0, 'tau': 0.3},
        ])
        self.assertEqual(len(coun), 4)

        module = candidates(with_cl_module(default_method_config('l1_sparse'), 1.0, 0.1), self.section)
        self.assertEqual({(m.cl_module.lam, m.cl_module.tau) for m in module}, {(0.1, 0.3), (1.0, 0.3)})
        self.assertTrue(all(m.label == 'l1_sparse+CL' for m in module))

    def test_pinned_lr_is_not_tuned(self):
        self.assertEqual(len(candidates(default_method_config('neggrad'), self.section)), 1)
        self.assertEqual(len(candidates(default_method_config('ft', lr=0.02), self.section)), 1)

    def test_select_smallest_mean_first_on_ties(self):
        grid = candidates(default_method_config('ft'), TuningSection(lr=(0.01, 0.03, 0.05)))
        self.assertEqual(select('ft', grid, [[2.0, 2.0], [1.0, 1.5], [1.5, 1.0]]).choice, {'lr': 0.03})
        result = select('ft', grid, [[3.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
        self.assertEqual(result.choice, {'lr': 0.05})
        self.assertEqual(result.mean_gap, 1.0)
        self.assertEqual(len(result.candidates), 3)
        self.assertEqual(select('ft', grid, [[2.0], [2.0], [2.0]]).choice, {'lr': 0.01})

    def test_apply_choice(self):
        coun = apply_choice(default_method_config('coun'), {'lr': 0.03, 'lam': 0.3, 'tau': 0.2})
        self.assertEqual((coun.lr, coun.lam, coun.tau), (0.03, 0.3, 0.2))
        module = apply_choice(with_cl_module(default_method_config('ft'), 1.0, 0.1), {'lr': 0.1, 'lam': 0.1, 'tau': 0.3})
        self.assertEqual((module.lr, module.cl_module.lam, module.cl_module.tau), (0.1, 0.1, 0.3))

    def test_config_section(self):
        config = parse_config(tiny_raw(tuning={'enabled': True}), output_dir=self.make_output())
        self.assertTrue(config.tuning.enabled)
        self.assertEqual(config.tuning.lr, (0.01, 0.03, 0.05, 0.1))
        self.assertIsNone(config.tuning.seeds)
        self.assertFalse(parse_config(tiny_raw(), output_dir=self.make_output()).tuning.enabled)

        bad = [
            {'tau': [0.0]},
            {'lr': []},
            {'lam': [-1.0]},
            {'seeds': [-1]},
            {'budget': 3},
        ]
        for section in bad:
            with self.subTest(section=section), self.assertRaises(ConfigError):
                parse_config(tiny_raw(tuning=section), output_dir=self.make_output())
        with self.assertRaises(ConfigError):
            parse_config(tiny_raw(
                tuning={'enabled': True},
                scenario={'kind': 'sequential', 'step_ratio': 0.2, 'stages': 2, 'epochs_per_stage': 1},
            ), output_dir=self.make_output())

    def test_lambda_sweep_pins_tuning_grid(self):
        raw = apply_axis(tiny_raw(tuning={'enabled': True, 'lam': [0.1, 1.0]}), 'lambda', 4.0)
        self.assertEqual(raw['tuning']['lam'], [4.0])
        self.assertNotIn('tuning', apply_axis(tiny_raw(), 'lambda', 4.0))

    def test_run_uses_tuned_methods_and_caches_choice(self):
        raw = tiny_raw(seeds=[0], tuning={'enabled': True, 'lr': [0.01, 0.05], 'lam': [0.3], 'tau': [0.2]})
        config = parse_config(raw, output_dir=self.make_output())
        manifest = run_experiment(config, jobs=2)
        self.assertEqual(manifest.failed, [])

        saved = json.loads((config.experiment_dir / TUNING_FILE).read_text(encoding='utf-8'))
        self.assertEqual(saved['config_hash'], config.hash)
        choices = {item['label']: item for item in saved['methods']}
        self.assertEqual(set(choices), {'ft', 'coun'})
        self.assertEqual(len(choices['coun']['candidates']), 2)
        self.assertEqual((choices['coun']['choice']['lam'], choices['coun']['choice']['tau']), (0.3, 0.2))

        coun = manifest.cell('coun', 0)
        self.assertEqual(coun.result['method_config']['lr'], choices['coun']['choice']['lr'])
        self.assertEqual(coun.result['method_config']['lam'], 0.3)
        self.assertAlmostEqual(manifest.gap(coun, 0), choices['coun']['mean_gap'], places=6)

        with mock.patch('harness.services.tuning.MethodTuner.search') as search:
            run_experiment(parse_config(raw, output_dir=config.output_dir), jobs=1)
            search.assert_not_called()

    def test_train_only_run_skips_tuning(self):
        config = parse_config(tiny_raw(seeds=[0], tuning={'enabled': True}), output_dir=self.make_output())
        with mock.patch('harness.services.tuning.MethodTuner.search') as search:
            run_experiment(config, jobs=1, kinds=('original',))
            search.assert_not_called()
        self.assertFalse((config.experiment_dir / TUNING_FILE).exists())


class CommandTests(TempOutputMixin, TestCase):
    """manage.py run / train / eval / report"""

    def setUp(self):
        self.out = self.make_output()
        self.path = self.out / 'config.json'
        self.path.write_text(json.dumps(tiny_raw(methods=['ft'], seeds=[0])), encoding='utf-8')

    def call(self, name, **options):
        stdout = StringIO()
        call_command(name, config=str(self.path), out=str(self.out), jobs=1, stdout=stdout, **options)
        return stdout.getvalue()

    def test_run_then_report(self):
        self.assertIn('cells done', self.call('run'))
        config = load_config(self.path, self.out)
        self.assertTrue((config.experiment_dir / 'table2.csv').exists())
        self.assertIn('Report written', self.call('report'))

    def test_train_and_eval(self):
        self.call('train')
        config = load_config(self.path, self.out)
        checkpoint = config.experiment_dir / 'ckpt' / 'original_seed0.mulab'
        payload = json.loads(self.call('eval', checkpoint=str(checkpoint)))
        self.assertEqual(payload['scenario'], 'random')
        self.assertTrue(0.0 <= payload['mia'] <= 100.0)

    def test_config_error_exit_code(self):
        self.path.write_text(json.dumps(tiny_raw(methods=['retrain'])), encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            self.call('run')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_seed_is_a_config_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('train', seeds=[5])
        self.assertEqual(ctx.exception.returncode, 2)

    def test_report_without_manifest(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('report')
        self.assertEqual(ctx.exception.returncode, 1)


@tag('slow')
class RingBenchmarkTests(TempOutputMixin, TestCase):
    """Проверки на кольце из 4 классов (manage.py test --exclude-tag slow их пропускает)"""

    def test_classwise_retrain_moves_forget_to_ring_neighbors(self):
        spec = SyntheticSpec(num_classes=4, input_dim=8, samples_per_class=200, per_class_std=0.3, seed=0)
        train, test = make_synthetic(spec)
        split = split_classwise(train, 0, test)
        model_config = ModelConfig(input_dim=8, num_classes=4)
        neighbors = list(ring_neighbors(4, 0))

        unlearn_accuracy, neighbor_share = [], []
        for seed in range(10):
            run = retrain_run(train, split, model_config, original_train_config(seed), seed)
            unlearn_accuracy.append(core_metrics(run.final_model, train, split, test)[1])
            distribution = prediction_distribution(run.final_model, train, split.forget_idx)
            neighbor_share.append(distribution.percentages[neighbors].sum())

        self.assertGreaterEqual(sum(unlearn_accuracy) / 10, 95.0)
        self.assertGreaterEqual(sum(neighbor_share) / 10, 60.0)

    def test_five_stage_sequential_run(self):
        raw = tiny_raw(
            scenario={'kind': 'sequential', 'step_ratio': 0.1, 'stages': 5, 'epochs_per_stage': 2},
            methods=['coun', 'l1_sparse'], seeds=[0],
        )
        config = parse_config(raw, output_dir=self.make_output())
        train, _ = make_synthetic(config.dataset)
        self.assertTrue(is_nested(scenario_splits(config, train, 0)))

        manifest = run_experiment(config, jobs=2)
        self.assertEqual(manifest.failed, [])
        rows = read_csv(config.experiment_dir / 'results.csv')
        coun = [row for row in rows if row['method'] == 'coun']
        self.assertEqual([row['scenario'] for row in coun], [f"sequential[{s}]" for s in range(1, 6)])
        self.assertTrue(all(row['avg_gap'] for row in rows))
        ratios = [float(row['forget_ratio']) for row in coun]
        self.assertEqual(ratios, sorted(ratios))


def benchmark_raw(**changes) -> dict:
    """configs/random10.json: кольцо из 4 классов, 10% случайного забывания, 10 seed"""
    raw = json.loads((settings.BASE_DIR / 'configs' / 'random10.json').read_text(encoding='utf-8'))
    raw.update(changes)
    return raw


@tag('slow')
class RingTuningBenchmarkTests(TestCase):
    """Порядок методов после подбора: средний avg_gap по 10 seed"""

    BASES = ('ft', 'neggrad_plus', 'l1_sparse', 'not')

    @classmethod
    def setUpTestData(cls):
        output = Path(tempfile.mkdtemp(prefix='mulab-bench-'))
        cls.addClassCleanup(shutil.rmtree, output, ignore_errors=True)
        raw = benchmark_raw(theory={'enabled': False})
        raw['methods'] = [entry for entry in raw['methods'] if entry not in ('neggrad', 'salun')]
        manifest = run_experiment(parse_config(raw, output_dir=output))
        cls.failed = [cell.key for cell in manifest.failed]
        cls.gaps = {row['method']: row['avg_gap'] for row in manifest.summary()}

    def test_all_cells_done(self):
        self.assertEqual(self.failed, [])

    def test_coun_not_worse_than_ft(self):
        self.assertLessEqual(self.gaps['coun'], self.gaps['ft'])

    def test_cl_module_improves_most_baselines(self):
        improved = [base for base in self.BASES if self.gaps[f"{base}+CL"] <= self.gaps[base]]
        self.assertGreaterEqual(len(improved), 3, self.gaps)


@tag('slow')
class RingConcentrationBenchmarkTests(TempOutputMixin, TestCase):
    def test_retain_concentration_dominates_forget(self):
        raw = benchmark_raw(methods=['coun'], tuning={'enabled': False}, theory={'enabled': True, 'methods': ['coun']})
        manifest = run_experiment(parse_config(raw, output_dir=self.make_output()))
        self.assertEqual(manifest.failed, [])

        cells = manifest.done_cells('coun')
        self.assertEqual(len(cells), 10)
        holds = [cell.stages[0]['theory']['lemma_holds'] for cell in cells]
        self.assertGreaterEqual(sum(holds), 8, holds)
