"""
Файл: tests.py
Описание: Тесты для приложения unlearn

Проверяются:
- вырожденные случаи (CoUn с lambda = 0, NegGrad+ с beta = 1, l1 с gamma = 0,
  NoT без слоев, CL-модуль с lambda = 0) совпадают с FT побитово
- изоляция forget-данных по журналу чтений
- NegGrad, SalUn, NoT, последовательное разучивание
- θ_o на разделимых данных, FT сохраняет RA, NegGrad поднимает UA
- детерминизм и FLOPs
"""

import json

import numpy as np
from django.test import SimpleTestCase

from datagen.services.splits import Split, sequential_schedule, split_random
from datagen.services.synthetic import SyntheticSpec, make_synthetic
from diffcore.services.optim import mean_abs_parameter
from losses.services.supervised import ce_loss
from network.services.model import ModelConfig, features, logits, negate_layers, predict
from unlearn.services.config import (
    MethodConfig, TrainConfig, default_method_config, with_cl_module,
)
from unlearn.services.engine import AccessLog, BatchLoader
from unlearn.services.methods import (
    coun, ft, l1_sparse, neggrad, neggrad_plus, not_unlearn, original_run, retrain_run,
    run_method, salun, sequential_unlearn, train_original,
)
from unlearn.utils.manifest import run_manifest
from unlearn.utils.saliency import mask_size, random_wrong_labels


def accuracy(model, dataset, indices):
    return float(np.mean(predict(model, dataset.inputs[indices]) == dataset.class_of[indices]))


class LabTestCase(SimpleTestCase):
    """Общие данные: 4 класса на кольце, маленькая модель, θ_o на 15 эпохах"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.train, cls.test = make_synthetic(SyntheticSpec(num_classes=4, input_dim=8, samples_per_class=16, seed=3))
        cls.split = split_random(cls.train, 0.25, seed=5, test=cls.test)
        cls.model_config = ModelConfig(input_dim=8, num_classes=4, hidden_dims=(16,), repr_dim=8)
        original_cfg = TrainConfig(epochs=15, batch_size=16, base_lr=0.1, schedule='multistep', seed=1)
        cls.original = original_run(cls.train, cls.model_config, original_cfg, seed=1).final_model

    def unlearn_config(self, **overrides):
        params = dict(epochs=3, batch_size=16, base_lr=0.05, seed=7)
        params.update(overrides)
        return TrainConfig(**params)

    def method(self, name, **overrides):
        return MethodConfig(name, **overrides)


class DegenerateEquivalenceTests(LabTestCase):
    """Вырожденные конфигурации дают ту же траекторию, что FT"""

    def setUp(self):
        self.cfg = self.unlearn_config()
        self.reference = ft(self.original, self.train, self.split, self.method('ft'), self.cfg)

    def assertSameAsFt(self, run):
        self.assertTrue(run.final_model.equals(self.reference.final_model))
        self.assertEqual(
            [record['loss'] for record in run.per_epoch_log],
            [record['loss'] for record in self.reference.per_epoch_log],
        )

    def test_coun_with_zero_lambda(self):
        self.assertSameAsFt(coun(self.original, self.train, self.split, self.method('coun', lam=0.0), self.cfg))

    def test_neggrad_plus_with_unit_beta(self):
        self.assertSameAsFt(
            neggrad_plus(self.original, self.train, self.split, self.method('neggrad_plus', beta=1.0), self.cfg)
        )

    def test_l1_sparse_with_zero_gamma(self):
        self.assertSameAsFt(
            l1_sparse(self.original, self.train, self.split, self.method('l1_sparse', gamma=0.0), self.cfg)
        )

    def test_not_without_layers(self):
        self.assertSameAsFt(
            not_unlearn(self.original, self.train, self.split, self.method('not', layer_indices=()), self.cfg)
        )

    def test_cl_module_with_zero_lambda(self):
        method = with_cl_module(self.method('ft'), lam=0.0, tau=0.1)
        self.assertSameAsFt(ft(self.original, self.train, self.split, method, self.cfg))

    def test_ft_with_cl_module_is_coun(self):
        wrapped = ft(self.original, self.train, self.split, with_cl_module(self.method('ft'), 1.0, 0.2), self.cfg)
        direct = coun(self.original, self.train, self.split, self.method('coun', lam=1.0, tau=0.2), self.cfg)
        self.assertTrue(wrapped.final_model.equals(direct.final_model))
        self.assertEqual(wrapped.flops, direct.flops)

    def test_coun_changes_trajectory(self):
        run = coun(self.original, self.train, self.split, self.method('coun'), self.cfg)
        self.assertFalse(run.final_model.equals(self.reference.final_model))


class IsolationTests(LabTestCase):
    """Журнал чтений: какие методы трогают forget"""

    def test_retain_only_methods_never_read_forget(self):
        cfg = self.unlearn_config(epochs=2)
        runs = [
            retrain_run(self.train, self.split, self.model_config, cfg, seed=1),
            ft(self.original, self.train, self.split, self.method('ft'), cfg),
            coun(self.original, self.train, self.split, self.method('coun'), cfg),
            l1_sparse(self.original, self.train, self.split, self.method('l1_sparse'), cfg),
            not_unlearn(self.original, self.train, self.split, self.method('not'), cfg),
        ]
        for run in runs:
            with self.subTest(method=run.method):
                self.assertFalse(run.access_log.touches(self.split.forget_idx))
                self.assertEqual(run.access_log.indices(), set(self.split.retain_idx.tolist()))

    def test_neggrad_plus_reads_forget(self):
        run = neggrad_plus(self.original, self.train, self.split, self.method('neggrad_plus'), self.unlearn_config())
        self.assertEqual(run.access_log.indices('forget'), set(self.split.forget_idx.tolist()))

    def test_original_is_not_mutated(self):
        before = self.original.state_dict()
        ft(self.original, self.train, self.split, self.method('ft'), self.unlearn_config())
        for name, values in before.items():
            np.testing.assert_array_equal(self.original.params[name].data, values)

    def test_access_log_merge_and_summary(self):
        log, other = AccessLog(), AccessLog()
        log.record('retain', [1, 2])
        other.record('forget', [3])
        log.merge(other)
        self.assertEqual(log.summary(), {'forget': 1, 'retain': 2})
        self.assertTrue(log.touches([3, 9]))
        self.assertFalse(log.touches([9]))


class LoaderTests(SimpleTestCase):
    """Перемешивание по эпохам"""

    def test_epoch_covers_all_indices_once(self):
        loader = BatchLoader(np.arange(10), 4, seed=0, tag='shuffle', log=AccessLog(), source='retain')
        batches = list(loader.epoch(0))
        self.assertEqual([b.size for b in batches], [4, 4, 2])
        self.assertEqual(sorted(np.concatenate(batches).tolist()), list(range(10)))
        self.assertEqual(len(loader), 3)

    def test_epochs_reshuffle_deterministically(self):
        make = lambda: BatchLoader(np.arange(20), 20, seed=4, tag='shuffle', log=AccessLog(), source='retain')
        first, again = next(make().epoch(0)), next(make().epoch(0))
        np.testing.assert_array_equal(first, again)
        self.assertFalse(np.array_equal(first, next(make().epoch(1))))

    def test_empty_subset_rejected(self):
        with self.assertRaises(ValueError):
            BatchLoader([], 4, seed=0, tag='shuffle', log=AccessLog(), source='forget')


class BaselineTests(LabTestCase):
    """NegGrad, SalUn, NoT, l1-sparse"""

    def forget_ce(self, model):
        idx = self.split.forget_idx
        return ce_loss(self.train.labels[idx], logits(model, features(model, self.train.inputs[idx]))).item()

    def test_neggrad_step_increases_forget_loss(self):
        cfg = self.unlearn_config(
            epochs=1, batch_size=len(self.train), transform_ce='identity', weight_decay=0.0,
        )
        run = neggrad(self.original, self.train, self.split, self.method('neggrad', lr=1e-3, epochs=1), cfg)
        self.assertEqual(len(run.per_epoch_log), 1)
        self.assertGreater(self.forget_ce(run.final_model), self.forget_ce(self.original))

    def test_neggrad_zero_lr_keeps_model(self):
        run = neggrad(self.original, self.train, self.split, self.method('neggrad', lr=0.0), self.unlearn_config())
        for name, values in self.original.state_dict().items():
            np.testing.assert_array_equal(run.final_model.params[name].data, values)

    def test_neggrad_reads_only_forget(self):
        run = neggrad(self.original, self.train, self.split, default_method_config('neggrad'), self.unlearn_config())
        self.assertEqual(run.access_log.indices(), set(self.split.forget_idx.tolist()))
        self.assertEqual(run.epochs, 5)

    def test_salun_updates_only_masked_coordinates(self):
        method = self.method('salun', mask_threshold=0.3)
        run = salun(self.original, self.train, self.split, method, self.unlearn_config())
        total = self.original.num_parameters()
        self.assertEqual(run.extra['mask_size'], mask_size(0.3, total))

        changed = sum(
            int(np.count_nonzero(run.final_model.params[name].data != values))
            for name, values in self.original.state_dict().items()
        )
        self.assertGreater(changed, 0)
        self.assertLessEqual(changed, run.extra['mask_size'])

    def test_salun_full_mask(self):
        self.assertEqual(mask_size(1.0, 123), 123)
        self.assertEqual(mask_size(0.5, 5), 3)

    def test_relabels_are_always_wrong(self):
        idx = np.arange(len(self.train))
        new = random_wrong_labels(self.train, idx, seed=0)
        self.assertTrue(np.all(new != self.train.class_of[idx]))
        self.assertTrue(np.all((new >= 0) & (new < self.train.num_classes)))

    def test_negation_drops_retain_accuracy(self):
        idx = self.split.retain_idx
        negated = negate_layers(self.original, [0])
        self.assertLess(accuracy(negated, self.train, idx), accuracy(self.original, self.train, idx))

    def test_not_starts_from_negated_model(self):
        run = not_unlearn(self.original, self.train, self.split, self.method('not'), self.unlearn_config())
        self.assertTrue(run.initial_model.equals(self.original))
        self.assertEqual(run.extra['negated_layers'], [0])

    def test_large_gamma_shrinks_weights(self):
        cfg = self.unlearn_config(epochs=2)
        plain = ft(self.original, self.train, self.split, self.method('ft'), cfg)
        sparse = l1_sparse(self.original, self.train, self.split, self.method('l1_sparse', gamma=1.0, l1_epochs=2), cfg)
        self.assertLess(
            mean_abs_parameter(sparse.final_model.tensors()),
            mean_abs_parameter(plain.final_model.tensors()),
        )


class MethodEffectTests(LabTestCase):
    """Базовые эффекты методов: θ_o обучается, FT держит retain, NegGrad поднимает UA"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.separable, _ = make_synthetic(
            SyntheticSpec(num_classes=4, input_dim=8, samples_per_class=50, per_class_std=0.05, seed=11),
        )
        cls.separable_split = split_random(cls.separable, 0.1, seed=2)
        separable_cfg = TrainConfig(epochs=30, batch_size=16, base_lr=0.1, schedule='multistep', seed=4)
        cls.separable_original = train_original(cls.separable, cls.model_config, separable_cfg, seed=4)

    def test_original_fits_separable_data(self):
        all_idx = np.arange(len(self.separable))
        self.assertGreaterEqual(accuracy(self.separable_original, self.separable, all_idx), 0.99)

    def test_ft_keeps_retain_accuracy(self):
        idx = self.separable_split.retain_idx
        run = ft(self.separable_original, self.separable, self.separable_split, self.method('ft'), self.unlearn_config())
        self.assertGreaterEqual(
            accuracy(run.final_model, self.separable, idx),
            accuracy(self.separable_original, self.separable, idx),
        )

    def test_neggrad_raises_unlearning_accuracy(self):
        idx = self.split.forget_idx
        method = self.method('neggrad', lr=0.1, epochs=10)
        run = neggrad(self.original, self.train, self.split, method, self.unlearn_config(weight_decay=0.0))
        before = 1.0 - accuracy(self.original, self.train, idx)
        after = 1.0 - accuracy(run.final_model, self.train, idx)
        self.assertGreater(after, before)


class SequentialTests(LabTestCase):
    """Последовательное разучивание"""

    def setUp(self):
        self.schedule = sequential_schedule(self.train, 0.1, 5, seed=2, test=self.test)

    def test_stages_chain(self):
        runs = sequential_unlearn(
            self.original, self.train, self.schedule, self.method('coun'), self.unlearn_config(), epochs_per_stage=2,
        )
        self.assertEqual(len(runs), 5)
        self.assertEqual(sum(run.epochs for run in runs), 10)
        self.assertTrue(runs[0].initial_model.equals(self.original))
        for earlier, later in zip(runs, runs[1:]):
            self.assertTrue(later.initial_model.equals(earlier.final_model))

    def test_default_stage_length(self):
        runs = sequential_unlearn(self.original, self.train, self.schedule[:1], self.method('ft'), self.unlearn_config())
        self.assertEqual(runs[0].epochs, 10)

    def test_non_nested_schedule_rejected(self):
        broken = [self.schedule[1], self.schedule[0]]
        with self.assertRaises(ValueError):
            sequential_unlearn(self.original, self.train, broken, self.method('ft'), self.unlearn_config())


class ConfigTests(SimpleTestCase):
    """Проверки конфигураций"""

    def test_cl_module_cannot_wrap_retrain(self):
        with self.assertRaises(ValueError):
            with_cl_module(MethodConfig('retrain'), 1.0, 0.1)

    def test_invalid_values(self):
        for kwargs in ({'beta': 0.0}, {'gamma': -1.0}, {'mask_threshold': 0.0}, {'layer_indices': (-1,)}):
            with self.subTest(kwargs=kwargs), self.assertRaises(ValueError):
                MethodConfig('ft', **kwargs)
        with self.assertRaises(ValueError):
            MethodConfig('coun', tau=0.0)
        with self.assertRaises(ValueError):
            TrainConfig(epochs=0)

    def test_label(self):
        self.assertEqual(with_cl_module(MethodConfig('l1_sparse'), 1.0, 0.1).label, 'l1_sparse+CL')
        self.assertEqual(MethodConfig('coun').label, 'coun')


class RunTests(LabTestCase):
    """Детерминизм, FLOPs и манифест"""

    def test_same_seed_same_parameters(self):
        cfg = self.unlearn_config()
        first = coun(self.original, self.train, self.split, self.method('coun'), cfg)
        second = coun(self.original, self.train, self.split, self.method('coun'), cfg)
        self.assertTrue(first.final_model.equals(second.final_model))

    def test_coun_costs_more_than_ft(self):
        cfg = self.unlearn_config()
        plain = ft(self.original, self.train, self.split, self.method('ft'), cfg)
        contrastive = coun(self.original, self.train, self.split, self.method('coun'), cfg)
        self.assertGreater(plain.flops, 0)
        self.assertGreater(contrastive.flops, plain.flops)

    def test_run_method_dispatch_and_manifest(self):
        run = run_method(self.method('l1_sparse'), self.original, self.train, self.split, self.unlearn_config())
        manifest = json.loads(json.dumps(run_manifest(run)))
        self.assertEqual(manifest['method'], 'l1_sparse')
        self.assertEqual(len(manifest['per_epoch_log']), 3)
        self.assertEqual(manifest['data_access'], {'retain': self.split.retain_idx.size})

    def test_retrain_starts_from_fresh_init(self):
        run = retrain_run(self.train, self.split, self.model_config, self.unlearn_config(epochs=1), seed=1)
        self.assertFalse(run.initial_model.equals(self.original))
        self.assertIsInstance(run.split, Split)
