"""
Файл: tests.py
Описание: Тесты для приложения datagen

Проверяются:
- генератор синтетических кластеров (детерминизм, вырожденные случаи)
- разбиения random / classwise / sequential и свойство разбиения
- аугментации, d_T и жадная оценка sigma
- экспорт/импорт CSV
"""

import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from datagen.services.splits import is_nested, sequential_schedule, split_classwise, split_random
from datagen.services.synthetic import Dataset, SyntheticSpec, make_synthetic, ring_centers
from datagen.services.transforms import (
    AugmentOp, TransformDistribution, apply_transform, augmented_distance,
    estimate_sigma, parse_transform, preset, view_seed,
)
from datagen.utils.io import load_dataset_csv, save_dataset_csv


def ring_spec(**overrides):
    params = dict(num_classes=4, input_dim=8, per_class_std=0.3, samples_per_class=100, seed=0)
    params.update(overrides)
    return SyntheticSpec(**params)


class SyntheticTests(SimpleTestCase):
    """Генератор кластеров"""

    def test_zero_std_puts_samples_on_centers(self):
        spec = SyntheticSpec(
            num_classes=2, input_dim=2, per_class_std=0.0, samples_per_class=5,
            class_centers=[[1.0, 0.0], [-1.0, 0.0]],
        )
        train, test = make_synthetic(spec)
        for dataset in (train, test):
            expected = spec.class_centers[dataset.class_of]
            np.testing.assert_array_equal(dataset.inputs, expected)

    def test_same_seed_is_bitwise_identical(self):
        first, _ = make_synthetic(ring_spec())
        second, _ = make_synthetic(ring_spec())
        self.assertEqual(first.inputs.tobytes(), second.inputs.tobytes())
        self.assertEqual(first.class_of.tobytes(), second.class_of.tobytes())

    def test_empirical_means_near_centers(self):
        spec = ring_spec(samples_per_class=200)
        train, _ = make_synthetic(spec)
        for k in range(4):
            mean = train.inputs[train.class_of == k].mean(axis=0)
            self.assertLess(np.abs(mean - spec.class_centers[k]).max(), 0.1)

    def test_ring_neighbors_are_nearest(self):
        centers = ring_centers(6, 3)
        for k in range(6):
            distances = np.linalg.norm(centers - centers[k], axis=1)
            distances[k] = np.inf
            nearest = set(np.flatnonzero(np.isclose(distances, distances.min())))
            self.assertEqual(nearest, {(k - 1) % 6, (k + 1) % 6})

    def test_labels_are_one_hot(self):
        train, _ = make_synthetic(ring_spec())
        np.testing.assert_array_equal(train.labels.sum(axis=1), 1.0)
        np.testing.assert_array_equal(train.labels.argmax(axis=1), train.class_of)
        np.testing.assert_array_equal(train.class_counts(), [100] * 4)

    def test_test_split_size(self):
        _, test = make_synthetic(ring_spec(test_fraction=0.2))
        np.testing.assert_array_equal(test.class_counts(), [25] * 4)

    def test_invalid_specs(self):
        with self.assertRaises(ValueError):
            ring_spec(num_classes=1)
        with self.assertRaises(ValueError):
            ring_spec(samples_per_class=3)
        with self.assertRaises(ValueError):
            SyntheticSpec(num_classes=2, input_dim=2, class_centers=[[1.0, 1.0], [1.0, 1.0]])


class SplitTests(SimpleTestCase):
    """Разбиения retain / forget"""

    def setUp(self):
        self.train, self.test = make_synthetic(ring_spec(num_classes=4, samples_per_class=25))

    def test_random_ratio_ten_percent(self):
        split = split_random(self.train, 0.10, seed=1, test=self.test)
        self.assertEqual(split.forget_idx.size, 10)
        self.assertEqual(split.retain_idx.size, 90)
        split.check_partition(len(self.train))

    def test_random_ratio_half(self):
        split = split_random(self.train, 0.50, seed=1)
        self.assertEqual((split.forget_idx.size, split.retain_idx.size), (50, 50))

    def test_seeds_change_forget_set(self):
        a = split_random(self.train, 0.10, seed=1)
        b = split_random(self.train, 0.10, seed=2)
        self.assertEqual(a.forget_idx.size, b.forget_idx.size)
        self.assertFalse(np.array_equal(a.forget_idx, b.forget_idx))

    def test_ratio_out_of_range(self):
        for ratio in (0.0, 1.0, -0.1):
            with self.assertRaises(ValueError):
                split_random(self.train, ratio, seed=0)

    def test_classwise(self):
        train, _ = make_synthetic(ring_spec())
        split = split_classwise(train, 3)
        self.assertEqual(split.forget_idx.size, 100)
        self.assertTrue(np.all(train.class_of[split.forget_idx] == 3))
        self.assertFalse(np.any(train.class_of[split.retain_idx] == 3))
        split.check_partition(len(train))
        with self.assertRaises(ValueError):
            split_classwise(train, 4)

    def test_sequential_fractions_and_nesting(self):
        schedule = sequential_schedule(self.train, 0.10, 5, seed=3)
        self.assertEqual([s.forget_idx.size for s in schedule], [10, 20, 30, 40, 50])
        self.assertTrue(is_nested(schedule))
        for split in schedule:
            split.check_partition(len(self.train))

    def test_single_stage_matches_random(self):
        stage = sequential_schedule(self.train, 0.10, 1, seed=3)[0]
        split = split_random(self.train, 0.10, seed=3)
        np.testing.assert_array_equal(stage.forget_idx, split.forget_idx)

    def test_over_full_schedule(self):
        with self.assertRaises(ValueError):
            sequential_schedule(self.train, 0.30, 4, seed=0)


class TransformTests(SimpleTestCase):
    """Аугментации и d_T"""

    def test_identity_is_bitwise(self):
        batch = np.random.default_rng(0).normal(size=(4, 3))
        out = apply_transform(preset('identity').sample(5), batch)
        self.assertEqual(out.tobytes(), batch.tobytes())

    def test_degenerate_params_are_identity(self):
        distribution = TransformDistribution(
            (AugmentOp('noise', (0.0,)), AugmentOp('mask', (0.0,)), AugmentOp('scale', (1.0, 1.0))),
            'degenerate',
        )
        batch = np.random.default_rng(1).normal(size=(4, 3))
        self.assertEqual(apply_transform(distribution.sample(9), batch).tobytes(), batch.tobytes())

    def test_noise_is_reproducible(self):
        distribution = TransformDistribution((AugmentOp('noise', (0.1,)),), 'noise')
        zero = np.zeros(5)
        first = apply_transform(distribution.sample(42), zero)
        second = apply_transform(distribution.sample(42), zero)
        self.assertTrue(np.any(first != 0.0))
        np.testing.assert_array_equal(first, second)
        self.assertEqual(first.shape, zero.shape)

    def test_strong_preset_changes_input(self):
        batch = np.ones((3, 4))
        self.assertFalse(np.array_equal(preset('strong').sample(1)(batch), batch))

    def test_parse_transform(self):
        self.assertIs(parse_transform('simple'), preset('simple'))
        custom = parse_transform({'ops': [{'kind': 'noise', 'params': [0.3]}]})
        self.assertEqual(custom.ops, (AugmentOp('noise', (0.3,)),))
        with self.assertRaises(ValueError):
            parse_transform({'ops': [], 'strenght': 'typo'})
        with self.assertRaises(ValueError):
            preset('medium')

    def test_identity_distance_is_euclidean(self):
        a, b = np.array([1.0, 2.0, 3.0]), np.array([0.0, -1.0, 2.5])
        identity = preset('identity')
        self.assertEqual(augmented_distance(a, b, identity, samples=3), float(np.linalg.norm(a - b)))
        self.assertEqual(augmented_distance(a, a, identity), 0.0)
        self.assertEqual(augmented_distance(a, b, identity), augmented_distance(b, a, identity))

    def test_noise_distance_is_min_over_pairs(self):
        noise = TransformDistribution((AugmentOp('noise', (0.2,)),), 'noise')
        x = np.array([0.5, -0.5])
        value = augmented_distance(x, x, noise, samples=64, seed=7)
        self.assertGreaterEqual(value, 0.0)
        pairs = []
        for m in range(64):
            t = noise.sample(view_seed(7, 'augmented_distance', m, 0))
            t_prime = noise.sample(view_seed(7, 'augmented_distance', m, 1))
            pairs.append(float(np.linalg.norm(t(x) - t_prime(x))))
        self.assertEqual(value, min(pairs))
        self.assertLessEqual(value, augmented_distance(x, x, noise, samples=16, seed=7))

    def test_zero_samples_rejected(self):
        with self.assertRaises(ValueError):
            augmented_distance(np.zeros(2), np.ones(2), preset('identity'), samples=0)


class SigmaTests(SimpleTestCase):
    """Жадная оценка sigma"""

    def setUp(self):
        self.triangle = Dataset(
            [[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0], [5.0, 5.0]],
            [0, 0, 0, 1],
            num_classes=2,
        )

    def test_large_delta_covers_everything(self):
        train, _ = make_synthetic(ring_spec(samples_per_class=10))
        spread = max(
            np.linalg.norm(a - b) for a in train.inputs for b in train.inputs
        )
        estimate = estimate_sigma(train, preset('identity'), delta=2.0 * spread + 1e-9, samples=1)
        self.assertEqual(estimate.per_class, (1.0,) * 4)

    def test_tiny_delta_keeps_only_medoid(self):
        estimate = estimate_sigma(self.triangle, preset('identity'), delta=1e-12, samples=1, classes=[0])
        self.assertAlmostEqual(estimate.sigma_min, 1.0 / 3.0)

    def test_equilateral_class(self):
        estimate = estimate_sigma(self.triangle, preset('identity'), delta=1.2, samples=1, classes=[0])
        self.assertAlmostEqual(estimate.per_class[0], 1.0 / 3.0)
        self.assertTrue(estimate.approximate)

    def test_sigma_nonincreasing_as_delta_shrinks(self):
        train, _ = make_synthetic(ring_spec(samples_per_class=12))
        values = [
            estimate_sigma(train, preset('simple'), delta, samples=4, seed=2).sigma_min
            for delta in (3.0, 2.0, 1.0, 0.5, 0.1)
        ]
        for larger, smaller in zip(values, values[1:]):
            self.assertLessEqual(smaller, larger)

    def test_bad_delta(self):
        with self.assertRaises(ValueError):
            estimate_sigma(self.triangle, preset('identity'), delta=0.0)


class CsvTests(SimpleTestCase):
    """Экспорт и импорт"""

    def test_round_trip_keeps_values_and_spec(self):
        spec = ring_spec(samples_per_class=6)
        train, _ = make_synthetic(spec)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_dataset_csv(train, Path(tmp) / 'train.csv', spec)
            loaded, loaded_spec = load_dataset_csv(path)
        self.assertEqual(loaded.inputs.tobytes(), train.inputs.tobytes())
        np.testing.assert_array_equal(loaded.class_of, train.class_of)
        self.assertEqual(loaded_spec.seed, spec.seed)
        np.testing.assert_array_equal(loaded_spec.class_centers, spec.class_centers)
