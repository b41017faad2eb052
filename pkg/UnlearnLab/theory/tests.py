"""
Файл: tests.py
Описание: Тесты для приложения theory

Проверяются:
- центры классов (симметрия, один сэмпл, прямой двойной цикл)
- R[eps] на крайних случаях и его монотонность
- оценка Липшица против линейных энкодеров и спектральной границы
- формулы rho_max, err_bound и условия разделимости
- проверка R_r <= R_u и полная сводка
"""

import json
import math

import numpy as np
from django.test import SimpleTestCase

from datagen.services.splits import Split, split_classwise, split_random
from datagen.services.synthetic import Dataset, SyntheticSpec, make_synthetic
from datagen.services.transforms import AugmentOp, TransformDistribution, preset, view_seed
from network.services.model import ModelConfig, init_model
from theory.services.bounds import err_bound, rho_max, separation_condition, separation_margin
from theory.services.estimators import (
    center_distances, class_centers, estimate_R, estimate_lipschitz, feature_map, spectral_bound, view_gaps,
)
from theory.services.report import estimate_theory, lemma1_check

NOISE_ONLY = TransformDistribution((AugmentOp('noise', (0.1,)),), 'noise')


def double(x):
    return 2.0 * x


def identity(x):
    return np.array(x, dtype=np.float64)


class CenterTests(SimpleTestCase):
    """Центры классов"""

    def test_symmetric_class_has_zero_center(self):
        data = Dataset(np.array([[1.0, 2.0], [-1.0, -2.0]]), np.array([0, 0]), 2)
        mu = class_centers(identity, data, [0, 1], preset('identity'), samples=8, classes=[0])
        np.testing.assert_array_equal(mu, np.zeros((1, 2)))

    def test_single_sample_class(self):
        data = Dataset(np.array([[0.3, -0.7, 1.1]]), np.array([1]), 2)
        mu = class_centers(double, data, [0], preset('identity'), samples=4, classes=[1])
        np.testing.assert_allclose(mu[0], [0.6, -1.4, 2.2], rtol=1e-12)

    def test_matches_nested_loop(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(size=(5, 3)), np.zeros(5, dtype=int), 2)
        mu = class_centers(double, data, np.arange(5), NOISE_ONLY, samples=6, seed=3, classes=[0])

        total = np.zeros(3)
        for m in range(6):
            views = NOISE_ONLY.sample(view_seed(3, 'class_centers', 0, m))(data.inputs)
            for row in views:
                total += double(row)
        np.testing.assert_allclose(mu[0], total / 30.0, rtol=1e-12, atol=1e-14)

    def test_empty_class_rejected(self):
        data = Dataset(np.zeros((2, 2)), np.array([0, 0]), 2)
        with self.assertRaises(ValueError):
            class_centers(identity, data, [0, 1], preset('identity'), samples=2)


class RTests(SimpleTestCase):
    """R[eps]"""

    def setUp(self):
        self.inputs = np.random.default_rng(1).normal(size=(12, 4))

    def test_identity_transform_gives_zero(self):
        self.assertEqual(estimate_R(double, self.inputs, preset('identity'), 1e-12, samples=8), 0.0)

    def test_tiny_eps_with_noise_gives_one(self):
        self.assertEqual(estimate_R(double, self.inputs, preset('simple'), 1e-12, samples=8), 1.0)

    def test_matches_hand_computed_distances(self):
        inputs = self.inputs[:3]
        gaps = np.zeros(3)
        for m in range(5):
            a = NOISE_ONLY.sample(view_seed(2, 'view_gap', m, 0))(inputs)
            b = NOISE_ONLY.sample(view_seed(2, 'view_gap', m, 1))(inputs)
            gaps = np.maximum(gaps, np.linalg.norm(double(a) - double(b), axis=1))
        for eps in (np.min(gaps) / 2, np.median(gaps), np.max(gaps) * 2):
            expected = float(np.mean(gaps > eps))
            self.assertEqual(estimate_R(double, inputs, NOISE_ONLY, eps, samples=5, seed=2), expected)

    def test_nonincreasing_in_eps(self):
        values = [estimate_R(double, self.inputs, NOISE_ONLY, eps, samples=8) for eps in np.linspace(0.01, 2.0, 15)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_nested_pairs_are_monotone_in_samples(self):
        few = view_gaps(double, self.inputs, NOISE_ONLY, samples=16, seed=4)
        many = view_gaps(double, self.inputs, NOISE_ONLY, samples=64, seed=4)
        self.assertTrue(np.all(few <= many))
        eps = float(np.median(few))
        self.assertLessEqual(
            estimate_R(double, self.inputs, NOISE_ONLY, eps, samples=16, seed=4),
            estimate_R(double, self.inputs, NOISE_ONLY, eps, samples=64, seed=4),
        )

    def test_nonpositive_eps_rejected(self):
        with self.assertRaises(ValueError):
            estimate_R(double, self.inputs, NOISE_ONLY, 0.0)


class LipschitzTests(SimpleTestCase):
    """Оценка константы Липшица"""

    def setUp(self):
        self.inputs = np.random.default_rng(2).normal(size=(10, 4))

    def test_linear_map(self):
        self.assertAlmostEqual(estimate_lipschitz(double, self.inputs, NOISE_ONLY, samples=8), 2.0, places=12)

    def test_constant_map(self):
        constant = lambda x: np.ones((x.shape[0], 3))
        self.assertEqual(estimate_lipschitz(constant, self.inputs, NOISE_ONLY, samples=8), 0.0)

    def test_below_spectral_bound(self):
        model = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(8, 8), repr_dim=5, seed=3))
        estimate = estimate_lipschitz(feature_map(model), self.inputs, preset('strong'), samples=16)
        self.assertLessEqual(estimate, spectral_bound(model) * (1 + 1e-12))

    def test_all_pairs_degenerate(self):
        with self.assertRaises(ValueError):
            estimate_lipschitz(double, self.inputs[:1], preset('identity'), samples=4)


class BoundTests(SimpleTestCase):
    """Формулы границы"""

    def test_worked_example(self):
        self.assertAlmostEqual(rho_max(0.9, 0.1, 0.01, 2.0, 0.05, 0.25), 0.598, delta=1e-12)

    def test_collapse(self):
        self.assertAlmostEqual(rho_max(1.0, 0.1, 0.0, 3.0, 0.0, 0.5), 0.3, delta=1e-12)
        self.assertEqual(err_bound(1.0, 0.0), 0.0)

    def test_orthonormal_centers_fail_the_condition(self):
        mu = np.eye(3)
        rho = rho_max(1.0, 0.1, 0.0, 1.0, 0.0, 0.25)
        self.assertAlmostEqual(separation_margin(mu, rho), 0.4 - math.sqrt(0.2), delta=1e-12)
        holds = separation_condition(mu, rho)
        self.assertFalse(holds[~np.eye(3, dtype=bool)].any())

    def test_well_separated_centers_pass(self):
        mu = 10.0 * np.array([[1.0, 0.0], [-1.0, 0.0]])
        self.assertTrue(separation_condition(mu, 0.1).all())

    def test_monotonicity_on_random_grid(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            sigma, delta, eps, L, R = rng.uniform(0.01, 1.0), *rng.uniform(0.0, 2.0, size=3), rng.uniform(0, 1)
            p = rng.uniform(0.05, 1.0)
            base = rho_max(sigma, delta, eps, L, R, p)
            bump = rng.uniform(0.0, 0.5)
            self.assertLessEqual(base, rho_max(sigma, delta + bump, eps, L, R, p))
            self.assertLessEqual(base, rho_max(sigma, delta, eps + bump, L, R, p))
            self.assertLessEqual(base, rho_max(sigma, delta, eps, L + bump, R, p))
            self.assertLessEqual(base, rho_max(sigma, delta, eps, L, R + bump, p))
            self.assertGreaterEqual(base, rho_max(sigma, delta, eps, L, R, p + bump))
            self.assertGreaterEqual(err_bound(sigma, R), err_bound(min(1.0, sigma + bump), R))

    def test_invalid_inputs(self):
        with self.assertRaises(ValueError):
            rho_max(0.9, 0.1, 0.01, 2.0, 0.05, 0.0)
        with self.assertRaises(ValueError):
            rho_max(0.0, 0.1, 0.01, 2.0, 0.05, 0.25)


class LemmaTests(SimpleTestCase):
    """R_r <= R_u и полная сводка"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.train, cls.test = make_synthetic(SyntheticSpec(num_classes=3, input_dim=4, samples_per_class=8, seed=2))
        cls.split = split_random(cls.train, 0.25, seed=0, test=cls.test)
        cls.model = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(6,), repr_dim=4, seed=1))

    def test_constant_encoder_gives_equality(self):
        zero = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(6,), repr_dim=4, init_scale=0.0))
        R_r, R_u, holds = lemma1_check(feature_map(zero), self.train, self.split, preset('simple'), 0.1, samples=4)
        self.assertEqual((R_r, R_u, holds), (0.0, 0.0, True))

    def test_identical_subsets(self):
        inputs = self.train.inputs[:6]
        doubled = Dataset(np.vstack([inputs, inputs]), np.concatenate([self.train.class_of[:6]] * 2), 3)
        same = Split(np.arange(6), np.arange(6, 12), np.arange(0), 0.5)
        R_r, R_u, _ = lemma1_check(feature_map(self.model), doubled, same, preset('simple'), 0.05, samples=4)
        self.assertEqual(R_r, R_u)

    def test_center_distances(self):
        encoder = feature_map(self.model)
        distances = center_distances(encoder, self.train, self.split, preset('simple'), samples=4)
        shared = set(self.train.class_of[self.split.forget_idx].tolist())
        self.assertEqual(set(distances), shared)
        self.assertTrue(all(d >= 0 for d in distances.values()))
        classwise = split_classwise(self.train, 0, test=self.test)
        self.assertEqual(center_distances(encoder, self.train, classwise, preset('simple'), samples=4), {})

    def test_full_report_is_json_ready(self):
        estimates = estimate_theory(self.model, self.train, self.split, preset('simple'), delta=1.0, samples=4)
        self.assertGreater(estimates.eps, 0.0)
        self.assertEqual(estimates.mu.shape, (3, 4))
        self.assertGreater(estimates.spectral_bound, 0.0)
        data = json.loads(json.dumps(estimates.to_dict()))
        self.assertEqual(data['estimator']['samples'], 4)
        self.assertEqual(data['lemma_holds'], estimates.R_r <= estimates.R_u)
