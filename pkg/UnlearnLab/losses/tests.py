"""
Файл: tests.py
Описание: Тесты для приложения losses

Проверяются:
- оракулы InfoNCE (ортонормированный случай N=2) и CE (равномерный случай)
- свойства CL loss (симметрия, перестановки, монотонность)
- комбинированная цель и ее вырожденные случаи
- совпадение градиентов с конечными разностями на 20 случайных seed
"""

import math

import numpy as np
from django.test import SimpleTestCase

from diffcore.services.tensor import Tensor, l2_normalize_rows, matmul, relu
from diffcore.utils.gradcheck import finite_diff_check
from losses.services.contrastive import CLConfig, anchor_losses, cl_loss, info_nce_anchor
from losses.services.supervised import (
    ce_loss, ce_loss_from_probs, combined_loss, l1_penalty, neggrad_plus_loss,
)

GRADIENT_SEEDS = range(20)


def one_hot(classes, k):
    return np.eye(k)[np.asarray(classes)]


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class InfoNceTests(SimpleTestCase):
    """InfoNCE для одного якоря"""

    def setUp(self):
        self.e1 = np.array([1.0, 0.0])
        self.z_prime = np.array([[1.0, 0.0], [0.0, 1.0]])

    def test_orthonormal_oracle(self):
        for tau in (1.0, 0.5, 0.1):
            value = info_nce_anchor(self.e1, self.z_prime, 0, tau).item()
            self.assertAlmostEqual(value, math.log1p(math.exp(-1.0 / tau)), delta=1e-12)

    def test_documented_values(self):
        self.assertAlmostEqual(info_nce_anchor(self.e1, self.z_prime, 0, 1.0).item(), 0.313262, places=6)
        self.assertAlmostEqual(info_nce_anchor(self.e1, self.z_prime, 0, 0.5).item(), 0.126928, places=6)

    def test_single_pair_is_zero(self):
        rng = np.random.default_rng(0)
        z = unit_rows(rng, 1, 3)
        self.assertEqual(info_nce_anchor(z[0], unit_rows(rng, 1, 3), 0, 0.3).item(), 0.0)

    def test_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            Z, Zp = unit_rows(rng, 5, 4), unit_rows(rng, 5, 4)
            self.assertTrue(np.all(anchor_losses(Z, Zp, 0.2).data >= 0.0))

    def test_more_similar_positive_lowers_loss(self):
        z_prime = np.array([[np.cos(0.9), np.sin(0.9)], [0.0, 1.0], [-1.0, 0.0]])
        closer = z_prime.copy()
        closer[0] = [np.cos(0.3), np.sin(0.3)]
        self.assertLess(
            info_nce_anchor(self.e1, closer, 0, 0.5).item(),
            info_nce_anchor(self.e1, z_prime, 0, 0.5).item(),
        )

    def test_bad_tau(self):
        with self.assertRaises(ValueError):
            info_nce_anchor(self.e1, self.z_prime, 0, 0.0)
        with self.assertRaises(ValueError):
            CLConfig(tau=-1.0)
        with self.assertRaises(ValueError):
            CLConfig(lam=-0.5)


class ClLossTests(SimpleTestCase):
    """Симметричный CL loss"""

    def test_single_row_is_zero(self):
        self.assertEqual(cl_loss([[1.0, 0.0]], [[0.0, 1.0]], 0.1).item(), 0.0)

    def test_orthonormal_pairs(self):
        eye = np.eye(2)
        self.assertAlmostEqual(cl_loss(eye, eye, 1.0).item(), math.log1p(math.exp(-1.0)), delta=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        Z, Zp = unit_rows(rng, 6, 4), unit_rows(rng, 6, 4)
        self.assertAlmostEqual(cl_loss(Z, Zp, 0.1).item(), cl_loss(Zp, Z, 0.1).item(), places=12)

    def test_row_permutation_invariant(self):
        rng = np.random.default_rng(3)
        Z, Zp = unit_rows(rng, 7, 3), unit_rows(rng, 7, 3)
        perm = rng.permutation(7)
        self.assertAlmostEqual(cl_loss(Z, Zp, 0.2).item(), cl_loss(Z[perm], Zp[perm], 0.2).item(), places=12)

    def test_matches_anchor_average(self):
        rng = np.random.default_rng(4)
        Z, Zp = unit_rows(rng, 4, 3), unit_rows(rng, 4, 3)
        manual = sum(info_nce_anchor(Z[n], Zp, n, 0.3).item() + info_nce_anchor(Zp[n], Z, n, 0.3).item() for n in range(4)) / 8
        self.assertAlmostEqual(cl_loss(Z, Zp, 0.3).item(), manual, places=12)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            cl_loss(np.eye(2), np.eye(3), 0.1)


class CrossEntropyTests(SimpleTestCase):
    """Кросс-энтропия"""

    def test_perfect_prediction(self):
        Y = one_hot([0, 1], 2)
        self.assertEqual(ce_loss(Y, [[1000.0, 0.0], [0.0, 1000.0]]).item(), 0.0)
        self.assertEqual(ce_loss_from_probs(Y, Y).item(), 0.0)

    def test_uniform_prediction(self):
        for k in (2, 3, 5):
            Y = one_hot(range(k), k)
            self.assertAlmostEqual(ce_loss(Y, np.zeros((k, k))).item(), math.log(k), delta=1e-12)
        self.assertAlmostEqual(ce_loss(one_hot([1], 2), [[0.0, 0.0]]).item(), 0.693147, places=6)

    def test_mixed_batch(self):
        Y = one_hot([0, 0], 3)
        probs = np.array([[1.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]])
        self.assertAlmostEqual(ce_loss_from_probs(Y, probs).item(), math.log(3) / 2, delta=1e-12)

    def test_duplicated_pair_keeps_mean(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(3, 4))
        Y = one_hot([0, 2, 3], 4)
        doubled = ce_loss(np.vstack([Y, Y]), np.vstack([logits, logits])).item()
        self.assertAlmostEqual(doubled, ce_loss(Y, logits).item(), places=12)


class CombinedLossTests(SimpleTestCase):
    """Комбинированная цель"""

    def setUp(self):
        rng = np.random.default_rng(6)
        self.Y = one_hot([0, 1, 2], 3)
        self.logits = rng.normal(size=(3, 3))
        self.Z, self.Zp = unit_rows(rng, 3, 4), unit_rows(rng, 3, 4)

    def test_lambda_zero_is_ce(self):
        combined = combined_loss(self.Y, self.logits, self.Z, self.Zp, CLConfig(tau=0.1, lam=0.0))
        self.assertEqual(combined.item(), ce_loss(self.Y, self.logits).item())

    def test_linear_combination(self):
        Y = one_hot([0, 1], 2)
        perfect = [[1000.0, 0.0], [0.0, 1000.0]]
        value = combined_loss(Y, perfect, np.eye(2), np.eye(2), CLConfig(tau=1.0, lam=2.0)).item()
        self.assertAlmostEqual(value, 0.626524, delta=1e-6)

    def test_linear_in_lambda(self):
        values = [
            combined_loss(self.Y, self.logits, self.Z, self.Zp, CLConfig(tau=0.2, lam=lam)).item()
            for lam in (0.5, 1.0, 1.5)
        ]
        self.assertAlmostEqual(values[1] - values[0], values[2] - values[1], places=12)

    def test_neggrad_plus_beta_one_is_retain_ce(self):
        value = neggrad_plus_loss(self.Y, self.logits, self.Y, self.logits * 2, beta=1.0).item()
        self.assertEqual(value, ce_loss(self.Y, self.logits).item())
        with self.assertRaises(ValueError):
            neggrad_plus_loss(self.Y, self.logits, self.Y, self.logits, beta=0.0)

    def test_l1_penalty(self):
        params = [Tensor([1.0, -2.0]), Tensor([[0.5]])]
        self.assertEqual(l1_penalty(params, 0.1).item(), 0.1 * 3.5)


class GradientOracleTests(SimpleTestCase):
    """Градиенты против центральных конечных разностей (h = 1e-6)"""

    def _shapes(self, rng):
        return int(rng.integers(2, 9)), int(rng.integers(3, 9)), int(rng.integers(2, 6))

    def _net(self, rng, d_in, d, k):
        return {
            'w1': Tensor(rng.normal(size=(d_in, 6)) * 0.7, requires_grad=True),
            'b1': Tensor(rng.normal(size=6) * 0.1, requires_grad=True),
            'w2': Tensor(rng.normal(size=(6, d)) * 0.7, requires_grad=True),
            'head': Tensor(rng.normal(size=(d, k)) * 0.7, requires_grad=True),
        }

    @staticmethod
    def _encode(net, X):
        return matmul(relu(matmul(X, net['w1']) + net['b1']), net['w2'])

    def test_ce(self):
        for seed in GRADIENT_SEEDS:
            rng = np.random.default_rng(seed)
            n, _, k = self._shapes(rng)
            logits = Tensor(rng.normal(size=(n, k)), requires_grad=True)
            Y = one_hot(rng.integers(0, k, size=n), k)
            self.assertLessEqual(finite_diff_check(lambda: ce_loss(Y, logits), [logits]), 1e-5, f"seed {seed}")

    def test_cl(self):
        for seed in GRADIENT_SEEDS:
            rng = np.random.default_rng(100 + seed)
            n, d, _ = self._shapes(rng)
            Z = Tensor(rng.normal(size=(n, d)), requires_grad=True)
            Zp = Tensor(rng.normal(size=(n, d)), requires_grad=True)

            def loss_fn():
                return cl_loss(l2_normalize_rows(Z), l2_normalize_rows(Zp), 0.5)

            self.assertLessEqual(finite_diff_check(loss_fn, [Z, Zp]), 1e-5, f"seed {seed}")

    def test_combined(self):
        for seed in GRADIENT_SEEDS:
            rng = np.random.default_rng(200 + seed)
            n, d, k = self._shapes(rng)
            net = self._net(rng, 4, d, k)
            X, Xp = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
            Y = one_hot(rng.integers(0, k, size=n), k)
            cfg = CLConfig(tau=0.5, lam=1.5)

            def loss_fn():
                Z = self._encode(net, X)
                Zp = self._encode(net, Xp)
                return combined_loss(
                    Y, matmul(Z, net['head']), l2_normalize_rows(Z), l2_normalize_rows(Zp), cfg,
                )

            self.assertLessEqual(finite_diff_check(loss_fn, list(net.values())), 1e-5, f"seed {seed}")

    def test_neggrad_plus(self):
        for seed in GRADIENT_SEEDS:
            rng = np.random.default_rng(300 + seed)
            n, d, k = self._shapes(rng)
            net = self._net(rng, 4, d, k)
            Xr, Xf = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
            Yr = one_hot(rng.integers(0, k, size=n), k)
            Yf = one_hot(rng.integers(0, k, size=n), k)

            def loss_fn():
                return neggrad_plus_loss(
                    Yr, matmul(self._encode(net, Xr), net['head']),
                    Yf, matmul(self._encode(net, Xf), net['head']),
                    beta=0.9,
                )

            self.assertLessEqual(finite_diff_check(loss_fn, list(net.values())), 1e-5, f"seed {seed}")
