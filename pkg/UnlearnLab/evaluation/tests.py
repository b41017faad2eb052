"""
Файл: tests.py
Описание: Тесты для приложения evaluation

Проверяются:
- средний разрыв и средняя разность распределений на строках опубликованных таблиц
- точность против прямого подсчета
- пороговая MIA: крайние случаи, полный перебор порогов, монотонные преобразования
- распределение предсказаний и FLOPs запусков
"""

import numpy as np
from django.test import SimpleTestCase

from datagen.services.splits import split_random
from datagen.services.synthetic import Dataset, SyntheticSpec, make_synthetic
from evaluation.services.metrics import MetricsRecord, accuracy, avg_gap, core_metrics, flops_of_run
from evaluation.services.mia import fit_threshold, mia_from_confidences
from evaluation.services.predictions import PredictionDistribution, prediction_distribution
from evaluation.utils.rounding import format_metric, report_round
from network.services.model import ModelConfig, init_model, predict
from unlearn.services.config import MethodConfig, TrainConfig
from unlearn.services.methods import coun, ft

RETRAIN_ROW = MetricsRecord(100.00, 4.81, 94.67, 11.02)
FT_ROW = MetricsRecord(99.99, 3.76, 94.70, 9.51)
COUN_ROW = MetricsRecord(99.99, 4.12, 94.57, 10.81)


def brute_force_mia(retain, test, forget):
    """Перебор всех наблюдаемых порогов; при равенстве - меньший"""
    best_score, best_threshold = None, None
    for threshold in np.unique(np.concatenate([retain, test])):
        tp = np.sum(retain >= threshold)
        tn = np.sum(test < threshold)
        score = tp * len(test) + tn * len(retain)
        if best_score is None or score > best_score:
            best_score, best_threshold = score, threshold
    return 100.0 * np.sum(forget < best_threshold) / len(forget)


class ReportingTests(SimpleTestCase):
    """Совпадение с опубликованными таблицами при округлении до 2 знаков"""

    def test_average_gap_of_published_rows(self):
        self.assertEqual(report_round(avg_gap(FT_ROW, RETRAIN_ROW)), 0.65)
        self.assertEqual(report_round(avg_gap(COUN_ROW, RETRAIN_ROW)), 0.25)

    def test_prediction_distribution_average_difference(self):
        retrain = PredictionDistribution([0.0, 69.32, 13.47, 12.60], 100)
        coun_row = PredictionDistribution([0.0, 69.60, 13.96, 13.13], 100).compare(retrain)
        ft_row = PredictionDistribution([0.0, 70.29, 12.38, 13.12], 100).compare(retrain)
        self.assertEqual(report_round(coun_row.avg_diff), 0.33)
        self.assertEqual(report_round(ft_row.avg_diff), 0.65)

    def test_half_up_rounding(self):
        self.assertEqual(report_round(0.125), 0.13)
        self.assertEqual(report_round(2.675), 2.68)
        self.assertEqual(format_metric(0.2525), '0.25')

    def test_gap_properties(self):
        self.assertEqual(avg_gap(FT_ROW, FT_ROW), 0.0)
        self.assertEqual(avg_gap(FT_ROW, COUN_ROW), avg_gap(COUN_ROW, FT_ROW))
        self.assertEqual(FT_ROW.with_gap(RETRAIN_ROW).avg_gap, avg_gap(FT_ROW, RETRAIN_ROW))

    def test_percentages_validated(self):
        with self.assertRaises(ValueError):
            MetricsRecord(100.5, 0.0, 0.0, 0.0)
        with self.assertRaises(ValueError):
            MetricsRecord(50.0, 50.0, 50.0, 50.0, avg_gap=-1.0)


class AccuracyTests(SimpleTestCase):
    """Точность"""

    def test_zero_model_ties_to_class_zero(self):
        data = Dataset(np.ones((4, 3)), np.array([0, 1, 0, 1]), 2)
        model = init_model(ModelConfig(input_dim=3, num_classes=2, hidden_dims=(4,), repr_dim=2, init_scale=0.0))
        self.assertEqual(accuracy(model, data), 50.0)

    def test_matches_per_sample_loop(self):
        train, _ = make_synthetic(SyntheticSpec(num_classes=3, input_dim=4, samples_per_class=10, seed=1))
        model = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(5,), repr_dim=3, seed=2))
        correct = 0
        for i in range(len(train)):
            correct += int(predict(model, train.inputs[i:i + 1])[0] == train.class_of[i])
        self.assertAlmostEqual(accuracy(model, train), 100.0 * correct / len(train), places=12)

    def test_all_correct(self):
        data = Dataset(np.zeros((3, 2)), np.zeros(3, dtype=int), 2)
        model = init_model(ModelConfig(input_dim=2, num_classes=2, hidden_dims=(3,), repr_dim=2, init_scale=0.0))
        self.assertEqual(accuracy(model, data), 100.0)

    def test_empty_subset_rejected(self):
        data = Dataset(np.zeros((3, 2)), np.zeros(3, dtype=int), 2)
        model = init_model(ModelConfig(input_dim=2, num_classes=2, hidden_dims=(3,), repr_dim=2))
        with self.assertRaises(ValueError):
            accuracy(model, data, [])

    def test_core_metrics_in_range(self):
        train, test = make_synthetic(SyntheticSpec(num_classes=3, input_dim=4, samples_per_class=10, seed=1))
        split = split_random(train, 0.2, seed=0, test=test)
        model = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(5,), repr_dim=3, seed=2))
        for value in core_metrics(model, train, split, test):
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 100.0)


class MiaTests(SimpleTestCase):
    """Пороговая атака по уверенности"""

    def test_perfect_separation(self):
        retain, test = np.full(10, 0.99), np.full(8, 0.60)
        self.assertEqual(mia_from_confidences(retain, test, np.full(5, 0.60)), 100.0)
        self.assertEqual(mia_from_confidences(retain, test, np.full(5, 0.99)), 0.0)

    def test_degenerate_confidences(self):
        same = np.full(6, 0.7)
        self.assertEqual(mia_from_confidences(same, same, same), 50.0)
        self.assertTrue(fit_threshold(same, same).degenerate)

    def test_matches_exhaustive_sweep(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            retain = rng.integers(1, 20, size=rng.integers(1, 8)) / 20.0
            test = rng.integers(1, 20, size=rng.integers(1, 8)) / 20.0
            forget = rng.integers(1, 20, size=rng.integers(1, 8)) / 20.0
            if np.unique(np.concatenate([retain, test])).size == 1:
                continue
            self.assertEqual(mia_from_confidences(retain, test, forget), brute_force_mia(retain, test, forget))

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            retain, test, forget = (rng.integers(1, 100, size=9) / 100.0 for _ in range(3))
            self.assertEqual(
                mia_from_confidences(retain, test, forget),
                mia_from_confidences(retain ** 3, test ** 3, forget ** 3),
            )

    def test_threshold_attack_balanced_accuracy(self):
        attack = fit_threshold([0.9, 0.8], [0.1, 0.2, 0.85])
        self.assertEqual(attack.threshold, 0.8)
        self.assertAlmostEqual(attack.balanced_accuracy, (1.0 + 2.0 / 3.0) / 2.0)

    def test_empty_sets_rejected(self):
        with self.assertRaises(ValueError):
            fit_threshold([], [0.5])
        with self.assertRaises(ValueError):
            mia_from_confidences([0.9], [0.1], [])


class PredictionTests(SimpleTestCase):
    """Распределение предсказаний"""

    def setUp(self):
        self.train, _ = make_synthetic(SyntheticSpec(num_classes=4, input_dim=5, samples_per_class=10, seed=4))
        self.model = init_model(ModelConfig(input_dim=5, num_classes=4, hidden_dims=(6,), repr_dim=4, seed=1))

    def test_percentages_sum_to_hundred(self):
        result = prediction_distribution(self.model, self.train, np.arange(17))
        self.assertAlmostEqual(result.percentages.sum(), 100.0, delta=1e-9)
        self.assertEqual(result.count, 17)

    def test_same_model_has_zero_difference(self):
        reference = prediction_distribution(self.model, self.train, np.arange(20))
        result = prediction_distribution(self.model, self.train, np.arange(20), reference=reference, classes=[1, 2])
        self.assertEqual(result.avg_diff, 0.0)
        self.assertEqual(result.to_dict()['classes'], [1, 2])

    def test_empty_forget_rejected(self):
        with self.assertRaises(ValueError):
            prediction_distribution(self.model, self.train, [])


class FlopsTests(SimpleTestCase):
    """FLOPs запусков"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.train, cls.test = make_synthetic(SyntheticSpec(num_classes=3, input_dim=4, samples_per_class=8, seed=0))
        cls.split = split_random(cls.train, 0.25, seed=1, test=cls.test)
        cls.model = init_model(ModelConfig(input_dim=4, num_classes=3, hidden_dims=(6,), repr_dim=4, seed=0))

    def config(self, epochs):
        return TrainConfig(epochs=epochs, batch_size=8, seed=3)

    def test_linear_in_epochs(self):
        one = ft(self.model, self.train, self.split, MethodConfig('ft'), self.config(1))
        two = ft(self.model, self.train, self.split, MethodConfig('ft'), self.config(2))
        self.assertEqual(flops_of_run(two), 2 * flops_of_run(one))
        self.assertEqual(flops_of_run(one), one.flops)

    def test_zero_lambda_costs_like_ft(self):
        plain = ft(self.model, self.train, self.split, MethodConfig('ft'), self.config(1))
        degenerate = coun(self.model, self.train, self.split, MethodConfig('coun', lam=0.0), self.config(1))
        self.assertEqual(flops_of_run(degenerate), flops_of_run(plain))
