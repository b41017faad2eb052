"""
Файл: tests.py
Описание: Тесты для приложения network

Проверяются:
- инициализация (детерминизм, init_scale, разброс весов)
- признаки, логиты, предсказания и правило разрыва ничьих
- negate_layer и снимки
- чекпоинты MULAB и подсчет FLOPs
"""

import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from diffcore.exceptions import ShapeError
from network.services.model import (
    ModelConfig, embed, features, head_scores, init_model, logits,
    negate_layer, predict, snapshot,
)
from network.utils.checkpoint import MAGIC, decode_tensors, encode_tensors, load_checkpoint, save_checkpoint
from network.utils.flops import PassCounters, dense_flops, extractor_flops, flops_breakdown, training_flops


def small_config(**overrides):
    params = dict(input_dim=5, num_classes=3, hidden_dims=(7,), repr_dim=4, seed=0)
    params.update(overrides)
    return ModelConfig(**params)


class InitTests(SimpleTestCase):
    """Инициализация"""

    def test_same_seed_bitwise(self):
        self.assertTrue(init_model(small_config()).equals(init_model(small_config())))

    def test_other_seed_differs(self):
        self.assertFalse(init_model(small_config()).equals(init_model(small_config(seed=1))))

    def test_zero_scale_gives_zero_weights(self):
        model = init_model(small_config(init_scale=0.0))
        for _, tensor in model.parameters():
            self.assertTrue(np.all(tensor.data == 0.0))

    def test_fan_in_std(self):
        model = init_model(ModelConfig(input_dim=100, num_classes=2, hidden_dims=(400,), repr_dim=8))
        std = model.params['extractor.0.weight'].data.std()
        self.assertAlmostEqual(std / np.sqrt(2.0 / 100), 1.0, delta=0.1)

    def test_parameter_names_and_shapes(self):
        model = init_model(small_config(projection=(6, 2)))
        names = [name for name, _ in model.parameters()]
        self.assertEqual(names, [
            'extractor.0.weight', 'extractor.0.bias', 'extractor.1.weight', 'extractor.1.bias',
            'head.weight', 'head.bias',
            'projection.0.weight', 'projection.0.bias', 'projection.1.weight', 'projection.1.bias',
        ])
        self.assertEqual(model.params['extractor.1.weight'].shape, (7, 4))
        self.assertEqual(model.params['head.weight'].shape, (4, 3))

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            small_config(repr_dim=1)
        with self.assertRaises(ValueError):
            small_config(hidden_dims=(0,))


class ForwardTests(SimpleTestCase):
    """Прямые проходы"""

    def setUp(self):
        self.X = np.random.default_rng(0).normal(size=(6, 5))

    def test_zero_model_gives_zero_features(self):
        model = init_model(small_config(init_scale=0.0))
        np.testing.assert_array_equal(features(model, self.X, normalized=True).data, 0.0)

    def test_zero_head_predicts_class_zero(self):
        model = init_model(small_config())
        model.params['head.weight'].data[:] = 0.0
        np.testing.assert_array_equal(predict(model, self.X), 0)

    def test_identity_layer_is_proportional(self):
        model = init_model(ModelConfig(input_dim=3, num_classes=3, hidden_dims=(), repr_dim=3))
        model.params['extractor.0.weight'].data = 2.0 * np.eye(3)
        X = np.abs(self.X[:, :3]) + 0.1
        np.testing.assert_allclose(features(model, X).data, 2.0 * X)

    def test_head_selecting_coordinate(self):
        model = init_model(ModelConfig(input_dim=3, num_classes=3, hidden_dims=(), repr_dim=3))
        model.params['extractor.0.weight'].data = np.eye(3)
        model.params['head.weight'].data = np.eye(3)
        X = np.abs(self.X[:, :3])
        np.testing.assert_array_equal(predict(model, X), X.argmax(axis=1))

    def test_normalized_rows_unit(self):
        model = init_model(small_config())
        Z = features(model, self.X + 3.0, normalized=True).data
        norms = np.linalg.norm(Z, axis=1)
        nonzero = norms > 0
        np.testing.assert_allclose(norms[nonzero], 1.0, atol=1e-12)

    def test_predict_invariant_to_logit_scaling(self):
        model = init_model(small_config())
        scores = head_scores(model, self.X)
        np.testing.assert_array_equal(np.argmax(scores * 3.7, axis=1), predict(model, self.X))
        np.testing.assert_array_equal(np.argmax(scores + 11.0, axis=1), predict(model, self.X))

    def test_numpy_path_matches_graph_path(self):
        model = init_model(small_config())
        Z = features(model, self.X)
        self.assertEqual(Z.data.tobytes(), embed(model, self.X).tobytes())
        self.assertEqual(logits(model, Z).data.tobytes(), head_scores(model, self.X).tobytes())

    def test_dimension_mismatch(self):
        model = init_model(small_config())
        with self.assertRaises(ShapeError):
            features(model, np.zeros((2, 4)))
        with self.assertRaises(ShapeError):
            logits(model, np.zeros((2, 5)))

    def test_projection_output_dim(self):
        model = init_model(small_config(projection=(6, 2)))
        self.assertEqual(features(model, self.X, project=True).shape, (6, 2))
        self.assertEqual(features(model, self.X).shape, (6, 4))


class SurgeryTests(SimpleTestCase):
    """negate_layer и снимки"""

    def test_negate_twice_is_identity(self):
        model = init_model(small_config())
        self.assertTrue(negate_layer(negate_layer(model, 0), 0).equals(model))

    def test_negate_keeps_bias_and_original(self):
        model = init_model(small_config())
        model.params['extractor.0.bias'].data[:] = 0.5
        negated = negate_layer(model, 0)
        np.testing.assert_array_equal(negated.params['extractor.0.weight'].data, -model.params['extractor.0.weight'].data)
        np.testing.assert_array_equal(negated.params['extractor.0.bias'].data, 0.5)
        self.assertFalse(negated.equals(model))

    def test_negate_zero_layer_unchanged(self):
        model = init_model(small_config(init_scale=0.0))
        np.testing.assert_array_equal(negate_layer(model, 0).params['extractor.0.weight'].data, 0.0)

    def test_negate_changes_predictions(self):
        model = init_model(small_config(seed=4))
        X = np.random.default_rng(1).normal(size=(50, 5))
        self.assertFalse(np.array_equal(predict(model, X), predict(negate_layer(model, 0), X)))

    def test_negate_bad_index(self):
        with self.assertRaises(IndexError):
            negate_layer(init_model(small_config()), 2)

    def test_snapshot_isolation(self):
        model = init_model(small_config())
        frozen = snapshot(model)
        model.params['head.weight'].data = model.params['head.weight'].data + 1.0
        self.assertFalse(frozen.equals(model))
        self.assertTrue(frozen.equals(init_model(small_config())))


class CheckpointTests(SimpleTestCase):
    """Формат MULAB"""

    def test_round_trip_bitwise(self):
        model = init_model(small_config(projection=(3, 2)))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(model, Path(tmp) / 'ckpt' / 'model.bin')
            loaded = load_checkpoint(path, model.config)
        self.assertTrue(loaded.equals(model))

    def test_header_layout(self):
        payload = encode_tensors({'w': np.array([[1.0, 2.0]])})
        self.assertEqual(payload[:5], MAGIC)
        self.assertEqual(struct.unpack_from('<H', payload, 5), (1,))
        self.assertEqual(struct.unpack_from('<I', payload, 7), (1,))
        self.assertEqual(payload[11:12], b'w')
        self.assertEqual(struct.unpack_from('<3I', payload, 12), (2, 1, 2))
        self.assertEqual(struct.unpack_from('<2d', payload, 24), (1.0, 2.0))

    def test_bad_magic(self):
        with self.assertRaises(ValueError):
            decode_tensors(b'NOPE!\x01\x00')

    def test_truncated(self):
        payload = encode_tensors({'w': np.ones(4)})
        with self.assertRaises(ValueError):
            decode_tensors(payload[:-3])


class FlopsTests(SimpleTestCase):
    """Подсчет FLOPs"""

    def test_dense_layer(self):
        self.assertEqual(dense_flops(3, 2), 2 * 3 * 2 + 2 + 2)
        self.assertEqual(dense_flops(3, 2, activation=False), 14)

    def test_linear_in_counters(self):
        cfg = ModelConfig(input_dim=8, num_classes=4)
        single = PassCounters(supervised_rows=640, view_rows=640, cl_pairs=10 * 64 * 64)
        double = single.add(single)
        self.assertEqual(training_flops(cfg, double), 2 * training_flops(cfg, single))

    def test_extra_view_pass_ratio(self):
        cfg = ModelConfig(input_dim=8, num_classes=4)
        ft = flops_breakdown(cfg, PassCounters(supervised_rows=640))
        coun = flops_breakdown(cfg, PassCounters(supervised_rows=640, view_rows=640, cl_pairs=10 * 64 * 64))
        self.assertGreater(coun.passes / ft.passes, 1.0)
        self.assertLessEqual(coun.passes / ft.passes, 2.0)

    def test_second_view_is_charged_forward_and_backward(self):
        cfg = ModelConfig(input_dim=8, num_classes=4)
        ft = flops_breakdown(cfg, PassCounters(supervised_rows=64))
        coun = flops_breakdown(cfg, PassCounters(supervised_rows=64, view_rows=64, cl_pairs=64 * 64))
        self.assertEqual(coun.passes - ft.passes, 3 * 64 * extractor_flops(cfg))
        self.assertEqual(coun.passes - ft.passes, 2217984)

    def test_totals_include_loss_arithmetic(self):
        cfg = ModelConfig(input_dim=8, num_classes=4)
        ft = PassCounters(supervised_rows=64)
        coun = PassCounters(supervised_rows=64, view_rows=64, cl_pairs=64 * 64)
        self.assertEqual(training_flops(cfg, ft), 2247552)
        self.assertEqual(training_flops(cfg, coun), 5000448)
        self.assertEqual(flops_breakdown(cfg, coun).losses, 3 * (64 * 22 + 178304))
        self.assertGreater(training_flops(cfg, coun) / training_flops(cfg, ft), 2.0)

    def test_extractor_sum(self):
        cfg = ModelConfig(input_dim=8, num_classes=4)
        self.assertEqual(extractor_flops(cfg), 1152 + 8320 + 2080)
