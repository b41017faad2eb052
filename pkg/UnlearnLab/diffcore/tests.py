"""
Файл: tests.py
Описание: Тесты для приложения diffcore

Проверяются:
- примитивы прямого прохода и их ошибки
- обратный проход (аналитические примеры, конечные разности, детерминизм)
- граф: топологический порядок и повторный прогон
- шаг SGD (включая маски) и расписания learning rate
"""

import numpy as np
from django.test import SimpleTestCase

from diffcore.exceptions import DomainError, GraphError, ShapeError
from diffcore.services.optim import OptimizerState, lr_schedule, mean_abs_parameter, sgd_step
from diffcore.services.tensor import (
    Graph, Tensor, absolute, backward, l2_normalize_rows, log, log_softmax_rows,
    matmul, mean, relu, square, tensor_sum,
)
from diffcore.utils.gradcheck import coordinate_error, finite_diff_check, gradient_report


class PrimitiveTests(SimpleTestCase):
    """Примитивы прямого прохода"""

    def test_matmul_identity(self):
        out = matmul(Tensor([[1, 0], [0, 1]]), Tensor([[2], [3]]))
        np.testing.assert_array_equal(out.data, [[2.0], [3.0]])

    def test_normalize_three_four_five(self):
        out = l2_normalize_rows(Tensor([[3.0, 4.0]]))
        np.testing.assert_allclose(out.data, [[0.6, 0.8]], atol=1e-15)

    def test_relu(self):
        np.testing.assert_array_equal(relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])

    def test_normalized_rows_have_unit_norm(self):
        rng = np.random.default_rng(0)
        out = l2_normalize_rows(Tensor(rng.normal(size=(6, 5))))
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=1), 1.0, atol=1e-12)

    def test_zero_row_stays_zero(self):
        x = Tensor([[0.0, 0.0], [1.0, 1.0]], requires_grad=True)
        loss = tensor_sum(l2_normalize_rows(x))
        backward(loss)
        np.testing.assert_array_equal(l2_normalize_rows(x).data[0], [0.0, 0.0])
        np.testing.assert_array_equal(x.grad[0], [0.0, 0.0])

    def test_log_softmax_rows_sum_to_one(self):
        out = log_softmax_rows(Tensor([[1000.0, 0.0, -1000.0], [1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(np.exp(out.data).sum(axis=1), 1.0, atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with self.assertRaises(ShapeError) as ctx:
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 1))))
        self.assertIn('(2, 3)', str(ctx.exception))
        self.assertIn('(2, 1)', str(ctx.exception))

    def test_log_of_nonpositive_is_domain_error(self):
        with self.assertRaises(DomainError):
            log(Tensor([1.0, 0.0]))

    def test_abs_subgradient_at_zero(self):
        x = Tensor([-2.0, 0.0, 3.0], requires_grad=True)
        backward(tensor_sum(absolute(x)))
        np.testing.assert_array_equal(x.grad, [-1.0, 0.0, 1.0])


class BackwardTests(SimpleTestCase):
    """Обратный проход"""

    def test_square_derivative(self):
        theta = Tensor(3.0, requires_grad=True)
        backward(square(theta))
        self.assertEqual(float(theta.grad), 6.0)

    def test_linear_sum_gradient(self):
        weight = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        x = Tensor([[1.0], [2.0]])
        backward(tensor_sum(matmul(weight, x)))
        np.testing.assert_array_equal(weight.grad, [[1.0, 2.0]] * 3)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with self.assertRaises(GraphError):
            backward(relu(x))

    def test_two_layer_net_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(4, 5)))
        w1 = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        b1 = Tensor(rng.normal(size=3), requires_grad=True)
        w2 = Tensor(rng.normal(size=(3, 2)), requires_grad=True)

        def loss_fn():
            hidden = relu(matmul(x, w1) + b1)
            z = l2_normalize_rows(matmul(hidden, w2))
            return mean(z) + mean(log_softmax_rows(matmul(hidden, w2)))

        self.assertLess(finite_diff_check(loss_fn, [w1, b1, w2]), 1e-5)

    def test_gradcheck_square(self):
        theta = Tensor(2.0, requires_grad=True)
        self.assertLess(finite_diff_check(lambda: square(theta), [theta]), 1e-8)

    def test_coordinate_error_is_not_diluted_by_large_coordinates(self):
        g_ad = np.array([1000.0, 0.0])
        g_fd = np.array([1000.0, 2e-3])
        self.assertLess(np.linalg.norm(g_ad - g_fd) / np.linalg.norm(g_fd), 1e-5)
        self.assertAlmostEqual(coordinate_error(g_ad, g_fd), 2e-3, places=12)

    def test_report_has_both_measures(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(size=(3, 4)))
        w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        report = gradient_report(lambda: mean(log_softmax_rows(matmul(x, w))), [w])
        self.assertLess(report.normwise, 1e-5)
        self.assertLess(report.coordinatewise, 1e-5)
        self.assertEqual(report.worst, max(report.normwise, report.coordinatewise))

    def test_bitwise_determinism(self):
        def run():
            rng = np.random.default_rng(123)
            w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
            x = Tensor(rng.normal(size=(5, 4)))
            loss = mean(log_softmax_rows(matmul(x, w)))
            backward(loss)
            return loss.data.copy(), w.grad.copy()

        first, second = run(), run()
        self.assertEqual(first[0].tobytes(), second[0].tobytes())
        self.assertEqual(first[1].tobytes(), second[1].tobytes())

    def test_leaf_gradients_accumulate(self):
        theta = Tensor(1.5, requires_grad=True)
        backward(square(theta))
        backward(square(theta))
        self.assertEqual(float(theta.grad), 6.0)


class GraphTests(SimpleTestCase):
    """Граф вычислений"""

    def _build(self):
        rng = np.random.default_rng(3)
        w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = Tensor(rng.normal(size=(4, 3)))
        return w, mean(square(relu(matmul(x, w))))

    def test_inputs_precede_consumers(self):
        _, loss = self._build()
        graph = Graph.trace(loss)
        for record in graph.nodes:
            for input_id in record.input_ids:
                self.assertLess(input_id, record.node_id)

    def test_replay_is_bitwise(self):
        w, loss = self._build()
        graph = backward(loss, seed=11)
        values = graph.replay()
        self.assertEqual(graph.seed, 11)
        self.assertEqual(values[loss.node_id].tobytes(), loss.data.tobytes())
        self.assertIn(w, graph.leaves)


class OptimizerTests(SimpleTestCase):
    """Шаг SGD"""

    def _step(self, theta, grad, lr, momentum=0.0, state=None):
        params = {'theta': theta}
        state = state or OptimizerState.for_parameters(params, lr, momentum=momentum)
        sgd_step(params, {'theta': np.array(grad, dtype=float)}, state)
        return state

    def test_plain_step(self):
        theta = Tensor(1.0)
        self._step(theta, 1.0, 0.1)
        self.assertAlmostEqual(float(theta.data), 0.9, places=15)

    def test_zero_gradient_keeps_parameter(self):
        theta = Tensor(1.0)
        self._step(theta, 0.0, 0.1)
        self.assertEqual(float(theta.data), 1.0)

    def test_momentum_recurrence(self):
        theta = Tensor(0.0)
        state = self._step(theta, 1.0, 0.1, momentum=0.9)
        self.assertAlmostEqual(float(theta.data), -0.1, places=12)
        self._step(theta, 1.0, 0.1, state=state)
        self.assertAlmostEqual(float(theta.data), -0.29, places=12)

    def test_weight_decay_term(self):
        theta = Tensor(2.0)
        params = {'theta': theta}
        state = OptimizerState.for_parameters(params, 0.5, momentum=0.0, weight_decay=0.1)
        sgd_step(params, {'theta': np.array(0.0)}, state)
        self.assertAlmostEqual(float(theta.data), 2.0 - 0.5 * 0.2, places=12)

    def test_mask_freezes_unmasked_coordinates(self):
        rng = np.random.default_rng(5)
        theta = Tensor(rng.normal(size=(3, 3)))
        before = theta.data.copy()
        mask = np.zeros((3, 3))
        mask[0, :] = 1.0
        params = {'w': theta}
        state = OptimizerState.for_parameters(params, 0.1, momentum=0.9)
        for _ in range(3):
            sgd_step(params, {'w': rng.normal(size=(3, 3))}, state, masks={'w': mask})
        np.testing.assert_array_equal(theta.data[1:], before[1:])
        np.testing.assert_array_equal(state.velocity['w'][1:], 0.0)
        self.assertFalse(np.array_equal(theta.data[0], before[0]))

    def test_shape_mismatch(self):
        params = {'w': Tensor(np.ones((2, 2)))}
        state = OptimizerState.for_parameters(params, 0.1)
        with self.assertRaises(ShapeError):
            sgd_step(params, {'w': np.ones(3)}, state)

    def test_invalid_state(self):
        with self.assertRaises(ValueError):
            OptimizerState(learning_rate=0.1, momentum=1.0)
        with self.assertRaises(ValueError):
            OptimizerState(learning_rate=-0.1)

    def test_zero_learning_rate_freezes_parameters(self):
        rng = np.random.default_rng(9)
        theta = Tensor(rng.normal(size=(2, 3)))
        before = theta.data.copy()
        params = {'w': theta}
        state = OptimizerState.for_parameters(params, 0.0, momentum=0.9, weight_decay=5e-4)
        for _ in range(3):
            sgd_step(params, {'w': rng.normal(size=(2, 3))}, state)
        np.testing.assert_array_equal(theta.data, before)

    def test_mean_abs_parameter(self):
        value = mean_abs_parameter([Tensor([1.0, -3.0]), Tensor([[2.0, 0.0]])])
        self.assertEqual(value, 1.5)


class ScheduleTests(SimpleTestCase):
    """Расписания learning rate"""

    def test_cosine_endpoints(self):
        self.assertAlmostEqual(lr_schedule('cosine', 0, 50, 0.05), 0.05, places=15)
        self.assertEqual(lr_schedule('cosine', 50, 50, 0.05), 1e-4)

    def test_cosine_monotone_and_bounded(self):
        values = [lr_schedule('cosine', e, 50, 0.05) for e in range(51)]
        for earlier, later in zip(values, values[1:]):
            self.assertLessEqual(later, earlier)
        for value in values:
            self.assertGreaterEqual(value, 1e-4)
            self.assertLessEqual(value, 0.05)

    def test_multistep_milestones(self):
        self.assertAlmostEqual(lr_schedule('multistep', 100, 182, 0.1), 0.01, places=15)
        self.assertEqual(lr_schedule('multistep', 90, 182, 0.1), 0.1)
        self.assertAlmostEqual(lr_schedule('multistep', 137, 182, 0.1), 0.001, places=15)

    def test_epoch_past_total_rejected(self):
        with self.assertRaises(ValueError):
            lr_schedule('cosine', 51, 50, 0.05)

    def test_unknown_kind_rejected(self):
        with self.assertRaises(ValueError):
            lr_schedule('linear', 0, 10, 0.1)
