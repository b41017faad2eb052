"""
Файл: tensor.py
Описание: Плотные f64 тензоры с обратным автодифференцированием

Этот файл содержит:
- Tensor: данные (numpy float64), флаг requires_grad, градиент
- Graph: топологически упорядоченные записи операций (для backward и replay)
- Примитивы: matmul, add, sub, mul, scale, neg, relu, exp, log, abs, square, reshape,
  sum, mean, transpose, l2_normalize_rows, log_softmax_rows

Порядок узлов определяется счетчиком создания: вход всегда создан раньше
потребителя, поэтому сортировка по node_id дает топологический порядок,
а накопление градиентов идет в фиксированном порядке (побитовая воспроизводимость).
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diffcore.exceptions import DomainError, GraphError, ShapeError

logger = logging.getLogger(__name__)

# Глобальный счетчик узлов (next() атомарен под GIL)
_node_ids = itertools.count()


class Tensor:
    """
    Плотный f64 тензор, участвующий в графе вычислений

    Args:
        data: массив или вложенный список чисел
        requires_grad: накапливать ли градиент для этого листа
        name: необязательное имя (для параметров модели)
    """

    __slots__ = (
        'data', 'requires_grad', 'grad', 'name',
        'op', 'inputs', 'node_id', '_forward', '_backward',
    )

    def __init__(self, data, requires_grad=False, name=None, _copy=True):
        array = np.array(data, dtype=np.float64) if _copy else data
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self.op = 'leaf'
        self.inputs = ()
        self.node_id = next(_node_ids)
        self._forward = None
        self._backward = None

    # ------------------------------------------------------------------
    # Свойства
    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self.op == 'leaf'

    def item(self):
        if self.data.size != 1:
            raise GraphError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # Операторы
    # ------------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("only division by a python scalar is supported")
        return scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(value):
    """Оборачивает константу в Tensor без градиента"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def _apply(op, inputs, forward, grads):
    """
    Создает узел графа

    Args:
        op: имя операции
        inputs: входные тензоры
        forward: f(*datas) -> ndarray
        grads: f(g, y, *datas) -> tuple градиентов по входам (None = нет вклада)
    """
    datas = [t.data for t in inputs]
    out_data = forward(*datas)
    if not np.all(np.isfinite(out_data)):
        raise DomainError(f"{op}: non-finite result")
    out = Tensor(out_data, requires_grad=any(t.requires_grad for t in inputs), _copy=False)
    out.op = op
    out.inputs = tuple(inputs)
    out._forward = forward

    if out.requires_grad:
        def _backward():
            partials = grads(out.grad, out.data, *datas)
            for tensor, g in zip(inputs, partials):
                if tensor.requires_grad and g is not None:
                    tensor._accumulate(g)
        out._backward = _backward
    return out


# ----------------------------------------------------------------------
# Примитивы
# ----------------------------------------------------------------------
def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape)
    return _apply(
        'matmul', (a, b),
        lambda x, w: x @ w,
        lambda g, y, x, w: (g @ w.T, x.T @ g),
    )


def _broadcast_kind(op, a, b):
    """Разрешенная трансляция: одинаковые формы, строка по батчу или скаляр"""
    if a.shape == b.shape:
        return 'same'
    if b.data.ndim == 0 or b.size == 1 and b.data.ndim <= 1:
        return 'scalar'
    if a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        return 'row'
    raise ShapeError(op, a.shape, b.shape)


def _reduce_like(g, kind, shape):
    if kind == 'same':
        return g
    if kind == 'row':
        return g.sum(axis=0)
    return np.full(shape, g.sum())


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    kind = _broadcast_kind('add', a, b)
    return _apply(
        'add', (a, b),
        lambda x, y: x + y,
        lambda g, out, x, y: (g, _reduce_like(g, kind, y.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    kind = _broadcast_kind('sub', a, b)
    return _apply(
        'sub', (a, b),
        lambda x, y: x - y,
        lambda g, out, x, y: (g, -_reduce_like(g, kind, y.shape)),
    )


def mul(a, b):
    """Поэлементное произведение (одинаковые формы или скаляр справа)"""
    a, b = as_tensor(a), as_tensor(b)
    kind = _broadcast_kind('mul', a, b)
    return _apply(
        'mul', (a, b),
        lambda x, y: x * y,
        lambda g, out, x, y: (g * y, _reduce_like(g * x, kind, y.shape)),
    )


def scale(a, c):
    """Умножение на python-скаляр"""
    c = float(c)
    return _apply(
        'scale', (as_tensor(a),),
        lambda x: x * c,
        lambda g, y, x: (g * c,),
    )


def neg(a):
    return _apply('neg', (as_tensor(a),), lambda x: -x, lambda g, y, x: (-g,))


def reshape(a, shape):
    a = as_tensor(a)
    shape = tuple(shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError('reshape', a.shape, shape)
    return _apply('reshape', (a,), lambda x: x.reshape(shape).copy(), lambda g, y, x: (g.reshape(x.shape),))


def transpose(a):
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError('transpose', a.shape, ('2-D',))
    return _apply('transpose', (a,), lambda x: x.T.copy(), lambda g, y, x: (g.T,))


def relu(a):
    return _apply(
        'relu', (as_tensor(a),),
        lambda x: np.maximum(x, 0.0),
        lambda g, y, x: (g * (x > 0.0),),
    )


def exp(a):
    return _apply('exp', (as_tensor(a),), np.exp, lambda g, y, x: (g * y,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError(f"log of nonpositive value (min={a.data.min()!r})")
    return _apply('log', (a,), np.log, lambda g, y, x: (g / x,))


def absolute(a):
    """|x|, субградиент sign(x) с sign(0) = 0"""
    return _apply('abs', (as_tensor(a),), np.abs, lambda g, y, x: (g * np.sign(x),))


def square(a):
    return _apply('square', (as_tensor(a),), np.square, lambda g, y, x: (2.0 * x * g,))


def tensor_sum(a, axis=None):
    """Сумма всех элементов (axis=None) или по оси с сохранением размерности"""
    a = as_tensor(a)
    if axis is None:
        return _apply(
            'sum', (a,),
            lambda x: np.asarray(x.sum()),
            lambda g, y, x: (np.full(x.shape, float(g)),),
        )
    return _apply(
        f'sum[{axis}]', (a,),
        lambda x: x.sum(axis=axis, keepdims=True),
        lambda g, y, x: (np.broadcast_to(g, x.shape).copy(),),
    )


def mean(a):
    a = as_tensor(a)
    return scale(tensor_sum(a), 1.0 / a.size)


def l2_normalize_rows(a):
    """
    Нормировка строк на единичную евклидову длину

    Нулевая строка возвращается без изменений (градиент через нее нулевой).
    """
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError('l2_normalize_rows', a.shape, ('2-D',))

    def _norms(x):
        n = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
        return n, n > 0.0

    def forward(x):
        n, nonzero = _norms(x)
        return np.where(nonzero, x / np.where(nonzero, n, 1.0), 0.0)

    def grads(g, y, x):
        n, nonzero = _norms(x)
        safe = np.where(nonzero, n, 1.0)
        projected = (g - y * np.sum(y * g, axis=1, keepdims=True)) / safe
        return (np.where(nonzero, projected, 0.0),)

    return _apply('l2_normalize_rows', (a,), forward, grads)


def log_softmax_rows(a):
    """Построчный log-softmax со стабилизацией (вычитание максимума строки)"""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError('log_softmax_rows', a.shape, ('2-D',))

    def forward(x):
        shifted = x - x.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def grads(g, y, x):
        return (g - np.exp(y) * g.sum(axis=1, keepdims=True),)

    return _apply('log_softmax_rows', (a,), forward, grads)


# ----------------------------------------------------------------------
# Граф
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class NodeRecord:
    """Запись операции: вид, идентификаторы входов, выходной тензор"""
    node_id: int
    op: str
    input_ids: Tuple[int, ...]
    output: Tensor


class Graph:
    """
    Топологически упорядоченный граф, достижимый из заданного выхода

    Args:
        nodes: записи в порядке создания (каждый вход раньше потребителя)
        seed: идентификатор RNG-состояния, при котором граф построен
    """

    def __init__(self, nodes: List[NodeRecord], seed: Optional[int] = None):
        self.nodes = nodes
        self.seed = seed

    @classmethod
    def trace(cls, root: Tensor, seed: Optional[int] = None) -> 'Graph':
        seen: Dict[int, Tensor] = {}
        stack = [root]
        while stack:
            node = stack.pop()
            if node.node_id in seen:
                continue
            seen[node.node_id] = node
            stack.extend(node.inputs)
        ordered = sorted(seen.values(), key=lambda t: t.node_id)
        records = [
            NodeRecord(t.node_id, t.op, tuple(i.node_id for i in t.inputs), t)
            for t in ordered
        ]
        return cls(records, seed=seed)

    @property
    def leaves(self) -> List[Tensor]:
        return [r.output for r in self.nodes if r.output.is_leaf]

    def replay(self) -> Dict[int, np.ndarray]:
        """Повторный прямой проход от текущих значений листьев"""
        values: Dict[int, np.ndarray] = {}
        for record in self.nodes:
            tensor = record.output
            if tensor.is_leaf:
                values[record.node_id] = tensor.data
            else:
                values[record.node_id] = tensor._forward(*[values[i] for i in record.input_ids])
        return values


def backward(loss: Tensor, seed: Optional[int] = None) -> Graph:
    """
    Обратный проход: каждый лист с requires_grad получает d loss / d leaf

    Градиенты листьев накапливаются (как в PyTorch), поэтому перед шагом
    обучения их нужно обнулить.
    """
    if loss.size != 1:
        raise GraphError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("backward() on a loss that does not require grad")

    graph = Graph.trace(loss, seed=seed)
    for record in graph.nodes:
        if not record.output.is_leaf:
            record.output.grad = None
    loss.grad = np.ones_like(loss.data)

    for record in reversed(graph.nodes):
        tensor = record.output
        if tensor._backward is not None and tensor.grad is not None:
            tensor._backward()
    return graph


def gradients(params: Sequence[Tensor]) -> List[np.ndarray]:
    """Градиенты параметров (нули для параметров вне графа)"""
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]

