"""
Файл: model.py
Описание: Экстрактор признаков, голова классификатора и проекционная голова

Этот файл содержит:
- ModelConfig: архитектура (hidden_dims, D, init_scale, seed, projection)
- Model: именованные параметры в фиксированном порядке
- init_model(): Kaiming-uniform инициализация, нулевые bias
- features(), logits(), predict(): прямые проходы
- embed(), head_scores(): те же проходы на numpy без графа (для оценки)
- negate_layer(), snapshot()

Имена параметров: extractor.{i}.weight/bias, head.weight/bias,
projection.{0,1}.weight/bias. Веса хранятся как (fan_in, fan_out), проход X @ W + b.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from datagen.utils.rng import derive_rng
from diffcore.exceptions import ShapeError
from diffcore.services.tensor import Tensor, as_tensor, l2_normalize_rows, matmul, relu

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    """
    Архитектура модели

    Args:
        input_dim: размерность входа
        num_classes: K
        hidden_dims: скрытые слои экстрактора
        repr_dim: D, размерность представлений
        init_scale: множитель границы инициализации
        seed: seed инициализации
        projection: (hidden, out) проекционной головы или None
    """
    input_dim: int
    num_classes: int
    hidden_dims: Tuple[int, ...] = (64, 64)
    repr_dim: int = 16
    init_scale: float = 1.0
    seed: int = 0
    projection: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, 'hidden_dims', tuple(int(h) for h in self.hidden_dims))
        if self.projection is not None:
            object.__setattr__(self, 'projection', tuple(int(p) for p in self.projection))
            if len(self.projection) != 2 or min(self.projection) < 1:
                raise ValueError(f"projection must be (hidden, out) with positive dims, got {self.projection}")
        if self.repr_dim < 2:
            raise ValueError(f"repr_dim must be >= 2, got {self.repr_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be positive, got {self.hidden_dims}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError(f"bad input_dim/num_classes: {self.input_dim}/{self.num_classes}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {self.init_scale}")

    @property
    def extractor_dims(self) -> Tuple[int, ...]:
        """Цепочка размерностей input_dim -> hidden... -> D"""
        return (self.input_dim, *self.hidden_dims, self.repr_dim)

    def with_seed(self, seed: int) -> 'ModelConfig':
        return ModelConfig(
            self.input_dim, self.num_classes, self.hidden_dims, self.repr_dim,
            self.init_scale, seed, self.projection,
        )

    def to_dict(self) -> dict:
        return {
            'input_dim': self.input_dim,
            'num_classes': self.num_classes,
            'hidden_dims': list(self.hidden_dims),
            'repr_dim': self.repr_dim,
            'init_scale': self.init_scale,
            'seed': self.seed,
            'projection': list(self.projection) if self.projection else None,
        }


@dataclass
class Model:
    """
    MLP-экстрактор (relu на каждом слое), линейная голова и
    необязательная 2-слойная проекционная голова (только для CL)
    """
    config: ModelConfig
    params: Dict[str, Tensor] = field(default_factory=dict)

    @property
    def num_extractor_layers(self) -> int:
        return len(self.config.extractor_dims) - 1

    @property
    def has_projection(self) -> bool:
        return self.config.projection is not None

    def parameters(self) -> List[Tuple[str, Tensor]]:
        """Пары (имя, Tensor) в фиксированном порядке"""
        return list(self.params.items())

    def tensors(self) -> List[Tensor]:
        return list(self.params.values())

    def extractor_layers(self) -> Iterator[Tuple[Tensor, Tensor]]:
        for i in range(self.num_extractor_layers):
            yield self.params[f'extractor.{i}.weight'], self.params[f'extractor.{i}.bias']

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        if list(state) != list(self.params):
            raise ValueError(f"state keys {list(state)} do not match model {list(self.params)}")
        for name, values in state.items():
            if values.shape != self.params[name].shape:
                raise ShapeError(f'load_state_dict[{name}]', self.params[name].shape, values.shape)
            self.params[name].data = np.array(values, dtype=np.float64)

    def equals(self, other: 'Model') -> bool:
        """Побитовое совпадение параметров"""
        if list(self.params) != list(other.params):
            return False
        return all(
            self.params[n].data.tobytes() == other.params[n].data.tobytes()
            for n in self.params
        )


def _layer_shapes(cfg: ModelConfig) -> List[Tuple[str, int, int]]:
    dims = cfg.extractor_dims
    shapes = [(f'extractor.{i}', dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    shapes.append(('head', cfg.repr_dim, cfg.num_classes))
    if cfg.projection is not None:
        hidden, out = cfg.projection
        shapes.append(('projection.0', cfg.repr_dim, hidden))
        shapes.append(('projection.1', hidden, out))
    return shapes


def init_model(cfg: ModelConfig) -> Model:
    """
    Новая модель: веса U(-b, b), b = sqrt(6 / fan_in) * init_scale
    (std = sqrt(2 / fan_in) * init_scale), bias = 0
    """
    rng = derive_rng(cfg.seed, 'init_model')
    params: Dict[str, Tensor] = {}
    for prefix, fan_in, fan_out in _layer_shapes(cfg):
        bound = math.sqrt(6.0 / fan_in) * cfg.init_scale
        weight = rng.uniform(-1.0, 1.0, size=(fan_in, fan_out)) * bound
        params[f'{prefix}.weight'] = Tensor(weight, requires_grad=True, name=f'{prefix}.weight')
        params[f'{prefix}.bias'] = Tensor(np.zeros(fan_out), requires_grad=True, name=f'{prefix}.bias')
    logger.debug(f"Model initialized: dims={cfg.extractor_dims}, K={cfg.num_classes}, seed={cfg.seed}")
    return Model(cfg, params)


def snapshot(model: Model) -> Model:
    """Глубокая копия: последующее обучение не меняет снимок"""
    params = {
        name: Tensor(p.data, requires_grad=p.requires_grad, name=name)
        for name, p in model.params.items()
    }
    return Model(model.config, params)


def _check_input(model: Model, X, expected: int, op: str):
    if X.data.ndim != 2 or X.shape[1] != expected:
        raise ShapeError(op, X.shape, (None, expected))


def features(model: Model, X, normalized: bool = False, project: bool = False) -> Tensor:
    """
    Z = f(X), N x D (или выход проекционной головы при project=True)

    normalized=True возвращает строки единичной длины (нулевые строки остаются нулевыми).
    """
    X = as_tensor(X)
    _check_input(model, X, model.config.input_dim, 'features')
    h = X
    for weight, bias in model.extractor_layers():
        h = relu(matmul(h, weight) + bias)
    if project and model.has_projection:
        h = project_features(model, h)
    return l2_normalize_rows(h) if normalized else h


def project_features(model: Model, Z: Tensor) -> Tensor:
    """Проекционная голова g: D -> hidden (relu) -> out"""
    p = model.params
    hidden = relu(matmul(Z, p['projection.0.weight']) + p['projection.0.bias'])
    return matmul(hidden, p['projection.1.weight']) + p['projection.1.bias']


def logits(model: Model, Z) -> Tensor:
    """Логиты головы h(Z) = Z @ W + b, N x K"""
    Z = as_tensor(Z)
    _check_input(model, Z, model.config.repr_dim, 'logits')
    return matmul(Z, model.params['head.weight']) + model.params['head.bias']


def embed(model: Model, X: np.ndarray, project: bool = False) -> np.ndarray:
    """Признаки f(X) на numpy, без построения графа (те же операции, что в features)"""
    h = np.asarray(X, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.config.input_dim:
        raise ShapeError('embed', h.shape, (None, model.config.input_dim))
    for weight, bias in model.extractor_layers():
        h = np.maximum(h @ weight.data + bias.data, 0.0)
    if project and model.has_projection:
        p = model.params
        h = np.maximum(h @ p['projection.0.weight'].data + p['projection.0.bias'].data, 0.0)
        h = h @ p['projection.1.weight'].data + p['projection.1.bias'].data
    return h


def head_scores(model: Model, X: np.ndarray) -> np.ndarray:
    """Логиты на numpy, N x K"""
    return embed(model, X) @ model.params['head.weight'].data + model.params['head.bias'].data


def predict(model: Model, X) -> np.ndarray:
    """argmax логитов; при равенстве - меньший номер класса"""
    data = X.data if isinstance(X, Tensor) else X
    return np.argmax(head_scores(model, data), axis=1)


def negate_layer(model: Model, layer_index: int) -> Model:
    """Копия модели с весом слоя экстрактора layer_index, умноженным на -1 (bias не трогается)"""
    if not 0 <= layer_index < model.num_extractor_layers:
        raise IndexError(f"layer index {layer_index} outside [0, {model.num_extractor_layers})")
    copy = snapshot(model)
    weight = copy.params[f'extractor.{layer_index}.weight']
    weight.data = -weight.data
    return copy


def negate_layers(model: Model, layer_indices: Sequence[int]) -> Model:
    result = model
    for index in layer_indices:
        result = negate_layer(result, index)
    return snapshot(result) if result is model else result
