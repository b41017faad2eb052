"""
Файл: flops.py
Описание: Аналитический подсчет FLOPs

Плотный слой на N строках: 2*in*out*N (умножения и сложения) + out*N (bias)
+ out*N (relu, если есть). Обратный проход считается как 2x прямого.
Арифметика оптимизатора и аугментаций не учитывается.

Счетчики проходов (PassCounters) копит цикл обучения, а flops_breakdown()
переводит их в число операций по статьям (проходы слоев, потери, l1).
Доля проходов слоев у CoUn не больше 2x FT; вместе с арифметикой
CL-потерь (матрица сходств N x N) отношение на батче 64 около 2.22.
"""

from dataclasses import asdict, dataclass

from network.services.model import ModelConfig

# Обратный проход относительно прямого
BACKWARD_FACTOR = 2


def dense_flops(fan_in: int, fan_out: int, activation: bool = True) -> int:
    """FLOPs плотного слоя на одну строку"""
    return 2 * fan_in * fan_out + fan_out + (fan_out if activation else 0)


def extractor_flops(cfg: ModelConfig) -> int:
    dims = cfg.extractor_dims
    return sum(dense_flops(dims[i], dims[i + 1]) for i in range(len(dims) - 1))


def head_flops(cfg: ModelConfig) -> int:
    return dense_flops(cfg.repr_dim, cfg.num_classes, activation=False)


def projection_flops(cfg: ModelConfig) -> int:
    if cfg.projection is None:
        return 0
    hidden, out = cfg.projection
    return dense_flops(cfg.repr_dim, hidden) + dense_flops(hidden, out, activation=False)


def cl_dim(cfg: ModelConfig) -> int:
    """Размерность векторов, попадающих в InfoNCE"""
    return cfg.projection[1] if cfg.projection is not None else cfg.repr_dim


def ce_flops(rows: int, num_classes: int) -> int:
    """log-softmax (max, вычитание, exp, сумма, log, вычитание) + выбор истинного класса"""
    return rows * (5 * num_classes + 2)


def cl_flops(rows: int, pairs: int, dim: int) -> int:
    """
    Симметричный CL loss

    Нормировка двух видов (3*dim на строку каждый), матрица сходств
    (2*dim на пару), log-softmax по строкам в обе стороны (5 на пару + 1 на строку).
    """
    return 2 * rows * 3 * dim + 2 * pairs * dim + 2 * (5 * pairs + rows)


@dataclass
class PassCounters:
    """
    Счетчики проходов одного запуска

    supervised_rows: строки с полным CE-проходом (вперед + назад)
    view_rows: строки второго аугментированного вида (CL)
    cl_pairs: сумма N^2 по CL-батчам
    l1_steps: шаги с l1-штрафом
    """
    supervised_rows: int = 0
    view_rows: int = 0
    cl_pairs: int = 0
    l1_steps: int = 0

    def add(self, other: 'PassCounters') -> 'PassCounters':
        return PassCounters(
            self.supervised_rows + other.supervised_rows,
            self.view_rows + other.view_rows,
            self.cl_pairs + other.cl_pairs,
            self.l1_steps + other.l1_steps,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FlopBreakdown:
    """
    FLOPs обучения по статьям

    passes: прямые и обратные проходы слоев (экстрактор, голова, проекция)
    losses: арифметика CE и CL (log-softmax, нормировка, матрица сходств)
    l1: |theta| и sign(theta) l1-штрафа
    """
    passes: int
    losses: int
    l1: int

    @property
    def total(self) -> int:
        return self.passes + self.losses + self.l1

    def to_dict(self) -> dict:
        return {**asdict(self), 'total': self.total}


def flops_breakdown(cfg: ModelConfig, counters: PassCounters, num_parameters: int = 0) -> FlopBreakdown:
    """
    Разбивка FLOPs по счетчикам; каждая статья - прямой проход и 2x назад

    CE-путь: f + h на каждой supervised-строке.
    Второй вид CL: полный проход экстрактора вперед и назад на каждой view-строке.
    Проекционная голова при наличии прогоняется для обоих видов.
    """
    full = 1 + BACKWARD_FACTOR
    passes = counters.supervised_rows * (extractor_flops(cfg) + head_flops(cfg))
    losses = ce_flops(counters.supervised_rows, cfg.num_classes)
    if counters.view_rows:
        passes += counters.view_rows * (extractor_flops(cfg) + 2 * projection_flops(cfg))
        losses += cl_flops(counters.view_rows, counters.cl_pairs, cl_dim(cfg))
    l1 = 2 * counters.l1_steps * num_parameters
    return FlopBreakdown(full * passes, full * losses, full * l1)


def training_flops(cfg: ModelConfig, counters: PassCounters, num_parameters: int = 0) -> int:
    """Все FLOPs обучения: проходы слоев, функции потерь и l1"""
    return flops_breakdown(cfg, counters, num_parameters).total
