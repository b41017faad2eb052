"""
Файл: config.py
Описание: Конфигурации обучения и методов разучивания

Этот файл содержит:
- TrainConfig: эпохи, батч, learning rate, расписание, момент, weight decay,
  распределения аугментаций для CE и CL, seed
- MethodConfig: метод и его гиперпараметры, необязательный CL-модуль
- original_train_config(), unlearn_train_config(), default_method_config():
  значения по умолчанию из settings.LAB_SETTINGS
- with_cl_module(): добавляет lambda * L_CL к бейзлайну
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from django.conf import settings

from datagen.services.transforms import TransformDistribution, parse_transform, preset
from losses.services.contrastive import CLConfig

logger = logging.getLogger(__name__)

METHODS = ('retrain', 'ft', 'neggrad', 'neggrad_plus', 'l1_sparse', 'salun', 'not', 'coun')

# Бейзлайны, к которым можно подключить CL-модуль
CL_MODULE_BASES = ('ft', 'neggrad_plus', 'l1_sparse', 'not')

SCHEDULES = ('cosine', 'multistep')


@dataclass(frozen=True)
class TrainConfig:
    """Параметры одного цикла обучения"""
    epochs: int
    batch_size: int = 64
    base_lr: float = 0.05
    schedule: str = 'cosine'
    momentum: float = 0.9
    weight_decay: float = 5e-4
    transform_ce: TransformDistribution = field(default_factory=lambda: preset('simple'))
    transform_cl: TransformDistribution = field(default_factory=lambda: preset('simple'))
    seed: int = 0
    min_lr: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr < 0:
            raise ValueError(f"base_lr must be >= 0, got {self.base_lr}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        object.__setattr__(self, 'transform_ce', parse_transform(self.transform_ce))
        object.__setattr__(self, 'transform_cl', parse_transform(self.transform_cl))

    def replace(self, **changes) -> 'TrainConfig':
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'base_lr': self.base_lr,
            'schedule': self.schedule,
            'momentum': self.momentum,
            'weight_decay': self.weight_decay,
            'transform_ce': self.transform_ce.to_dict(),
            'transform_cl': self.transform_cl.to_dict(),
            'seed': self.seed,
            'min_lr': self.min_lr,
        }


def original_train_config(seed: int = 0, **overrides) -> TrainConfig:
    """Рецепт обучения Original и Retrain (multistep)"""
    lab = settings.LAB_SETTINGS
    params = dict(
        epochs=lab['ORIGINAL_EPOCHS'],
        batch_size=lab['BATCH_SIZE'],
        base_lr=lab['ORIGINAL_LR'],
        schedule='multistep',
        momentum=lab['MOMENTUM'],
        weight_decay=lab['WEIGHT_DECAY'],
        seed=seed,
        min_lr=lab['MIN_LR'],
    )
    params.update(overrides)
    return TrainConfig(**params)


def unlearn_train_config(seed: int = 0, **overrides) -> TrainConfig:
    """Рецепт приближенного разучивания (cosine)"""
    lab = settings.LAB_SETTINGS
    params = dict(
        epochs=lab['UNLEARN_EPOCHS'],
        batch_size=lab['BATCH_SIZE'],
        base_lr=lab['UNLEARN_LR'],
        schedule='cosine',
        momentum=lab['MOMENTUM'],
        weight_decay=lab['WEIGHT_DECAY'],
        seed=seed,
        min_lr=lab['MIN_LR'],
    )
    params.update(overrides)
    return TrainConfig(**params)


@dataclass(frozen=True)
class MethodConfig:
    """
    Метод разучивания и его гиперпараметры

    Используются только поля, относящиеся к method; epochs/lr при наличии
    перекрывают значения TrainConfig для этого метода.
    """
    method: str
    beta: float = 0.99
    gamma: float = 1e-3
    l1_epochs: int = 4
    mask_threshold: float = 0.5
    layer_indices: Tuple[int, ...] = (0,)
    lam: float = 1.0
    tau: float = 0.1
    cl_module: Optional[CLConfig] = None
    epochs: Optional[int] = None
    lr: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'layer_indices', tuple(int(i) for i in self.layer_indices))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.l1_epochs < 0:
            raise ValueError(f"l1_epochs must be >= 0, got {self.l1_epochs}")
        if not 0.0 < self.mask_threshold <= 1.0:
            raise ValueError(f"mask_threshold must be in (0, 1], got {self.mask_threshold}")
        if any(i < 0 for i in self.layer_indices):
            raise ValueError(f"layer indices must be >= 0, got {self.layer_indices}")
        if self.method == 'coun':
            CLConfig(tau=self.tau, lam=self.lam)
        if self.cl_module is not None and self.method not in CL_MODULE_BASES:
            raise ValueError(f"CL module cannot wrap {self.method!r}; allowed bases: {CL_MODULE_BASES}")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError(f"epochs override must be >= 1, got {self.epochs}")
        if self.lr is not None and self.lr < 0:
            raise ValueError(f"lr override must be >= 0, got {self.lr}")

    @property
    def label(self) -> str:
        """Имя для таблиц: 'ft', 'neggrad_plus+CL', ..."""
        return f"{self.method}+CL" if self.cl_module is not None else self.method

    def contrastive(self) -> Optional[CLConfig]:
        """Действующая CL-конфигурация (CoUn или CL-модуль)"""
        if self.method == 'coun':
            return CLConfig(tau=self.tau, lam=self.lam)
        return self.cl_module

    def replace(self, **changes) -> 'MethodConfig':
        return replace(self, **changes)

    def to_dict(self) -> dict:
        data = {'method': self.method, 'label': self.label}
        relevant = {
            'neggrad_plus': ('beta',),
            'l1_sparse': ('gamma', 'l1_epochs'),
            'salun': ('mask_threshold',),
            'not': ('layer_indices',),
            'coun': ('lam', 'tau'),
        }.get(self.method, ())
        for name in relevant:
            value = getattr(self, name)
            data[name] = list(value) if isinstance(value, tuple) else value
        if self.cl_module is not None:
            data['cl_module'] = {'lam': self.cl_module.lam, 'tau': self.cl_module.tau}
        for name in ('epochs', 'lr'):
            if getattr(self, name) is not None:
                data[name] = getattr(self, name)
        return data


def default_method_config(method: str, **overrides) -> MethodConfig:
    """MethodConfig с гиперпараметрами из settings.LAB_SETTINGS"""
    lab = settings.LAB_SETTINGS
    params = dict(
        method=method,
        beta=lab['BETA'],
        gamma=lab['L1_GAMMA'],
        l1_epochs=lab['L1_EPOCHS'],
        mask_threshold=lab['SALUN_THRESHOLD'],
        layer_indices=tuple(lab['NOT_LAYERS']),
        lam=lab['LAMBDA'],
        tau=lab['TAU'],
    )
    if method == 'neggrad':
        params.update(epochs=lab['NEGGRAD_EPOCHS'], lr=lab['NEGGRAD_LR'])
    params.update(overrides)
    return MethodConfig(**params)


def with_cl_module(base: MethodConfig, lam: float, tau: float) -> MethodConfig:
    """Бейзлайн + lambda * L_CL на retain-батчах"""
    if base.method not in CL_MODULE_BASES:
        raise ValueError(f"CL module cannot wrap {base.method!r}; allowed bases: {CL_MODULE_BASES}")
    return base.replace(cl_module=CLConfig(tau=tau, lam=lam))
