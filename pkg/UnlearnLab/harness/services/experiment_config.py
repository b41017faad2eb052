"""
Файл: experiment_config.py
Описание: Конфигурация эксперимента из JSON

Этот файл содержит:
- ConfigError: любая ошибка конфигурации (CLI завершается с кодом 2)
- ScenarioConfig, TheorySection, TuningSection, ExperimentConfig
- parse_config(), load_config(): разбор и проверка, неизвестные ключи - ошибка
- config_hash(): SHA-256 канонического JSON (ключи отсортированы, без пробелов)

Поля описаны в docs/config.md.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

from django.conf import settings

from datagen.services.synthetic import SyntheticSpec
from datagen.services.splits import SCENARIOS
from losses.services.contrastive import CLConfig
from network.services.model import ModelConfig
from unlearn.services.config import (
    MethodConfig, TrainConfig, default_method_config, original_train_config, unlearn_train_config,
)

logger = logging.getLogger(__name__)

SECTIONS = ('dataset', 'scenario', 'model', 'train', 'unlearn', 'methods', 'seeds', 'sweep', 'theory', 'tuning', 'output')
DATASET_KEYS = (
    'num_classes', 'input_dim', 'per_class_std', 'samples_per_class', 'test_fraction', 'seed',
    'ring_radius', 'class_centers',
)
SCENARIO_KEYS = ('kind', 'forget_ratio', 'target_class', 'step_ratio', 'stages', 'epochs_per_stage', 'prediction_class')
MODEL_KEYS = ('hidden_dims', 'repr_dim', 'init_scale', 'projection')
TRAIN_KEYS = (
    'epochs', 'batch_size', 'base_lr', 'schedule', 'momentum', 'weight_decay', 'transform_ce', 'transform_cl', 'min_lr',
)
UNLEARN_KEYS = TRAIN_KEYS + ('match_flops',)
METHOD_KEYS = (
    'method', 'beta', 'gamma', 'l1_epochs', 'mask_threshold', 'layer_indices', 'lam', 'tau', 'cl_module', 'epochs', 'lr',
)
SWEEP_KEYS = ('axis', 'values')
THEORY_KEYS = ('enabled', 'methods', 'delta', 'eps', 'samples')
TUNING_KEYS = ('enabled', 'lr', 'lam', 'tau', 'seeds')
OUTPUT_KEYS = ('dir', 'checkpoints', 'representations')
SWEEP_AXES = ('lambda', 'tau', 'transform', 'batch', 'projection')


class ConfigError(ValueError):
    """Ошибка в файле конфигурации эксперимента"""


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _section(raw: dict, name: str, allowed: Tuple[str, ...]) -> dict:
    value = raw.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be an object, got {type(value).__name__}")
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {unknown}; allowed: {list(allowed)}")
    return dict(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """Сценарий забывания: random, classwise или sequential"""
    kind: str = 'random'
    forget_ratio: float = 0.1
    target_class: int = 0
    step_ratio: float = 0.1
    stages: int = 5
    epochs_per_stage: int = 10
    prediction_class: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"scenario kind must be one of {SCENARIOS}, got {self.kind!r}")
        if self.epochs_per_stage < 1:
            raise ValueError(f"epochs_per_stage must be >= 1, got {self.epochs_per_stage}")


@dataclass(frozen=True)
class TheorySection:
    """Какие модели получают теоретическую сводку и с какими параметрами"""
    enabled: bool = False
    methods: Tuple[str, ...] = ('coun',)
    delta: float = 1.0
    eps: Optional[float] = None
    samples: int = 64


@dataclass(frozen=True)
class TuningSection:
    """
    Подбор гиперпараметров перед запуском ячеек

    lr перебирается у всех методов без явного lr; lam и tau - у CoUn
    и CL-модулей. seeds=None: подбор на seed эксперимента.
    """
    enabled: bool = False
    lr: Tuple[float, ...] = (0.05,)
    lam: Tuple[float, ...] = (1.0,)
    tau: Tuple[float, ...] = (0.1,)
    seeds: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        for name in ('lr', 'lam', 'tau'):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"tuning grid {name!r} must be nonempty")
            object.__setattr__(self, name, values)
        if any(v < 0 for v in self.lr + self.lam):
            raise ValueError(f"tuning lr and lam must be >= 0, got lr={self.lr}, lam={self.lam}")
        if any(v <= 0 for v in self.tau):
            raise ValueError(f"tuning tau must be > 0, got {self.tau}")
        if self.seeds is not None:
            seeds = tuple(self.seeds)
            if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
                raise ValueError(f"tuning seeds must be a nonempty list of non-negative integers, got {self.seeds!r}")
            object.__setattr__(self, 'seeds', seeds)


@dataclass
class ExperimentConfig:
    raw: dict
    dataset: SyntheticSpec
    scenario: ScenarioConfig
    model: dict
    train: dict
    unlearn: dict
    match_flops: bool
    methods: Tuple[MethodConfig, ...]
    seeds: Tuple[int, ...]
    sweep: Optional[dict]
    theory: TheorySection
    output_dir: Path
    checkpoints: bool = True
    representations: bool = True
    tuning: TuningSection = field(default_factory=TuningSection)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def experiment_dir(self) -> Path:
        return self.output_dir / self.hash

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.dataset.input_dim, self.dataset.num_classes, **self.model)

    def original_config(self, seed: int) -> TrainConfig:
        return original_train_config(seed, **self.train)

    def unlearn_config(self, seed: int) -> TrainConfig:
        return unlearn_train_config(seed, **self.unlearn)

    def method_labels(self) -> Tuple[str, ...]:
        return tuple(m.label for m in self.methods)

    def with_methods(self, methods) -> 'ExperimentConfig':
        """Та же конфигурация (и тот же хэш) с подобранными методами"""
        return replace(self, methods=tuple(methods))

    def derive(self, updates: dict) -> 'ExperimentConfig':
        """
        Новая конфигурация с изменениями вида {('section', 'key'): value};
        ('seeds', None) заменяет список seed целиком
        """
        raw = copy.deepcopy(self.raw)
        for (section, key), value in updates.items():
            if key is None:
                raw[section] = value
            else:
                raw.setdefault(section, {})[key] = value
        return parse_config(raw, output_dir=self.output_dir)


def _method(entry) -> MethodConfig:
    if isinstance(entry, str):
        entry = {'method': entry}
    if not isinstance(entry, dict) or 'method' not in entry:
        raise ConfigError(f"[methods] each entry needs a 'method' name, got {entry!r}")
    unknown = sorted(set(entry) - set(METHOD_KEYS))
    if unknown:
        raise ConfigError(f"[methods] unknown keys for {entry['method']!r}: {unknown}")
    params = dict(entry)
    name = params.pop('method')
    if name == 'retrain':
        raise ConfigError("[methods] 'retrain' is always run as the reference; do not list it")
    module = params.pop('cl_module', None)
    if 'layer_indices' in params:
        params['layer_indices'] = tuple(params['layer_indices'])
    method = default_method_config(name, **params)
    if module is not None:
        unknown = sorted(set(module) - {'lam', 'tau'})
        if unknown:
            raise ConfigError(f"[methods] unknown cl_module keys: {unknown}")
        method = method.replace(cl_module=CLConfig(
            tau=module.get('tau', settings.LAB_SETTINGS['TAU']),
            lam=module.get('lam', settings.LAB_SETTINGS['LAMBDA']),
        ))
    return method


def parse_config(raw: dict, output_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Проверенная ExperimentConfig из словаря

    Raises:
        ConfigError: неизвестные ключи, неверные значения, пустые methods / seeds
    """
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections: {unknown}; allowed: {list(SECTIONS)}")

    lab = settings.LAB_SETTINGS
    try:
        dataset = SyntheticSpec(**_section(raw, 'dataset', DATASET_KEYS))
        scenario = ScenarioConfig(**_section(raw, 'scenario', SCENARIO_KEYS))

        model = {'hidden_dims': tuple(lab['HIDDEN_DIMS']), 'repr_dim': lab['REPR_DIM'], 'init_scale': lab['INIT_SCALE']}
        model.update(_section(raw, 'model', MODEL_KEYS))
        model['hidden_dims'] = tuple(model['hidden_dims'])
        if model.get('projection') is not None:
            model['projection'] = tuple(model['projection'])
        ModelConfig(dataset.input_dim, dataset.num_classes, **model)

        train = _section(raw, 'train', TRAIN_KEYS)
        unlearn = _section(raw, 'unlearn', UNLEARN_KEYS)
        match_flops = bool(unlearn.pop('match_flops', False))
        original_train_config(0, **train)
        unlearn_train_config(0, **unlearn)

        methods = tuple(_method(entry) for entry in raw.get('methods') or ())
        theory_raw = _section(raw, 'theory', THEORY_KEYS)
        if 'methods' in theory_raw:
            theory_raw['methods'] = tuple(theory_raw['methods'])
        theory = TheorySection(**{'samples': lab['MC_SAMPLES'], **theory_raw})
        tuning_raw = _section(raw, 'tuning', TUNING_KEYS)
        for name in ('lr', 'lam', 'tau', 'seeds'):
            if tuning_raw.get(name) is not None:
                tuning_raw[name] = tuple(tuning_raw[name])
        tuning = TuningSection(**{
            'lr': lab['TUNING_LR_GRID'], 'lam': lab['TUNING_LAMBDA_GRID'], 'tau': lab['TUNING_TAU_GRID'], **tuning_raw,
        })
        output = _section(raw, 'output', OUTPUT_KEYS)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e

    if not methods:
        raise ConfigError("[methods] at least one method is required")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"[methods] duplicate method labels: {labels}")

    seeds = raw.get('seeds', list(range(lab['TRIALS'])))
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = list(range(seeds))
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError(f"[seeds] must be a nonempty list of non-negative integers, got {seeds!r}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"[seeds] duplicate seeds: {seeds}")

    sweep = _section(raw, 'sweep', SWEEP_KEYS) or None
    if sweep is not None:
        if sweep.get('axis') not in SWEEP_AXES:
            raise ConfigError(f"[sweep] axis must be one of {SWEEP_AXES}, got {sweep.get('axis')!r}")
        if not sweep.get('values'):
            raise ConfigError("[sweep] values must be a nonempty list")

    if tuning.enabled and scenario.kind == 'sequential':
        raise ConfigError("[tuning] is not supported for the sequential scenario")

    if scenario.kind == 'classwise' and not 0 <= scenario.target_class < dataset.num_classes:
        raise ConfigError(f"[scenario] target_class {scenario.target_class} outside [0, {dataset.num_classes})")

    root = Path(output_dir or output.get('dir') or settings.OUTPUT_ROOT)
    return ExperimentConfig(
        raw=raw,
        dataset=dataset,
        scenario=scenario,
        model=model,
        train=train,
        unlearn=unlearn,
        match_flops=match_flops,
        methods=methods,
        seeds=tuple(seeds),
        sweep=sweep,
        theory=theory,
        output_dir=root,
        checkpoints=bool(output.get('checkpoints', True)),
        representations=bool(output.get('representations', True)),
        tuning=tuning,
    )


def load_config(path, output_dir: Optional[Path] = None) -> ExperimentConfig:
    """Чтение и разбор JSON-файла конфигурации"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    config = parse_config(raw, output_dir)
    logger.info(f"Config loaded: {path} (hash {config.hash[:12]}, {len(config.methods)} methods x {len(config.seeds)} seeds)")
    return config
