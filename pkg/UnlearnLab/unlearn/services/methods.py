"""
Файл: methods.py
Описание: Original, Retrain и методы приближенного разучивания

Этот файл содержит:
- train_original(), retrain(): обучение с нуля (multistep)
- ft(), neggrad(), neggrad_plus(), l1_sparse(), salun(), not_unlearn(), coun()
- sequential_unlearn(): цепочка стадий с вложенными forget-множествами
- run_method(): диспетчер по MethodConfig.method

Все методы собирают Objective и запускают общий UnlearnEngine.
Модель θ_o никогда не изменяется: обучение идет на ее копии.
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np
from django.conf import settings

from datagen.services.splits import Split, is_nested
from datagen.services.synthetic import Dataset
from datagen.utils.rng import derive_seed
from network.services.model import Model, ModelConfig, init_model, negate_layers, snapshot
from unlearn.services.config import (
    MethodConfig, TrainConfig, original_train_config, unlearn_train_config,
)
from unlearn.services.engine import AccessLog, Objective, UnlearnEngine, UnlearnRun
from unlearn.utils.saliency import gradient_saliency, relabeled_targets, saliency_masks

logger = logging.getLogger(__name__)


def _method_train_config(method_cfg: MethodConfig, train_cfg: TrainConfig) -> TrainConfig:
    changes = {}
    if method_cfg.epochs is not None:
        changes['epochs'] = method_cfg.epochs
    if method_cfg.lr is not None:
        changes['base_lr'] = method_cfg.lr
    return train_cfg.replace(**changes) if changes else train_cfg


def _finish(run: UnlearnRun, method_cfg: MethodConfig) -> UnlearnRun:
    run.method = method_cfg.label
    run.method_config = method_cfg.to_dict()
    logger.info(
        f"[{run.method}] done: epochs={run.epochs}, flops={run.flops}, "
        f"reads={run.access_log.summary()}, {run.elapsed:.2f}s"
    )
    return run


def original_run(dataset: Dataset, model_config: ModelConfig, train_cfg: Optional[TrainConfig] = None,
                 seed: int = 0) -> UnlearnRun:
    """θ_o: CE на всей обучающей выборке со свежей инициализацией"""
    train_cfg = train_cfg or original_train_config(seed)
    model = init_model(model_config.with_seed(derive_seed(seed, 'original_init')))
    logger.info(f"[original] training on {len(dataset)} samples, {train_cfg.epochs} epochs")
    run = UnlearnEngine(dataset, train_cfg).run(
        model, np.arange(len(dataset)), Objective(), 'original', source='train',
    )
    run.method_config = {'method': 'original', 'label': 'original'}
    return run


def train_original(dataset: Dataset, model_config: ModelConfig, train_cfg: Optional[TrainConfig] = None,
                   seed: int = 0) -> Model:
    return original_run(dataset, model_config, train_cfg, seed).final_model


def retrain_run(dataset: Dataset, split: Split, model_config: ModelConfig,
                train_cfg: Optional[TrainConfig] = None, seed: int = 0) -> UnlearnRun:
    """
    Точное разучивание: новая инициализация, рецепт Original, только retain

    Поток инициализации ('retrain_init') отличен от потока θ_o.
    """
    train_cfg = train_cfg or original_train_config(seed)
    model = init_model(model_config.with_seed(derive_seed(seed, 'retrain_init')))
    logger.info(f"[retrain] training on {split.retain_idx.size} retain samples ({split.label()})")
    run = UnlearnEngine(dataset, train_cfg).run(model, split.retain_idx, Objective(), 'retrain', split=split)
    return _finish(run, MethodConfig('retrain'))


def retrain(dataset: Dataset, split: Split, model_config: ModelConfig,
            train_cfg: Optional[TrainConfig] = None, seed: int = 0) -> Model:
    return retrain_run(dataset, split, model_config, train_cfg, seed).final_model


def _on_retain(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
               train_cfg: TrainConfig, objective: Objective, start: Optional[Model] = None) -> UnlearnRun:
    train_cfg = _method_train_config(method_cfg, train_cfg)
    model = snapshot(start if start is not None else original)
    run = UnlearnEngine(dataset, train_cfg).run(
        model, split.retain_idx, objective, method_cfg.label, split=split,
        forget_indices=split.forget_idx if objective.uses_forget else None,
        initial_model=snapshot(original),
    )
    return _finish(run, method_cfg)


def ft(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
       train_cfg: TrainConfig) -> UnlearnRun:
    """Дообучение θ_o на retain (CE, cosine)"""
    return _on_retain(original, dataset, split, method_cfg, train_cfg, Objective(cl=method_cfg.cl_module))


def coun(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
         train_cfg: TrainConfig) -> UnlearnRun:
    """
    CoUn: на каждом retain-батче L_CE(h(f(t(I)))) + lambda * L_CL(f(t(I)), f(t'(I)))

    По построению совпадает с ft + CL-модуль при тех же (lambda, tau).
    """
    return _on_retain(original, dataset, split, method_cfg, train_cfg, Objective(cl=method_cfg.contrastive()))


def neggrad(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
            train_cfg: TrainConfig) -> UnlearnRun:
    """Градиентный подъем CE на forget-батчах"""
    train_cfg = _method_train_config(method_cfg, train_cfg)
    model = snapshot(original)
    run = UnlearnEngine(dataset, train_cfg).run(
        model, split.forget_idx, Objective(ascent=True), method_cfg.label, split=split, source='forget',
        initial_model=snapshot(original),
    )
    return _finish(run, method_cfg)


def neggrad_plus(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
                 train_cfg: TrainConfig) -> UnlearnRun:
    """beta * CE(retain-батч) - (1 - beta) * CE(forget-батч) на каждом шаге"""
    objective = Objective(cl=method_cfg.cl_module, forget_beta=method_cfg.beta)
    return _on_retain(original, dataset, split, method_cfg, train_cfg, objective)


def l1_sparse(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
              train_cfg: TrainConfig) -> UnlearnRun:
    """FT с l1-штрафом gamma * ||theta||_1 в первые l1_epochs эпох"""
    objective = Objective(cl=method_cfg.cl_module, l1_gamma=method_cfg.gamma, l1_epochs=method_cfg.l1_epochs)
    return _on_retain(original, dataset, split, method_cfg, train_cfg, objective)


def salun(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
          train_cfg: TrainConfig) -> UnlearnRun:
    """
    SalUn: маска по |градиенту CE на forget|, случайные неверные метки
    для forget и совместное обучение только по координатам маски
    """
    train_cfg = _method_train_config(method_cfg, train_cfg)
    log = AccessLog()
    log.record('saliency', split.forget_idx)
    masks = saliency_masks(gradient_saliency(original, dataset, split.forget_idx), method_cfg.mask_threshold)
    labels = relabeled_targets(dataset, split.forget_idx, train_cfg.seed)
    indices = np.sort(np.concatenate([split.retain_idx, split.forget_idx]))

    model = snapshot(original)
    run = UnlearnEngine(dataset, train_cfg).run(
        model, indices, Objective(masks=masks), method_cfg.label, split=split, labels=labels,
        source='train', access_log=log, initial_model=snapshot(original),
    )
    run.extra['mask_size'] = int(sum(mask.sum() for mask in masks.values()))
    return _finish(run, method_cfg)


def not_unlearn(original: Model, dataset: Dataset, split: Split, method_cfg: MethodConfig,
                train_cfg: TrainConfig) -> UnlearnRun:
    """Отрицание весов выбранных слоев экстрактора, затем FT на retain"""
    negated = negate_layers(original, method_cfg.layer_indices)
    run = _on_retain(original, dataset, split, method_cfg, train_cfg, Objective(cl=method_cfg.cl_module),
                     start=negated)
    run.extra['negated_layers'] = list(method_cfg.layer_indices)
    return run


UNLEARNERS: Dict[str, Callable[..., UnlearnRun]] = {
    'ft': ft,
    'neggrad': neggrad,
    'neggrad_plus': neggrad_plus,
    'l1_sparse': l1_sparse,
    'salun': salun,
    'not': not_unlearn,
    'coun': coun,
}


def run_method(method_cfg: MethodConfig, original: Model, dataset: Dataset, split: Split,
               train_cfg: Optional[TrainConfig] = None, seed: int = 0) -> UnlearnRun:
    """
    Один запуск по имени метода

    Для 'retrain' используется рецепт Original (train_cfg игнорируется),
    для остальных - train_cfg или рецепт разучивания по умолчанию.
    """
    if method_cfg.method == 'retrain':
        return retrain_run(dataset, split, original.config, seed=seed)
    train_cfg = train_cfg or unlearn_train_config(seed)
    return UNLEARNERS[method_cfg.method](original, dataset, split, method_cfg, train_cfg)


def sequential_unlearn(original: Model, dataset: Dataset, schedule: List[Split], method_cfg: MethodConfig,
                       train_cfg: Optional[TrainConfig] = None, seed: int = 0,
                       epochs_per_stage: Optional[int] = None) -> List[UnlearnRun]:
    """
    Последовательное разучивание

    Стадия s стартует с итоговой модели стадии s - 1 (первая - с θ_o) и
    идет epochs_per_stage эпох на своем retain. Для l1_sparse штраф
    повторяется в первые L1_EPOCHS_SEQUENTIAL эпох каждой стадии.
    Retrain на каждой стадии обучается с нуля.
    """
    if not schedule:
        raise ValueError("sequential schedule is empty")
    if not is_nested(schedule):
        raise ValueError("sequential schedule is not nested: forget sets must grow stage by stage")

    lab = settings.LAB_SETTINGS
    epochs = epochs_per_stage or lab['EPOCHS_PER_STAGE']
    base_cfg = train_cfg or unlearn_train_config(seed)
    if method_cfg.method == 'l1_sparse':
        method_cfg = method_cfg.replace(l1_epochs=min(lab['L1_EPOCHS_SEQUENTIAL'], epochs))

    runs: List[UnlearnRun] = []
    current = original
    for stage, split in enumerate(schedule):
        stage_seed = derive_seed(seed, 'sequential_stage', stage)
        if method_cfg.method == 'retrain':
            run = retrain_run(dataset, split, original.config, seed=stage_seed)
        else:
            stage_cfg = base_cfg.replace(epochs=epochs, seed=stage_seed)
            stage_method = method_cfg.replace(epochs=None)
            run = UNLEARNERS[method_cfg.method](current, dataset, split, stage_method, stage_cfg)
            current = run.final_model
        run.extra['stage'] = stage
        logger.info(f"[{run.method}] stage {stage + 1}/{len(schedule)}: forget={split.forget_idx.size}")
        runs.append(run)
    return runs
