"""
Файл: engine.py
Описание: Общий цикл обучения для всех методов

Этот файл содержит:
- AccessLog: какие индексы обучающей выборки прочитал запуск
- BatchLoader: перемешивание по (seed, epoch) и батчи с записью в AccessLog
- Objective: из каких слагаемых состоит шаг (CE, подъем, CL, forget-член, l1, маски)
- UnlearnRun: результат запуска (модели, split, FLOPs, журнал эпох)
- UnlearnEngine: цикл эпох и шагов SGD

Каждая аугментация получает seed из (seed, epoch, batch, view), поэтому
выключенная ветка (lambda = 0, gamma = 0, beta = 1) не сдвигает потоки
остальных и траектория совпадает с FT побитово.
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set

import numpy as np
from django.conf import settings

from datagen.services.splits import Split
from datagen.services.synthetic import Dataset
from datagen.services.transforms import view_seed
from datagen.utils.rng import derive_rng
from diffcore.services.optim import OptimizerState, lr_schedule, sgd_step
from diffcore.services.tensor import backward, l2_normalize_rows, neg, scale
from losses.services.contrastive import CLConfig, cl_loss
from losses.services.supervised import ce_loss, combined_loss, l1_penalty, neggrad_plus_loss
from network.services.model import Model, features, logits, project_features, snapshot
from network.utils.flops import PassCounters, training_flops
from unlearn.services.config import TrainConfig

logger = logging.getLogger(__name__)


class AccessLog:
    """
    Журнал чтений обучающей выборки

    Источники: 'retain', 'forget', 'train', 'saliency' и т.п.;
    индексы - глобальные индексы обучающего Dataset.
    """

    def __init__(self):
        self._reads: Dict[str, Set[int]] = defaultdict(set)

    def record(self, source: str, indices):
        self._reads[source].update(int(i) for i in indices)

    def indices(self, source: Optional[str] = None) -> Set[int]:
        if source is not None:
            return set(self._reads.get(source, set()))
        merged: Set[int] = set()
        for values in self._reads.values():
            merged |= values
        return merged

    def touches(self, indices) -> bool:
        """Читал ли запуск хотя бы один из indices"""
        return not self.indices().isdisjoint(int(i) for i in indices)

    def merge(self, other: 'AccessLog'):
        for source, values in other._reads.items():
            self._reads[source] |= values

    def summary(self) -> Dict[str, int]:
        return {source: len(values) for source, values in sorted(self._reads.items())}


class BatchLoader:
    """
    Батчи из подмножества индексов

    Порядок эпохи - перестановка от derive_rng(seed, tag, epoch).
    """

    def __init__(self, indices, batch_size: int, seed: int, tag: str, log: AccessLog, source: str):
        self.indices = np.asarray(indices, dtype=np.int64)
        if self.indices.size == 0:
            raise ValueError(f"{source}: no samples to train on")
        self.batch_size = batch_size
        self.seed = seed
        self.tag = tag
        self.log = log
        self.source = source

    def __len__(self):
        return -(-self.indices.size // self.batch_size)

    def epoch(self, epoch: int) -> Iterator[np.ndarray]:
        order = derive_rng(self.seed, self.tag, epoch).permutation(self.indices)
        for start in range(0, order.size, self.batch_size):
            batch = order[start:start + self.batch_size]
            self.log.record(self.source, batch)
            yield batch

    def cycle(self) -> Iterator[np.ndarray]:
        """Бесконечный поток батчей с перемешиванием на каждом проходе"""
        round_index = 0
        while True:
            yield from self.epoch(round_index)
            round_index += 1


@dataclass
class Objective:
    """
    Состав цели одного шага

    supervised: CE на основных батчах; ascent=True - минимизируется -CE (NegGrad)
    cl: CL-модуль (строится при lam > 0)
    forget_beta: NegGrad+ (beta < 1 добавляет -(1 - beta) * CE на forget-батче)
    l1_gamma, l1_epochs: l1-штраф в первые l1_epochs эпох
    masks: маски SalUn для sgd_step
    """
    ascent: bool = False
    cl: Optional[CLConfig] = None
    forget_beta: float = 1.0
    l1_gamma: float = 0.0
    l1_epochs: int = 0
    masks: Optional[Dict[str, np.ndarray]] = None

    @property
    def uses_cl(self) -> bool:
        return self.cl is not None and self.cl.lam > 0

    @property
    def uses_forget(self) -> bool:
        return self.forget_beta < 1.0


@dataclass
class UnlearnRun:
    """Результат одного запуска обучения или разучивания"""
    method: str
    initial_model: Model
    final_model: Model
    split: Optional[Split]
    counters: PassCounters
    flops: int
    per_epoch_log: List[dict] = field(default_factory=list)
    access_log: AccessLog = field(default_factory=AccessLog)
    train_config: Optional[TrainConfig] = None
    method_config: Optional[dict] = None
    seed: int = 0
    extra: dict = field(default_factory=dict)
    checkpoint_paths: Dict[str, str] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def epochs(self) -> int:
        return len(self.per_epoch_log)


class UnlearnEngine:
    """
    Цикл обучения: эпохи -> батчи -> аугментации -> цель -> backward -> sgd_step

    Args:
        dataset: обучающая выборка (индексы split относятся к ней)
        config: параметры обучения
    """

    def __init__(self, dataset: Dataset, config: TrainConfig):
        self.dataset = dataset
        self.config = config
        self.log_every = settings.LAB_SETTINGS.get('LOG_EVERY_EPOCH', 1)

    def _view(self, distribution, indices, epoch, batch, view, tag='view'):
        t = distribution.sample(view_seed(self.config.seed, tag, epoch, batch, view))
        return t(self.dataset.inputs[indices])

    def _step_loss(self, model, objective, batch_idx, labels, epoch, batch, forget_stream, counters):
        cfg = self.config
        Y = labels[batch_idx]
        Z = features(model, self._view(cfg.transform_ce, batch_idx, epoch, batch, 0))
        scores = logits(model, Z)
        counters.supervised_rows += batch_idx.size

        if objective.uses_forget:
            forget_idx = next(forget_stream)
            Zf = features(model, self._view(cfg.transform_ce, forget_idx, epoch, batch, 0, tag='forget_view'))
            counters.supervised_rows += forget_idx.size
            loss = neggrad_plus_loss(
                Y, scores, self.dataset.labels[forget_idx], logits(model, Zf), objective.forget_beta,
            )
        else:
            loss = None

        if objective.uses_cl:
            Z_prime = features(model, self._view(cfg.transform_cl, batch_idx, epoch, batch, 1))
            counters.view_rows += batch_idx.size
            counters.cl_pairs += batch_idx.size ** 2
            anchors = l2_normalize_rows(project_features(model, Z) if model.has_projection else Z)
            positives = l2_normalize_rows(
                project_features(model, Z_prime) if model.has_projection else Z_prime
            )
            if loss is None and not objective.ascent:
                loss = combined_loss(Y, scores, anchors, positives, objective.cl)
            else:
                base = loss if loss is not None else neg(ce_loss(Y, scores))
                loss = base + scale(cl_loss(anchors, positives, objective.cl.tau), objective.cl.lam)
        elif loss is None:
            loss = ce_loss(Y, scores)
            if objective.ascent:
                loss = neg(loss)

        if objective.l1_gamma > 0 and epoch < objective.l1_epochs:
            counters.l1_steps += 1
            loss = loss + l1_penalty(model.tensors(), objective.l1_gamma)
        return loss

    def run(
        self,
        model: Model,
        indices,
        objective: Objective,
        method: str,
        split: Optional[Split] = None,
        labels: Optional[np.ndarray] = None,
        forget_indices=None,
        source: str = 'retain',
        access_log: Optional[AccessLog] = None,
        counters: Optional[PassCounters] = None,
        initial_model: Optional[Model] = None,
    ) -> UnlearnRun:
        """
        Обучает model на месте и возвращает UnlearnRun

        Args:
            model: обучаемая модель (будет изменена)
            indices: индексы основных батчей
            objective: состав цели
            labels: one-hot метки вместо dataset.labels (SalUn)
            forget_indices: forget-батчи для NegGrad+
            source: имя источника в AccessLog
        """
        cfg = self.config
        started = time.monotonic()
        log = access_log or AccessLog()
        counters = counters or PassCounters()
        initial = initial_model or snapshot(model)
        labels = self.dataset.labels if labels is None else labels

        loader = BatchLoader(indices, cfg.batch_size, cfg.seed, 'shuffle', log, source)
        forget_stream = None
        if objective.uses_forget:
            forget_loader = BatchLoader(forget_indices, cfg.batch_size, cfg.seed, 'forget_shuffle', log, 'forget')
            forget_stream = forget_loader.cycle()

        params = dict(model.parameters())
        state = OptimizerState.for_parameters(params, cfg.base_lr, cfg.momentum, cfg.weight_decay)
        epoch_log = []

        for epoch in range(cfg.epochs):
            state.learning_rate = lr_schedule(cfg.schedule, epoch, cfg.epochs, cfg.base_lr, cfg.min_lr)
            losses = []
            for batch, batch_idx in enumerate(loader.epoch(epoch)):
                model.zero_grad()
                loss = self._step_loss(model, objective, batch_idx, labels, epoch, batch, forget_stream, counters)
                backward(loss)
                grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}
                sgd_step(params, grads, state, objective.masks)
                losses.append(loss.item())

            record = {'epoch': epoch, 'lr': state.learning_rate, 'loss': float(np.mean(losses))}
            epoch_log.append(record)
            if self.log_every and (epoch + 1) % self.log_every == 0:
                logger.info(
                    f"[{method}] epoch {epoch + 1}/{cfg.epochs}: lr={record['lr']:.5f}, loss={record['loss']:.6f}"
                )

        model.zero_grad()
        flops = training_flops(model.config, counters, model.num_parameters())
        return UnlearnRun(
            method=method,
            initial_model=initial,
            final_model=model,
            split=split,
            counters=counters,
            flops=flops,
            per_epoch_log=epoch_log,
            access_log=log,
            train_config=cfg,
            seed=cfg.seed,
            elapsed=time.monotonic() - started,
        )
