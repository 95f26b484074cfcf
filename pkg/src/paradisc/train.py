"""Training loop, multi-seed runs and majority-vote ensembling."""
from __future__ import annotations

import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .errors import ConfigError, DataError, TrainingError
from .metrics import Metrics, evaluate, predict_split, score_predictions
from .model import STREAM_DROPOUT, STREAM_SHUFFLE, build_model
from .numeric import adam_step, clip_global_norm, make_rng

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_macro_f1: float
    dev_accuracy: float
    dev_explicit_accuracy: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class RunReport:
    config: dict
    seed: int
    epochs: list = field(default_factory=list)
    selected_epoch: int = 0
    test: Metrics | None = None
    wall_clock: float = 0.0

    def to_dict(self):
        return {"config": self.config, "seed": self.seed, "epochs": [e.to_dict() for e in self.epochs],
                "selected_epoch": self.selected_epoch,
                "test": self.test.to_dict() if self.test is not None else None,
                "wall_clock": self.wall_clock}

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], d["seed"], [EpochRecord(**e) for e in d["epochs"]], d["selected_epoch"],
                   Metrics.from_dict(d["test"]) if d.get("test") else None, d.get("wall_clock", 0.0))

    def metrics_view(self):
        """Everything except wall-clock time, for determinism comparisons."""
        d = self.to_dict()
        d.pop("wall_clock")
        return d


def selection_score(metrics):
    if metrics.binary is not None:
        return metrics.positive_f1
    return metrics.implicit.macro_f1


def _snapshot(blocks):
    return [b.value.copy() for b in blocks]


def _restore(blocks, values):
    for b, v in zip(blocks, values):
        b.value[...] = v


def train(config: TrainConfig, corpus, table=None, eval_test=True):
    """Train one model; returns ``(model, RunReport)`` with the best-dev weights loaded."""
    if not len(corpus.train) or not len(corpus.dev):
        raise DataError("training needs non-empty train and dev splits")
    t0 = time.perf_counter()
    model = build_model(config, corpus.inventories, table)
    # fixes the OOV draw order before anything else touches the table
    for split in (corpus.train, corpus.dev, corpus.test):
        for p in split:
            model.features(p)
    blocks = [b for b in model.blocks() if b.trainable]
    drop_rng = make_rng(config.seed, STREAM_DROPOUT)
    shuffle_rng = make_rng(config.seed, STREAM_SHUFFLE)
    report = RunReport(config.to_dict(), config.seed)
    paragraphs = list(corpus.train)
    best_score, best_values = -math.inf, None
    step = 0

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(paragraphs))
        win_loss, win_n, epoch_loss, epoch_n = 0.0, 0, 0.0, 0

        def apply_window():
            nonlocal win_loss, win_n, step
            step += 1
            if not math.isfinite(win_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            for b in blocks:
                b.grad /= win_n
            clip_global_norm(blocks, config.clip)
            try:
                adam_step(blocks, config.lr)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}, step {step}: {exc}") from None
            win_loss, win_n = 0.0, 0

        for i in order:
            value, n = model.loss(paragraphs[i], drop_rng, training=True, grad=True)
            win_loss += value
            win_n += n
            epoch_loss += value
            epoch_n += n
            if win_n >= config.window:
                apply_window()
        if win_n:
            apply_window()

        dev = evaluate(model, corpus.dev, buckets=False)
        score = selection_score(dev)
        report.epochs.append(EpochRecord(epoch, epoch_loss / max(epoch_n, 1), score,
                                         dev.implicit.accuracy, dev.explicit.accuracy))
        log.info("epoch %d loss %.4f dev implicit %.4f acc %.4f", epoch, epoch_loss / max(epoch_n, 1),
                 score, dev.implicit.accuracy)
        if score > best_score:
            best_score, best_values = score, _snapshot(model.blocks())
            report.selected_epoch = epoch

    _restore(model.blocks(), best_values)
    if eval_test and len(corpus.test):
        report.test = evaluate(model, corpus.test, buckets=True)
    report.wall_clock = time.perf_counter() - t0
    return model, report


def binary_mode_train(config, corpus, table=None):
    """One-vs-all training for ``config.binary``; returns ``(model, test Metrics)``."""
    if config.binary is None:
        raise ConfigError("binary_mode_train needs config.binary set to a target label")
    if config.uses_crf:
        raise ConfigError("binary one-vs-all mode cannot use the CRF layer")
    model, report = train(config, corpus, table)
    return model, report.test


def baseline_pair_mode(config, corpus, table=None):
    if config.variant != "BASELINE-PAIR":
        config = config.replace(variant="BASELINE-PAIR")
    model, report = train(config, corpus, table)
    return model, report.test


def run_seeds(config, corpus, seeds, table_factory=None):
    """Train one model per seed; returns lists of models and reports."""
    models, reports = [], []
    for seed in seeds:
        table = table_factory(seed) if table_factory is not None else None
        model, report = train(config.replace(seed=int(seed)), corpus, table)
        models.append(model)
        reports.append(report)
    return models, reports


def ensemble_vote(predictions, probabilities):
    """Majority vote per slot over N runs.

    ``predictions`` is N sequences of per-slot class indices and
    ``probabilities`` N arrays of shape (n_slots, n_classes). Ties go to the
    tied class with the largest probability summed over all runs, then to the
    lowest class index.
    """
    if not predictions:
        raise DataError("ensemble needs at least one run")
    n_slots = len(predictions[0])
    if len(probabilities) != len(predictions):
        raise DataError("predictions and probabilities come from different numbers of runs")
    for preds, probs in zip(predictions, probabilities):
        if len(preds) != n_slots or len(probs) != n_slots:
            raise DataError("runs disagree on the number of slots")
    prob_sum = np.sum([np.asarray(p, dtype=float) for p in probabilities], axis=0)
    out = []
    for t in range(n_slots):
        votes = Counter(int(run[t]) for run in predictions)
        top = max(votes.values())
        tied = sorted(c for c, v in votes.items() if v == top)
        out.append(max(tied, key=lambda c: (prob_sum[t][c], -c)))
    return out


def ensemble_predict(models, paragraphs):
    """Per-paragraph voted predictions from several trained models."""
    per_model = [predict_split(m, paragraphs) for m in models]
    voted = []
    for i, para in enumerate(paragraphs):
        preds = [pm[0][i] for pm in per_model]
        probs = [pm[1][i] for pm in per_model]
        voted.append(ensemble_vote(preds, probs))
    return voted


def ensemble_evaluate(models, split, buckets=True):
    paragraphs = list(split)
    cfg = models[0].config
    return score_predictions(paragraphs, ensemble_predict(models, paragraphs), cfg.binary, buckets,
                             cfg.fn_attribution)
