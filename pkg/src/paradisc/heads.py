"""Relation prediction heads over adjacent DU representations."""
from __future__ import annotations

import enum

import numpy as np

from .corpus import SlotKind
from .encoder import glorot
from .errors import DataError, DimensionError
from .numeric import ParamBlock, logsumexp, softmax


class HeadMode(enum.Enum):
    TIED = "tied"
    UNTIED = "untied"


class HeadParams:
    """Affine map ``W @ [hDU_prev, hDU_cur] + b`` producing label scores."""

    def __init__(self, input_dim, num_labels=4, rng=None, name="head"):
        self.input_dim = int(input_dim)
        self.num_labels = int(num_labels)
        W = glorot(rng, num_labels, input_dim) if rng is not None else np.zeros((num_labels, input_dim))
        self.W = ParamBlock(f"{name}.W", W)
        self.b = ParamBlock(f"{name}.b", np.zeros(num_labels))

    def blocks(self):
        return [self.W, self.b]

    def forward(self, X):
        """Batched logits for rows of ``X`` (n, input_dim)."""
        return X @ self.W.value.T + self.b.value

    def backward(self, X, dZ):
        self.W.grad += dZ.T @ X
        self.b.grad += dZ.sum(axis=0)
        return dZ @ self.W.value


class HeadSet:
    def __init__(self, mode, input_dim, num_labels=4, rng=None):
        self.mode = HeadMode(mode)
        if self.mode is HeadMode.TIED:
            self.tied = HeadParams(input_dim, num_labels, rng, "head.tied")
            self.implicit = self.explicit = self.tied
        else:
            self.tied = None
            self.implicit = HeadParams(input_dim, num_labels, rng, "head.imp")
            self.explicit = HeadParams(input_dim, num_labels, rng, "head.exp")

    @property
    def num_labels(self):
        return self.implicit.num_labels

    @property
    def input_dim(self):
        return self.implicit.input_dim

    def for_kind(self, kind):
        return self.explicit if SlotKind(kind) is SlotKind.EXPLICIT else self.implicit

    def blocks(self):
        if self.mode is HeadMode.TIED:
            return self.tied.blocks()
        return self.implicit.blocks() + self.explicit.blocks()


def slot_logits(heads, h_prev, h_cur, kind):
    x = np.concatenate([np.ravel(h_prev), np.ravel(h_cur)])
    head = heads.for_kind(kind)
    if x.shape[0] != head.input_dim:
        raise DimensionError(f"head expects {head.input_dim}-dim input, got {x.shape[0]}")
    return head.W.value @ x + head.b.value


def slot_loss_grad(logits, gold, double="marginal"):
    """Loss for one slot and its gradient w.r.t. the logits.

    ``double="marginal"`` scores ``-log sum_{g in gold} p_g``; ``"sum"``
    adds one cross-entropy term per gold label.
    """
    gold = list(gold)
    if not gold:
        raise DataError("slot has no gold labels")
    logits = np.asarray(logits, dtype=float)
    p = softmax(logits)
    lse = logsumexp(logits)
    if double == "marginal" or len(gold) == 1:
        loss = lse - logsumexp(logits[gold])
        q = np.zeros_like(p)
        q[gold] = p[gold] / p[gold].sum()
        return loss, p - q
    if double == "sum":
        loss = sum(lse - logits[g] for g in gold)
        d = len(gold) * p
        d[gold] -= 1.0
        return loss, d
    raise ValueError(f"unknown double-label mode {double!r}")


def slot_loss(logits, gold, double="marginal"):
    return slot_loss_grad(logits, gold, double)[0]


def combined_loss(implicit_losses, explicit_losses, alpha=1.0):
    """Implicit slot losses plus ``alpha`` times explicit slot losses."""
    total = float(np.sum(implicit_losses)) if len(implicit_losses) else 0.0
    if alpha != 0.0 and len(explicit_losses):
        total += alpha * float(np.sum(explicit_losses))
    return total
