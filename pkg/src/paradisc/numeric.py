"""Dense float64 numeric core.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Vectors may be
passed either as 1-D arrays or as ``(n, 1)`` columns; results keep the form
of the input vector. Gradients are hand-derived: every differentiable
operation here has a matching ``*_backward`` helper, and
:func:`finite_diff_check` is the arbiter for all of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, TrainingError, VerificationError

DTYPE = np.float64


def make_rng(seed, *stream):
    """Return a PCG64 generator for ``seed``.

    Extra integers select an independent sub-stream, so initialisation,
    dropout, shuffling and OOV draws never share state while still being
    fully determined by one seed.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _vec(v, name):
    a = np.asarray(v, dtype=DTYPE)
    if a.ndim == 2 and a.shape[1] == 1:
        return a[:, 0], True
    if a.ndim != 1:
        raise DimensionError(f"{name} must be a vector or column, got shape {a.shape}")
    return a, False


def affine(W, x, b):
    """Return ``W @ x + b``."""
    W = np.asarray(W, dtype=DTYPE)
    xv, col = _vec(x, "x")
    bv, _ = _vec(b, "b")
    if W.ndim != 2:
        raise DimensionError(f"W must be a matrix, got shape {W.shape}")
    if W.shape[1] != xv.shape[0]:
        raise DimensionError(f"affine: W is {W.shape[0]}x{W.shape[1]} but x has {xv.shape[0]} rows")
    if W.shape[0] != bv.shape[0]:
        raise DimensionError(f"affine: W is {W.shape[0]}x{W.shape[1]} but b has {bv.shape[0]} rows")
    y = W @ xv + bv
    return y[:, None] if col else y


def affine_backward(W, x, dy):
    """Gradients ``(dW, dx, db)`` of ``W @ x + b`` given upstream ``dy``."""
    xv, _ = _vec(x, "x")
    dyv, _ = _vec(dy, "dy")
    return np.outer(dyv, xv), W.T @ dyv, dyv.copy()


def softmax(v):
    vv, col = _vec(v, "v")
    e = np.exp(vv - vv.max())
    p = e / e.sum()
    return p[:, None] if col else p


def logsumexp(v):
    vv = np.asarray(v, dtype=DTYPE).ravel()
    if vv.size == 0:
        raise DimensionError("logsumexp of an empty vector")
    m = vv.max()
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.exp(vv - m).sum()))


def dropout(x, p, rng, training):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is None at inference.

    The mask already carries the ``1/(1-p)`` scale, so the backward pass is
    ``dx = dy * mask``.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    x = np.asarray(x, dtype=DTYPE)
    if not training or p == 0.0:
        return x, None
    keep = rng.random(x.shape) >= p
    mask = keep.astype(DTYPE) / (1.0 - p)
    return x * mask, mask


@dataclass
class ParamBlock:
    """A named parameter with its gradient buffer and Adam state."""

    name: str
    value: np.ndarray
    trainable: bool = True
    grad: np.ndarray = field(init=False)
    adam_m: np.ndarray = field(init=False)
    adam_v: np.ndarray = field(init=False)
    step_count: int = 0

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def adam_step(blocks, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    for blk in blocks:
        if not blk.trainable:
            continue
        if not np.all(np.isfinite(blk.grad)):
            raise TrainingError(f"non-finite gradient in block {blk.name!r}")
    for blk in blocks:
        if not blk.trainable:
            continue
        g = blk.grad
        blk.step_count += 1
        t = blk.step_count
        blk.adam_m *= beta1
        blk.adam_m += (1.0 - beta1) * g
        blk.adam_v *= beta2
        blk.adam_v += (1.0 - beta2) * (g * g)
        m_hat = blk.adam_m / (1.0 - beta1**t)
        v_hat = blk.adam_v / (1.0 - beta2**t)
        blk.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        blk.zero_grad()


def global_grad_norm(blocks):
    total = 0.0
    for blk in blocks:
        if blk.trainable:
            total += float(np.vdot(blk.grad, blk.grad))
    return math.sqrt(total)


def clip_global_norm(blocks, threshold=5.0):
    """Rescale all gradients jointly so their L2 norm is at most ``threshold``.

    Returns the norm measured before clipping.
    """
    if threshold <= 0:
        raise ConfigError("clip threshold must be positive")
    norm = global_grad_norm(blocks)
    if norm > threshold:
        scale = threshold / norm
        for blk in blocks:
            if blk.trainable:
                blk.grad *= scale
    return norm


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped_blocks: list
    per_block: dict
    offenders: list

    @property
    def ok(self):
        return not self.offenders


def finite_diff_check(loss_fn, blocks, step=1e-4, tol=1e-3, max_coords=20, rng=None,
                      floor=1e-6, raise_on_fail=True):
    """Compare analytic gradients held in ``blk.grad`` with central differences.

    ``loss_fn()`` must recompute the loss from the current block values and
    be deterministic. The relative error of one coordinate is
    ``|a - n| / max(|a|, |n|, floor)``; ``floor`` keeps coordinates whose true
    gradient is ~0 from dominating through round-off.
    At most ``max_coords`` coordinates are sampled per block (all of them if
    ``max_coords`` is None).
    """
    if rng is None:
        rng = make_rng(0)
    per_block = {}
    offenders = []
    skipped = []
    checked = 0
    worst = 0.0
    for blk in blocks:
        if not blk.trainable:
            skipped.append(blk.name)
            continue
        analytic = blk.grad.copy()
        flat = blk.value.reshape(-1)
        n = flat.size
        if max_coords is None or n <= max_coords:
            coords = np.arange(n)
        else:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        blk_worst = 0.0
        for k in coords:
            orig = flat[k]
            flat[k] = orig + step
            fp = loss_fn()
            flat[k] = orig - step
            fm = loss_fn()
            flat[k] = orig
            num = (fp - fm) / (2.0 * step)
            a = analytic.reshape(-1)[k]
            rel = abs(a - num) / max(abs(a), abs(num), floor)
            blk_worst = max(blk_worst, rel)
            checked += 1
            if rel > tol:
                offenders.append((blk.name, np.unravel_index(k, blk.shape), float(a), float(num), float(rel)))
        per_block[blk.name] = blk_worst
        worst = max(worst, blk_worst)
    report = GradCheckReport(worst, checked, skipped, per_block, offenders)
    if offenders and raise_on_fail:
        lines = ", ".join(f"{b}{tuple(int(i) for i in idx)} analytic={a:.3e} numeric={nm:.3e} rel={r:.2e}"
                          for b, idx, a, nm, r in offenders[:10])
        raise VerificationError(f"gradient check failed (max rel {worst:.3e} > {tol}): {lines}", offenders)
    return report
