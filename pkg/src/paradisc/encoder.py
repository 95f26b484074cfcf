"""Two-level bidirectional LSTM paragraph encoder.

Word-level Bi-LSTM over the whole paragraph, coordinate-wise max-pooling
inside each DU span, then a DU-level Bi-LSTM over the pooled vectors.
Forward functions return ``(output, cache)``; the matching ``*_backward``
consumes the cache, accumulates parameter gradients into the
:class:`~paradisc.numeric.ParamBlock` buffers and returns the input gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .corpus import TagInventories, featurize_paragraph
from .errors import DimensionError
from .numeric import ParamBlock, dropout

DROPOUT_SITES = ("word_in", "word_out", "du_in", "du_out")


def glorot(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


class LstmParams:
    """One LSTM direction; gate order along rows is [input, forget, candidate, output]."""

    def __init__(self, input_dim, hidden_dim, rng=None, name="lstm"):
        self.input_dim = int(input_dim)
        self.hidden_dim = H = int(hidden_dim)
        if rng is None:
            W = np.zeros((4 * H, input_dim))
            U = np.zeros((4 * H, H))
        else:
            W = glorot(rng, 4 * H, input_dim)
            U = glorot(rng, 4 * H, H)
        b = np.zeros(4 * H)
        if rng is not None:
            b[H:2 * H] = 1.0
        self.W = ParamBlock(f"{name}.W", W)
        self.U = ParamBlock(f"{name}.U", U)
        self.b = ParamBlock(f"{name}.b", b)

    def blocks(self):
        return [self.W, self.U, self.b]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_step(params, x_t, h_prev, c_prev):
    """Single LSTM step; returns ``(h_t, c_t)``."""
    H, D = params.hidden_dim, params.input_dim
    x_t = np.asarray(x_t, dtype=float).ravel()
    h_prev = np.asarray(h_prev, dtype=float).ravel()
    c_prev = np.asarray(c_prev, dtype=float).ravel()
    if x_t.shape != (D,) or h_prev.shape != (H,) or c_prev.shape != (H,):
        raise DimensionError(f"lstm_step expects x:{D}, h:{H}, c:{H}; got "
                             f"{x_t.shape[0]}, {h_prev.shape[0]}, {c_prev.shape[0]}")
    z = params.W.value @ x_t + params.U.value @ h_prev + params.b.value
    i = _sigmoid(z[:H])
    f = _sigmoid(z[H:2 * H])
    g = np.tanh(z[2 * H:3 * H])
    o = _sigmoid(z[3 * H:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def lstm_run(params, xs):
    """Run one direction from zero state over ``xs`` (T, D)."""
    xw = xs @ params.W.value.T + params.b.value
    hs, cs, gates = _kernels.lstm_forward(np.ascontiguousarray(xw), params.U.value)
    return hs, (xs, hs, cs, gates)


def lstm_run_backward(params, cache, dhs):
    xs, hs, cs, gates = cache
    dz = _kernels.lstm_backward(np.ascontiguousarray(dhs), gates, cs, params.U.value)
    params.W.grad += dz.T @ xs
    params.b.grad += dz.sum(axis=0)
    if len(hs) > 1:
        params.U.grad += dz[1:].T @ hs[:-1]
    return dz @ params.W.value


class BiLstmLayer:
    def __init__(self, input_dim, hidden_dim, rng=None, name="bilstm"):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.fwd = LstmParams(input_dim, hidden_dim, rng, f"{name}.fwd")
        self.bwd = LstmParams(input_dim, hidden_dim, rng, f"{name}.bwd")

    @property
    def output_dim(self):
        return 2 * self.hidden_dim

    def blocks(self):
        return self.fwd.blocks() + self.bwd.blocks()


def bilstm_run(layer, xs):
    """Returns ``(T, 2H)`` outputs: forward state then backward state per position."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise DimensionError("bilstm_run needs a non-empty (T, D) sequence")
    if xs.shape[1] != layer.input_dim:
        raise DimensionError(f"bilstm_run: layer expects {layer.input_dim}-dim inputs, got {xs.shape[1]}")
    hf, cf = lstm_run(layer.fwd, xs)
    hb, cb = lstm_run(layer.bwd, xs[::-1])
    return np.concatenate([hf, hb[::-1]], axis=1), (cf, cb)


def bilstm_backward(layer, cache, dout):
    cf, cb = cache
    H = layer.hidden_dim
    dx = lstm_run_backward(layer.fwd, cf, dout[:, :H])
    dx += lstm_run_backward(layer.bwd, cb, dout[::-1, H:])[::-1]
    return dx


def du_maxpool(hs, span):
    """Coordinate-wise max of ``hs[start..end]`` (inclusive)."""
    start, end = span
    if not 0 <= start <= end < len(hs):
        raise DimensionError(f"span {span} out of range for {len(hs)} positions")
    return np.max(hs[start:end + 1], axis=0)


def maxpool_spans(hs, spans):
    """Pool every span; also returns absolute argmax rows (first index on ties)."""
    pooled = np.empty((len(spans), hs.shape[1]))
    arg = np.empty((len(spans), hs.shape[1]), dtype=np.int64)
    for j, (start, end) in enumerate(spans):
        if not 0 <= start <= end < len(hs):
            raise DimensionError(f"span {(start, end)} out of range for {len(hs)} positions")
        seg = hs[start:end + 1]
        a = seg.argmax(axis=0)
        arg[j] = a + start
        pooled[j] = seg[a, np.arange(hs.shape[1])]
    return pooled, arg


def maxpool_backward(dpooled, arg, n_rows):
    # spans are disjoint, so every (row, col) target is hit at most once
    dhs = np.zeros((n_rows, dpooled.shape[1]))
    dhs[arg, np.arange(dpooled.shape[1])[None, :]] = dpooled
    return dhs


@dataclass
class EncoderCache:
    masks: dict
    word: tuple
    du: tuple
    arg: np.ndarray
    n_tokens: int


class EncoderStack:
    def __init__(self, input_dim, hidden_dim=300, dropout=0.5, rng=None, sites=DROPOUT_SITES):
        self.word_layer = BiLstmLayer(input_dim, hidden_dim, rng, "enc.word")
        self.du_layer = BiLstmLayer(2 * hidden_dim, hidden_dim, rng, "enc.du")
        self.dropout = float(dropout)
        self.sites = tuple(sites)
        unknown = set(self.sites) - set(DROPOUT_SITES)
        if unknown:
            raise ValueError(f"unknown dropout sites {sorted(unknown)}")

    @property
    def output_dim(self):
        return self.du_layer.output_dim

    def blocks(self):
        return self.word_layer.blocks() + self.du_layer.blocks()


def _drop(stack, site, x, rng, training, masks):
    if site not in stack.sites:
        return x
    y, mask = dropout(x, stack.dropout, rng, training)
    if mask is not None:
        masks[site] = mask
    return y


def encode_features(stack, feats, spans, rng=None, training=False):
    """Encode a featurized paragraph ``feats`` (L, D); returns ``(hDU, cache)``."""
    masks = {}
    x = _drop(stack, "word_in", feats, rng, training, masks)
    hs, wcache = bilstm_run(stack.word_layer, x)
    hs = _drop(stack, "word_out", hs, rng, training, masks)
    pooled, arg = maxpool_spans(hs, spans)
    pooled = _drop(stack, "du_in", pooled, rng, training, masks)
    hdu, dcache = bilstm_run(stack.du_layer, pooled)
    hdu = _drop(stack, "du_out", hdu, rng, training, masks)
    return hdu, EncoderCache(masks, wcache, dcache, arg, len(feats))


def encode_backward(stack, cache, dhdu):
    """Accumulate encoder gradients; returns the gradient w.r.t. the features."""
    m = cache.masks
    if "du_out" in m:
        dhdu = dhdu * m["du_out"]
    dpooled = bilstm_backward(stack.du_layer, cache.du, dhdu)
    if "du_in" in m:
        dpooled = dpooled * m["du_in"]
    dhs = maxpool_backward(dpooled, cache.arg, cache.n_tokens)
    if "word_out" in m:
        dhs = dhs * m["word_out"]
    dx = bilstm_backward(stack.word_layer, cache.word, dhs)
    if "word_in" in m:
        dx = dx * m["word_in"]
    return dx


def encode_paragraph(stack, paragraph, table, rng=None, training=False, inventories=None):
    """Featurize and encode ``paragraph``; returns the DU representations (n_du, 2H)."""
    feats = featurize_paragraph(paragraph, table, inventories or TagInventories())
    hdu, _ = encode_features(stack, feats, paragraph.du_spans, rng, training)
    return hdu
