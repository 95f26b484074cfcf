"""Linear-chain CRF over the relation slots of a paragraph.

In the TYPED-8 state space a state is a (slot kind, label) pair, index
``kind * 4 + label``; emissions for states of the wrong kind are pinned to
``MASK`` so decoded kinds always agree with the annotation. PLAIN-4 uses the
labels directly.

A path ``s_1..s_T`` scores
``start[s_1] + sum_t E[t, s_t] + sum_t trans[s_t, s_t+1] + end[s_T]``.
"""
from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .corpus import SlotKind
from .errors import ConfigError, DataError
from .numeric import ParamBlock

MASK = -1e4
NUM_LABELS = 4


class StateSpace(enum.Enum):
    TYPED8 = "typed8"
    PLAIN4 = "plain4"

    @property
    def num_states(self):
        return 8 if self is StateSpace.TYPED8 else 4

    def state(self, kind, label):
        if self is StateSpace.TYPED8:
            return int(SlotKind(kind)) * NUM_LABELS + int(label)
        return int(label)

    def label(self, state):
        return int(state) % NUM_LABELS

    def kind(self, state):
        if self is StateSpace.PLAIN4:
            return None
        return SlotKind(int(state) // NUM_LABELS)


class CrfParams:
    def __init__(self, space=StateSpace.TYPED8):
        self.space = StateSpace(space)
        S = self.space.num_states
        self.transitions = ParamBlock("crf.transitions", np.zeros((S, S)))
        self.start = ParamBlock("crf.start", np.zeros(S))
        self.end = ParamBlock("crf.end", np.zeros(S))

    @property
    def num_states(self):
        return self.space.num_states

    def blocks(self):
        return [self.transitions, self.start, self.end]

    def arrays(self):
        return self.transitions.value, self.start.value, self.end.value


def emissions(logits, kinds, space=StateSpace.TYPED8):
    """Build the (T, S) emission table from per-slot kind-matched head logits."""
    logits = np.asarray(logits, dtype=float)
    space = StateSpace(space)
    if logits.ndim != 2 or logits.shape[1] != NUM_LABELS:
        raise ConfigError(f"CRF emissions need (T, {NUM_LABELS}) logits, got {logits.shape}")
    if len(kinds) != len(logits):
        raise ConfigError(f"{len(logits)} logit rows but {len(kinds)} slot kinds")
    if space is StateSpace.PLAIN4:
        return logits.copy()
    E = np.full((len(logits), 8), MASK)
    for t, kind in enumerate(kinds):
        k = int(SlotKind(kind))
        E[t, k * NUM_LABELS:(k + 1) * NUM_LABELS] = logits[t]
    return E


def emissions_backward(dE, kinds, space=StateSpace.TYPED8):
    """Gradient w.r.t. the logits; masked entries are constants."""
    if StateSpace(space) is StateSpace.PLAIN4:
        return dE.copy()
    out = np.empty((len(kinds), NUM_LABELS))
    for t, kind in enumerate(kinds):
        k = int(SlotKind(kind))
        out[t] = dE[t, k * NUM_LABELS:(k + 1) * NUM_LABELS]
    return out


def _mask(allowed, T, S):
    if allowed is None:
        return np.ones((T, S), dtype=np.bool_)
    if isinstance(allowed, np.ndarray) and allowed.dtype == np.bool_:
        if allowed.shape != (T, S):
            raise DataError(f"allowed mask has shape {allowed.shape}, expected {(T, S)}")
        mask = allowed
    else:
        if len(allowed) != T:
            raise DataError(f"{len(allowed)} allowed sets for {T} slots")
        mask = np.zeros((T, S), dtype=np.bool_)
        for t, states in enumerate(allowed):
            for s in states:
                mask[t, int(s)] = True
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise DataError(f"empty allowed state set at slot {int(empty[0])}")
    return mask


def _prep(E, params):
    E = np.ascontiguousarray(E, dtype=float)
    trans, start, end = params.arrays()
    if E.ndim != 2 or E.shape[1] != trans.shape[0] or E.shape[0] < 1:
        raise DataError(f"emission table shape {E.shape} does not fit {trans.shape[0]} states")
    return E, trans, start, end


def viterbi(E, params):
    """Best state path and its score; ties go to the lowest state index."""
    E, trans, start, end = _prep(E, params)
    path, score = _kernels.viterbi(E, trans, start, end)
    return [int(s) for s in path], score


def forward_logZ(E, params):
    E, trans, start, end = _prep(E, params)
    _, log_z = _kernels.crf_forward(E, trans, start, end, _mask(None, *E.shape))
    return float(log_z)


def constrained_logZ(E, params, allowed):
    """Log-sum of path scores over paths that stay inside ``allowed`` per slot."""
    E, trans, start, end = _prep(E, params)
    _, log_z = _kernels.crf_forward(E, trans, start, end, _mask(allowed, *E.shape))
    return float(log_z)


def path_score(E, params, path):
    trans, start, end = params.arrays()
    s = start[path[0]] + end[path[-1]] + sum(E[t, st] for t, st in enumerate(path))
    return float(s + sum(trans[a, b] for a, b in zip(path[:-1], path[1:])))


def _expectations(E, trans, start, end, mask):
    """Log-partition, unary marginals (T, S) and summed pairwise marginals (S, S)."""
    alpha, log_z = _kernels.crf_forward(E, trans, start, end, mask)
    beta = _kernels.crf_backward(E, trans, start, end, mask)
    with np.errstate(invalid="ignore"):
        unary = np.exp(alpha + beta - log_z)
        pair = np.zeros_like(trans)
        for t in range(len(E) - 1):
            nxt = E[t + 1] + beta[t + 1]
            pair += np.exp(alpha[t][:, None] + trans + nxt[None, :] - log_z)
    return float(log_z), np.nan_to_num(unary), np.nan_to_num(pair)


def marginals(E, params, allowed=None):
    """Posterior probability of each state at each slot."""
    E, trans, start, end = _prep(E, params)
    return _expectations(E, trans, start, end, _mask(allowed, *E.shape))[1]


def crf_nll(E, params, allowed):
    E, trans, start, end = _prep(E, params)
    full = _kernels.crf_forward(E, trans, start, end, _mask(None, *E.shape))[1]
    gold = _kernels.crf_forward(E, trans, start, end, _mask(allowed, *E.shape))[1]
    return float(full - gold)


def crf_nll_grad(E, params, allowed):
    """NLL and its gradient w.r.t. ``E``; CRF parameter gradients are accumulated."""
    E, trans, start, end = _prep(E, params)
    z_full, mu_full, xi_full = _expectations(E, trans, start, end, _mask(None, *E.shape))
    z_gold, mu_gold, xi_gold = _expectations(E, trans, start, end, _mask(allowed, *E.shape))
    dmu = mu_full - mu_gold
    params.transitions.grad += xi_full - xi_gold
    params.start.grad += dmu[0]
    params.end.grad += dmu[-1]
    return z_full - z_gold, dmu


def gold_allowed(slots, space=StateSpace.TYPED8):
    """Per-slot gold-consistent state sets for a paragraph's slots."""
    space = StateSpace(space)
    return [[space.state(slot.kind, g) for g in slot.gold] for slot in slots]
