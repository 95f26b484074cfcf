"""Hot inner loops: LSTM recurrences and linear-chain dynamic programs.

Each kernel has two implementations with identical signatures:

* ``*_nb`` -- explicit loops compiled with ``numba.njit``;
* ``*_np`` -- vectorised pure-numpy code.

The module-level names (``lstm_forward`` etc.) point at the numba versions
unless numba is missing or ``PARADISC_PURE_NUMPY`` is set to a non-empty value
other than ``0``. Both paths agree to round-off; see
``tests/test_kernels.py`` and ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and os.environ.get("PARADISC_PURE_NUMPY", "") in ("", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# LSTM
#
# Gate layout along the 4H axis is [input, forget, cell-candidate, output].
# ``xw`` holds the input projection plus bias for every step, shape (T, 4H).


def _sigmoid_np(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_forward_np(xw, U):
    T, H4 = xw.shape
    H = H4 // 4
    hs = np.zeros((T, H))
    cs = np.zeros((T, H))
    gates = np.empty((T, H4))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        z = xw[t] + U @ h
        i = _sigmoid_np(z[:H])
        f = _sigmoid_np(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid_np(z[3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = g
        gates[t, 3 * H:] = o
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward_np(dhs, gates, cs, U):
    """Back-propagate through time. Returns pre-activation grads ``dz`` (T, 4H)."""
    T, H = dhs.shape
    dz = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tc = np.tanh(cs[t])
        c_prev = cs[t - 1] if t > 0 else np.zeros(H)
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz[t, :H] = dc * g * i * (1.0 - i)
        dz[t, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[t, 3 * H:] = dh * tc * o * (1.0 - o)
        dh_next = U.T @ dz[t]
        dc_next = dc * f
    return dz


@njit(cache=True)
def _sigmoid_nb(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@njit(cache=True)
def lstm_forward_nb(xw, U):
    T, H4 = xw.shape
    H = H4 // 4
    hs = np.zeros((T, H))
    cs = np.zeros((T, H))
    gates = np.empty((T, H4))
    h = np.zeros(H)
    c = np.zeros(H)
    z = np.empty(H4)
    UT = np.ascontiguousarray(U.T)
    for t in range(T):
        z[:] = xw[t]
        for k in range(H):
            hk = h[k]
            for r in range(H4):
                z[r] += UT[k, r] * hk
        for j in range(H):
            i = _sigmoid_nb(z[j])
            f = _sigmoid_nb(z[H + j])
            g = np.tanh(z[2 * H + j])
            o = _sigmoid_nb(z[3 * H + j])
            cj = f * c[j] + i * g
            c[j] = cj
            gates[t, j] = i
            gates[t, H + j] = f
            gates[t, 2 * H + j] = g
            gates[t, 3 * H + j] = o
            cs[t, j] = cj
        for j in range(H):
            h[j] = gates[t, 3 * H + j] * np.tanh(c[j])
            hs[t, j] = h[j]
    return hs, cs, gates


@njit(cache=True)
def lstm_backward_nb(dhs, gates, cs, U):
    T, H = dhs.shape
    H4 = 4 * H
    dz = np.empty((T, H4))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        for j in range(H):
            i = gates[t, j]
            f = gates[t, H + j]
            g = gates[t, 2 * H + j]
            o = gates[t, 3 * H + j]
            tc = np.tanh(cs[t, j])
            c_prev = cs[t - 1, j] if t > 0 else 0.0
            dh = dhs[t, j] + dh_next[j]
            dc = dc_next[j] + dh * o * (1.0 - tc * tc)
            dz[t, j] = dc * g * i * (1.0 - i)
            dz[t, H + j] = dc * c_prev * f * (1.0 - f)
            dz[t, 2 * H + j] = dc * i * (1.0 - g * g)
            dz[t, 3 * H + j] = dh * tc * o * (1.0 - o)
            dc_next[j] = dc * f
        dh_next[:] = 0.0
        for r in range(H4):
            d = dz[t, r]
            for k in range(H):
                dh_next[k] += U[r, k] * d
    return dz


# --------------------------------------------------------------------------
# Linear-chain CRF
#
# ``allowed`` is a (T, S) boolean mask; disallowed states are excluded from
# the recursion entirely (probability zero). Pass an all-True mask for the
# unconstrained partition function.


@np.errstate(divide="ignore", invalid="ignore")
def crf_forward_np(E, trans, start, end, allowed):
    T, S = E.shape
    alpha = np.full((T, S), -np.inf)
    a0 = start + E[0]
    alpha[0] = np.where(allowed[0], a0, -np.inf)
    for t in range(1, T):
        scores = alpha[t - 1][:, None] + trans
        m = scores.max(axis=0)
        safe = np.where(np.isfinite(m), m, 0.0)
        lse = safe + np.log(np.exp(scores - safe).sum(axis=0))
        alpha[t] = np.where(allowed[t], lse + E[t], -np.inf)
    last = alpha[T - 1] + end
    m = last.max()
    log_z = m + np.log(np.exp(last - m).sum())
    return alpha, log_z


@np.errstate(divide="ignore", invalid="ignore")
def crf_backward_np(E, trans, start, end, allowed):
    T, S = E.shape
    beta = np.full((T, S), -np.inf)
    beta[T - 1] = np.where(allowed[T - 1], end, -np.inf)
    for t in range(T - 2, -1, -1):
        nxt = np.where(allowed[t + 1], E[t + 1] + beta[t + 1], -np.inf)
        scores = trans + nxt[None, :]
        m = scores.max(axis=1)
        safe = np.where(np.isfinite(m), m, 0.0)
        lse = safe + np.log(np.exp(scores - safe[:, None]).sum(axis=1))
        beta[t] = np.where(allowed[t], lse, -np.inf)
    return beta


def viterbi_np(E, trans, start, end):
    T, S = E.shape
    back = np.zeros((T, S), dtype=np.int64)
    delta = start + E[0]
    for t in range(1, T):
        scores = delta[:, None] + trans
        back[t] = scores.argmax(axis=0)
        delta = scores[back[t], np.arange(S)] + E[t]
    delta = delta + end
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = int(delta.argmax())
    best = delta[path[T - 1]]
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(best)


@njit(cache=True)
def crf_forward_nb(E, trans, start, end, allowed):
    T, S = E.shape
    alpha = np.full((T, S), -np.inf)
    for s in range(S):
        if allowed[0, s]:
            alpha[0, s] = start[s] + E[0, s]
    for t in range(1, T):
        for b in range(S):
            if not allowed[t, b]:
                continue
            m = -np.inf
            for a in range(S):
                v = alpha[t - 1, a] + trans[a, b]
                if v > m:
                    m = v
            if m == -np.inf:
                continue
            acc = 0.0
            for a in range(S):
                acc += np.exp(alpha[t - 1, a] + trans[a, b] - m)
            alpha[t, b] = m + np.log(acc) + E[t, b]
    m = -np.inf
    for s in range(S):
        v = alpha[T - 1, s] + end[s]
        if v > m:
            m = v
    acc = 0.0
    for s in range(S):
        acc += np.exp(alpha[T - 1, s] + end[s] - m)
    return alpha, m + np.log(acc)


@njit(cache=True)
def crf_backward_nb(E, trans, start, end, allowed):
    T, S = E.shape
    beta = np.full((T, S), -np.inf)
    for s in range(S):
        if allowed[T - 1, s]:
            beta[T - 1, s] = end[s]
    for t in range(T - 2, -1, -1):
        for a in range(S):
            if not allowed[t, a]:
                continue
            m = -np.inf
            for b in range(S):
                if allowed[t + 1, b]:
                    v = trans[a, b] + E[t + 1, b] + beta[t + 1, b]
                    if v > m:
                        m = v
            if m == -np.inf:
                continue
            acc = 0.0
            for b in range(S):
                if allowed[t + 1, b]:
                    acc += np.exp(trans[a, b] + E[t + 1, b] + beta[t + 1, b] - m)
            beta[t, a] = m + np.log(acc)
    return beta


@njit(cache=True)
def viterbi_nb(E, trans, start, end):
    T, S = E.shape
    back = np.zeros((T, S), dtype=np.int64)
    delta = np.empty(S)
    new = np.empty(S)
    for s in range(S):
        delta[s] = start[s] + E[0, s]
    for t in range(1, T):
        for b in range(S):
            best = delta[0] + trans[0, b]
            arg = 0
            for a in range(1, S):
                v = delta[a] + trans[a, b]
                if v > best:
                    best = v
                    arg = a
            back[t, b] = arg
            new[b] = best + E[t, b]
        for b in range(S):
            delta[b] = new[b]
    path = np.empty(T, dtype=np.int64)
    best = delta[0] + end[0]
    arg = 0
    for s in range(1, S):
        v = delta[s] + end[s]
        if v > best:
            best = v
            arg = s
    path[T - 1] = arg
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


if USE_NUMBA:
    lstm_forward = lstm_forward_nb
    lstm_backward = lstm_backward_nb
    crf_forward = crf_forward_nb
    crf_backward = crf_backward_nb
    _viterbi = viterbi_nb
else:
    lstm_forward = lstm_forward_np
    lstm_backward = lstm_backward_np
    crf_forward = crf_forward_np
    crf_backward = crf_backward_np
    _viterbi = viterbi_np


def viterbi(E, trans, start, end):
    path, score = _viterbi(E, trans, start, end)
    return path, float(score)
