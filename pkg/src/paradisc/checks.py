"""Self-verification suites behind the ``check`` CLI command.

The CRF suite compares the dynamic programs with exhaustive enumeration of
state paths; the gradient suite runs central finite differences over every
parameter block of a small UNTIED+CRF model.
"""
from __future__ import annotations

import itertools
import time

import numpy as np

from . import crf
from .config import TrainConfig
from .errors import VerificationError
from .model import build_model
from .numeric import finite_diff_check, make_rng
from .synth import SynthConfig, gen_synthetic


def enumerate_paths(E, params, allowed=None):
    """Every label path as an (N, T) array with its (N,) score vector.

    Paths come out in lexicographic order, optionally restricted to per-slot
    allowed sets. Scores are summed array-wise over all paths at once, so an
    8^6 enumeration stays cheap.
    """
    T, S = E.shape
    choices = [range(S)] * T if allowed is None else [sorted(a) for a in allowed]
    paths = np.array(list(itertools.product(*choices)), dtype=np.intp).reshape(-1, T)
    trans, start, end = params.arrays()
    scores = start[paths[:, 0]] + end[paths[:, -1]] + E[np.arange(T), paths].sum(axis=1)
    if T > 1:
        scores = scores + trans[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return paths, scores


def _lse(xs):
    m = xs.max()
    return float(m + np.log(np.exp(xs - m).sum()))


def random_crf_instance(rng, T, S, scale=2.0):
    space = crf.StateSpace.TYPED8 if S == 8 else crf.StateSpace.PLAIN4
    params = crf.CrfParams(space)
    params.transitions.value[...] = rng.normal(0, scale, (S, S))
    params.start.value[...] = rng.normal(0, scale, S)
    params.end.value[...] = rng.normal(0, scale, S)
    E = rng.normal(0, scale, (T, S))
    allowed = [sorted(rng.choice(S, size=int(rng.integers(1, S + 1)), replace=False).tolist())
               for _ in range(T)]
    return E, params, allowed


def crf_oracle_suite(n_instances=200, max_T=6, sizes=(4, 8), seed=0, tol=1e-8):
    """Viterbi, forward and constrained forward against enumeration."""
    rng = make_rng(seed, 11)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(n_instances):
        S = sizes[k % len(sizes)]
        T = int(rng.integers(1, max_T + 1))
        E, params, allowed = random_crf_instance(rng, T, S)
        paths, scores = enumerate_paths(E, params)
        # argmax returns the first maximum: the lexicographically first best path
        k_best = int(np.argmax(scores))
        best, best_path = float(scores[k_best]), paths[k_best].tolist()
        path, score = crf.viterbi(E, params)
        z = crf.forward_logZ(E, params)
        zc = crf.constrained_logZ(E, params, allowed)
        z_ref = _lse(scores)
        zc_ref = _lse(enumerate_paths(E, params, allowed)[1])
        errs = [abs(score - best), abs(z - z_ref), abs(zc - zc_ref)]
        worst = max(worst, *errs)
        if path != best_path or max(errs) > tol:
            raise VerificationError(
                f"CRF instance {k} (T={T}, S={S}): viterbi {path}/{score:.12g} vs {best_path}/{best:.12g}, "
                f"logZ {z:.12g} vs {z_ref:.12g}, constrained {zc:.12g} vs {zc_ref:.12g}")
    return {"instances": n_instances, "max_abs_error": worst, "seconds": time.perf_counter() - t0}


def gradient_suite(hidden=8, word_dim=8, n_paragraphs=3, seed=0, step=1e-4, tol=1e-3, max_coords=None,
                   variant="UNTIED+CRF", raise_on_fail=True):
    """Finite-difference check of every block of a small model on synthetic paragraphs.

    Dropout stays active with masks pinned by reseeding, so the dropout
    backward path is covered too.
    """
    corpus = gen_synthetic(SynthConfig(regime="markov", n_train=40, n_dev=1, n_test=1), seed=seed)
    paragraphs = [p for p in corpus.train if p.num_dus >= 3][:n_paragraphs]
    cfg = TrainConfig(variant=variant, hidden=hidden, word_dim=word_dim, seed=seed)
    model = build_model(cfg, corpus.inventories)
    if model.config.uses_crf:
        # non-zero CRF parameters so their gradients are exercised
        r = make_rng(seed, 12)
        for blk in model.crf.blocks():
            blk.value[...] = r.normal(0, 0.5, blk.shape)

    def loss():
        return sum(model.loss(p, make_rng(seed, 13, i), training=True)[0] for i, p in enumerate(paragraphs))

    model.zero_grad()
    for i, p in enumerate(paragraphs):
        model.loss(p, make_rng(seed, 13, i), training=True, grad=True)
    return finite_diff_check(loss, model.blocks(), step=step, tol=tol, max_coords=max_coords,
                             rng=make_rng(seed, 14), raise_on_fail=raise_on_fail)
