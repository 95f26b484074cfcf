"""Synthetic paragraph corpora with planted, recoverable relation signals.

Three regimes:

``connective-only``
    Slot labels are independent draws from ``label_prior``. Every explicit
    slot opens its second DU with a connective that determines the label;
    every implicit slot hides a label-specific cue word in its second DU.
``markov``
    Slot labels (both kinds) follow a first-order Markov chain
    ``transition[prev, next]``. Implicit slots carry a cue word only with
    probability ``cue_prob`` and the cue names the true label only with
    probability ``cue_accuracy``; the rest must be inferred from the
    neighbouring relations. :func:`sticky_transition` and
    :func:`cyclic_transition` build the two chains used in tests.
``context``
    Each paragraph has a topic label announced by a topic word somewhere in
    DU 0. An implicit slot takes the topic label (with no cue) with
    probability ``context_prob``; otherwise it behaves as in
    ``connective-only``. Slots away from DU 0 cannot be resolved from their
    two DUs alone.

DU counts per paragraph follow ``du_count_probs``, whose default matches
the reported PDTB distribution (2: 44%, 3: 25%, 4: 15%, 5: 7.3%, >5: 8.7%).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import (Corpus, Label, Paragraph, RelationSlot, SlotKind, Split, TagInventories, Token)
from .numeric import make_rng

REGIMES = ("connective-only", "markov", "context")

# >5 mass (8.7%) is spread over 6..8 DUs
DEFAULT_DU_COUNTS = {2: 0.44, 3: 0.25, 4: 0.15, 5: 0.073, 6: 0.04, 7: 0.027, 8: 0.02}

SYNTH_INVENTORIES = TagInventories(
    ("NN", "VB", "JJ", "IN", "DT", "RB", "CC", "PRP"),
    ("O", "PERSON", "ORGANIZATION"),
)


def sticky_transition(stay=0.8, n=4):
    """Transition matrix with ``stay`` on the diagonal, the rest spread evenly."""
    m = np.full((n, n), (1.0 - stay) / (n - 1))
    np.fill_diagonal(m, stay)
    return m


def cyclic_transition(advance=0.9, n=4):
    """Label ``k`` is followed by ``(k + 1) % n`` with probability ``advance``.

    Unlike :func:`sticky_transition` the pattern is directional: inferring a
    slot from a neighbour two slots away needs the label advanced twice.
    """
    m = np.full((n, n), (1.0 - advance) / (n - 1))
    m[np.arange(n), (np.arange(n) + 1) % n] = advance
    return m


@dataclass
class SynthConfig:
    regime: str = "connective-only"
    n_train: int = 2000
    n_dev: int = 300
    n_test: int = 300
    vocab_size: int = 200
    du_len: tuple = (3, 7)
    implicit_prob: float = 0.5
    double_prob: float = 0.04
    label_prior: tuple = (0.25, 0.25, 0.25, 0.25)
    transition: np.ndarray = field(default_factory=sticky_transition)
    cues_per_label: int = 3
    connectives_per_label: int = 2
    cue_prob: float = 1.0
    cue_accuracy: float = 1.0
    context_prob: float = 0.5
    du_count_probs: dict = field(default_factory=lambda: dict(DEFAULT_DU_COUNTS))

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        self.transition = np.asarray(self.transition, dtype=float)


def connective_word(label, k):
    return f"conn_{Label(label).name.lower()}{k}"


def cue_word(label, k):
    return f"cue_{Label(label).name.lower()}{k}"


def topic_word(label):
    return f"topic_{Label(label).name.lower()}"


def connective_label(surface):
    """Inverse of :func:`connective_word`; None for other tokens."""
    if not surface.startswith("conn_"):
        return None
    name = surface[5:].rstrip("0123456789")
    for lab in Label:
        if lab.name.lower() == name:
            return lab
    return None


class _Generator:
    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        counts = sorted(cfg.du_count_probs)
        probs = np.array([cfg.du_count_probs[k] for k in counts], dtype=float)
        self.du_counts = np.array(counts)
        self.du_probs = probs / probs.sum()
        self.prior = np.asarray(cfg.label_prior, dtype=float)
        self.prior = self.prior / self.prior.sum()

    def filler(self, n):
        ids = self.rng.integers(0, self.cfg.vocab_size, size=n)
        return [Token(f"w{i}", "NN" if i % 3 else "VB", "O") for i in ids]

    def labels(self, n_slots):
        cfg, rng = self.cfg, self.rng
        if cfg.regime == "markov":
            out = [int(rng.choice(4, p=self.prior))]
            for _ in range(n_slots - 1):
                out.append(int(rng.choice(4, p=cfg.transition[out[-1]])))
            return out
        return [int(rng.choice(4, p=self.prior)) for _ in range(n_slots)]

    def paragraph(self):
        cfg, rng = self.cfg, self.rng
        n_du = int(rng.choice(self.du_counts, p=self.du_probs))
        n_slots = n_du - 1
        kinds = [SlotKind.IMPLICIT if rng.random() < cfg.implicit_prob else SlotKind.EXPLICIT
                 for _ in range(n_slots)]
        labels = self.labels(n_slots)
        topic = int(rng.choice(4)) if cfg.regime == "context" else None

        du_tokens = []
        lo, hi = cfg.du_len
        first = self.filler(int(rng.integers(lo, hi + 1)))
        if topic is not None:
            first.insert(int(rng.integers(0, len(first) + 1)), Token(topic_word(topic), "NN", "O"))
        du_tokens.append(first)

        slots = []
        for t in range(n_slots):
            body = self.filler(int(rng.integers(lo, hi + 1)))
            lab = labels[t]
            if kinds[t] is SlotKind.EXPLICIT:
                conn = connective_word(lab, int(rng.integers(cfg.connectives_per_label)))
                body.insert(0, Token(conn, "IN", "O"))
            else:
                cued = True
                if cfg.regime == "context" and rng.random() < cfg.context_prob:
                    lab = topic
                    cued = False
                elif cfg.regime == "markov":
                    cued = rng.random() < cfg.cue_prob
                if cued:
                    shown = lab
                    if cfg.cue_accuracy < 1.0 and rng.random() >= cfg.cue_accuracy:
                        shown = int(rng.choice([x for x in range(4) if x != lab]))
                    word = cue_word(shown, int(rng.integers(cfg.cues_per_label)))
                    body.insert(int(rng.integers(0, len(body) + 1)), Token(word, "JJ", "O"))
            gold = [lab]
            if rng.random() < cfg.double_prob:
                gold.append(int(rng.choice([x for x in range(4) if x != lab])))
            slots.append(RelationSlot(t, kinds[t], tuple(gold)))
            du_tokens.append(body)

        tokens, spans = [], []
        for toks in du_tokens:
            spans.append((len(tokens), len(tokens) + len(toks) - 1))
            tokens.extend(toks)
        inv = SYNTH_INVENTORIES
        tokens = [Token(t.surface, t.pos, t.ner, inv.pos_id(t.pos), inv.ner_id(t.ner)) for t in tokens]
        return Paragraph(tokens, spans, slots)


def gen_synthetic(config=None, seed=0):
    """Generate a train/dev/test :class:`Corpus` deterministically from ``seed``."""
    cfg = config or SynthConfig()
    gen = _Generator(cfg, make_rng(seed, 7))
    splits = []
    for n in (cfg.n_train, cfg.n_dev, cfg.n_test):
        splits.append(Split([gen.paragraph() for _ in range(n)], SYNTH_INVENTORIES))
    return Corpus(*splits)
