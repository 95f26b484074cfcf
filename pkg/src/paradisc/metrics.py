"""Slot-level evaluation: per-class P/R/F1, macro-F1 and accuracy per slot kind.

Counting rule for one slot with gold set ``G`` and prediction ``p``: if
``p in G`` the slot is correct and ``p`` gets a true positive; otherwise
``p`` gets a false positive and the first-listed gold label a false negative
(``fn_attribution="all"`` charges every gold label instead).
A class that never occurs in gold or predictions scores P = R = F1 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Label, SlotKind
from .model import slot_targets

BUCKETS = ("2", "3", "4", "5", ">5")
LABEL_NAMES = tuple(l.name for l in Label)


def bucket_of(num_dus):
    return str(num_dus) if num_dus <= 5 else ">5"


def class_names(binary=None):
    if binary is None:
        return LABEL_NAMES
    return (f"not-{binary}", binary)


@dataclass
class ClassScores:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self):
        if self.tp + self.fp == 0:
            return 1.0 if self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self):
        if self.tp + self.fn == 0:
            return 1.0 if self.fp == 0 else 0.0
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": self.precision,
                "recall": self.recall, "f1": self.f1}


@dataclass
class KindMetrics:
    classes: tuple = LABEL_NAMES
    per_class: dict = field(default_factory=dict)
    correct: int = 0
    count: int = 0

    def __post_init__(self):
        self.classes = tuple(self.classes)
        for name in self.classes:
            self.per_class.setdefault(name, ClassScores())

    def add(self, pred, targets, fn_attribution="first"):
        self.count += 1
        name = self.classes[pred]
        if pred in targets:
            self.correct += 1
            self.per_class[name].tp += 1
            return
        self.per_class[name].fp += 1
        charged = targets if fn_attribution == "all" else targets[:1]
        for g in charged:
            self.per_class[self.classes[g]].fn += 1

    @property
    def accuracy(self):
        return self.correct / self.count if self.count else 0.0

    @property
    def macro_f1(self):
        return sum(self.per_class[c].f1 for c in self.classes) / len(self.classes)

    def f1(self, name):
        return self.per_class[name].f1

    def to_dict(self):
        return {"classes": list(self.classes), "count": self.count, "correct": self.correct,
                "accuracy": self.accuracy, "macro_f1": self.macro_f1,
                "per_class": {c: self.per_class[c].to_dict() for c in self.classes}}

    @classmethod
    def from_dict(cls, d):
        per = {c: ClassScores(v["tp"], v["fp"], v["fn"]) for c, v in d["per_class"].items()}
        return cls(tuple(d["classes"]), per, d["correct"], d["count"])


@dataclass
class Metrics:
    implicit: KindMetrics
    explicit: KindMetrics
    buckets: dict | None = None  # bucket -> {"implicit": KindMetrics, "explicit": KindMetrics}
    binary: str | None = None

    def kind(self, kind):
        return self.explicit if SlotKind(kind) is SlotKind.EXPLICIT else self.implicit

    @property
    def positive_f1(self):
        """Implicit F1 of the positive class (binary mode only)."""
        if self.binary is None:
            raise ValueError("positive_f1 is defined for binary-mode metrics only")
        return self.implicit.f1(self.binary)

    def to_dict(self):
        d = {"binary": self.binary, "implicit": self.implicit.to_dict(), "explicit": self.explicit.to_dict()}
        if self.buckets is not None:
            d["buckets"] = {b: {k: m.to_dict() for k, m in v.items()} for b, v in self.buckets.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        buckets = None
        if d.get("buckets") is not None:
            buckets = {b: {k: KindMetrics.from_dict(m) for k, m in v.items()} for b, v in d["buckets"].items()}
        return cls(KindMetrics.from_dict(d["implicit"]), KindMetrics.from_dict(d["explicit"]), buckets,
                   d.get("binary"))

    def __eq__(self, other):
        return isinstance(other, Metrics) and self.to_dict() == other.to_dict()


def score_predictions(paragraphs, predictions, binary=None, buckets=True, fn_attribution="first"):
    """Build :class:`Metrics` from per-paragraph predicted class lists."""
    names = class_names(binary)
    imp, exp = KindMetrics(names), KindMetrics(names)
    bk = {b: {"implicit": KindMetrics(names), "explicit": KindMetrics(names)} for b in BUCKETS} if buckets else None
    if len(paragraphs) != len(predictions):
        raise ValueError(f"{len(paragraphs)} paragraphs but {len(predictions)} prediction lists")
    for para, preds in zip(paragraphs, predictions):
        if len(preds) != len(para.slots):
            raise ValueError("prediction count does not match slot count")
        for slot, pred in zip(para.slots, preds):
            targets = slot_targets(slot, binary)
            name = "explicit" if slot.kind is SlotKind.EXPLICIT else "implicit"
            (exp if name == "explicit" else imp).add(int(pred), targets, fn_attribution)
            if bk is not None:
                bk[bucket_of(para.num_dus)][name].add(int(pred), targets, fn_attribution)
    return Metrics(imp, exp, bk, binary)


def predict_split(model, paragraphs):
    preds, probs = [], []
    for p in paragraphs:
        a, b = model.predict(p)
        preds.append(a)
        probs.append(b)
    return preds, probs


def evaluate(model, split, buckets=True):
    paragraphs = list(split)
    if not paragraphs:
        raise ValueError("cannot evaluate an empty split")
    preds, _ = predict_split(model, paragraphs)
    cfg = model.config
    return score_predictions(paragraphs, preds, cfg.binary, buckets, cfg.fn_attribution)
