"""Training configuration and its key-value file format.

A config file holds one ``name = value`` pair per line (``#`` starts a
comment); names are the :class:`TrainConfig` field names.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Label
from .errors import ConfigError

VARIANTS = ("BASELINE-PAIR", "BASIC-TIED", "UNTIED", "UNTIED+CRF")
CRF_MODES = ("off", "plain4", "typed8")


@dataclass
class TrainConfig:
    variant: str = "UNTIED+CRF"
    alpha: float = 1.0
    lr: float = 5e-4
    window: int = 128
    max_epochs: int = 40
    dropout: float = 0.5
    clip: float = 5.0
    hidden: int = 300
    word_dim: int = 300
    seed: int = 0
    crf: str | None = None
    binary: str | None = None
    double_label: str = "marginal"
    fn_attribution: str = "first"
    dropout_sites: tuple = ("word_in", "word_out", "du_in", "du_out")

    def __post_init__(self):
        self.variant = str(self.variant).upper()
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.crf is None:
            self.crf = "typed8" if self.variant == "UNTIED+CRF" else "off"
        self.crf = str(self.crf).lower()
        if self.crf not in CRF_MODES:
            raise ConfigError(f"unknown CRF mode {self.crf!r}; choose from {', '.join(CRF_MODES)}")
        if self.crf != "off" and self.variant == "UNTIED":
            self.variant = "UNTIED+CRF"
        elif self.crf == "off" and self.variant == "UNTIED+CRF":
            self.variant = "UNTIED"
        if self.crf != "off" and self.variant != "UNTIED+CRF":
            raise ConfigError(f"the CRF layer requires untied heads, not {self.variant}")
        if self.binary is not None:
            try:
                Label[self.binary]
            except KeyError:
                raise ConfigError(f"binary target must be one of {[l.name for l in Label]}") from None
            if self.uses_crf:
                raise ConfigError("binary one-vs-all mode cannot use the CRF layer")
        if self.uses_crf and self.alpha != 1.0:
            raise ConfigError("the CRF sequence loss covers all slots; alpha must be 1 with a CRF")
        if self.alpha < 0 or self.alpha != self.alpha:
            raise ConfigError("alpha must be a finite non-negative number")
        for name in ("lr", "window", "max_epochs", "clip", "hidden", "word_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.double_label not in ("marginal", "sum"):
            raise ConfigError("double_label must be 'marginal' or 'sum'")
        if self.fn_attribution not in ("first", "all"):
            raise ConfigError("fn_attribution must be 'first' or 'all'")
        if isinstance(self.dropout_sites, str):
            self.dropout_sites = tuple(s for s in self.dropout_sites.replace(",", " ").split() if s)
        self.dropout_sites = tuple(self.dropout_sites)

    @property
    def uses_crf(self):
        return self.variant == "UNTIED+CRF"

    @property
    def num_labels(self):
        return 2 if self.binary is not None else 4

    def replace(self, **changes):
        if "variant" in changes and "crf" not in changes:
            changes["crf"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["dropout_sites"] = list(self.dropout_sites)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def _coerce(f, raw):
    if raw.lower() in ("none", "null", ""):
        return None
    typ = str(f.type)
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r}") from None
    return raw


def load_config(path, **overrides):
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, raw = (s.strip() for s in line.split("=", 1))
        else:
            parts = line.split(None, 1)
            key, raw = parts[0], (parts[1] if len(parts) > 1 else "")
        if key not in fields:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(fields[key], raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def dump_config(cfg, path):
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = " ".join(v)
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
