"""Model snapshot files.

A snapshot is a numpy ``.npz`` archive holding:

``__meta__``
    UTF-8 JSON (stored as a uint8 array) with ``format`` = ``"paradisc-model"``,
    ``version`` (currently 1), the training ``config``, the tag
    ``inventories`` and the ordered ``words`` list;
``embeddings``
    (n_words, word_dim) float64 matrix, row i belonging to ``words[i]``;
    covers every pretrained or OOV vector the model has used;
one float64 array per parameter block, keyed by block name
    (e.g. ``enc.word.fwd.W``, ``head.imp.b``, ``crf.transitions``).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .corpus import EmbeddingTable, TagInventories
from .errors import DataError
from .model import STREAM_OOV, build_model
from .numeric import make_rng

FORMAT = "paradisc-model"
VERSION = 1


def save_model(model, path):
    vectors = model.table.used_vectors()
    words = list(vectors)
    emb = np.stack([vectors[w] for w in words]) if words else np.zeros((0, model.table.dim))
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "inventories": {"pos": list(model.inventories.pos), "ner": list(model.inventories.ner)},
        "words": words,
    }
    arrays = {b.name: b.value for b in model.blocks()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    arrays["embeddings"] = emb
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_model(path):
    try:
        archive = np.load(Path(path), allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read model snapshot {path}: {exc}") from None
    with archive:
        if "__meta__" not in archive.files:
            raise DataError(f"{path} is not a paradisc model snapshot")
        meta = json.loads(archive["__meta__"].tobytes().decode("utf-8"))
        if meta.get("format") != FORMAT:
            raise DataError(f"{path}: unexpected snapshot format {meta.get('format')!r}")
        if meta.get("version") != VERSION:
            raise DataError(f"{path}: unsupported snapshot version {meta.get('version')}")
        config = TrainConfig.from_dict(meta["config"])
        inventories = TagInventories(meta["inventories"]["pos"], meta["inventories"]["ner"])
        emb = archive["embeddings"]
        table = EmbeddingTable(config.word_dim, dict(zip(meta["words"], emb)),
                               make_rng(config.seed, STREAM_OOV, 1))
        model = build_model(config, inventories, table)
        for blk in model.blocks():
            if blk.name not in archive.files:
                raise DataError(f"{path}: missing parameter block {blk.name}")
            value = archive[blk.name]
            if value.shape != blk.value.shape:
                raise DataError(f"{path}: block {blk.name} has shape {value.shape}, expected {blk.value.shape}")
            blk.value[...] = value
    return model
