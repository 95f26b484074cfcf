"""Full paragraph-level relation model and the DU-pair baseline.

Both expose the same surface used by the training harness:

* ``loss(paragraph, rng=None, training=False, grad=False)`` returning
  ``(loss, n_slots)`` where ``n_slots`` counts the slots that contributed;
  with ``grad=True`` parameter gradients are accumulated as a side effect;
* ``predict(paragraph)`` returning per-slot predicted class indices and
  per-slot class probabilities;
* ``blocks()`` listing every :class:`~paradisc.numeric.ParamBlock`.
"""
from __future__ import annotations

import numpy as np

from . import crf as crf_mod
from .config import TrainConfig
from .corpus import EmbeddingTable, Label, SlotKind, TagInventories, featurize_paragraph
from .encoder import BiLstmLayer, EncoderStack, bilstm_backward, bilstm_run, encode_backward, encode_features, maxpool_spans, maxpool_backward
from .heads import HeadMode, HeadSet, slot_loss_grad
from .numeric import dropout, make_rng, softmax

# independent RNG sub-streams derived from the run seed
STREAM_INIT, STREAM_DROPOUT, STREAM_SHUFFLE, STREAM_OOV = 1, 2, 3, 4


def slot_targets(slot, binary=None):
    """Class indices counted as correct for ``slot`` (binary relabelling aware)."""
    if binary is None:
        return tuple(int(g) for g in slot.gold)
    return (1,) if Label[binary] in slot.gold else (0,)


class _Base:
    def __init__(self, config, inventories, table=None):
        self.config = config
        self.inventories = inventories
        if table is None:
            table = EmbeddingTable(config.word_dim, rng=make_rng(config.seed, STREAM_OOV))
        self.table = table
        self.input_dim = table.dim + len(inventories.pos) + len(inventories.ner)
        self._feats = {}

    def features(self, paragraph):
        key = id(paragraph)
        hit = self._feats.get(key)
        if hit is None or hit[0] is not paragraph:
            hit = (paragraph, featurize_paragraph(paragraph, self.table, self.inventories))
            self._feats[key] = hit
        return hit[1]

    def clear_cache(self):
        self._feats.clear()

    def targets(self, slot):
        return slot_targets(slot, self.config.binary)

    def zero_grad(self):
        for blk in self.blocks():
            blk.zero_grad()


class ParagraphModel(_Base):
    """Hierarchical encoder + tied/untied heads + optional CRF."""

    def __init__(self, config: TrainConfig, inventories: TagInventories, table=None):
        super().__init__(config, inventories, table)
        rng = make_rng(config.seed, STREAM_INIT)
        self.encoder = EncoderStack(self.input_dim, config.hidden, config.dropout, rng, config.dropout_sites)
        mode = HeadMode.TIED if config.variant == "BASIC-TIED" else HeadMode.UNTIED
        self.heads = HeadSet(mode, 2 * self.encoder.output_dim, config.num_labels, rng)
        self.crf = crf_mod.CrfParams(config.crf) if config.uses_crf else None

    def blocks(self):
        out = self.encoder.blocks() + self.heads.blocks()
        if self.crf is not None:
            out += self.crf.blocks()
        return out

    def _encode(self, paragraph, rng, training):
        return encode_features(self.encoder, self.features(paragraph), paragraph.du_spans, rng, training)

    @staticmethod
    def _pairs(hdu):
        return np.concatenate([hdu[:-1], hdu[1:]], axis=1)

    def logits(self, paragraph, rng=None, training=False):
        """Kind-matched head logits for every slot, shape (T, num_labels)."""
        hdu, _ = self._encode(paragraph, rng, training)
        return self._logits_from(hdu, paragraph)

    def _logits_from(self, hdu, paragraph):
        X = self._pairs(hdu)
        Z = np.empty((len(X), self.heads.num_labels))
        for kind in SlotKind:
            idx = [t for t, s in enumerate(paragraph.slots) if s.kind is kind]
            if idx:
                Z[idx] = self.heads.for_kind(kind).forward(X[idx])
        return Z

    def loss(self, paragraph, rng=None, training=False, grad=False):
        cfg = self.config
        hdu, cache = self._encode(paragraph, rng, training)
        X = self._pairs(hdu)
        slots = paragraph.slots
        kinds = [s.kind for s in slots]
        if self.crf is not None:
            Z = self._logits_from(hdu, paragraph)
            E = crf_mod.emissions(Z, kinds, self.crf.space)
            allowed = crf_mod.gold_allowed(slots, self.crf.space)
            if not grad:
                return crf_mod.crf_nll(E, self.crf, allowed), len(slots)
            value, dE = crf_mod.crf_nll_grad(E, self.crf, allowed)
            dZ = crf_mod.emissions_backward(dE, kinds, self.crf.space)
            contributing = list(range(len(slots)))
            n = len(slots)
        else:
            value = 0.0
            n = 0
            dZ = np.zeros((len(slots), self.heads.num_labels))
            contributing = []
            for kind, weight in ((SlotKind.IMPLICIT, 1.0), (SlotKind.EXPLICIT, cfg.alpha)):
                if weight == 0.0:
                    continue
                idx = [t for t, s in enumerate(slots) if s.kind is kind]
                if not idx:
                    continue
                Zk = self.heads.for_kind(kind).forward(X[idx])
                for row, t in enumerate(idx):
                    lv, dz = slot_loss_grad(Zk[row], self.targets(slots[t]), cfg.double_label)
                    value += weight * lv
                    dZ[t] = weight * dz
                contributing.extend(idx)
                n += len(idx)
            if not grad or n == 0:
                return value, n
        dX = np.zeros_like(X)
        for kind in SlotKind:
            idx = [t for t in contributing if slots[t].kind is kind]
            if idx:
                dX[idx] = self.heads.for_kind(kind).backward(X[idx], dZ[idx])
        half = hdu.shape[1]
        dhdu = np.zeros_like(hdu)
        dhdu[:-1] += dX[:, :half]
        dhdu[1:] += dX[:, half:]
        encode_backward(self.encoder, cache, dhdu)
        return value, n

    def predict(self, paragraph):
        """Per-slot predicted class indices and class probabilities."""
        Z = self.logits(paragraph)
        if self.crf is None:
            probs = np.array([softmax(z) for z in Z])
            return [int(np.argmax(z)) for z in Z], probs
        kinds = [s.kind for s in paragraph.slots]
        space = self.crf.space
        E = crf_mod.emissions(Z, kinds, space)
        path, _ = crf_mod.viterbi(E, self.crf)
        mu = crf_mod.marginals(E, self.crf)
        probs = np.empty((len(kinds), 4))
        for t, kind in enumerate(kinds):
            k = int(kind) * 4 if space is crf_mod.StateSpace.TYPED8 else 0
            row = mu[t, k:k + 4]
            probs[t] = row / row.sum()
        return [space.label(s) for s in path], probs


class PairBaselineModel(_Base):
    """Context-blind baseline: each slot sees only its own two DUs.

    A word-level Bi-LSTM runs over the concatenated tokens of the two DUs,
    each DU is max-pooled, and one shared head scores the pair.
    """

    def __init__(self, config: TrainConfig, inventories: TagInventories, table=None):
        super().__init__(config, inventories, table)
        rng = make_rng(config.seed, STREAM_INIT)
        self.word_layer = BiLstmLayer(self.input_dim, config.hidden, rng, "pair.word")
        self.heads = HeadSet(HeadMode.TIED, 4 * config.hidden, config.num_labels, rng)
        self.sites = tuple(s for s in config.dropout_sites if s in ("word_in", "word_out"))

    def blocks(self):
        return self.word_layer.blocks() + self.heads.blocks()

    def _slot_forward(self, feats, paragraph, t, rng, training):
        a0, a1 = paragraph.du_spans[t]
        b0, b1 = paragraph.du_spans[t + 1]
        x = feats[a0:b1 + 1]
        masks = {}
        if "word_in" in self.sites:
            x, masks["word_in"] = dropout(x, self.config.dropout, rng, training)
        hs, wcache = bilstm_run(self.word_layer, x)
        if "word_out" in self.sites:
            hs, masks["word_out"] = dropout(hs, self.config.dropout, rng, training)
        spans = [(0, a1 - a0), (b0 - a0, b1 - a0)]
        pooled, arg = maxpool_spans(hs, spans)
        xpair = pooled.reshape(1, -1)
        z = self.heads.tied.forward(xpair)[0]
        return z, (xpair, wcache, arg, len(x), masks)

    def slot_logits(self, paragraph, t):
        return self._slot_forward(self.features(paragraph), paragraph, t, None, False)[0]

    def loss(self, paragraph, rng=None, training=False, grad=False):
        cfg = self.config
        feats = self.features(paragraph)
        value, n = 0.0, 0
        for t, slot in enumerate(paragraph.slots):
            weight = 1.0 if slot.kind is SlotKind.IMPLICIT else cfg.alpha
            if weight == 0.0:
                continue
            z, (xpair, wcache, arg, L, masks) = self._slot_forward(feats, paragraph, t, rng, training)
            lv, dz = slot_loss_grad(z, self.targets(slot), cfg.double_label)
            value += weight * lv
            n += 1
            if not grad:
                continue
            dx = self.heads.tied.backward(xpair, weight * dz[None, :])
            dpooled = dx.reshape(2, -1)
            dhs = maxpool_backward(dpooled, arg, L)
            if masks.get("word_out") is not None:
                dhs = dhs * masks["word_out"]
            bilstm_backward(self.word_layer, wcache, dhs)
        return value, n

    def predict(self, paragraph):
        feats = self.features(paragraph)
        preds, probs = [], []
        for t in range(len(paragraph.slots)):
            z = self._slot_forward(feats, paragraph, t, None, False)[0]
            preds.append(int(np.argmax(z)))
            probs.append(softmax(z))
        return preds, np.array(probs)


def build_model(config, inventories, table=None):
    if config.variant == "BASELINE-PAIR":
        return PairBaselineModel(config, inventories, table)
    return ParagraphModel(config, inventories, table)
