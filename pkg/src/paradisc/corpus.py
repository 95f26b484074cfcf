"""Paragraph data model, corpus file format, embeddings and token features.

Corpus file format (UTF-8)::

    #POS CC CD DT ...          optional, fixes the POS inventory
    #NER PERSON LOCATION ...   optional, fixes the NER inventory

    The<TAB>DT<TAB>O<TAB>0       token lines: surface, POS, NER, DU index
    market<TAB>NN<TAB>O<TAB>0
    fell<TAB>VBD<TAB>O<TAB>1
    REL<TAB>0<TAB>IMP<TAB>Comp   slot lines: index, IMP|EXP, Label[|Label]

Paragraphs are separated by blank lines. DU indices start at 0 and never
skip; slot lines follow the token lines and list slots 0..n-2 in order.
Tags outside the inventories resolve to UNKNOWN (``None``) and featurize to
an all-zero block.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError

# Penn Treebank word-level tags (punctuation tags excluded) and the
# Stanford 7-class NER labels; used only when a file carries no header.
DEFAULT_POS_TAGS = (
    "CC CD DT EX FW IN JJ JJR JJS LS MD NN NNS NNP NNPS PDT POS PRP PRP$ RB RBR RBS "
    "RP SYM TO UH VB VBD VBG VBN VBP VBZ WDT WP WP$ WRB"
).split()
DEFAULT_NER_TAGS = "LOCATION PERSON ORGANIZATION MONEY PERCENT DATE TIME".split()

WORD_DIM = 300
OOV_RANGE = 0.25


class Label(enum.IntEnum):
    Comp = 0
    Cont = 1
    Exp = 2
    Temp = 3

    @classmethod
    def parse(cls, text):
        try:
            return cls[text]
        except KeyError:
            raise DataError(f"unknown relation label {text!r}; expected one of "
                            f"{', '.join(l.name for l in cls)}") from None


LABELS = tuple(Label)


class SlotKind(enum.IntEnum):
    IMPLICIT = 0
    EXPLICIT = 1

    @property
    def code(self):
        return "IMP" if self is SlotKind.IMPLICIT else "EXP"

    @classmethod
    def from_code(cls, code):
        if code == "IMP":
            return cls.IMPLICIT
        if code == "EXP":
            return cls.EXPLICIT
        raise DataError(f"slot kind must be IMP or EXP, got {code!r}")


@dataclass(frozen=True)
class TagInventories:
    pos: tuple = tuple(DEFAULT_POS_TAGS)
    ner: tuple = tuple(DEFAULT_NER_TAGS)

    def __post_init__(self):
        object.__setattr__(self, "pos", tuple(self.pos))
        object.__setattr__(self, "ner", tuple(self.ner))
        object.__setattr__(self, "_pos_index", {t: i for i, t in enumerate(self.pos)})
        object.__setattr__(self, "_ner_index", {t: i for i, t in enumerate(self.ner)})

    def pos_id(self, tag):
        return self._pos_index.get(tag)

    def ner_id(self, tag):
        return self._ner_index.get(tag)


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = "NN"
    ner: str = "O"
    pos_id: int | None = None
    ner_id: int | None = None
    word_id: int | None = None


@dataclass(frozen=True)
class RelationSlot:
    index: int
    kind: SlotKind
    gold: tuple

    def __post_init__(self):
        gold = tuple(Label(g) for g in self.gold)
        if not 1 <= len(gold) <= 2:
            raise DataError(f"slot {self.index}: expected 1 or 2 gold labels, got {len(gold)}")
        if len(set(gold)) != len(gold):
            raise DataError(f"slot {self.index}: duplicate gold labels")
        object.__setattr__(self, "gold", gold)
        object.__setattr__(self, "kind", SlotKind(self.kind))


@dataclass(frozen=True)
class Paragraph:
    tokens: tuple
    du_spans: tuple
    slots: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "du_spans", tuple((int(a), int(b)) for a, b in self.du_spans))
        object.__setattr__(self, "slots", tuple(self.slots))
        self.validate()

    def validate(self):
        L = len(self.tokens)
        spans = self.du_spans
        if len(spans) < 2:
            raise DataError("a paragraph needs at least 2 discourse units")
        expect = 0
        for start, end in spans:
            if start != expect or end < start:
                raise DataError(f"DU spans must be contiguous and ordered, got {spans}")
            expect = end + 1
        if expect != L:
            raise DataError(f"DU spans cover {expect} tokens but paragraph has {L}")
        if len(self.slots) != len(spans) - 1:
            raise DataError(f"{len(spans)} DUs need {len(spans) - 1} slots, got {len(self.slots)}")
        for t, slot in enumerate(self.slots):
            if slot.index != t:
                raise DataError(f"slot at position {t} carries index {slot.index}")

    @property
    def num_dus(self):
        return len(self.du_spans)

    def du_tokens(self, j):
        a, b = self.du_spans[j]
        return self.tokens[a:b + 1]


@dataclass
class Split:
    paragraphs: list
    inventories: TagInventories = field(default_factory=TagInventories)

    def __len__(self):
        return len(self.paragraphs)

    def __iter__(self):
        return iter(self.paragraphs)

    @property
    def num_slots(self):
        return sum(len(p.slots) for p in self.paragraphs)


@dataclass
class Corpus:
    train: Split
    dev: Split
    test: Split

    @property
    def inventories(self):
        return self.train.inventories

    def splits(self):
        return {"train": self.train, "dev": self.dev, "test": self.test}


# --------------------------------------------------------------------------
# parsing / serialisation


def _read_headers(lines, path):
    pos = ner = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.startswith("#"):
            if line.strip():
                break
            continue
        parts = line.split()
        if parts[0] == "#POS":
            pos = parts[1:]
        elif parts[0] == "#NER":
            ner = parts[1:]
    if pos is None and ner is None:
        return None
    return TagInventories(pos if pos is not None else DEFAULT_POS_TAGS,
                          ner if ner is not None else DEFAULT_NER_TAGS)


def _build_paragraph(rows, slot_rows, inventories, vocab, path, first_line):
    if not rows:
        raise ParseError("paragraph has slot lines but no tokens", first_line, path)
    tokens = []
    spans = []
    cur = None
    for lineno, surface, pos, ner, du in rows:
        if cur is None:
            if du != 0:
                raise ParseError(f"first DU index must be 0, got {du}", lineno, path)
            cur, start = 0, 0
        elif du == cur + 1:
            spans.append((start, len(tokens) - 1))
            cur, start = du, len(tokens)
        elif du != cur:
            raise ParseError(f"DU index jumps from {cur} to {du}", lineno, path)
        word_id = None
        if vocab is not None:
            word_id = vocab.setdefault(surface, len(vocab))
        tokens.append(Token(surface, pos, ner, inventories.pos_id(pos), inventories.ner_id(ner), word_id))
    spans.append((start, len(tokens) - 1))
    if len(spans) < 2:
        raise ParseError("paragraph has fewer than 2 DUs", first_line, path)
    if len(slot_rows) != len(spans) - 1:
        raise ParseError(f"{len(spans)} DUs need {len(spans) - 1} REL lines, found {len(slot_rows)}",
                         slot_rows[-1][0] if slot_rows else rows[-1][0], path)
    slots = []
    for t, (lineno, idx, kind, gold) in enumerate(slot_rows):
        if idx != t:
            raise ParseError(f"expected REL index {t}, got {idx}", lineno, path)
        try:
            slots.append(RelationSlot(idx, kind, gold))
        except DataError as exc:
            raise ParseError(str(exc), lineno, path) from None
    return Paragraph(tokens, spans, slots)


def parse_corpus(path, inventories=None, vocab=None):
    """Parse one corpus file into a :class:`Split`.

    ``inventories`` overrides any header in the file (use it to share the
    training split's inventories with dev/test). ``vocab`` is an optional
    dict surface->id that is extended in place.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from None
    return parse_lines(lines, inventories, vocab, path=str(path))


def parse_lines(lines, inventories=None, vocab=None, path=None):
    if inventories is None:
        inventories = _read_headers(lines, path) or TagInventories()
    paragraphs = []
    rows, slot_rows = [], []
    first_line = None

    def flush():
        if rows or slot_rows:
            paragraphs.append(_build_paragraph(rows, slot_rows, inventories, vocab, path, first_line))
        rows.clear()
        slot_rows.clear()

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#") and line.count("\t") != 3 and not rows and not slot_rows:
            continue
        if first_line is None or (not rows and not slot_rows):
            first_line = lineno
        cols = line.split("\t")
        if cols[0] == "REL" and len(cols) == 4:
            try:
                idx = int(cols[1])
            except ValueError:
                raise ParseError(f"bad slot index {cols[1]!r}", lineno, path) from None
            try:
                kind = SlotKind.from_code(cols[2])
                gold = tuple(Label.parse(x) for x in cols[3].split("|"))
            except DataError as exc:
                raise ParseError(str(exc), lineno, path) from None
            slot_rows.append((lineno, idx, kind, gold))
            continue
        if len(cols) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(cols)}", lineno, path)
        if slot_rows:
            raise ParseError("token line after REL lines", lineno, path)
        surface, pos, ner, du = cols
        if not surface:
            raise ParseError("empty token surface", lineno, path)
        try:
            du = int(du)
        except ValueError:
            raise ParseError(f"bad DU index {du!r}", lineno, path) from None
        rows.append((lineno, surface, pos, ner, du))
    flush()
    return Split(paragraphs, inventories)


def format_paragraph(p):
    out = []
    for j, (a, b) in enumerate(p.du_spans):
        for tok in p.tokens[a:b + 1]:
            out.append(f"{tok.surface}\t{tok.pos}\t{tok.ner}\t{j}")
    for slot in p.slots:
        labels = "|".join(Label(g).name for g in slot.gold)
        out.append(f"REL\t{slot.index}\t{slot.kind.code}\t{labels}")
    return "\n".join(out)


def serialize_split(split, path=None):
    head = [f"#POS {' '.join(split.inventories.pos)}", f"#NER {' '.join(split.inventories.ner)}", ""]
    text = "\n".join(head) + "\n\n".join(format_paragraph(p) for p in split.paragraphs) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_corpus(root):
    """Load ``train.txt``, ``dev.txt`` and ``test.txt`` from a directory.

    Dev and test reuse the training file's tag inventories.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus directory {root} does not exist")
    vocab = {}
    train = parse_corpus(root / "train.txt", vocab=vocab)
    dev = parse_corpus(root / "dev.txt", train.inventories, vocab)
    test = parse_corpus(root / "test.txt", train.inventories, vocab)
    return Corpus(train, dev, test)


def save_corpus(corpus, root):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for name, split in corpus.splits().items():
        serialize_split(split, root / f"{name}.txt")


# --------------------------------------------------------------------------
# embeddings and features


class EmbeddingTable:
    """Frozen word vectors with a cached random draw for out-of-vocabulary words."""

    def __init__(self, dim=WORD_DIM, vectors=None, rng=None):
        self.dim = int(dim)
        self.vectors = {}
        self.oov = {}
        self.used = set()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        for word, vec in (vectors or {}).items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise ConfigError(f"vector for {word!r} has shape {vec.shape}, expected ({self.dim},)")
            self.vectors[word] = vec

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def lookup(self, word):
        vec = self.vectors.get(word)
        if vec is not None:
            self.used.add(word)
            return vec
        vec = self.oov.get(word)
        if vec is None:
            vec = self.rng.uniform(-OOV_RANGE, OOV_RANGE, size=self.dim)
            vec.setflags(write=False)
            self.oov[word] = vec
        return vec

    def used_vectors(self):
        """Every vector handed out so far (pretrained hits and OOV draws)."""
        out = {w: self.vectors[w] for w in sorted(self.used)}
        out.update(self.oov)
        return out


def load_embeddings(path, rng, dim=WORD_DIM):
    """Read a word2vec text file (header ``count dim``, one word per row)."""
    path = Path(path)
    vectors = {}
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}:1: embedding header must be 'count dim'")
        try:
            count, file_dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}:1: embedding header must be 'count dim'") from None
        if file_dim != dim:
            raise ConfigError(f"{path}: embeddings have dimension {file_dim}, configured {dim}")
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected word + {dim} numbers, got {len(parts) - 1}")
            try:
                vectors[parts[0]] = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector entry") from None
    if len(vectors) != count:
        raise DataError(f"{path}: header declares {count} rows, found {len(vectors)}")
    return EmbeddingTable(dim, vectors, rng)


def feature_dim(table_dim, inventories):
    return table_dim + len(inventories.pos) + len(inventories.ner)


def featurize(token, table, n_pos=len(DEFAULT_POS_TAGS), n_ner=len(DEFAULT_NER_TAGS)):
    """``[word vector | POS one-hot | NER one-hot]``; unknown tags give zeros."""
    out = np.zeros(table.dim + n_pos + n_ner)
    out[:table.dim] = table.lookup(token.surface)
    if token.pos_id is not None and token.pos_id < n_pos:
        out[table.dim + token.pos_id] = 1.0
    if token.ner_id is not None and token.ner_id < n_ner:
        out[table.dim + n_pos + token.ner_id] = 1.0
    return out


def featurize_paragraph(paragraph, table, inventories):
    n_pos, n_ner = len(inventories.pos), len(inventories.ner)
    return np.stack([featurize(tok, table, n_pos, n_ner) for tok in paragraph.tokens])
