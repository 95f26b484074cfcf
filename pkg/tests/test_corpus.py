import numpy as np
import pytest

from paradisc.corpus import (EmbeddingTable, Label, Paragraph, RelationSlot, SlotKind, TagInventories, Token,
                             featurize, featurize_paragraph, load_corpus, load_embeddings, parse_corpus,
                             parse_lines, save_corpus, serialize_split)
from paradisc.errors import ConfigError, DataError, ParseError
from paradisc.numeric import make_rng
from paradisc.synth import SynthConfig, gen_synthetic

TWO_DU = """\
The\tDT\tO\t0
market\tNN\tO\t0
fell\tVBD\tO\t1
REL\t0\tIMP\tExp
"""


def parse(text, **kw):
    return parse_lines(text.splitlines(), **kw)


def test_minimal_paragraph():
    split = parse(TWO_DU)
    assert len(split) == 1
    p = split.paragraphs[0]
    assert list(p.du_spans) == [(0, 1), (2, 2)]
    assert len(p.slots) == 1
    assert p.slots[0].kind is SlotKind.IMPLICIT
    assert p.slots[0].gold == (Label.Exp,)


def test_double_label():
    p = parse(TWO_DU.replace("IMP\tExp", "EXP\tComp|Exp")).paragraphs[0]
    assert p.slots[0].kind is SlotKind.EXPLICIT
    assert set(p.slots[0].gold) == {Label.Comp, Label.Exp}


@pytest.mark.parametrize("text,line", [
    ("a\tDT\tO\t0\nb\tNN\tO\t2\nREL\t0\tIMP\tExp\n", 2),  # DU skip
    ("a\tDT\tO\t0\nb\tNN\tO\t1\nREL\t0\tIMP\tFoo\n", 3),  # unknown label
    ("a\tDT\tO\t0\nb\tNN\tO\n", 2),  # short line
    ("a\tDT\tO\t0\nb\tNN\tO\t1\nc\tNN\tO\t2\nREL\t0\tIMP\tExp\n", 4),  # slot count
    ("a\tDT\tO\t0\nb\tNN\tO\t1\nREL\t1\tIMP\tExp\n", 3),  # slot index
    ("a\tDT\tO\t0\nb\tNN\tO\t1\nREL\t0\tIMP\tExp|Exp\n", 3),  # repeated label
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError, match=rf"(^|:){line}:"):
        parse(text)


def test_parse_error_is_a_data_error():
    with pytest.raises(DataError):
        parse("a\tDT\tO\t1\nb\tNN\tO\t2\nREL\t0\tIMP\tExp\n")


def test_unknown_tags_resolve_to_none():
    p = parse(TWO_DU.replace("DT", "XYZ"), inventories=TagInventories()).paragraphs[0]
    assert p.tokens[0].pos_id is None and p.tokens[1].pos_id is not None


def test_header_sets_inventories():
    split = parse("#POS DT NN\n#NER O\n\n" + TWO_DU)
    assert split.inventories.pos == ("DT", "NN")
    assert split.paragraphs[0].tokens[2].pos_id is None  # VBD not listed


def test_paragraph_invariants_enforced():
    toks = [Token("a", "NN", "O"), Token("b", "NN", "O")]
    slot = RelationSlot(0, SlotKind.IMPLICIT, (Label.Comp,))
    with pytest.raises(DataError):
        Paragraph(toks, [(0, 0), (0, 1)], [slot])  # overlapping
    with pytest.raises(DataError):
        Paragraph(toks, [(0, 1)], [])  # a single DU
    with pytest.raises(DataError):
        RelationSlot(0, SlotKind.IMPLICIT, ())


def test_round_trip_fixed_point(tmp_path):
    corpus = gen_synthetic(SynthConfig(n_train=50, n_dev=10, n_test=10), seed=3)
    text = serialize_split(corpus.train)
    again = parse(text)
    assert serialize_split(again) == text
    assert [list(p.du_spans) for p in again] == [list(p.du_spans) for p in corpus.train]
    assert [[(s.kind, s.gold) for s in p.slots] for p in again] == \
           [[(s.kind, s.gold) for s in p.slots] for p in corpus.train]
    save_corpus(corpus, tmp_path)
    loaded = load_corpus(tmp_path)
    for name, split in loaded.splits().items():
        assert serialize_split(split) == serialize_split(corpus.splits()[name])


def test_token_starting_with_hash_is_kept():
    text = "#\tNN\tO\t0\nx\tNN\tO\t1\nREL\t0\tEXP\tTemp\n"
    assert parse(text).paragraphs[0].tokens[0].surface == "#"


def test_missing_corpus_dir():
    with pytest.raises(DataError):
        load_corpus("/nonexistent/path")


def _write_emb(path, rows, header=None, dim=300):
    lines = [header or f"{len(rows)} {dim}"]
    lines += [w + " " + " ".join(f"{x:.6f}" for x in v) for w, v in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_embeddings(tmp_path):
    rng = make_rng(0)
    rows = [("cat", rng.normal(size=300)), ("dog", rng.normal(size=300))]
    f = tmp_path / "e.txt"
    _write_emb(f, rows)
    table = load_embeddings(f, make_rng(1))
    assert len(table) == 2
    np.testing.assert_allclose(table.lookup("cat"), rows[0][1], atol=1e-6)


def test_oov_vectors_cached_and_bounded():
    table = EmbeddingTable(300, {}, make_rng(2))
    a = table.lookup("zebra")
    b = table.lookup("zebra")
    assert a is b
    assert np.all(np.abs(a) <= 0.25)
    assert not np.array_equal(a, table.lookup("okapi"))


def test_embedding_format_errors(tmp_path):
    f = tmp_path / "bad.txt"
    _write_emb(f, [("cat", np.zeros(300)), ("dog", np.zeros(299))], header="2 300")
    with pytest.raises(DataError, match=":3:"):
        load_embeddings(f, make_rng(0))
    _write_emb(f, [("cat", np.zeros(50))], dim=50)
    with pytest.raises(ConfigError):
        load_embeddings(f, make_rng(0))
    f.write_text("oops\n")
    with pytest.raises(DataError):
        load_embeddings(f, make_rng(0))


def test_featurize_one_hot_layout():
    table = EmbeddingTable(300, {"x": np.ones(300)})
    v = featurize(Token("x", "CC", "LOCATION", 0, 0), table)
    assert v.shape == (343,)
    assert v[300] == 1.0 and v[336] == 1.0
    assert v[300:].sum() == 2.0
    u = featurize(Token("x", "??", "LOCATION", None, 0), table)
    assert np.all(u[300:336] == 0.0) and u[336] == 1.0
    np.testing.assert_array_equal(featurize(Token("x", "CC", "LOCATION", 0, 0), table), v)


def test_featurize_paragraph_dimensions():
    corpus = gen_synthetic(SynthConfig(n_train=3, n_dev=1, n_test=1), seed=0)
    p = corpus.train.paragraphs[0]
    feats = featurize_paragraph(p, EmbeddingTable(16, rng=make_rng(0)), corpus.inventories)
    assert feats.shape == (len(p.tokens), 16 + len(corpus.inventories.pos) + len(corpus.inventories.ner))


def test_default_inventory_sizes():
    inv = TagInventories()
    assert len(inv.pos) == 36 and len(inv.ner) == 7


def test_parse_corpus_file(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text(TWO_DU + "\n" + TWO_DU)
    assert len(parse_corpus(f)) == 2
