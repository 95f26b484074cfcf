import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paradisc.corpus import EmbeddingTable, Token
from paradisc.encoder import (BiLstmLayer, EncoderStack, LstmParams, bilstm_run, du_maxpool, encode_features,
                              encode_paragraph, lstm_run, lstm_step, maxpool_backward, maxpool_spans)
from paradisc.errors import DimensionError
from paradisc.numeric import make_rng
from paradisc.synth import SYNTH_INVENTORIES, SynthConfig, gen_synthetic


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def test_zero_params_zero_state():
    p = LstmParams(5, 3)
    h, c = lstm_step(p, np.ones(5), np.zeros(3), np.zeros(3))
    assert np.all(h == 0) and np.all(c == 0)


def test_saturated_forget_gate_keeps_cell():
    p = LstmParams(4, 3)
    p.b.value[3:6] = 50.0
    c_prev = np.array([0.3, -0.7, 1.1])
    _, c = lstm_step(p, np.ones(4), np.zeros(3), c_prev)
    np.testing.assert_allclose(c, c_prev, atol=1e-9)


def test_step_matches_manual_gate_equations():
    rng = make_rng(3)
    p = LstmParams(3, 3, rng)
    p.b.value[:] = rng.normal(size=12)
    x, h0, c0 = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
    W, U, b = p.W.value, p.U.value, p.b.value
    gate = lambda k: W[3 * k:3 * k + 3] @ x + U[3 * k:3 * k + 3] @ h0 + b[3 * k:3 * k + 3]
    i, f, g, o = sig(gate(0)), sig(gate(1)), np.tanh(gate(2)), sig(gate(3))
    c_ref = f * c0 + i * g
    h, c = lstm_step(p, x, h0, c0)
    np.testing.assert_allclose(c, c_ref, atol=1e-14)
    np.testing.assert_allclose(h, o * np.tanh(c_ref), atol=1e-14)


def test_step_shape_error():
    with pytest.raises(DimensionError):
        lstm_step(LstmParams(3, 2), np.zeros(4), np.zeros(2), np.zeros(2))


def test_init_forget_bias_and_glorot_range():
    p = LstmParams(10, 6, make_rng(0))
    assert np.all(p.b.value[6:12] == 1.0)
    assert np.all(p.b.value[:6] == 0.0) and np.all(p.b.value[12:] == 0.0)
    assert np.abs(p.W.value).max() <= np.sqrt(6 / (24 + 10))
    assert p.W.shape == (24, 10) and p.U.shape == (24, 6)


def test_run_equals_repeated_steps():
    rng = make_rng(4)
    p = LstmParams(5, 4, rng)
    xs = rng.normal(size=(6, 5))
    hs, _ = lstm_run(p, xs)
    h, c = np.zeros(4), np.zeros(4)
    for t in range(6):
        h, c = lstm_step(p, xs[t], h, c)
        np.testing.assert_allclose(hs[t], h, atol=1e-13)


def test_bilstm_length_one():
    rng = make_rng(5)
    layer = BiLstmLayer(4, 3, rng)
    x = rng.normal(size=(1, 4))
    out, _ = bilstm_run(layer, x)
    np.testing.assert_allclose(out[0, :3], lstm_step(layer.fwd, x[0], np.zeros(3), np.zeros(3))[0], atol=1e-14)
    np.testing.assert_allclose(out[0, 3:], lstm_step(layer.bwd, x[0], np.zeros(3), np.zeros(3))[0], atol=1e-14)


def test_bilstm_backward_half_is_reversed_forward():
    rng = make_rng(6)
    layer = BiLstmLayer(4, 3, rng)
    xs = rng.normal(size=(7, 4))
    out, _ = bilstm_run(layer, xs)
    swapped = BiLstmLayer(4, 3)
    swapped.fwd, swapped.bwd = layer.bwd, layer.fwd
    rev, _ = bilstm_run(swapped, xs[::-1])
    np.testing.assert_allclose(out[:, 3:], rev[::-1, :3], atol=1e-14)


def test_bilstm_full_size_shapes():
    layer = BiLstmLayer(343, 300, make_rng(0))
    out, _ = bilstm_run(layer, make_rng(1).normal(size=(9, 343)))
    assert out.shape == (9, 600)
    assert np.all(np.abs(out) < 1)


def test_bilstm_rejects_empty():
    with pytest.raises(DimensionError):
        bilstm_run(BiLstmLayer(3, 2), np.zeros((0, 3)))


def test_maxpool_examples():
    hs = np.array([[1.0, 5.0], [3.0, 2.0]])
    np.testing.assert_array_equal(du_maxpool(hs, (0, 1)), [3.0, 5.0])
    np.testing.assert_array_equal(du_maxpool(hs, (1, 1)), [3.0, 2.0])
    with pytest.raises(DimensionError):
        du_maxpool(hs, (1, 2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 10_000))
def test_maxpool_properties(n, d, seed):
    rng = make_rng(seed)
    hs = rng.normal(size=(n, d))
    out = du_maxpool(hs, (0, n - 1))
    assert np.all(out >= hs)
    assert all(out[j] in hs[:, j] for j in range(d))
    np.testing.assert_array_equal(du_maxpool(hs[rng.permutation(n)], (0, n - 1)), out)


def test_maxpool_gradient_first_index_on_ties():
    hs = np.array([[2.0, 1.0], [2.0, 4.0], [0.0, 4.0]])
    pooled, arg = maxpool_spans(hs, [(0, 2)])
    assert arg.tolist() == [[0, 1]]
    d = maxpool_backward(np.ones((1, 2)), arg, 3)
    assert d.tolist() == [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]


def test_maxpool_non_argmax_perturbation():
    hs = np.array([[1.0, 5.0], [3.0, 2.0]])
    bumped = hs.copy()
    bumped[0, 0] += 1.5  # still below 3
    np.testing.assert_array_equal(du_maxpool(bumped, (0, 1)), du_maxpool(hs, (0, 1)))


@pytest.fixture(scope="module")
def paragraph():
    corpus = gen_synthetic(SynthConfig(n_train=20, n_dev=1, n_test=1), seed=0)
    return next(p for p in corpus.train if p.num_dus >= 3)


def test_encode_paragraph_shapes_and_determinism(paragraph):
    table = EmbeddingTable(16, rng=make_rng(0))
    stack = EncoderStack(16 + 11, 5, rng=make_rng(1))
    a = encode_paragraph(stack, paragraph, table, make_rng(2), False, SYNTH_INVENTORIES)
    b = encode_paragraph(stack, paragraph, table, make_rng(3), False, SYNTH_INVENTORIES)
    assert a.shape == (paragraph.num_dus, 10)
    np.testing.assert_array_equal(a, b)
    c = encode_paragraph(stack, paragraph, table, make_rng(2), True, SYNTH_INVENTORIES)
    assert not np.array_equal(a, c)


def test_encoder_full_scale_dimensions():
    stack = EncoderStack(343, 300, rng=make_rng(0))
    spans = [(0, 2), (3, 4)]
    hdu, _ = encode_features(stack, make_rng(1).normal(size=(5, 343)), spans)
    assert hdu.shape == (2, 600)
    assert stack.du_layer.input_dim == 600


def test_context_sensitivity(paragraph):
    stack = EncoderStack(27, 6, rng=make_rng(7))
    feats = make_rng(8).normal(size=(len(paragraph.tokens), 27))
    spans = paragraph.du_spans
    base, _ = encode_features(stack, feats, spans)
    edited = feats.copy()
    edited[spans[1][0]] += 1.0
    moved, _ = encode_features(stack, edited, spans)
    assert not np.allclose(base[2], moved[2])
    a, b = spans[0][0], spans[1][1]
    pair, _ = encode_features(stack, feats[a:b + 1], [spans[0], spans[1]])
    assert not np.allclose(pair, base[:2])
