import math

import numpy as np
import pytest

from segctc import encoder as enc
from segctc.numerics import finite_difference_gradient, max_relative_error, rng_for


def small_encoder(seed=0, layers=2, H=3, D=2, factors=None):
    factors = (2,) * (layers - 1) if factors is None else factors
    params = enc.init_encoder(D, H, layers, factors, seed=seed)
    rng = rng_for(seed, 50)
    for a in params.named_arrays().values():
        a += rng.normal(scale=0.3, size=a.shape)
    return params


def test_lstm_cell_zero():
    w = enc.LSTMWeights(np.zeros((8, 3 + 2)), np.zeros(8))
    h, c = enc.lstm_cell(np.zeros(2), np.zeros(2), np.zeros(3), w)
    assert np.all(h == 0) and np.all(c == 0)


def test_lstm_cell_dimension_mismatch():
    w = enc.LSTMWeights(np.zeros((8, 5)), np.zeros(8))
    with pytest.raises(ValueError, match="dimension mismatch"):
        enc.lstm_cell(np.zeros(2), np.zeros(2), np.zeros(4), w)


def test_kernel_matches_cell_loop(backend):
    params = small_encoder(layers=1)
    X = rng_for(1).normal(size=(5, 2))
    states, _ = enc.forward(X, params)
    fw = params.layers[0]["fwd"]
    h = c = np.zeros(3)
    for t in range(5):
        h, c = enc.lstm_cell(h, c, X[t], fw)
        np.testing.assert_allclose(states[t, :3], h, atol=1e-14)
    bw = params.layers[0]["bwd"]
    h = c = np.zeros(3)
    for t in reversed(range(5)):
        h, c = enc.lstm_cell(h, c, X[t], bw)
        np.testing.assert_allclose(states[t, 3:], h, atol=1e-14)


def test_default_shapes():
    params = enc.init_encoder(4, 5)
    states = enc.encode(np.ones((8, 4)), params)
    assert states.length == 2 and states.dim == 10
    assert [layer["fwd"].input_dim for layer in params.layers] == [4, 20, 20]
    assert np.all(params.layers[0]["fwd"].b[5:10] == 1.0)  # forget gate bias


@pytest.mark.parametrize("T,expected", [(1, 1), (4, 1), (5, 2), (8, 2), (9, 3)])
def test_subsampled_length(T, expected):
    assert enc.subsampled_length(T, (2, 2)) == expected
    params = enc.init_encoder(2, 2)
    assert enc.forward(np.ones((T, 2)), params)[0].shape[0] == expected


def test_odd_length_pads_by_repetition():
    params = small_encoder(layers=2)
    X = rng_for(2).normal(size=(5, 2))
    X6 = np.concatenate([X, X[-1:]])
    layer1 = enc.EncoderParams(2, 3, params.layers[:1], ())
    h5 = enc.forward(X, layer1)[0]
    stacked = enc._stack_frames(h5, 2)
    assert stacked.shape == (3, 12)
    np.testing.assert_array_equal(stacked[-1], np.concatenate([h5[-1], h5[-1]]))
    assert enc.forward(X6, params)[0].shape == enc.forward(X, params)[0].shape


def test_empty_utterance():
    with pytest.raises(ValueError, match="empty utterance"):
        enc.forward(np.zeros((0, 2)), enc.init_encoder(2, 2))


def test_inference_is_deterministic():
    params = small_encoder()
    X = rng_for(3).normal(size=(7, 2))
    a = enc.forward(X, params, dropout_rate=0.2, training=False)[0]
    b = enc.forward(X, params, dropout_rate=0.2, training=False)[0]
    assert a.tobytes() == b.tobytes()


def test_dropout_rate_and_determinism():
    params = enc.init_encoder(16, 32, 3, (2, 2), seed=0)
    X = rng_for(4).normal(size=(200, 16))
    s1, cache = enc.forward(X, params, dropout_rate=0.2, training=True, rng_seed=(7, 1))
    s2, _ = enc.forward(X, params, dropout_rate=0.2, training=True, rng_seed=(7, 1))
    assert s1.tobytes() == s2.tobytes()
    masks = [lc["mask"] for lc in cache["layers"]]
    between = np.concatenate([m.ravel() for m in masks[1:]])
    n = between.size
    assert n >= 10_000
    frac = np.mean(between == 0)
    assert abs(frac - 0.2) < 4 * math.sqrt(0.2 * 0.8 / n)
    s3, _ = enc.forward(X, params, dropout_rate=0.2, training=True, rng_seed=(7, 2))
    assert not np.array_equal(s1, s3)


def test_bidirectional_symmetry():
    params = small_encoder(layers=1)
    swapped = enc.EncoderParams(2, 3, [{"fwd": params.layers[0]["bwd"], "bwd": params.layers[0]["fwd"]}], ())
    X = rng_for(5).normal(size=(6, 2))
    a = enc.forward(X, params)[0]
    b = enc.forward(X[::-1], swapped)[0][::-1]
    np.testing.assert_allclose(a[:, :3], b[:, 3:], atol=1e-14)
    np.testing.assert_allclose(a[:, 3:], b[:, :3], atol=1e-14)


@pytest.mark.parametrize("T", [5, 6])
def test_encoder_gradient_check(backend, T):
    params = small_encoder(layers=3, factors=(2, 1))
    X = rng_for(6).normal(size=(T, 2))
    proj = rng_for(7).normal(size=enc.forward(X, params)[0].shape)

    def loss(_):
        return float(np.sum(np.tanh(enc.forward(X, params)[0]) * proj))

    states, cache = enc.forward(X, params)
    grads = enc.backward((1 - np.tanh(states) ** 2) * proj, cache)
    fd = finite_difference_gradient(loss, params.named_arrays())
    assert max_relative_error(grads, fd) < 1e-6


def test_gradient_with_dropout_mask():
    params = small_encoder(layers=2)
    X = rng_for(8).normal(size=(6, 2))
    seed = (3, 200, 1, 0)

    def loss(_):
        return float(np.sum(enc.forward(X, params, 0.3, True, seed)[0] ** 2))

    states, cache = enc.forward(X, params, 0.3, True, seed)
    grads = enc.backward(2 * states, cache)
    assert max_relative_error(grads, finite_difference_gradient(loss, params.named_arrays())) < 1e-6
