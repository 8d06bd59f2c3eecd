import math

import numpy as np
import pytest

from segctc import ctc, oracle
from segctc.numerics import finite_difference_gradient, max_relative_error, rng_for

A, B = 1, 2  # CTC ids of the first two labels


def uniform(T, K):
    return ctc.FramePosteriors.from_probs(np.full((T, K), 1.0 / K))


def random_post(seed, T, Y):
    return ctc.FramePosteriors.from_probs(rng_for(seed, 2).dirichlet(np.ones(Y + 1), size=T))


def test_id_conversion():
    assert ctc.to_ctc_ids([0, 3]) == [1, 4]
    assert ctc.from_ctc_ids([1, 4]) == [0, 3]


def test_zero_projection_gives_uniform():
    head = ctc.CTCHead(np.zeros((4, 6)), np.zeros(4))
    post = ctc.ctc_posteriors(rng_for(0).normal(size=(5, 6)), head)
    np.testing.assert_allclose(post.probs, 0.25)


def test_posteriors_shift_invariant():
    head = ctc.init_ctc(3, 4, seed=1)
    H = rng_for(1).normal(size=(5, 4))
    a = ctc.ctc_posteriors(H, head).log_probs
    head.b += 17.0
    np.testing.assert_allclose(ctc.ctc_posteriors(H, head).log_probs, a, atol=1e-12)
    np.testing.assert_allclose(np.exp(a).sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("path,expected", [
    ([A, A, 0, A], [A, A]),
    ([0, 0, 0], []),
    ([A, A, B, B], [A, B]),
    ([0, A, A, 0, B], [A, B]),
])
def test_collapse(path, expected):
    assert ctc.collapse(path) == expected


def test_required_frames():
    assert ctc.required_frames([]) == 0
    assert ctc.required_frames([A, B]) == 2
    assert ctc.required_frames([A, A, B, B, B]) == 8


def test_single_frame(backend):
    post = random_post(0, 1, 2)
    loss, _ = ctc.ctc_loss(post, [B])
    assert loss == pytest.approx(-post.log_probs[0, B], abs=1e-14)


def test_three_of_four_paths(backend):
    post = uniform(2, 2)
    loss, _ = ctc.ctc_loss(post, [A])
    assert loss == pytest.approx(-math.log(0.75), abs=1e-12)
    assert loss == pytest.approx(0.287682, abs=1e-6)
    assert ctc.ctc_log_likelihood(post, [A]) == pytest.approx(math.log(0.75), abs=1e-12)


def test_unalignable_repeat(backend):
    with pytest.raises(ctc.UnalignableLabelsError, match="label sequence unalignable"):
        ctc.ctc_loss(uniform(2, 2), [A, A])
    with pytest.raises(ctc.UnalignableLabelsError):
        ctc.ctc_log_likelihood(uniform(2, 3), [A, B, A])


def test_empty_target_is_all_blank(backend):
    post = random_post(1, 4, 2)
    assert ctc.ctc_log_likelihood(post, []) == pytest.approx(post.log_probs[:, 0].sum(), abs=1e-13)
    assert oracle.brute_force_ctc(post, []) == pytest.approx(post.log_probs[:, 0].sum(), abs=1e-13)


def test_label_out_of_range():
    with pytest.raises(IndexError):
        ctc.ctc_loss(uniform(3, 3), [0])
    with pytest.raises(IndexError):
        ctc.ctc_loss(uniform(3, 3), [3])


@pytest.mark.parametrize("seed", range(8))
def test_matches_path_enumeration(backend, seed):
    rng = rng_for(seed, 3)
    T = int(rng.integers(1, 8))
    Y = int(rng.integers(1, 4))
    post = random_post(seed, T, Y)
    for J in range(0, T + 1):
        y = [int(v) for v in rng.integers(1, Y + 1, size=J)]
        if ctc.required_frames(y) > T:
            continue
        assert ctc.ctc_log_likelihood(post, y) == pytest.approx(oracle.brute_force_ctc(post, y), abs=1e-10)


def test_normalization_over_collapse_classes(backend):
    post = random_post(9, 5, 2)
    classes = oracle.ctc_collapse_classes(post)
    assert sum(classes.values()) == pytest.approx(1.0, abs=1e-12)
    total = sum(math.exp(ctc.ctc_log_likelihood(post, list(y))) for y in classes)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_logit_gradient(backend):
    rng = rng_for(10)
    z = rng.normal(size=(6, 4))
    y = [A, 3, 3]

    def loss(_):
        return ctc.ctc_loss(ctc.FramePosteriors(z - np.log(np.exp(z).sum(1, keepdims=True))), y)[0]

    _, g = ctc.ctc_loss(ctc.FramePosteriors(z - np.log(np.exp(z).sum(1, keepdims=True))), y)
    assert max_relative_error({"z": g}, finite_difference_gradient(loss, {"z": z})) < 1e-7


def test_head_gradients(backend):
    rng = rng_for(11)
    head = ctc.init_ctc(3, 4, seed=2)
    H = rng.normal(size=(6, 4))
    y = [A, B, A]
    loss, grads = ctc.ctc_head_loss(H, y, head)
    fd = finite_difference_gradient(lambda _: ctc.ctc_head_loss(H, y, head)[0], dict(head.named_arrays(), H=H))
    assert max_relative_error(grads, fd) < 1e-7


def test_best_path_decode():
    seq = [0, A, A, 0, B]
    logp = np.log(np.full((5, 3), 0.1))
    for t, k in enumerate(seq):
        logp[t, k] = np.log(0.8)
    assert ctc.ctc_best_path_decode(ctc.FramePosteriors(logp)) == [A, B]
    assert ctc.ctc_best_path_decode(uniform(4, 3)) == []


@pytest.mark.parametrize("seed", range(5))
def test_best_path_matches_direct_recomputation(seed):
    post = random_post(seed, 4, 2)
    p = post.probs
    best = [max(range(3), key=lambda k, t=t: p[t, k]) for t in range(4)]
    out, prev = [], None
    for k in best:
        if k != prev and k != 0:
            out.append(k)
        prev = k
    assert ctc.ctc_best_path_decode(post) == out
