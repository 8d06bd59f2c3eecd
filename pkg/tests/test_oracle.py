import math

import numpy as np
import pytest

from conftest import random_scrf
from segctc import ctc, oracle


def test_enumerate_segmentations_examples():
    assert oracle.enumerate_segmentations(3, 2, 3) == [[(0, 0), (1, 2)], [(0, 1), (2, 2)]]
    segs = oracle.enumerate_segmentations(4, 2, 3)
    assert [[n - s + 1 for s, n in seg] for seg in segs] == [[1, 3], [2, 2], [3, 1]]
    assert oracle.enumerate_segmentations(4, 1, 2) == []


@pytest.mark.parametrize("T", range(1, 8))
def test_enumeration_count_matches_recurrence(T):
    for J in range(1, T + 1):
        for L in range(1, T + 1):
            segs = oracle.enumerate_segmentations(T, J, L)
            assert len(segs) == oracle.count_segmentations(T, J, L)
            for seg in segs:
                assert seg[0][0] == 0 and seg[-1][1] == T - 1
                assert all(b[0] == a[1] + 1 for a, b in zip(seg, seg[1:]))
                assert all(1 <= n - s + 1 <= L for s, n in seg)


def test_brute_force_single_frame():
    H, p = random_scrf(0, 1, 2)
    from segctc.scrf import segment_score
    f0, f1 = segment_score(0, 0, 0, H, p), segment_score(1, 0, 0, H, p)
    assert oracle.brute_force_scrf(H, p, 1) == pytest.approx(math.log(math.exp(f0) + math.exp(f1)), abs=1e-14)


def test_brute_force_zero_scores():
    H, p = random_scrf(1, 3, 2)
    p.w[:] = 0
    assert oracle.brute_force_scrf(H, p, 3) == pytest.approx(math.log(18), abs=1e-14)


def test_brute_force_unreachable():
    H, p = random_scrf(2, 4, 2)
    assert oracle.brute_force_scrf(H, p, 2, [0]) == -math.inf


def test_scrf_guard():
    H, p = random_scrf(3, 9, 2)
    with pytest.raises(oracle.OracleBoundsError):
        oracle.brute_force_scrf(H, p, 3)
    H, p = random_scrf(3, 3, 5)
    with pytest.raises(oracle.OracleBoundsError):
        oracle.brute_force_scrf(H, p, 3)


def test_ctc_brute_force_examples():
    post = ctc.FramePosteriors.from_probs(np.full((2, 2), 0.5))
    assert oracle.brute_force_ctc(post, [1]) == pytest.approx(math.log(0.75), abs=1e-14)
    assert oracle.brute_force_ctc(post, [1, 1]) == -math.inf
    classes = oracle.ctc_collapse_classes(post)
    assert classes == pytest.approx({(): 0.25, (1,): 0.75})


def test_ctc_guard():
    with pytest.raises(oracle.OracleBoundsError):
        oracle.brute_force_ctc(ctc.FramePosteriors.from_probs(np.full((9, 2), 0.5)), [1])
    with pytest.raises(oracle.OracleBoundsError):
        oracle.brute_force_ctc(ctc.FramePosteriors.from_probs(np.full((3, 5), 0.2)), [1])
