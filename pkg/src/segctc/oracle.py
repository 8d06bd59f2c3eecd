"""Deliberately naive reference computations.

These enumerate every segmentation or every frame path literally and exist
to audit the dynamic programs.  They recompute segment scores one at a time
through :func:`segctc.scrf.segment_score` instead of reading the score
table, so they share no code path with the recursions they check.
"""

import itertools
import math

import numpy as np

from .ctc import collapse
from .numerics import log_sum_exp
from .scrf import segment_score

MAX_SCRF_FRAMES = 8
MAX_SCRF_LABELS = 4
MAX_CTC_FRAMES = 8
MAX_CTC_LABELS = 3


class OracleBoundsError(ValueError):
    pass


def enumerate_segmentations(T, J, L):
    """All covers of frames ``0..T-1`` by ``J`` contiguous segments of length <= L.

    Segments are ``(start, end)`` pairs, 0-based and inclusive; the list is in
    lexicographic order of segment lengths.
    """
    out = []
    for lengths in itertools.product(range(1, L + 1), repeat=J):
        if sum(lengths) != T:
            continue
        seg, start = [], 0
        for n in lengths:
            seg.append((start, start + n - 1))
            start += n
        out.append(seg)
    return out


def count_segmentations(T, J, L):
    """Compositions of T into J parts each <= L, by the counting recurrence."""
    table = {(0, 0): 1}

    def c(t, j):
        if (t, j) not in table:
            table[(t, j)] = 0 if t <= 0 or j <= 0 else sum(c(t - d, j - 1) for d in range(1, min(L, t) + 1))
        return table[(t, j)]

    return c(T, J)


def _guard_scrf(H, params):
    T = np.asarray(getattr(H, "states", H)).shape[0]
    if T > MAX_SCRF_FRAMES or params.num_labels > MAX_SCRF_LABELS:
        raise OracleBoundsError(
            f"brute force limited to T' <= {MAX_SCRF_FRAMES}, |Y| <= {MAX_SCRF_LABELS}"
        )
    return T


def _segment_scores(H, params, T, L):
    return {
        (y, s, n): segment_score(y, s, n, H, params)
        for y in range(params.num_labels)
        for s in range(T)
        for n in range(s, min(T, s + L))
    }


def brute_force_scrf(H, params, max_seg_len, y=None):
    """log Z(X, y) when ``y`` is given, else log Z(X), by literal enumeration."""
    T = _guard_scrf(H, params)
    f = _segment_scores(H, params, T, max_seg_len)
    if y is not None:
        label_seqs = [tuple(int(v) for v in y)]
    else:
        label_seqs = [ys for J in range(1, T + 1)
                      for ys in itertools.product(range(params.num_labels), repeat=J)]
    terms = []
    for ys in label_seqs:
        for seg in enumerate_segmentations(T, len(ys), max_seg_len):
            terms.append(sum(f[(lab, s, n)] for lab, (s, n) in zip(ys, seg)))
    return log_sum_exp(terms) if terms else -math.inf


def brute_force_scrf_argmax(H, params, max_seg_len):
    """Highest-scoring ``(labels, segmentation, score)`` over all pairs."""
    T = _guard_scrf(H, params)
    f = _segment_scores(H, params, T, max_seg_len)
    best = (None, None, -math.inf)
    for J in range(1, T + 1):
        for seg in enumerate_segmentations(T, J, max_seg_len):
            for ys in itertools.product(range(params.num_labels), repeat=J):
                score = sum(f[(lab, s, n)] for lab, (s, n) in zip(ys, seg))
                if score > best[2]:
                    best = (list(ys), seg, score)
    return best


def scrf_label_log_masses(H, params, max_seg_len):
    """log Z(X, y) for every label sequence with at least one segmentation."""
    T = _guard_scrf(H, params)
    out = {}
    for J in range(1, T + 1):
        if J * max_seg_len < T:
            continue
        for ys in itertools.product(range(params.num_labels), repeat=J):
            out[ys] = brute_force_scrf(H, params, max_seg_len, ys)
    return out


def _guard_ctc(posteriors):
    T, K = posteriors.log_probs.shape
    if T > MAX_CTC_FRAMES or K - 1 > MAX_CTC_LABELS:
        raise OracleBoundsError(f"brute force limited to T' <= {MAX_CTC_FRAMES}, |Y| <= {MAX_CTC_LABELS}")
    return T, K


def ctc_collapse_classes(posteriors):
    """Probability mass of every collapsed sequence, summed over all paths."""
    T, K = _guard_ctc(posteriors)
    p = posteriors.probs
    mass = {}
    for path in itertools.product(range(K), repeat=T):
        key = tuple(collapse(path))
        mass[key] = mass.get(key, 0.0) + math.prod(p[t, k] for t, k in enumerate(path))
    return mass


def brute_force_ctc(posteriors, y):
    """log of the total probability of paths collapsing to ``y`` (CTC ids)."""
    T, K = _guard_ctc(posteriors)
    target = [int(v) for v in y]
    logp = posteriors.log_probs
    terms = [
        sum(logp[t, k] for t, k in enumerate(path))
        for path in itertools.product(range(K), repeat=T)
        if collapse(path) == target
    ]
    return log_sum_exp(terms) if terms else -math.inf

