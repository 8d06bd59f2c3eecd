"""Segmental CRF head over encoder states.

A segment covering frames ``s..n`` (0-based, inclusive) is embedded as
``concat(h[s], h[n])``.  Label ``y`` is embedded as row ``y`` of ``M`` and the
segment score is

    f(y, s, n) = w . act(W1 @ M[y] + W2 @ concat(h[s], h[n]) + b)

optionally with extra ``act(V @ . + c)`` layers before the final dot product.
All scores for segments up to ``max_seg_len`` frames are collected in a
``(T, L, Y)`` table indexed by end frame, length - 1 and label; the numerator,
partition and Viterbi recursions all read that table (see ``kernels``).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics import seeded_init

ACTIVATIONS = ("tanh", "sigmoid")


class UnreachableLabelsError(ValueError):
    pass


@dataclass
class SCRFParams:
    M: np.ndarray   # (Y, E) label embeddings
    W1: np.ndarray  # (K, E)
    W2: np.ndarray  # (K, 2 * state_dim)
    b: np.ndarray   # (K,)
    w: np.ndarray   # (K_last,)
    extra: list = field(default_factory=list)  # [(V, c), ...] stacked feature layers
    activation: str = "tanh"

    @property
    def num_labels(self):
        return self.M.shape[0]

    @property
    def state_dim(self):
        return self.W2.shape[1] // 2

    def named_arrays(self, prefix="scrf"):
        out = {f"{prefix}.M": self.M, f"{prefix}.W1": self.W1, f"{prefix}.W2": self.W2,
               f"{prefix}.b": self.b}
        for k, (V, c) in enumerate(self.extra):
            out[f"{prefix}.V{k}"] = V
            out[f"{prefix}.c{k}"] = c
        out[f"{prefix}.w"] = self.w
        return out


def init_scrf(num_labels, state_dim, embed_dim=64, feature_dim=64, feature_layers=1,
              activation="tanh", seed=0):
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if feature_layers < 1:
        raise ValueError("feature_layers must be >= 1")
    extra = [
        (seeded_init((feature_dim, feature_dim), seed=(seed, 2, 10 + k)), np.zeros(feature_dim))
        for k in range(feature_layers - 1)
    ]
    return SCRFParams(
        M=seeded_init((num_labels, embed_dim), seed=(seed, 2, 0)),
        W1=seeded_init((feature_dim, embed_dim), seed=(seed, 2, 1)),
        W2=seeded_init((feature_dim, 2 * state_dim), seed=(seed, 2, 2)),
        b=np.zeros(feature_dim),
        w=seeded_init((feature_dim,), seed=(seed, 2, 3)),
        extra=extra,
        activation=activation,
    )


def _states(H):
    return np.asarray(getattr(H, "states", H), dtype=np.float64)


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else 0.5 * (np.tanh(0.5 * z) + 1.0)


def _act_grad(a, kind):
    return 1.0 - a * a if kind == "tanh" else a * (1.0 - a)


def label_embedding(y, M):
    if not 0 <= y < M.shape[0]:
        raise IndexError(f"label id {y} outside vocabulary of size {M.shape[0]}")
    return M[y].copy()


def segment_embedding(H, s, n):
    """``concat(h[s], h[n])`` for the segment ``s..n`` (0-based, inclusive)."""
    h = _states(H)
    if not 0 <= s <= n < h.shape[0]:
        raise IndexError(f"segment ({s}, {n}) invalid for {h.shape[0]} frames")
    return np.concatenate([h[s], h[n]])


def _features(pre, params):
    acts = [_act(pre, params.activation)]
    for V, c in params.extra:
        acts.append(_act(acts[-1] @ V.T + c, params.activation))
    return acts


def segment_score(y, s, n, H, params, max_seg_len=None):
    if max_seg_len is not None and n - s + 1 > max_seg_len:
        raise ValueError(f"segment length {n - s + 1} exceeds max_seg_len {max_seg_len}")
    u = label_embedding(y, params.M)
    x = segment_embedding(H, s, n)
    pre = params.W1 @ u + params.W2 @ x + params.b
    return float(_features(pre, params)[-1] @ params.w)


def _projections(h, params):
    D = params.state_dim
    label_part = params.M @ params.W1.T + params.b   # (Y, K)
    start_part = h @ params.W2[:, :D].T               # (T, K)
    end_part = h @ params.W2[:, D:].T                 # (T, K)
    return label_part, start_part, end_part


def score_table(H, params, max_seg_len):
    """Segment scores ``S[t, d, y]`` for the segment ending at ``t`` of length ``d + 1``.

    Entries with ``d > t`` name no segment; they stay 0 and the kernels never read them.
    """
    h = _states(H)
    if h.shape[1] != params.state_dim:
        raise ValueError(f"state dim {h.shape[1]} != SCRF input dim {params.state_dim}")
    T = h.shape[0]
    L = int(max_seg_len)
    if L < 1:
        raise ValueError("max_seg_len must be >= 1")
    A, P, Q = _projections(h, params)
    S = np.zeros((T, L, params.num_labels))
    for d in range(min(L, T)):
        pre = A[None, :, :] + (P[:T - d] + Q[d:])[:, None, :]
        S[d:, d, :] = _features(pre, params)[-1] @ params.w
    return S


def score_table_backward(dS, H, params):
    """Gradients of ``sum(dS * S)`` w.r.t. the head arrays and the states."""
    h = _states(H)
    T, L, _ = dS.shape
    D = params.state_dim
    A, P, Q = _projections(h, params)
    dA = np.zeros_like(A)
    dP = np.zeros_like(P)
    dQ = np.zeros_like(Q)
    dw = np.zeros_like(params.w)
    dextra = [(np.zeros_like(V), np.zeros_like(c)) for V, c in params.extra]
    for d in range(min(L, T)):
        g = dS[d:, d, :]  # (T-d, Y)
        if not g.any():
            continue
        pre = A[None, :, :] + (P[:T - d] + Q[d:])[:, None, :]
        acts = _features(pre, params)
        dw += np.einsum("ty,tyk->k", g, acts[-1])
        dz = g[:, :, None] * params.w
        for k in range(len(params.extra) - 1, -1, -1):
            dz = dz * _act_grad(acts[k + 1], params.activation)
            dextra[k][0][...] += np.einsum("tyi,tyj->ij", dz, acts[k])
            dextra[k][1][...] += dz.sum(axis=(0, 1))
            dz = dz @ params.extra[k][0]
        dpre = dz * _act_grad(acts[0], params.activation)
        dA += dpre.sum(axis=0)
        dseg = dpre.sum(axis=1)
        dP[:T - d] += dseg
        dQ[d:] += dseg
    grads = {
        "scrf.M": dA @ params.W1,
        "scrf.W1": dA.T @ params.M,
        "scrf.W2": np.concatenate([dP.T @ h, dQ.T @ h], axis=1),
        "scrf.b": dA.sum(axis=0),
        "scrf.w": dw,
    }
    for k, (dV, dc) in enumerate(dextra):
        grads[f"scrf.V{k}"] = dV
        grads[f"scrf.c{k}"] = dc
    grads["H"] = dP @ params.W2[:, :D] + dQ @ params.W2[:, D:]
    return grads


def _check_labels(y, num_labels, T):
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or len(y) < 1:
        raise ValueError("label sequence must be a nonempty 1-D sequence")
    if len(y) > T:
        raise ValueError(f"more labels than frames ({len(y)} > {T})")
    if y.min() < 0 or y.max() >= num_labels:
        raise IndexError("label id outside vocabulary")
    return y


def scrf_log_numerator(H, y, params, max_seg_len):
    """log Z(X, y): log-sum over segmentations of the fixed label sequence."""
    S = score_table(H, params, max_seg_len)
    y = _check_labels(y, params.num_labels, S.shape[0])
    return kernels.semi_log_numerator(S, y)


def scrf_log_partition(H, params, max_seg_len):
    """log Z(X): log-sum over every (labels, segmentation) pair."""
    return kernels.semi_log_partition(score_table(H, params, max_seg_len))


def scrf_loss(H, y, params, max_seg_len):
    """``-log P(y | X)`` and gradients w.r.t. the head arrays and the states (key ``"H"``)."""
    S = score_table(H, params, max_seg_len)
    y = _check_labels(y, params.num_labels, S.shape[0])
    log_num, marg_num = kernels.semi_numerator(S, y)
    if not np.isfinite(log_num):
        raise UnreachableLabelsError(
            f"label sequence unreachable: {len(y)} labels cannot cover {S.shape[0]} frames "
            f"with segments of at most {max_seg_len}"
        )
    log_part, marg_part = kernels.semi_partition(S)
    grads = score_table_backward(marg_part - marg_num, H, params)
    return log_part - log_num, grads


def scrf_viterbi_decode(H, params, max_seg_len):
    """Best-scoring ``(labels, segmentation, score)``.

    The segmentation is a list of ``(start, end)`` frame pairs (0-based,
    inclusive).  Ties go to the smallest label id, then the shortest final
    segment.
    """
    S = score_table(H, params, max_seg_len)
    score, labels, ends, lengths = kernels.semi_viterbi(S)
    segmentation = [(e - d + 1, e) for e, d in zip(ends, lengths)]
    return labels, segmentation, score
