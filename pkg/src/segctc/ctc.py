"""CTC head: per-frame softmax over blank + labels, loss and best-path decoding.

Output column 0 is the blank; label ``y`` of the SCRF vocabulary occupies
column ``y + 1``.  Label sequences passed to this module use the CTC ids
(``1..|Y|``); :func:`to_ctc_ids` converts.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import log_softmax, seeded_init

BLANK = 0


class UnalignableLabelsError(ValueError):
    pass


@dataclass
class CTCHead:
    W: np.ndarray  # (|Y| + 1, state_dim)
    b: np.ndarray  # (|Y| + 1,)

    @property
    def num_outputs(self):
        return self.W.shape[0]

    def named_arrays(self, prefix="ctc"):
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def init_ctc(num_labels, state_dim, seed=0):
    return CTCHead(W=seeded_init((num_labels + 1, state_dim), seed=(seed, 3, 0)),
                   b=np.zeros(num_labels + 1))


def to_ctc_ids(labels):
    return [int(y) + 1 for y in labels]


def from_ctc_ids(ids):
    return [int(k) - 1 for k in ids]


@dataclass
class FramePosteriors:
    """Per-frame log-posteriors ``(T', |Y| + 1)``; kept in the log domain."""

    log_probs: np.ndarray

    @property
    def probs(self):
        return np.exp(self.log_probs)

    @property
    def length(self):
        return self.log_probs.shape[0]

    @classmethod
    def from_probs(cls, probs):
        with np.errstate(divide="ignore"):
            return cls(np.log(np.asarray(probs, dtype=np.float64)))


def logits(H, head):
    h = np.asarray(getattr(H, "states", H), dtype=np.float64)
    return h @ head.W.T + head.b


def ctc_posteriors(H, head):
    return FramePosteriors(log_softmax(logits(H, head), axis=1))


def collapse(path):
    """Merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for k in path:
        k = int(k)
        if k != prev and k != BLANK:
            out.append(k)
        prev = k
    return out


def required_frames(labels):
    """Minimum frames to emit ``labels``: one per label plus a blank between repeats."""
    labels = list(labels)
    return len(labels) + sum(1 for a, b in zip(labels, labels[1:]) if a == b)


def _check(posteriors, labels):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    K = posteriors.log_probs.shape[1]
    if labels.size and (labels.min() < 1 or labels.max() >= K):
        raise IndexError(f"CTC label ids must lie in 1..{K - 1}")
    if required_frames(labels) > posteriors.length:
        raise UnalignableLabelsError(
            f"label sequence unalignable: needs {required_frames(labels)} frames, have {posteriors.length}"
        )
    return labels


def ctc_log_likelihood(posteriors, labels):
    """log P(y | X) by the forward recursion only (two rolling rows)."""
    return kernels.ctc_log_likelihood(posteriors.log_probs, _check(posteriors, labels))


def ctc_loss(posteriors, labels):
    """``-log P(y | X)`` and its gradient w.r.t. the pre-softmax logits.

    The gradient is ``softmax - occupancy``, where occupancy is the posterior
    probability of each symbol at each frame under the alignments of ``y``.
    """
    labels = _check(posteriors, labels)
    loglik, occ = kernels.ctc_forward_backward(posteriors.log_probs, labels)
    if not np.isfinite(loglik):
        raise UnalignableLabelsError("label sequence unalignable: zero probability")
    return -loglik, posteriors.probs - occ


def ctc_head_loss(H, labels, head):
    """Loss plus gradients for the projection and the states (key ``"H"``)."""
    h = np.asarray(getattr(H, "states", H), dtype=np.float64)
    loss, dlogits = ctc_loss(ctc_posteriors(h, head), labels)
    grads = {"ctc.W": dlogits.T @ h, "ctc.b": dlogits.sum(axis=0), "H": dlogits @ head.W}
    return loss, grads


def ctc_best_path_decode(posteriors):
    """Per-frame argmax then collapse.  ``argmax`` picks the lowest id on ties, so blank wins."""
    return collapse(np.argmax(posteriors.log_probs, axis=1))
