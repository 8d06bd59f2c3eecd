"""Backend selection for the inner loops.

The compiled extension (``segctc._kernels``) is used when it imports; the
numpy implementation in ``segctc._pykernels`` is the fallback.  Both expose
the same functions, so the rest of the package calls through this module::

    from segctc import kernels
    logz, marg = kernels.semi_partition(table)

:func:`use_backend` switches the active implementation at runtime, which is
how the tests cross-check the two and how the benchmark times them.
"""

from contextlib import contextmanager

import numpy as np

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _pykernels}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _pykernels


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {available_backends()}")
    _active = _BACKENDS[name]


@contextmanager
def use_backend(name):
    previous = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def lstm_forward(xproj, Wh, reverse=False):
    """Run one LSTM direction over pre-projected inputs ``(T, 4H)``.

    Returns hidden states, cell states and activated gates.
    """
    return _active.lstm_forward(_f64(xproj), _f64(Wh), bool(reverse))


def lstm_backward(dh, c, gates, Wh, reverse=False):
    return _active.lstm_backward(_f64(dh), _f64(c), _f64(gates), _f64(Wh), bool(reverse))


def semi_log_partition(S):
    return float(_active.semi_log_partition(_f64(S)))


def semi_partition(S):
    logz, marg = _active.semi_partition(_f64(S))
    return float(logz), np.asarray(marg)


def semi_log_numerator(S, labels):
    return float(_active.semi_log_numerator(_f64(S), _i64(labels)))


def semi_numerator(S, labels):
    logz, marg = _active.semi_numerator(_f64(S), _i64(labels))
    return float(logz), np.asarray(marg)


def semi_viterbi(S):
    score, labels, ends, lengths = _active.semi_viterbi(_f64(S))
    return float(score), list(labels), list(ends), [int(d) for d in lengths]


def ctc_log_likelihood(logp, labels):
    return float(_active.ctc_log_likelihood(_f64(logp), _i64(labels)))


def ctc_forward_backward(logp, labels):
    loglik, occ = _active.ctc_forward_backward(_f64(logp), _i64(labels))
    return float(loglik), np.asarray(occ)
