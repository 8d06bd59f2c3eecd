"""Log-domain arithmetic, initialization and the finite-difference checker.

Random streams use numpy's PCG64 bit generator (O'Neill's permuted
congruential generator, 128-bit state).  Seeds are expanded with
``numpy.random.SeedSequence`` so a tuple such as ``(seed, epoch, index)``
names an independent, reproducible stream.
"""

import math

import numpy as np

NEG_INF = -math.inf


class NumericalError(ArithmeticError):
    """A loss or gradient became non-finite."""


def log_sum_exp(terms):
    """``log(sum(exp(terms)))`` with a max shift so nothing overflows."""
    a = np.asarray(terms, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError("empty reduction")
    m = a.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.exp(a - m).sum()))


def log_softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x):
    return 0.5 * (np.tanh(0.5 * np.asarray(x, dtype=np.float64)) + 1.0)


def rng_for(*seed):
    """PCG64 generator for a seed or a tuple of seed components."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed))))


INIT_SCHEMES = ("uniform-scaled", "zeros", "ones")


def seeded_init(shape, seed, scheme="uniform-scaled"):
    """Deterministic parameter initialization.

    ``uniform-scaled`` draws from U(-a, a) with ``a = sqrt(6 / (fan_in + fan_out))``
    where, for a 2-D ``(out, in)`` weight, fan_out is the row count and fan_in
    the column count.  1-D shapes use ``fan_in = fan_out = n``.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "ones":
        return np.ones(shape)
    if scheme != "uniform-scaled":
        raise ValueError(f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}")
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    seed = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    return rng_for(*seed).uniform(-bound, bound, size=shape)


def relative_error(analytic, numeric):
    """Elementwise ``|g - g'| / max(1, |g| + |g'|)``."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - b) / np.maximum(1.0, np.abs(a) + np.abs(b))


def finite_difference_gradient(loss_fn, params, epsilon=1e-5):
    """Central-difference gradient of ``loss_fn(params)``.

    ``params`` is a mapping of name to float array (or a single array); each
    entry is perturbed in place and restored.  Returns arrays shaped like the
    parameters.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    single = isinstance(params, np.ndarray)
    named = {"theta": params} if single else params
    grads = {}
    for name, arr in named.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = loss_fn(params)
            flat[k] = orig - epsilon
            down = loss_fn(params)
            flat[k] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericalError(f"non-finite loss when perturbing {name}[{k}]")
            gflat[k] = (up - down) / (2.0 * epsilon)
        grads[name] = g
    return grads["theta"] if single else grads


def max_relative_error(analytic, numeric):
    """Largest relative error across all shared keys of two gradient sets."""
    worst = 0.0
    for name, g in numeric.items():
        if g.size:
            worst = max(worst, float(relative_error(analytic[name], g).max()))
    return worst
