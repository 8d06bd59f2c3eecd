"""Numerical self-audit: dynamic programs against brute force, gradients
against finite differences, normalization sums, backend agreement.

Every check is seeded, so the report is identical across runs.
"""

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import ctc, joint, kernels, oracle, scrf
from .numerics import finite_difference_gradient, max_relative_error, rng_for

SCALES = {
    # instances per oracle check, gradient-check instances
    "small": (40, 2),
    "full": (200, 6),
}

# names accepted by ``fault``; each perturbs one kernel so the matching checks must fail
FAULTS = {
    "scrf_partition": ("semi_log_partition", "semi_partition"),
    "scrf_numerator": ("semi_log_numerator", "semi_numerator"),
    "ctc_forward": ("ctc_log_likelihood", "ctc_forward_backward"),
}


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    seconds: float

    @property
    def passed(self):
        return math.isfinite(self.max_error) and self.max_error < self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} max_err={self.max_error:.3e}  tol={self.tolerance:.0e}"


@contextmanager
def injected_fault(name):
    """Temporarily add 1e-3 to the log-domain output of one family of kernels."""
    if name is None:
        yield
        return
    if name not in FAULTS:
        raise ValueError(f"unknown fault {name!r}; choose from {sorted(FAULTS)}")
    saved = {}
    for fn in FAULTS[name]:
        original = getattr(kernels, fn)
        saved[fn] = original

        def corrupted(*args, _orig=original):
            out = _orig(*args)
            return (out[0] + 1e-3, *out[1:]) if isinstance(out, tuple) else out + 1e-3

        setattr(kernels, fn, corrupted)
    try:
        yield
    finally:
        for fn, original in saved.items():
            setattr(kernels, fn, original)


def random_scrf_instance(rng, T=None, Y=None, L=None, state_dim=2):
    T = T or int(rng.integers(1, 7))
    Y = Y or int(rng.integers(1, 4))
    L = L or int(rng.integers(1, T + 1))
    params = scrf.init_scrf(Y, state_dim, embed_dim=3, feature_dim=4, seed=int(rng.integers(1 << 30)))
    for a in params.named_arrays().values():
        a += rng.normal(scale=0.5, size=a.shape)
    H = rng.normal(size=(T, state_dim))
    return H, params, L


def random_posteriors(rng, T=None, Y=None):
    T = T or int(rng.integers(1, 9))
    Y = Y or int(rng.integers(1, 4))
    return ctc.FramePosteriors.from_probs(rng.dirichlet(np.ones(Y + 1), size=T)), Y


def _timed(name, tol, fn):
    t = time.perf_counter()
    err = fn()
    return CheckResult(name, err, tol, time.perf_counter() - t)


def check_scrf_oracle(n, seed=0):
    rng = rng_for(seed, 11)
    worst_num = worst_part = 0.0
    for _ in range(n):
        H, params, L = random_scrf_instance(rng)
        T = H.shape[0]
        J = int(rng.integers(1, T + 1))
        y = rng.integers(0, params.num_labels, size=J)
        part = scrf.scrf_log_partition(H, params, L)
        worst_part = max(worst_part, abs(part - oracle.brute_force_scrf(H, params, L)))
        num = scrf.scrf_log_numerator(H, y, params, L)
        ref = oracle.brute_force_scrf(H, params, L, y)
        if math.isinf(ref) or math.isinf(num):
            err = 0.0 if num == ref else math.inf
        else:
            err = abs(num - ref)
        worst_num = max(worst_num, err)
    return worst_num, worst_part


def check_scrf_normalization(n, seed=0):
    rng = rng_for(seed, 12)
    worst = 0.0
    for _ in range(n):
        H, params, L = random_scrf_instance(rng, T=int(rng.integers(1, 5)))
        part = scrf.scrf_log_partition(H, params, L)
        T = H.shape[0]
        total = 0.0
        for J in range(1, T + 1):
            if J * L < T:
                continue
            for ys in np.ndindex(*(params.num_labels,) * J):
                total += math.exp(scrf.scrf_log_numerator(H, list(ys), params, L) - part)
        worst = max(worst, abs(total - 1.0))
    return worst


def check_viterbi(n, seed=0):
    rng = rng_for(seed, 13)
    worst = 0.0
    for _ in range(n):
        H, params, L = random_scrf_instance(rng)
        labels, seg, score = scrf.scrf_viterbi_decode(H, params, L)
        ref_labels, ref_seg, ref_score = oracle.brute_force_scrf_argmax(H, params, L)
        err = abs(score - ref_score)
        if labels != ref_labels or seg != ref_seg:
            err = max(err, 1.0)
        worst = max(worst, err)
    return worst


def check_ctc_oracle(n, seed=0):
    rng = rng_for(seed, 14)
    worst = 0.0
    for _ in range(n):
        post, Y = random_posteriors(rng)
        T = post.length
        J = int(rng.integers(0, T + 1))
        y = [int(v) for v in rng.integers(1, Y + 1, size=J)]
        if ctc.required_frames(y) > T:
            continue
        worst = max(worst, abs(ctc.ctc_log_likelihood(post, y) - oracle.brute_force_ctc(post, y)))
        loss, _ = ctc.ctc_loss(post, y)
        worst = max(worst, abs(-loss - oracle.brute_force_ctc(post, y)))
    return worst


def check_ctc_normalization(n, seed=0):
    rng = rng_for(seed, 15)
    worst = 0.0
    for _ in range(n):
        post, _ = random_posteriors(rng, T=int(rng.integers(1, 6)))
        classes = oracle.ctc_collapse_classes(post)
        total = sum(math.exp(ctc.ctc_log_likelihood(post, list(y))) for y in classes)
        worst = max(worst, abs(total - 1.0))
    return worst


def toy_model(seed, T=5, D=2, H=3, Y=3, layers=2):
    rng = rng_for(seed, 16)
    mc = joint.ModelConfig(hidden_dim=H, num_layers=layers, subsample_factors=(2,) * (layers - 1),
                           embed_dim=3, feature_dim=4)
    params = joint.init_model(D, Y, mc, seed=seed)
    for a in params.named_arrays().values():
        a += rng.normal(scale=0.3, size=a.shape)
    X = rng.normal(size=(T, D))
    Tp = -(-T // 2 ** (layers - 1))
    J = int(rng.integers(1, Tp + 1))
    y = [int(v) for v in rng.permutation(Y)[:J]] if J <= Y else [k % Y for k in range(J)]
    return params, X, y


def check_gradients(n, seed=0, lams=(0.0, 0.5, 1.0)):
    worst = 0.0
    for k in range(n):
        params, X, y = toy_model(seed * 1000 + k)
        L = 3
        for lam in lams:
            res = joint.joint_loss(X, y, params, lam, L)
            fd = finite_difference_gradient(lambda _: joint.loss_value(X, y, params, lam, L),
                                            params.named_arrays())
            worst = max(worst, max_relative_error(res.grads, fd))
    return worst


def check_backend_agreement(n, seed=0):
    if len(kernels.available_backends()) < 2:
        return 0.0
    rng = rng_for(seed, 17)
    worst = 0.0
    for _ in range(n):
        H, params, L = random_scrf_instance(rng, T=int(rng.integers(1, 12)))
        S = scrf.score_table(H, params, L)
        y = rng.integers(0, params.num_labels, size=int(rng.integers(1, S.shape[0] + 1)))
        post, Y = random_posteriors(rng, T=int(rng.integers(1, 12)))
        yc = rng.integers(1, Y + 1, size=int(rng.integers(0, post.length // 2 + 1)))
        outs = {}
        for be in kernels.available_backends():
            with kernels.use_backend(be):
                outs[be] = (kernels.semi_partition(S), kernels.semi_numerator(S, y),
                            kernels.ctc_forward_backward(post.log_probs, yc))
        a, b = outs["compiled"], outs["python"]
        for (va, ma), (vb, mb) in zip(a, b):
            if math.isinf(va) or math.isinf(vb):
                worst = max(worst, 0.0 if va == vb else math.inf)
            else:
                worst = max(worst, abs(va - vb), float(np.abs(ma - mb).max()))
    return worst


def run_selfcheck(scale="small", fault=None, seed=0):
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected one of {sorted(SCALES)}")
    n, n_grad = SCALES[scale]
    results = []
    with injected_fault(fault):
        t = time.perf_counter()
        num_err, part_err = check_scrf_oracle(n, seed)
        dt = time.perf_counter() - t
        results.append(CheckResult("scrf log-numerator vs brute force", num_err, 1e-10, dt))
        results.append(CheckResult("scrf log-partition vs brute force", part_err, 1e-10, dt))
        results.append(_timed("scrf normalization", 1e-8, lambda: check_scrf_normalization(n // 2, seed)))
        results.append(_timed("scrf viterbi vs brute force", 1e-10, lambda: check_viterbi(n // 2, seed)))
        results.append(_timed("ctc forward vs path enumeration", 1e-10, lambda: check_ctc_oracle(n, seed)))
        results.append(_timed("ctc normalization", 1e-8, lambda: check_ctc_normalization(n // 2, seed)))
        results.append(_timed("joint gradients vs finite diff", 1e-4, lambda: check_gradients(n_grad, seed)))
        results.append(_timed("compiled vs python kernels", 1e-10, lambda: check_backend_agreement(n, seed)))
    return results
