import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segctc import kernels
from segctc.numerics import log_softmax, rng_for


def test_backend_selection():
    names = kernels.available_backends()
    assert "python" in names
    assert kernels.backend_name() in names
    with kernels.use_backend("python"):
        assert kernels.backend_name() == "python"
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_compiled_backend_is_default_when_built():
    if "compiled" not in kernels.available_backends():
        pytest.skip("extension not built")
    assert kernels.backend_name() == "compiled"


def _run_all(be, S, y, logp, yc, xproj, Wh, dh):
    with kernels.use_backend(be):
        part = kernels.semi_partition(S)
        num = kernels.semi_numerator(S, y)
        vit = kernels.semi_viterbi(S)
        fb = kernels.ctc_forward_backward(logp, yc)
        ll = kernels.ctc_log_likelihood(logp, yc)
        out = []
        for rev in (False, True):
            h, c, gates = kernels.lstm_forward(xproj, Wh, rev)
            out.append((h, c, gates, kernels.lstm_backward(dh, c, gates, Wh, rev)))
    return part, num, vit, fb, ll, out


@settings(max_examples=40, deadline=None)
@given(T=st.integers(1, 10), L=st.integers(1, 5), Y=st.integers(1, 4), J=st.integers(1, 6),
       seed=st.integers(0, 10_000))
def test_backends_agree(T, L, Y, J, seed):
    names = kernels.available_backends()
    if len(names) < 2:
        pytest.skip("only one backend")
    rng = rng_for(seed)
    L = min(L, T)
    S = rng.normal(scale=2.0, size=(T, L, Y))
    y = rng.integers(0, Y, size=min(J, T))
    logp = log_softmax(rng.normal(size=(T, Y + 1)), axis=1)
    yc = rng.integers(1, Y + 1, size=min(J, T // 2))
    H = 3
    xproj = rng.normal(size=(T, 4 * H))
    Wh = rng.normal(scale=0.5, size=(4 * H, H))
    dh = rng.normal(size=(T, H))
    a = _run_all("compiled", S, y, logp, yc, xproj, Wh, dh)
    b = _run_all("python", S, y, logp, yc, xproj, Wh, dh)
    for (va, ma), (vb, mb) in zip(a[:2], b[:2]):
        assert va == pytest.approx(vb, abs=1e-12) if math.isfinite(vb) else va == vb
        np.testing.assert_allclose(ma, mb, atol=1e-12)
    assert a[2][0] == pytest.approx(b[2][0], abs=1e-12)
    assert list(a[2][1]) == list(b[2][1])
    assert list(a[2][2]) == list(b[2][2]) and list(a[2][3]) == list(b[2][3])
    assert a[3][0] == pytest.approx(b[3][0], abs=1e-12)
    np.testing.assert_allclose(a[3][1], b[3][1], atol=1e-12)
    assert a[4] == pytest.approx(b[4], abs=1e-12)
    for xa, xb in zip(a[5], b[5]):
        for ua, ub in zip(xa, xb):
            np.testing.assert_allclose(ua, ub, atol=1e-12)


def test_partition_marginals_are_probabilities(backend):
    rng = rng_for(5)
    S = rng.normal(size=(7, 3, 4))
    logz, marg = kernels.semi_partition(S)
    assert np.all(marg >= -1e-15) and np.all(marg <= 1 + 1e-12)
    # every frame is covered by exactly one segment
    cover = np.zeros(7)
    for t in range(7):
        for d in range(3):
            cover[t - d:t + 1] += marg[t, d].sum() if t - d >= 0 else 0.0
    np.testing.assert_allclose(cover, 1.0, atol=1e-12)
    assert kernels.semi_log_partition(S) == pytest.approx(logz, abs=1e-12)


def test_numerator_unreachable(backend):
    S = np.zeros((4, 2, 1))
    logz, marg = kernels.semi_numerator(S, np.array([0]))
    assert logz == -math.inf
    assert np.all(marg == 0)


def test_ctc_occupancy_rows_sum_to_one(backend):
    rng = rng_for(6)
    logp = log_softmax(rng.normal(size=(9, 4)), axis=1)
    ll, occ = kernels.ctc_forward_backward(logp, np.array([1, 2, 2, 3]))
    assert math.isfinite(ll)
    np.testing.assert_allclose(occ.sum(axis=1), 1.0, atol=1e-12)
    assert kernels.ctc_log_likelihood(logp, np.array([1, 2, 2, 3])) == pytest.approx(ll, abs=1e-12)


def test_viterbi_tie_break(backend):
    # every (y, E) pair scores 0, so only the tie rules decide
    score, labels, ends, lengths = kernels.semi_viterbi(np.zeros((3, 3, 2)))
    assert score == 0.0
    assert all(v == 0 for v in labels)
    assert list(lengths)[-1] == 1


def test_fallback_when_extension_missing():
    # block the compiled module, as on an install without a C compiler
    code = ("import sys; sys.modules['segctc._kernels'] = None\n"
            "from segctc import kernels, selfcheck\n"
            "assert kernels.available_backends() == ['python'], kernels.available_backends()\n"
            "assert selfcheck.check_scrf_oracle(5)[1] < 1e-10\n"
            "print(kernels.backend_name())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "python"
