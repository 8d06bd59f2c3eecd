# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, tanh, INFINITY, fabs

cnp.import_array()


cdef inline double _logadd(double a, double b) noexcept nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef inline double _sigmoid(double x) noexcept nogil:
    return 0.5 * (tanh(0.5 * x) + 1.0)


# ---------------------------------------------------------------------------
# LSTM recurrence
# ---------------------------------------------------------------------------

def lstm_forward(const double[:, ::1] xproj, const double[:, ::1] Wh, bint reverse):
    cdef Py_ssize_t T = xproj.shape[0]
    cdef Py_ssize_t G = xproj.shape[1]
    cdef Py_ssize_t H = G // 4
    h_arr = np.zeros((T, H))
    c_arr = np.zeros((T, H))
    g_arr = np.zeros((T, G))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[::1] pre = np.empty(G)
    cdef Py_ssize_t step, t, tp, k, m
    cdef double acc, cp, hp
    with nogil:
        for step in range(T):
            t = T - 1 - step if reverse else step
            tp = t + 1 if reverse else t - 1
            for k in range(G):
                acc = xproj[t, k]
                if step > 0:
                    for m in range(H):
                        acc = acc + Wh[k, m] * h[tp, m]
                pre[k] = acc
            for k in range(H):
                gates[t, k] = _sigmoid(pre[k])
                gates[t, H + k] = _sigmoid(pre[H + k])
                gates[t, 2 * H + k] = tanh(pre[2 * H + k])
                gates[t, 3 * H + k] = _sigmoid(pre[3 * H + k])
                cp = c[tp, k] if step > 0 else 0.0
                c[t, k] = gates[t, H + k] * cp + gates[t, k] * gates[t, 2 * H + k]
                h[t, k] = gates[t, 3 * H + k] * tanh(c[t, k])
    return h_arr, c_arr, g_arr


def lstm_backward(const double[:, ::1] dh, const double[:, ::1] c,
                  const double[:, ::1] gates, const double[:, ::1] Wh, bint reverse):
    cdef Py_ssize_t T = dh.shape[0]
    cdef Py_ssize_t H = dh.shape[1]
    cdef Py_ssize_t G = 4 * H
    d_arr = np.zeros((T, G))
    cdef double[:, ::1] dpre = d_arr
    cdef double[::1] dh_next = np.zeros(H)
    cdef double[::1] dc_next = np.zeros(H)
    cdef Py_ssize_t step, t, tp, k, m
    cdef double i, f, g, o, tc, dht, dc, cp, acc
    with nogil:
        for step in range(T):
            # walk frames in the reverse of processing order
            t = step if reverse else T - 1 - step
            tp = t + 1 if reverse else t - 1
            for k in range(H):
                i = gates[t, k]
                f = gates[t, H + k]
                g = gates[t, 2 * H + k]
                o = gates[t, 3 * H + k]
                cp = c[tp, k] if (tp >= 0 and tp < T) else 0.0
                tc = tanh(c[t, k])
                dht = dh[t, k] + dh_next[k]
                dc = dc_next[k] + dht * o * (1.0 - tc * tc)
                dpre[t, k] = dc * g * i * (1.0 - i)
                dpre[t, H + k] = dc * cp * f * (1.0 - f)
                dpre[t, 2 * H + k] = dc * i * (1.0 - g * g)
                dpre[t, 3 * H + k] = dht * tc * o * (1.0 - o)
                dc_next[k] = dc * f
            for m in range(H):
                acc = 0.0
                for k in range(G):
                    acc = acc + Wh[k, m] * dpre[t, k]
                dh_next[m] = acc
    return d_arr


# ---------------------------------------------------------------------------
# Semi-Markov dynamic programs
# ---------------------------------------------------------------------------

cdef void _partition_forward(const double[:, :, ::1] S, double[::1] fwd) noexcept nogil:
    cdef Py_ssize_t T = S.shape[0], L = S.shape[1], Y = S.shape[2]
    cdef Py_ssize_t t, d, y, dmax
    cdef double mx, v, acc
    fwd[0] = 0.0
    for t in range(1, T + 1):
        dmax = L if L < t else t
        mx = -INFINITY
        for d in range(dmax):
            for y in range(Y):
                v = fwd[t - 1 - d] + S[t - 1, d, y]
                if v > mx:
                    mx = v
        if mx == -INFINITY:
            fwd[t] = -INFINITY
            continue
        acc = 0.0
        for d in range(dmax):
            for y in range(Y):
                acc = acc + exp(fwd[t - 1 - d] + S[t - 1, d, y] - mx)
        fwd[t] = mx + log(acc)


def semi_log_partition(const double[:, :, ::1] S):
    cdef double[::1] fwd = np.empty(S.shape[0] + 1)
    _partition_forward(S, fwd)
    return fwd[S.shape[0]]


def semi_partition(const double[:, :, ::1] S):
    cdef Py_ssize_t T = S.shape[0], L = S.shape[1], Y = S.shape[2]
    cdef double[::1] fwd = np.empty(T + 1)
    cdef double[::1] bwd = np.empty(T + 1)
    marg_arr = np.zeros((T, L, Y))
    cdef double[:, :, ::1] marg = marg_arr
    cdef Py_ssize_t t, d, y, dmax
    cdef double mx, v, acc, logz
    with nogil:
        _partition_forward(S, fwd)
        logz = fwd[T]
        bwd[T] = 0.0
        for t in range(T - 1, -1, -1):
            dmax = L if L < T - t else T - t
            mx = -INFINITY
            for d in range(dmax):
                for y in range(Y):
                    v = S[t + d, d, y] + bwd[t + d + 1]
                    if v > mx:
                        mx = v
            acc = 0.0
            for d in range(dmax):
                for y in range(Y):
                    acc = acc + exp(S[t + d, d, y] + bwd[t + d + 1] - mx)
            bwd[t] = mx + log(acc)
        for t in range(T):
            dmax = L if L < t + 1 else t + 1
            for d in range(dmax):
                for y in range(Y):
                    marg[t, d, y] = exp(fwd[t - d] + S[t, d, y] + bwd[t + 1] - logz)
    return logz, marg_arr


cdef void _numerator_forward(const double[:, :, ::1] S, const cnp.int64_t[::1] labels,
                             double[:, ::1] alpha) noexcept nogil:
    cdef Py_ssize_t T = S.shape[0], L = S.shape[1]
    cdef Py_ssize_t J = labels.shape[0]
    cdef Py_ssize_t j, t, d, dmax, y
    cdef double mx, v, acc
    for j in range(J + 1):
        for t in range(T + 1):
            alpha[j, t] = -INFINITY
    alpha[0, 0] = 0.0
    for j in range(1, J + 1):
        y = labels[j - 1]
        for t in range(j, T + 1):
            dmax = L if L < t else t
            mx = -INFINITY
            for d in range(dmax):
                v = alpha[j - 1, t - 1 - d] + S[t - 1, d, y]
                if v > mx:
                    mx = v
            if mx == -INFINITY:
                continue
            acc = 0.0
            for d in range(dmax):
                acc = acc + exp(alpha[j - 1, t - 1 - d] + S[t - 1, d, y] - mx)
            alpha[j, t] = mx + log(acc)


def semi_log_numerator(const double[:, :, ::1] S, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t J = labels.shape[0], T = S.shape[0]
    cdef double[:, ::1] alpha = np.empty((J + 1, T + 1))
    _numerator_forward(S, labels, alpha)
    return alpha[J, T]


def semi_numerator(const double[:, :, ::1] S, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t T = S.shape[0], L = S.shape[1], Y = S.shape[2]
    cdef Py_ssize_t J = labels.shape[0]
    cdef double[:, ::1] alpha = np.empty((J + 1, T + 1))
    cdef double[:, ::1] beta = np.empty((J + 1, T + 1))
    marg_arr = np.zeros((T, L, Y))
    cdef double[:, :, ::1] marg = marg_arr
    cdef Py_ssize_t j, t, d, dmax, y
    cdef double mx, v, acc, logz
    with nogil:
        _numerator_forward(S, labels, alpha)
        logz = alpha[J, T]
    if logz == -INFINITY:
        return logz, marg_arr
    with nogil:
        for j in range(J + 1):
            for t in range(T + 1):
                beta[j, t] = -INFINITY
        beta[J, T] = 0.0
        for j in range(J - 1, -1, -1):
            y = labels[j]
            for t in range(T):
                dmax = L if L < T - t else T - t
                mx = -INFINITY
                for d in range(dmax):
                    v = S[t + d, d, y] + beta[j + 1, t + d + 1]
                    if v > mx:
                        mx = v
                if mx == -INFINITY:
                    continue
                acc = 0.0
                for d in range(dmax):
                    acc = acc + exp(S[t + d, d, y] + beta[j + 1, t + d + 1] - mx)
                beta[j, t] = mx + log(acc)
        for j in range(1, J + 1):
            y = labels[j - 1]
            for t in range(T):
                dmax = L if L < t + 1 else t + 1
                for d in range(dmax):
                    v = alpha[j - 1, t - d] + S[t, d, y] + beta[j, t + 1]
                    if v != -INFINITY:
                        marg[t, d, y] += exp(v - logz)
    return logz, marg_arr


def semi_viterbi(const double[:, :, ::1] S):
    cdef Py_ssize_t T = S.shape[0], L = S.shape[1], Y = S.shape[2]
    cdef double[::1] best = np.empty(T + 1)
    cdef cnp.int64_t[::1] back_d = np.zeros(T + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] back_y = np.zeros(T + 1, dtype=np.int64)
    cdef Py_ssize_t t, d, y, dmax
    cdef double v, mx
    with nogil:
        best[0] = 0.0
        for t in range(1, T + 1):
            dmax = L if L < t else t
            mx = -INFINITY
            for y in range(Y):
                for d in range(dmax):
                    v = best[t - 1 - d] + S[t - 1, d, y]
                    if v > mx:
                        mx = v
                        back_y[t] = y
                        back_d[t] = d
            best[t] = mx
    labels, ends, lengths = [], [], []
    t = T
    while t > 0:
        d = back_d[t]
        labels.append(int(back_y[t]))
        ends.append(t - 1)
        lengths.append(d + 1)
        t -= d + 1
    return best[T], labels[::-1], ends[::-1], lengths[::-1]


# ---------------------------------------------------------------------------
# CTC
# ---------------------------------------------------------------------------

cdef inline bint _can_skip(const cnp.int64_t[::1] labels, Py_ssize_t s) noexcept nogil:
    # extended state s (odd) may be entered from s - 2
    return s >= 3 and (s & 1) and labels[(s - 1) // 2] != labels[(s - 3) // 2]


cdef inline cnp.int64_t _ext(const cnp.int64_t[::1] labels, Py_ssize_t s) noexcept nogil:
    return labels[(s - 1) // 2] if (s & 1) else 0


def ctc_log_likelihood(const double[:, ::1] logp, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t T = logp.shape[0]
    cdef Py_ssize_t S = 2 * labels.shape[0] + 1
    cdef double[::1] row = np.empty(S)
    cdef double[::1] nxt = np.empty(S)
    cdef Py_ssize_t t, s
    cdef double a
    with nogil:
        for s in range(S):
            row[s] = -INFINITY
        row[0] = logp[0, 0]
        if S > 1:
            row[1] = logp[0, _ext(labels, 1)]
        for t in range(1, T):
            for s in range(S):
                a = row[s]
                if s >= 1:
                    a = _logadd(a, row[s - 1])
                if _can_skip(labels, s):
                    a = _logadd(a, row[s - 2])
                nxt[s] = a + logp[t, _ext(labels, s)] if a != -INFINITY else -INFINITY
            for s in range(S):
                row[s] = nxt[s]
    if S > 1:
        return _logadd(row[S - 1], row[S - 2])
    return row[0]


def ctc_forward_backward(const double[:, ::1] logp, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t T = logp.shape[0], K = logp.shape[1]
    cdef Py_ssize_t S = 2 * labels.shape[0] + 1
    cdef double[:, ::1] alpha = np.full((T, S), -np.inf)
    cdef double[:, ::1] beta = np.full((T, S), -np.inf)
    occ_arr = np.zeros((T, K))
    cdef double[:, ::1] occ = occ_arr
    cdef Py_ssize_t t, s
    cdef double a, loglik, v
    with nogil:
        alpha[0, 0] = logp[0, 0]
        if S > 1:
            alpha[0, 1] = logp[0, _ext(labels, 1)]
        for t in range(1, T):
            for s in range(S):
                a = alpha[t - 1, s]
                if s >= 1:
                    a = _logadd(a, alpha[t - 1, s - 1])
                if _can_skip(labels, s):
                    a = _logadd(a, alpha[t - 1, s - 2])
                if a != -INFINITY:
                    alpha[t, s] = a + logp[t, _ext(labels, s)]
        if S > 1:
            loglik = _logadd(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
        else:
            loglik = alpha[T - 1, 0]
    if loglik == -INFINITY:
        return loglik, occ_arr
    with nogil:
        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            for s in range(S):
                a = beta[t + 1, s] + logp[t + 1, _ext(labels, s)]
                if s + 1 < S:
                    a = _logadd(a, beta[t + 1, s + 1] + logp[t + 1, _ext(labels, s + 1)])
                if s + 2 < S and _can_skip(labels, s + 2):
                    a = _logadd(a, beta[t + 1, s + 2] + logp[t + 1, _ext(labels, s + 2)])
                beta[t, s] = a
        for t in range(T):
            for s in range(S):
                v = alpha[t, s] + beta[t, s]
                if v != -INFINITY:
                    occ[t, _ext(labels, s)] += exp(v - loglik)
    return loglik, occ_arr
