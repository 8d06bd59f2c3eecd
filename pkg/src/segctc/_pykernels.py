"""Pure numpy implementations of the inner loops.

These mirror ``_kernels.pyx`` function for function and are used whenever
the compiled extension is unavailable.  Array conventions:

* segment score tables are ``(T, L, Y)``: ``S[t, d, y]`` scores label ``y``
  on the segment that ends at frame ``t`` and has length ``d + 1``.  Entries
  with ``d > t`` are never read.
* CTC log-probabilities are ``(T, K)`` with the blank at column 0.
* LSTM gates are stored activated, in ``[i, f, g, o]`` order.
"""

import numpy as np

NEG_INF = -np.inf


def _lse(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m_safe), axis=axis, keepdims=True)) + m_safe
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


# ---------------------------------------------------------------------------
# LSTM recurrence
# ---------------------------------------------------------------------------


def lstm_forward(xproj, Wh, reverse):
    T, G = xproj.shape
    H = G // 4
    h = np.zeros((T, H))
    c = np.zeros((T, H))
    gates = np.zeros((T, G))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        pre = xproj[t] + Wh @ h_prev
        i = _sigmoid(pre[:H])
        f = _sigmoid(pre[H:2 * H])
        g = np.tanh(pre[2 * H:3 * H])
        o = _sigmoid(pre[3 * H:])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = g
        gates[t, 3 * H:] = o
        c[t] = c_prev
        h[t] = h_prev
    return h, c, gates


def lstm_backward(dh, c, gates, Wh, reverse):
    """Gradient w.r.t. the gate pre-activations, shape ``(T, 4H)``."""
    T, H = dh.shape
    dpre = np.zeros((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    order = range(T) if reverse else range(T - 1, -1, -1)
    step = 1 if reverse else -1
    for t in order:
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tp = t + step
        c_prev = c[tp] if 0 <= tp < T else np.zeros(H)
        tc = np.tanh(c[t])
        dht = dh[t] + dh_next
        dc = dc_next + dht * o * (1.0 - tc * tc)
        dpre[t, :H] = dc * g * i * (1.0 - i)
        dpre[t, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dpre[t, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dpre[t, 3 * H:] = dht * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = Wh.T @ dpre[t]
    return dpre


# ---------------------------------------------------------------------------
# Semi-Markov dynamic programs
# ---------------------------------------------------------------------------


def _partition_forward(S):
    T, L, _ = S.shape
    fwd = np.full(T + 1, NEG_INF)
    fwd[0] = 0.0
    for t in range(1, T + 1):
        dmax = min(L, t)
        # fwd[t - 1 - d] for d = 0 .. dmax-1
        prev = fwd[t - dmax:t][::-1]
        fwd[t] = _lse(prev[:, None] + S[t - 1, :dmax, :])
    return fwd


def semi_log_partition(S):
    return float(_partition_forward(S)[-1])


def semi_partition(S):
    """Log-partition and its gradient w.r.t. every table entry."""
    T, L, _ = S.shape
    fwd = _partition_forward(S)
    bwd = np.full(T + 1, NEG_INF)
    bwd[T] = 0.0
    for t in range(T - 1, -1, -1):
        dmax = min(L, T - t)
        d = np.arange(dmax)
        bwd[t] = _lse(S[t + d, d, :] + bwd[t + d + 1][:, None])
    logz = fwd[T]
    marg = np.zeros_like(S)
    for d in range(min(L, T)):
        marg[d:, d, :] = np.exp(fwd[:T - d, None] + S[d:, d, :] + bwd[d + 1:, None] - logz)
    return float(logz), marg


def _numerator_forward(S, labels):
    T, L, _ = S.shape
    J = len(labels)
    alpha = np.full((J + 1, T + 1), NEG_INF)
    alpha[0, 0] = 0.0
    for j in range(1, J + 1):
        col = S[:, :, labels[j - 1]]
        cand = np.full((L, T + 1), NEG_INF)
        for d in range(min(L, T)):
            # segment of length d+1 ending at frame t-1 (t = 1..T)
            cand[d, d + 1:] = alpha[j - 1, :T - d] + col[d:, d]
        alpha[j] = _lse(cand, axis=0)
    return alpha


def semi_log_numerator(S, labels):
    return float(_numerator_forward(S, labels)[-1, -1])


def semi_numerator(S, labels):
    T, L, _ = S.shape
    J = len(labels)
    alpha = _numerator_forward(S, labels)
    logz = alpha[J, T]
    marg = np.zeros_like(S)
    if not np.isfinite(logz):
        return float(logz), marg
    beta = np.full((J + 1, T + 1), NEG_INF)
    beta[J, T] = 0.0
    for j in range(J - 1, -1, -1):
        col = S[:, :, labels[j]]
        cand = np.full((L, T + 1), NEG_INF)
        for d in range(min(L, T)):
            # segment of length d+1 starting at frame t (t = 0..T-d-1)
            cand[d, :T - d] = col[d:, d] + beta[j + 1, d + 1:]
        beta[j] = _lse(cand, axis=0)
    for j in range(1, J + 1):
        y = labels[j - 1]
        for d in range(min(L, T)):
            marg[d:, d, y] += np.exp(alpha[j - 1, :T - d] + S[d:, d, y] + beta[j, d + 1:] - logz)
    return float(logz), marg


def semi_viterbi(S):
    """Best (labels, segment ends, segment lengths) and its score.

    Ties at every cell go to the smallest label, then the shortest segment.
    """
    T, L, Y = S.shape
    best = np.full(T + 1, NEG_INF)
    best[0] = 0.0
    back_d = np.zeros(T + 1, dtype=np.int64)
    back_y = np.zeros(T + 1, dtype=np.int64)
    for t in range(1, T + 1):
        dmax = min(L, t)
        prev = best[t - dmax:t][::-1]
        cand = (prev[:, None] + S[t - 1, :dmax, :]).T  # (Y, dmax), label-major
        k = int(np.argmax(cand))
        back_y[t], back_d[t] = divmod(k, dmax)
        best[t] = cand.flat[k]
    labels, ends, lengths = [], [], []
    t = T
    while t > 0:
        d = int(back_d[t])
        labels.append(int(back_y[t]))
        ends.append(t - 1)
        lengths.append(d + 1)
        t -= d + 1
    return float(best[T]), labels[::-1], ends[::-1], lengths[::-1]


# ---------------------------------------------------------------------------
# CTC
# ---------------------------------------------------------------------------


def _extend(labels):
    ext = np.zeros(2 * len(labels) + 1, dtype=np.int64)
    ext[1::2] = labels
    skip = np.zeros(len(ext), dtype=bool)
    for s in range(3, len(ext), 2):
        skip[s] = ext[s] != ext[s - 2]
    return ext, skip


def _ctc_alpha(logp, ext, skip):
    T = logp.shape[0]
    S = len(ext)
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        a = prev.copy()
        a[1:] = np.logaddexp(a[1:], prev[:-1])
        two = np.full(S, NEG_INF)
        two[2:] = np.where(skip[2:], prev[:-2], NEG_INF)
        a = np.logaddexp(a, two)
        alpha[t] = a + logp[t, ext]
    return alpha


def ctc_log_likelihood(logp, labels):
    ext, skip = _extend(labels)
    T = logp.shape[0]
    S = len(ext)
    row = np.full(S, NEG_INF)
    row[0] = logp[0, ext[0]]
    if S > 1:
        row[1] = logp[0, ext[1]]
    for t in range(1, T):
        a = row.copy()
        a[1:] = np.logaddexp(a[1:], row[:-1])
        two = np.full(S, NEG_INF)
        two[2:] = np.where(skip[2:], row[:-2], NEG_INF)
        row = np.logaddexp(a, two) + logp[t, ext]
    return float(np.logaddexp(row[-1], row[-2]) if S > 1 else row[-1])


def ctc_forward_backward(logp, labels):
    """Log-likelihood and per-frame symbol occupancies ``(T, K)``."""
    ext, skip = _extend(labels)
    T, K = logp.shape
    S = len(ext)
    alpha = _ctc_alpha(logp, ext, skip)
    loglik = float(np.logaddexp(alpha[-1, -1], alpha[-1, -2]) if S > 1 else alpha[-1, -1])
    occ = np.zeros((T, K))
    if not np.isfinite(loglik):
        return loglik, occ
    beta = np.full((T, S), NEG_INF)
    beta[-1, -1] = 0.0
    if S > 1:
        beta[-1, -2] = 0.0
    skip_next = np.zeros(S, dtype=bool)
    skip_next[:-2] = skip[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + logp[t + 1, ext]
        b = nxt.copy()
        b[:-1] = np.logaddexp(b[:-1], nxt[1:])
        two = np.full(S, NEG_INF)
        two[:-2] = np.where(skip_next[:-2], nxt[2:], NEG_INF)
        beta[t] = np.logaddexp(b, two)
    post = np.exp(alpha + beta - loglik)
    for s in range(S):
        occ[:, ext[s]] += post[:, s]
    return loglik, occ
