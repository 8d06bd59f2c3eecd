"""Bidirectional multi-layer LSTM with hierarchical subsampling.

Each layer runs a forward and a backward LSTM over its input and
concatenates the two hidden states per frame.  Between layers the sequence
is shortened by concatenating ``k`` adjacent frames (the last frame is
repeated to pad odd lengths), so two ``x2`` boundaries reduce ``T`` frames to
``ceil(ceil(T / 2) / 2)``.

Dropout, when training, multiplies every layer input (including the acoustic
features feeding layer 0) by an inverted-dropout mask; recurrent connections
are never dropped.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics import rng_for, seeded_init, sigmoid

DIRECTIONS = ("fwd", "bwd")


@dataclass
class LSTMWeights:
    """Gate weights ``W`` of shape ``(4H, input + H)`` and bias ``(4H,)``.

    Gate blocks are ordered input, forget, cell candidate, output.
    """

    W: np.ndarray
    b: np.ndarray

    @property
    def hidden_dim(self):
        return self.W.shape[0] // 4

    @property
    def input_dim(self):
        return self.W.shape[1] - self.hidden_dim


@dataclass
class EncoderParams:
    input_dim: int
    hidden_dim: int
    layers: list = field(default_factory=list)  # [{"fwd": LSTMWeights, "bwd": LSTMWeights}, ...]
    subsample_factors: tuple = (2, 2)

    @property
    def num_layers(self):
        return len(self.layers)

    @property
    def output_dim(self):
        return 2 * self.hidden_dim

    def named_arrays(self, prefix="encoder"):
        out = {}
        for li, layer in enumerate(self.layers):
            for direction in DIRECTIONS:
                out[f"{prefix}.{li}.{direction}.W"] = layer[direction].W
                out[f"{prefix}.{li}.{direction}.b"] = layer[direction].b
        return out


def layer_input_dims(input_dim, hidden_dim, num_layers, subsample_factors):
    dims = [input_dim]
    for li in range(1, num_layers):
        dims.append(2 * hidden_dim * subsample_factors[li - 1])
    return dims


def init_encoder(input_dim, hidden_dim, num_layers=3, subsample_factors=(2, 2), seed=0,
                 forget_bias=1.0):
    """Uniform fan-scaled weights, zero biases except the forget gate."""
    if num_layers < 1 or hidden_dim < 1:
        raise ValueError("encoder needs at least one layer and hidden_dim >= 1")
    subsample_factors = tuple(int(k) for k in subsample_factors)
    if len(subsample_factors) != num_layers - 1:
        raise ValueError(
            f"{num_layers} layers need {num_layers - 1} subsample factors, got {len(subsample_factors)}"
        )
    if any(k < 1 for k in subsample_factors):
        raise ValueError("subsample factors must be >= 1")
    dims = layer_input_dims(input_dim, hidden_dim, num_layers, subsample_factors)
    H = hidden_dim
    layers = []
    for li, din in enumerate(dims):
        layer = {}
        for di, direction in enumerate(DIRECTIONS):
            W = seeded_init((4 * H, din + H), seed=(seed, 1, li, di))
            b = np.zeros(4 * H)
            b[H:2 * H] = forget_bias
            layer[direction] = LSTMWeights(W, b)
        layers.append(layer)
    return EncoderParams(input_dim, hidden_dim, layers, subsample_factors)


def subsampled_length(T, factors):
    for k in factors:
        T = -(-T // k)
    return T


@dataclass
class HiddenStateSequence:
    states: np.ndarray  # (T', 2H)

    @property
    def length(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


def lstm_cell(prev_hidden, prev_cell, x, gate_params):
    """One LSTM step; returns ``(hidden, cell)``."""
    W, b = gate_params.W, gate_params.b
    H = gate_params.hidden_dim
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (gate_params.input_dim,) or np.shape(prev_hidden) != (H,) or np.shape(prev_cell) != (H,):
        raise ValueError(
            f"dimension mismatch: input {x.shape}, hidden {np.shape(prev_hidden)}, cell "
            f"{np.shape(prev_cell)} for gates expecting input {gate_params.input_dim}, hidden {H}"
        )
    pre = W @ np.concatenate([x, prev_hidden]) + b
    i = sigmoid(pre[:H])
    f = sigmoid(pre[H:2 * H])
    g = np.tanh(pre[2 * H:3 * H])
    o = sigmoid(pre[3 * H:])
    cell = f * prev_cell + i * g
    return o * np.tanh(cell), cell


def _stack_frames(x, k):
    T, dim = x.shape
    if k == 1:
        return x
    pad = (-T) % k
    if pad:
        x = np.concatenate([x, np.repeat(x[-1:], pad, axis=0)], axis=0)
    return x.reshape(-1, k * dim)


def _unstack_frames(dy, k, T, dim):
    if k == 1:
        return dy
    dx = dy.reshape(-1, dim)
    out = dx[:T].copy()
    out[T - 1] += dx[T:].sum(axis=0)
    return out


def _direction_forward(x, weights, reverse):
    din = x.shape[1]
    xproj = x @ weights.W[:, :din].T + weights.b
    h, c, gates = kernels.lstm_forward(xproj, weights.W[:, din:], reverse)
    return h, c, gates


def _direction_backward(dh, x, cache, weights, reverse):
    h, c, gates = cache
    din = x.shape[1]
    Wx, Wh = weights.W[:, :din], weights.W[:, din:]
    dpre = kernels.lstm_backward(dh, c, gates, Wh, reverse)
    # previous hidden state as seen by each frame
    h_prev = np.zeros_like(h)
    if reverse:
        h_prev[:-1] = h[1:]
    else:
        h_prev[1:] = h[:-1]
    dW = np.concatenate([dpre.T @ x, dpre.T @ h_prev], axis=1)
    return dpre @ Wx, dW, dpre.sum(axis=0)


def forward(X, params, dropout_rate=0.0, training=False, rng_seed=0):
    """Encode ``X`` and keep what :func:`backward` needs.

    Returns ``(states, cache)`` with ``states`` of shape ``(T', 2H)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty utterance")
    if X.shape[1] != params.input_dim:
        raise ValueError(f"feature dim {X.shape[1]} != encoder input dim {params.input_dim}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    use_dropout = training and dropout_rate > 0.0
    rng = rng_for(*(rng_seed if isinstance(rng_seed, tuple) else (rng_seed,))) if use_dropout else None
    x = X
    layer_caches = []
    for li, layer in enumerate(params.layers):
        if li > 0:
            k = params.subsample_factors[li - 1]
            pre_stack_shape = x.shape
            x = _stack_frames(x, k)
        else:
            k, pre_stack_shape = 1, x.shape
        mask = None
        if use_dropout:
            mask = (rng.random(x.shape) >= dropout_rate) / (1.0 - dropout_rate)
            x_in = x * mask
        else:
            x_in = x
        outs, dir_caches = [], []
        for direction in DIRECTIONS:
            cache = _direction_forward(x_in, layer[direction], reverse=(direction == "bwd"))
            outs.append(cache[0])
            dir_caches.append(cache)
        layer_caches.append(
            {"x_in": x_in, "mask": mask, "k": k, "pre_stack_shape": pre_stack_shape, "dirs": dir_caches}
        )
        x = np.concatenate(outs, axis=1)
    return x, {"layers": layer_caches, "params": params}


def backward(dstates, cache):
    """Gradients of a scalar w.r.t. all encoder arrays, given ``d/d states``."""
    params = cache["params"]
    H = params.hidden_dim
    grads = {}
    dx = np.asarray(dstates, dtype=np.float64)
    for li in range(params.num_layers - 1, -1, -1):
        lc = cache["layers"][li]
        layer = params.layers[li]
        x_in = lc["x_in"]
        dx_in = np.zeros_like(x_in)
        for di, direction in enumerate(DIRECTIONS):
            dh = np.ascontiguousarray(dx[:, di * H:(di + 1) * H])
            d_in, dW, db = _direction_backward(
                dh, x_in, lc["dirs"][di], layer[direction], reverse=(direction == "bwd")
            )
            dx_in += d_in
            grads[f"encoder.{li}.{direction}.W"] = dW
            grads[f"encoder.{li}.{direction}.b"] = db
        if lc["mask"] is not None:
            dx_in = dx_in * lc["mask"]
        if li > 0:
            T, dim = lc["pre_stack_shape"]
            dx = _unstack_frames(dx_in, lc["k"], T, dim)
    return grads


def encode(X, params, dropout_rate=0.0, training=False, rng_seed=0):
    states, _ = forward(X, params, dropout_rate, training, rng_seed)
    return HiddenStateSequence(states)
