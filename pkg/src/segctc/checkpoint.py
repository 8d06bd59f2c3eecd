"""Versioned little-endian binary checkpoints.

Byte layout (all integers unsigned little-endian, reals IEEE-754 float64 LE)::

    magic         8 bytes   b"SEGCTC\\x00\\x01"
    version       u32       1
    vocabulary    u32 count, then per symbol: u32 byte length + UTF-8 bytes
    config        u32 byte length + UTF-8 canonical config text
    rng seed      i64       base seed; every random stream is derived from
                            (seed, purpose, epoch, index) with PCG64, so the
                            seed and the epoch counter are the full RNG state
    epoch         u32       completed epochs
    lr            f64       learning rate for the next epoch
    phase         u8        0 = pretrain, 1 = joint
    done          u8        1 if training stopped at the target PER
    history       u32 count + f64 values (validation PERs of current phase)
    log           u32 count, then per record: u32 epoch, f64 lr, f64 loss_total,
                  f64 loss_ctc, f64 loss_scrf, f64 valid_per, u8 phase
    tensors       u32 count, then per tensor: u32 name length + UTF-8 name,
                  u32 ndim, ndim x u32 dims, prod(dims) x f64 in C order

The CTC head's output 0 is the blank; output ``k`` is vocabulary id ``k - 1``.
Tensor names follow ``ModelParams.named_arrays()``.
"""

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import parse_config
from .ctc import CTCHead
from .data import Vocabulary
from .encoder import DIRECTIONS, EncoderParams, LSTMWeights
from .evaluation import EpochRecord
from .joint import PHASE_JOINT, PHASE_PRETRAIN, ModelParams, TrainState
from .scrf import SCRFParams

MAGIC = b"SEGCTC\x00\x01"
VERSION = 1
_PHASES = (PHASE_PRETRAIN, PHASE_JOINT)


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: ModelParams
    vocab: Vocabulary
    config_text: str
    seed: int
    state: TrainState

    @property
    def config(self):
        return parse_config(self.config_text)


def _str(buf, s):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


def to_bytes(params, vocab, config_text, seed, state):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", len(vocab)))
    for sym in vocab.symbols:
        _str(buf, sym)
    _str(buf, config_text)
    buf.write(struct.pack("<q", seed))
    buf.write(struct.pack("<IdBB", state.epoch, state.lr, _PHASES.index(state.phase), int(state.done)))
    buf.write(struct.pack("<I", len(state.history)))
    buf.write(np.asarray(state.history, dtype="<f8").tobytes())
    buf.write(struct.pack("<I", len(state.log)))
    for r in state.log:
        buf.write(struct.pack("<I5dB", r.epoch, r.lr, r.loss_total, r.loss_ctc, r.loss_scrf, r.valid_per,
                              _PHASES.index(r.phase)))
    arrays = params.named_arrays()
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        _str(buf, name)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(path, params, vocab, config_text, seed, state):
    Path(path).write_bytes(to_bytes(params, vocab, config_text, seed, state))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")


def from_bytes(data):
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a segctc checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (nsym,) = r.unpack("<I")
    vocab = Vocabulary([r.string() for _ in range(nsym)])
    config_text = r.string()
    (seed,) = r.unpack("<q")
    epoch, lr, phase, done = r.unpack("<IdBB")
    (nhist,) = r.unpack("<I")
    history = list(np.frombuffer(r.take(8 * nhist), dtype="<f8").astype(float))
    (nlog,) = r.unpack("<I")
    log = []
    for _ in range(nlog):
        e, lr_, lt, lc, ls, per, ph = r.unpack("<I5dB")
        log.append(EpochRecord(e, lr_, lt, lc, ls, per, _PHASES[ph]))
    (ntensors,) = r.unpack("<I")
    arrays = {}
    for _ in range(ntensors):
        name = r.string()
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        count = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    state = TrainState(epoch, lr, _PHASES[phase], history, log, bool(done))
    params = _assemble(arrays, parse_config(config_text))
    return Checkpoint(params, vocab, config_text, seed, state)


def load_checkpoint(path):
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e.strerror}") from None
    return from_bytes(data)


def _assemble(arrays, cfg):
    mc = cfg.model
    try:
        layers = [
            {d: LSTMWeights(arrays[f"encoder.{li}.{d}.W"], arrays[f"encoder.{li}.{d}.b"]) for d in DIRECTIONS}
            for li in range(mc.num_layers)
        ]
        H = layers[0]["fwd"].hidden_dim
        encoder = EncoderParams(layers[0]["fwd"].input_dim, H, layers, mc.subsample_factors)
        extra = [(arrays[f"scrf.V{k}"], arrays[f"scrf.c{k}"]) for k in range(mc.feature_layers - 1)]
        scrf = SCRFParams(arrays["scrf.M"], arrays["scrf.W1"], arrays["scrf.W2"], arrays["scrf.b"],
                          arrays["scrf.w"], extra, mc.activation)
        ctc = CTCHead(arrays["ctc.W"], arrays["ctc.b"])
    except KeyError as e:
        raise CheckpointError(f"checkpoint lacks tensor {e.args[0]}") from None
    params = ModelParams(encoder, scrf, ctc)
    if set(params.named_arrays()) != set(arrays):
        raise CheckpointError("checkpoint tensors do not match the configured model")
    return params
