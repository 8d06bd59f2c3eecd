"""Interpolated CTC + SCRF objective and the SGD training loop.

``joint_loss`` runs the shared encoder once, feeds the states to both heads
and returns ``lam * ctc + (1 - lam) * scrf`` together with the gradient of
every parameter.  A head whose weight is exactly zero is skipped, so its
gradients are zero and its loss is reported as ``nan``.

``train`` implements plain SGD with per-utterance shuffling, global-norm
clipping, learning-rate decay when the validation error stops improving, and
an optional CTC-only pretraining phase.
"""

import copy
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import ctc as ctc_mod
from . import kernels
from . import encoder as enc
from . import scrf as scrf_mod
from .evaluation import EpochRecord, corpus_per
from .numerics import NumericalError, rng_for

log = logging.getLogger(__name__)

PHASE_PRETRAIN = "pretrain"
PHASE_JOINT = "joint"


@dataclass
class ModelConfig:
    hidden_dim: int = 128
    num_layers: int = 3
    subsample_factors: tuple = (2, 2)
    embed_dim: int = 64
    feature_dim: int = 64
    feature_layers: int = 1
    activation: str = "tanh"
    forget_bias: float = 1.0


@dataclass
class TrainConfig:
    lam: float = 0.5
    lr_init: float = 0.1
    lr_decay: float = 0.75
    dropout: float = 0.2
    epochs: int = 20          # total, including pretraining epochs
    pretrain_epochs: int = 0  # leading CTC-only epochs
    seed: int = 0
    max_seg_len: int = 8
    batch_size: int = 1
    clip_norm: float = 5.0
    target_per: float = None  # stop once validation PER <= target

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must lie in (0, 1)")
        if self.lr_init < 0 or self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValueError("lr_init, epochs and pretrain_epochs must be nonnegative")
        if self.batch_size < 1 or self.max_seg_len < 1:
            raise ValueError("batch_size and max_seg_len must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class ModelParams:
    encoder: enc.EncoderParams
    scrf: scrf_mod.SCRFParams
    ctc: ctc_mod.CTCHead

    def named_arrays(self):
        out = self.encoder.named_arrays()
        out.update(self.scrf.named_arrays())
        out.update(self.ctc.named_arrays())
        return out

    def copy(self):
        return copy.deepcopy(self)

    @property
    def num_labels(self):
        return self.scrf.num_labels


def init_model(input_dim, num_labels, model_config=None, seed=0):
    mc = model_config or ModelConfig()
    encoder = enc.init_encoder(input_dim, mc.hidden_dim, mc.num_layers, mc.subsample_factors, seed=seed,
                               forget_bias=mc.forget_bias)
    state_dim = encoder.output_dim
    return ModelParams(
        encoder=encoder,
        scrf=scrf_mod.init_scrf(num_labels, state_dim, mc.embed_dim, mc.feature_dim, mc.feature_layers,
                                mc.activation, seed=seed),
        ctc=ctc_mod.init_ctc(num_labels, state_dim, seed=seed),
    )


@dataclass
class LossResult:
    total: float
    ctc: float
    scrf: float
    grads: dict
    lam: float


def joint_loss(X, y, params, lam, max_seg_len, dropout=0.0, training=False, rng_seed=0):
    """``lam * L_ctc + (1 - lam) * L_scrf`` over one shared encoder pass."""
    states, cache = enc.forward(X, params.encoder, dropout, training, rng_seed)
    dH = np.zeros_like(states)
    grads = {}
    loss_ctc = loss_scrf = math.nan
    total = 0.0
    if lam > 0.0:
        loss_ctc, g = ctc_mod.ctc_head_loss(states, ctc_mod.to_ctc_ids(y), params.ctc)
        dH += lam * g.pop("H")
        grads.update({k: lam * v for k, v in g.items()})
        total += lam * loss_ctc
    else:
        grads.update({k: np.zeros_like(v) for k, v in params.ctc.named_arrays().items()})
    if lam < 1.0:
        loss_scrf, g = scrf_mod.scrf_loss(states, y, params.scrf, max_seg_len)
        dH += (1.0 - lam) * g.pop("H")
        grads.update({k: (1.0 - lam) * v for k, v in g.items()})
        total += (1.0 - lam) * loss_scrf
    else:
        grads.update({k: np.zeros_like(v) for k, v in params.scrf.named_arrays().items()})
    grads.update(enc.backward(dH, cache))
    return LossResult(total, loss_ctc, loss_scrf, grads, lam)


def loss_value(X, y, params, lam, max_seg_len):
    """Joint loss without gradients (deterministic, no dropout)."""
    states = enc.encode(X, params.encoder).states
    total = 0.0
    if lam > 0.0:
        total += lam * -ctc_mod.ctc_log_likelihood(
            ctc_mod.ctc_posteriors(states, params.ctc), ctc_mod.to_ctc_ids(y))
    if lam < 1.0:
        S = scrf_mod.score_table(states, params.scrf, max_seg_len)
        total += (1.0 - lam) * (kernels.semi_log_partition(S) - kernels.semi_log_numerator(S, y))
    return total


def clip_gradients(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
        return norm, True
    return norm, False


def apply_sgd(params, grads, lr):
    for name, arr in params.named_arrays().items():
        arr -= lr * grads[name]


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


def decode(params, X, mode, max_seg_len):
    """Label ids for one utterance; ``mode`` is ``"scrf"`` or ``"ctc"``."""
    states = enc.encode(X, params.encoder).states
    if mode == "scrf":
        labels, _, _ = scrf_mod.scrf_viterbi_decode(states, params.scrf, max_seg_len)
        return labels
    if mode == "ctc":
        return ctc_mod.from_ctc_ids(ctc_mod.ctc_best_path_decode(ctc_mod.ctc_posteriors(states, params.ctc)))
    raise ValueError(f"unknown decode mode {mode!r}; expected 'scrf' or 'ctc'")


def evaluate(params, dataset, mode, max_seg_len, mapping=None, vocab=None):
    """Corpus PER of ``mode`` decoding over ``dataset``.

    With a ``mapping``, ids are turned into symbols through ``vocab`` and both
    sides are mapped before scoring.
    """
    refs, hyps = [], []
    for utt in dataset:
        hyp = decode(params, utt.features, mode, max_seg_len)
        if mapping is not None:
            refs.append(vocab.decode(utt.labels))
            hyps.append(vocab.decode(hyp))
        else:
            refs.append(list(utt.labels))
            hyps.append(hyp)
    return corpus_per(refs, hyps, mapping)


def validation_mode(lam):
    return "ctc" if lam >= 1.0 else "scrf"


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class EpochStats:
    loss_total: float
    loss_ctc: float
    loss_scrf: float
    clipped: int
    utterances: int


def _mean(values):
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def sgd_epoch(dataset, params, lr, config, epoch=1, lam=None):
    """One pass over ``dataset`` in seeded random order, updating ``params`` in place."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    lam = config.lam if lam is None else lam
    order = rng_for(config.seed, 100, epoch).permutation(len(dataset))
    totals, ctcs, scrfs = [], [], []
    clipped = 0
    for start in range(0, len(order), config.batch_size):
        batch = order[start:start + config.batch_size]
        acc = None
        for idx in batch:
            utt = dataset[idx]
            res = joint_loss(utt.features, utt.labels, params, lam, config.max_seg_len,
                             dropout=config.dropout, training=True,
                             rng_seed=(config.seed, 200, epoch, int(idx)))
            if not math.isfinite(res.total):
                raise NumericalError(
                    f"non-finite loss {res.total} on utterance {utt.id} (epoch {epoch}, lr {lr})"
                )
            totals.append(res.total)
            ctcs.append(res.ctc)
            scrfs.append(res.scrf)
            if acc is None:
                acc = res.grads
            else:
                for k, g in res.grads.items():
                    acc[k] += g
        if len(batch) > 1:
            for g in acc.values():
                g /= len(batch)
        norm, was_clipped = clip_gradients(acc, config.clip_norm)
        if was_clipped:
            clipped += 1
            log.debug("epoch %d: clipped gradient norm %.3g to %.3g", epoch, norm, config.clip_norm)
        if lr > 0:
            apply_sgd(params, acc, lr)
    if clipped:
        log.info("epoch %d: gradient clipping triggered on %d batches", epoch, clipped)
    return EpochStats(_mean(totals), _mean(ctcs), _mean(scrfs), clipped, len(totals))


def lr_schedule(history, lr, decay=0.75):
    """Decay ``lr`` when the latest validation error is no better than the one before."""
    if len(history) >= 2 and history[-1] >= history[-2]:
        return lr * decay
    return lr


def trainable(utt, params, config, lam=None):
    """Whether both active objectives can score this utterance."""
    lam = config.lam if lam is None else lam
    T = enc.subsampled_length(utt.num_frames, params.encoder.subsample_factors)
    J = len(utt.labels)
    if J == 0:
        return False
    if lam > 0 or config.pretrain_epochs > 0:
        if ctc_mod.required_frames(utt.labels) > T:
            return False
    if lam < 1:
        if J > T or J * config.max_seg_len < T:
            return False
    return True


@dataclass
class TrainState:
    """Everything needed to resume training after ``epoch`` completed epochs."""

    epoch: int
    lr: float
    phase: str
    history: list = field(default_factory=list)  # validation PERs of the current phase
    log: list = field(default_factory=list)      # EpochRecord per completed epoch
    done: bool = False


def initial_state(config):
    phase = PHASE_PRETRAIN if config.pretrain_epochs > 0 else PHASE_JOINT
    return TrainState(epoch=0, lr=config.lr_init, phase=phase)


def train(dataset, valid, config, params, state=None, on_epoch=None, mapping=None, vocab=None):
    """Train ``params`` (a copy is made) and return ``(params, log)``.

    ``on_epoch(params, state)`` is called after every completed epoch, which
    is where the CLI writes checkpoints.  Passing a ``state`` restored from a
    checkpoint continues an interrupted run exactly.  ``mapping`` and
    ``vocab`` are forwarded to :func:`evaluate` for validation scoring.
    """
    params = params.copy()
    state = copy.deepcopy(state) if state is not None else initial_state(config)
    usable = [u for u in dataset if trainable(u, params, config)]
    if len(usable) < len(dataset):
        log.warning("skipping %d unalignable training utterances", len(dataset) - len(usable))
    while state.epoch < config.epochs and not state.done:
        epoch = state.epoch + 1
        if state.phase == PHASE_PRETRAIN and epoch > config.pretrain_epochs:
            state.phase = PHASE_JOINT
            state.lr = config.lr_init
            state.history = []
        lam = 1.0 if state.phase == PHASE_PRETRAIN else config.lam
        stats = sgd_epoch(usable, params, state.lr, config, epoch=epoch, lam=lam)
        per = (evaluate(params, valid, validation_mode(lam), config.max_seg_len, mapping, vocab)
               if valid else math.nan)
        state.log.append(EpochRecord(epoch, state.lr, stats.loss_total, stats.loss_ctc, stats.loss_scrf,
                                     per, state.phase))
        log.info("epoch %d [%s] lr %.4g loss %.4f valid PER %.2f", epoch, state.phase, state.lr,
                 stats.loss_total, per)
        state.history.append(per)
        state.lr = lr_schedule(state.history, state.lr, config.lr_decay)
        state.epoch = epoch
        if config.target_per is not None and per <= config.target_per and state.phase == PHASE_JOINT:
            state.done = True
        if on_epoch is not None:
            on_epoch(params, state)
    return params, state.log


def epochs_to_reach(log_records, target_per, phase=None):
    """First epoch whose validation PER is at most ``target_per`` (``None`` if never)."""
    for rec in log_records:
        if (phase is None or rec.phase == phase) and rec.valid_per <= target_per:
            return rec.epoch
    return None


def config_fields(cls):
    return [f.name for f in fields(cls)]
