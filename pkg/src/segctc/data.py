"""Datasets in plain-text formats, vocabularies, phone mappings, synthetic data.

File formats (UTF-8, ``\\n`` line endings):

features
    per utterance a header ``<id> <T> <D>`` followed by ``T`` rows of ``D``
    whitespace-separated reals.  Values are written with ``repr(float)``
    (shortest round-tripping form), so write/load is bit-exact.
labels
    one line per utterance: ``<id> <symbol> <symbol> ...``
vocabulary
    one symbol per line; line order defines the ids ``0..|Y|-1``.
phone mapping
    one ``<source> <target>`` pair per line.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import rng_for


class DataFormatError(ValueError):
    pass


@dataclass
class Utterance:
    id: str
    features: np.ndarray  # (T, D)
    labels: list          # label ids

    @property
    def num_frames(self):
        return self.features.shape[0]


@dataclass
class Vocabulary:
    symbols: list
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.symbols = list(self.symbols)
        self.index = {}
        for i, sym in enumerate(self.symbols):
            if sym in self.index:
                raise DataFormatError(f"duplicate vocabulary symbol {sym!r}")
            if not sym or any(ch.isspace() for ch in sym):
                raise DataFormatError(f"invalid vocabulary symbol {sym!r}")
            self.index[sym] = i

    def __len__(self):
        return len(self.symbols)

    def encode(self, symbols, where=""):
        try:
            return [self.index[s] for s in symbols]
        except KeyError as e:
            raise DataFormatError(f"unknown symbol {e.args[0]!r}{where}") from None

    def decode(self, ids):
        return [self.symbols[i] for i in ids]

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().split("\n")
        return cls([ln.strip() for ln in lines if ln.strip()])

    def write(self, path):
        Path(path).write_text("".join(s + "\n" for s in self.symbols))


@dataclass
class PhoneMapping:
    table: dict

    @classmethod
    def identity(cls, symbols):
        return cls({s: s for s in symbols})

    @classmethod
    def load(cls, path):
        table = {}
        for lineno, line in enumerate(Path(path).read_text().split("\n"), 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected '<source> <target>'")
            if parts[0] in table:
                raise DataFormatError(f"{path}:{lineno}: source symbol {parts[0]!r} mapped twice")
            table[parts[0]] = parts[1]
        return cls(table)

    def write(self, path):
        Path(path).write_text("".join(f"{s} {t}\n" for s, t in self.table.items()))

    @property
    def targets(self):
        return sorted(set(self.table.values()))


def merge_repeats(seq):
    out = []
    for s in seq:
        if not out or out[-1] != s:
            out.append(s)
    return out


def map_labels(seq, mapping):
    """Map symbols element-wise, then merge adjacent duplicates the mapping created.

    Only duplicates produced by the substitution are merged; repeats already
    present in ``seq`` survive.
    """
    table = mapping.table if isinstance(mapping, PhoneMapping) else mapping
    out = []
    prev_src = None
    for s in seq:
        if s not in table:
            raise DataFormatError(f"symbol {s!r} has no mapping")
        t = table[s]
        if out and out[-1] == t and prev_src != s:
            prev_src = s
            continue
        out.append(t)
        prev_src = s
    return out


def _format_row(row):
    return " ".join(repr(float(v)) for v in row)


def write_features(path, utterances):
    with open(path, "w", newline="\n") as fh:
        for utt in utterances:
            T, D = utt.features.shape
            fh.write(f"{utt.id} {T} {D}\n")
            for row in utt.features:
                fh.write(_format_row(row) + "\n")


def read_features(path):
    """``{id: (T, D) array}`` in file order."""
    lines = Path(path).read_text().rstrip().split("\n")
    out = {}
    dim = None
    i = 0
    while i < len(lines):
        header = lines[i].split()
        i += 1
        if not header:
            continue
        if len(header) != 3:
            raise DataFormatError(f"{path}:{i}: expected header '<id> <T> <D>'")
        uid = header[0]
        try:
            T, D = int(header[1]), int(header[2])
        except ValueError:
            raise DataFormatError(f"{path}:{i}: non-integer frame count or dimension") from None
        if T < 1 or D < 1:
            raise DataFormatError(f"{path}:{i}: utterance {uid} has T={T}, D={D}")
        if dim is None:
            dim = D
        elif D != dim:
            raise DataFormatError(f"{path}:{i}: utterance {uid} has D={D}, expected {dim}")
        if uid in out:
            raise DataFormatError(f"{path}:{i}: duplicate utterance id {uid}")
        feats = np.empty((T, D))
        for t in range(T):
            if i >= len(lines):
                raise DataFormatError(f"{path}: utterance {uid} ends after {t} of {T} rows")
            fields = lines[i].split()
            i += 1
            if len(fields) != D:
                raise DataFormatError(
                    f"{path}:{i}: utterance {uid} row {t + 1} has {len(fields)} values, header says D={D}"
                )
            try:
                feats[t] = [float(v) for v in fields]
            except ValueError:
                raise DataFormatError(f"{path}:{i}: utterance {uid} row {t + 1} is not numeric") from None
        if not np.all(np.isfinite(feats)):
            raise DataFormatError(f"{path}: utterance {uid} contains non-finite values")
        out[uid] = feats
    return out


def write_labels(path, entries):
    """``entries``: iterable of ``(id, [symbols])``."""
    with open(path, "w", newline="\n") as fh:
        for uid, symbols in entries:
            fh.write(" ".join([uid, *symbols]) + "\n")


def read_labels(path):
    out = {}
    for lineno, line in enumerate(Path(path).read_text().split("\n"), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] in out:
            raise DataFormatError(f"{path}:{lineno}: duplicate utterance id {parts[0]}")
        out[parts[0]] = parts[1:]
    return out


def load_dataset(feature_path, label_path, vocab_path):
    vocab = vocab_path if isinstance(vocab_path, Vocabulary) else Vocabulary.load(vocab_path)
    feats = read_features(feature_path)
    labels = read_labels(label_path)
    utts = []
    for uid, x in feats.items():
        if uid not in labels:
            raise DataFormatError(f"utterance {uid} has features but no labels")
        utts.append(Utterance(uid, x, vocab.encode(labels[uid], where=f" in utterance {uid}")))
    extra = [uid for uid in labels if uid not in feats]
    if extra:
        raise DataFormatError(f"utterance {extra[0]} has labels but no features")
    return utts


def write_dataset(utterances, vocab, feature_path, label_path, vocab_path=None):
    write_features(feature_path, utterances)
    write_labels(label_path, ((u.id, vocab.decode(u.labels)) for u in utterances))
    if vocab_path is not None:
        vocab.write(vocab_path)


@dataclass
class SyntheticTask:
    vocab: Vocabulary
    prototypes: np.ndarray  # (|Y|, D)
    utterances: list


def synth_vocabulary(size):
    return Vocabulary([f"p{k}" for k in range(size)])


def synth_generate(num_utterances, vocab_size, feature_dim, seg_len_range=(4, 10), noise_sigma=0.3,
                   seed=0, label_count_range=(3, 8), split=0):
    """Random label sequences rendered as noisy piecewise-constant features.

    Each label owns a fixed prototype vector drawn from N(0, I) (shared by
    every ``split`` of the same ``seed``).  Utterances draw a label count from
    ``label_count_range`` and labels without immediate repeats; each label
    emits a segment whose length is uniform over ``seg_len_range`` and whose
    frames are its prototype plus N(0, noise_sigma^2) noise.
    """
    lo, hi = seg_len_range
    jlo, jhi = label_count_range
    if not (1 <= lo <= hi and 1 <= jlo <= jhi and vocab_size >= 1 and noise_sigma >= 0):
        raise ValueError("invalid synthetic task ranges")
    if vocab_size == 1 and jhi > 1:
        raise ValueError("a one-symbol vocabulary cannot avoid repeated labels")
    prototypes = rng_for(seed, 0).normal(size=(vocab_size, feature_dim))
    rng = rng_for(seed, 1, split)
    utts = []
    for k in range(num_utterances):
        J = int(rng.integers(jlo, jhi + 1))
        labels = []
        for _ in range(J):
            choices = [y for y in range(vocab_size) if not labels or y != labels[-1]]
            labels.append(int(choices[rng.integers(len(choices))]))
        lengths = rng.integers(lo, hi + 1, size=J)
        frames = np.repeat(prototypes[labels], lengths, axis=0)
        if noise_sigma > 0:
            frames = frames + noise_sigma * rng.normal(size=frames.shape)
        utts.append(Utterance(f"synth{split}_{k:05d}", frames, labels))
    return SyntheticTask(synth_vocabulary(vocab_size), prototypes, utts)
