"""Edit-distance scoring, corpus phone error rate and convergence CSVs."""

import csv
from dataclasses import dataclass

import numpy as np

from .data import map_labels

CSV_COLUMNS = ("epoch", "lr", "loss_total", "loss_ctc", "loss_scrf", "valid_per", "phase")


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss_total: float
    loss_ctc: float
    loss_scrf: float
    valid_per: float
    phase: str


@dataclass
class ErrorCounts:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_length: int = 0

    @property
    def errors(self):
        return self.substitutions + self.insertions + self.deletions

    @property
    def per(self):
        return 100.0 * self.errors / self.ref_length if self.ref_length else 0.0

    def __add__(self, other):
        return ErrorCounts(self.substitutions + other.substitutions,
                           self.insertions + other.insertions,
                           self.deletions + other.deletions,
                           self.ref_length + other.ref_length)


def edit_distance(ref, hyp):
    """Unit-cost Levenshtein alignment counts.

    Among optimal alignments the backtrace prefers a substitution (or match)
    over a deletion, and a deletion over an insertion.
    """
    ref, hyp = list(ref), list(hyp)
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost[i, j] = min(cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]),
                             cost[i - 1, j] + 1,
                             cost[i, j - 1] + 1)
    s = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return ErrorCounts(int(s), ins, dels, n)


def corpus_counts(refs, hyps, mapping=None):
    """Pooled counts over ``{id: symbols}`` dictionaries (or aligned lists)."""
    if isinstance(refs, dict):
        if set(refs) != set(hyps):
            missing = sorted(set(refs) ^ set(hyps))
            raise ValueError(f"reference and hypothesis ids differ, e.g. {missing[0]}")
        pairs = [(refs[k], hyps[k]) for k in refs]
    else:
        if len(refs) != len(hyps):
            raise ValueError("reference and hypothesis lists differ in length")
        pairs = list(zip(refs, hyps))
    total = ErrorCounts()
    for ref, hyp in pairs:
        if mapping is not None:
            ref, hyp = map_labels(ref, mapping), map_labels(hyp, mapping)
        total = total + edit_distance(ref, hyp)
    return total


def corpus_per(refs, hyps, mapping=None):
    """``100 * (S + I + D) / N`` pooled over the corpus, after phone mapping."""
    return corpus_counts(refs, hyps, mapping).per


def format_per(per):
    return f"PER {per:.1f}"


def emit_convergence_csv(log, path):
    if not log:
        raise ValueError("convergence log is empty")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in log:
            writer.writerow([rec.epoch, repr(rec.lr), repr(rec.loss_total), repr(rec.loss_ctc),
                             repr(rec.loss_scrf), repr(rec.valid_per), rec.phase])


def read_convergence_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochRecord(int(r["epoch"]), float(r["lr"]), float(r["loss_total"]), float(r["loss_ctc"]),
                        float(r["loss_scrf"]), float(r["valid_per"]), r["phase"]) for r in rows]

