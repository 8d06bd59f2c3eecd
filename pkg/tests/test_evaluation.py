import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segctc.evaluation import (EpochRecord, corpus_counts, corpus_per, edit_distance, emit_convergence_csv,
                               format_per, read_convergence_csv)


def test_edit_distance_examples():
    c = edit_distance(list("abc"), list("abc"))
    assert (c.substitutions, c.insertions, c.deletions) == (0, 0, 0)
    c = edit_distance(list("abc"), [])
    assert (c.substitutions, c.insertions, c.deletions) == (0, 0, 3)
    c = edit_distance(list("abc"), list("axc"))
    assert c.errors == 1 and c.substitutions == 1
    c = edit_distance([], list("ab"))
    assert c.insertions == 2 and c.ref_length == 0


def brute_force_distance(ref, hyp):
    """Minimum cost over every monotone alignment, enumerated as edit scripts."""
    best = math.inf
    # each script is a sequence of ops; bound its length by len(ref) + len(hyp)
    for n in range(max(len(ref), len(hyp)), len(ref) + len(hyp) + 1):
        for ops in itertools.product("MDI", repeat=n):
            i = j = cost = 0
            ok = True
            for op in ops:
                if op == "M":
                    if i >= len(ref) or j >= len(hyp):
                        ok = False
                        break
                    cost += ref[i] != hyp[j]
                    i += 1
                    j += 1
                elif op == "D":
                    if i >= len(ref):
                        ok = False
                        break
                    cost += 1
                    i += 1
                else:
                    if j >= len(hyp):
                        ok = False
                        break
                    cost += 1
                    j += 1
            if ok and i == len(ref) and j == len(hyp):
                best = min(best, cost)
    return best


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from("abc"), max_size=4), st.lists(st.sampled_from("abc"), max_size=4))
def test_edit_distance_is_optimal(ref, hyp):
    c = edit_distance(ref, hyp)
    assert c.errors == brute_force_distance(ref, hyp)
    assert c.ref_length == len(ref)
    assert c.substitutions + c.deletions <= len(ref)
    assert c.substitutions + c.insertions <= len(hyp)


def test_corpus_per_examples():
    assert corpus_per([list("abcd")], [list("abcd")]) == 0.0
    assert corpus_per([list("abcd")], [list("abcx")]) == 25.0
    refs = [list("abcd"), list("abcdef")]
    hyps = [list("abcx"), list("abcd")]
    assert corpus_per(refs, hyps) == pytest.approx(30.0)


def test_corpus_per_is_pooled_not_averaged():
    refs = [list("ab"), list("abcdefgh")]
    hyps = [list("xb"), list("abcdefgh")]
    pooled = corpus_per(refs, hyps)
    averaged = (50.0 + 0.0) / 2
    assert pooled == pytest.approx(10.0)
    assert pooled != averaged


def test_corpus_accepts_dicts_and_mapping():
    refs = {"u1": ["a", "b"], "u2": ["c"]}
    hyps = {"u2": ["c"], "u1": ["a", "a"]}
    mapping = {"a": "a", "b": "a", "c": "c"}
    assert corpus_per(refs, hyps) == pytest.approx(100 / 3)
    # with b -> a: ref u1 becomes [a], hyp u1 stays [a, a] (repeat already present)
    c = corpus_counts(refs, hyps, mapping)
    assert (c.ref_length, c.errors) == (2, 1)
    with pytest.raises(ValueError):
        corpus_counts({"u1": ["a"]}, {"u9": ["a"]})


def test_format_per():
    assert format_per(0.0) == "PER 0.0"
    assert format_per(10.0) == "PER 10.0"
    assert format_per(12.345) == "PER 12.3"


def _log():
    return [EpochRecord(1, 0.1, 3.25, 3.25, math.nan, 40.0, "pretrain"),
            EpochRecord(2, 0.1, 2.0000000000000004, 1.5, 2.5, 12.5, "joint"),
            EpochRecord(3, 0.075, 1.0 / 3.0, 0.1, 0.2, 12.5, "joint")]


def test_convergence_csv_round_trip(tmp_path):
    path = tmp_path / "c.csv"
    emit_convergence_csv(_log(), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,lr,loss_total,loss_ctc,loss_scrf,valid_per,phase"
    assert len(lines) == 4
    back = read_convergence_csv(path)
    for a, b in zip(back, _log()):
        for x, y in zip(vars(a).values(), vars(b).values()):
            assert x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
    phases = [r.phase for r in back]
    assert sum(1 for a, b in zip(phases, phases[1:]) if a != b) == 1


def test_one_epoch_csv(tmp_path):
    emit_convergence_csv(_log()[1:2], tmp_path / "c.csv")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 2


def test_empty_log_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_convergence_csv([], tmp_path / "c.csv")
