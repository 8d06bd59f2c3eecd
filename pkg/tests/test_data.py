import numpy as np
import pytest

from segctc import data


@pytest.fixture
def task():
    return data.synth_generate(6, 4, 3, seed=2)


def test_round_trip_is_bit_exact(tmp_path, task):
    paths = [tmp_path / n for n in ("f.txt", "l.txt", "v.txt")]
    data.write_dataset(task.utterances, task.vocab, *paths)
    loaded = data.load_dataset(*paths)
    assert [u.id for u in loaded] == [u.id for u in task.utterances]
    for a, b in zip(loaded, task.utterances):
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels == b.labels


def test_empty_label_file_names_first_utterance(tmp_path, task):
    data.write_features(tmp_path / "f.txt", task.utterances)
    (tmp_path / "l.txt").write_text("")
    task.vocab.write(tmp_path / "v.txt")
    with pytest.raises(data.DataFormatError, match=task.utterances[0].id):
        data.load_dataset(tmp_path / "f.txt", tmp_path / "l.txt", tmp_path / "v.txt")


def test_labels_without_features(tmp_path, task):
    data.write_dataset(task.utterances[:2], task.vocab, tmp_path / "f", tmp_path / "l", tmp_path / "v")
    with open(tmp_path / "l", "a") as fh:
        fh.write("ghost p0\n")
    with pytest.raises(data.DataFormatError, match="ghost"):
        data.load_dataset(tmp_path / "f", tmp_path / "l", tmp_path / "v")


def test_row_with_wrong_dimension(tmp_path):
    (tmp_path / "f").write_text("u1 2 3\n1 2 3\n4 5\n")
    with pytest.raises(data.DataFormatError, match=r":3: utterance u1 row 2 has 2 values"):
        data.read_features(tmp_path / "f")


def test_inconsistent_dims_across_utterances(tmp_path):
    (tmp_path / "f").write_text("u1 1 2\n1 2\nu2 1 3\n1 2 3\n")
    with pytest.raises(data.DataFormatError, match="D=3, expected 2"):
        data.read_features(tmp_path / "f")


def test_truncated_and_non_numeric(tmp_path):
    (tmp_path / "f").write_text("u1 3 1\n1\n2\n")
    with pytest.raises(data.DataFormatError, match="ends after 2 of 3"):
        data.read_features(tmp_path / "f")
    (tmp_path / "g").write_text("u1 1 1\nx\n")
    with pytest.raises(data.DataFormatError, match="not numeric"):
        data.read_features(tmp_path / "g")


def test_unknown_symbol(tmp_path, task):
    data.write_dataset(task.utterances[:1], task.vocab, tmp_path / "f", tmp_path / "l", tmp_path / "v")
    (tmp_path / "l").write_text(f"{task.utterances[0].id} p0 zz\n")
    with pytest.raises(data.DataFormatError, match="unknown symbol 'zz'"):
        data.load_dataset(tmp_path / "f", tmp_path / "l", tmp_path / "v")


def test_vocabulary_validation():
    with pytest.raises(data.DataFormatError):
        data.Vocabulary(["a", "a"])
    with pytest.raises(data.DataFormatError):
        data.Vocabulary(["a b"])
    v = data.Vocabulary(["x", "y"])
    assert v.decode(v.encode(["y", "x"])) == ["y", "x"]


def test_map_labels_examples():
    ident = data.PhoneMapping.identity(["a", "b", "c"])
    assert data.map_labels(["a", "b", "b", "c"], ident) == ["a", "b", "b", "c"]
    m = {"a": "a", "b": "a", "c": "c"}
    assert data.map_labels(["a", "b"], m) == ["a"]
    assert data.map_labels(["b", "c", "b"], m) == ["a", "c", "a"]
    with pytest.raises(data.DataFormatError):
        data.map_labels(["d"], m)


def test_mapping_file(tmp_path):
    (tmp_path / "m").write_text("aa a\nab a\n\nb b\n")
    m = data.PhoneMapping.load(tmp_path / "m")
    assert m.targets == ["a", "b"]
    (tmp_path / "bad").write_text("aa a a\n")
    with pytest.raises(data.DataFormatError):
        data.PhoneMapping.load(tmp_path / "bad")


def test_merge_repeats():
    assert data.merge_repeats([1, 1, 2, 2, 2, 1]) == [1, 2, 1]
    assert data.merge_repeats([]) == []


def test_synthetic_noise_free_segments():
    t = data.synth_generate(5, 3, 4, seg_len_range=(3, 3), noise_sigma=0.0, seed=1, label_count_range=(4, 4))
    for u in t.utterances:
        assert u.num_frames == 12
        for j, y in enumerate(u.labels):
            assert np.all(u.features[3 * j:3 * j + 3] == t.prototypes[y])


def test_synthetic_determinism_and_splits():
    a = data.synth_generate(10, 5, 8, seed=3)
    b = data.synth_generate(10, 5, 8, seed=3)
    for x, y in zip(a.utterances, b.utterances):
        assert x.features.tobytes() == y.features.tobytes() and x.labels == y.labels
    v = data.synth_generate(10, 5, 8, seed=3, split=1)
    assert np.array_equal(v.prototypes, a.prototypes)
    assert v.utterances[0].id == "synth1_00000"
    assert not np.array_equal(v.utterances[0].features[:1], a.utterances[0].features[:1])


def test_synthetic_has_no_adjacent_repeats():
    for u in data.synth_generate(50, 3, 2, seed=4).utterances:
        assert all(a != b for a, b in zip(u.labels, u.labels[1:]))
        assert 3 <= len(u.labels) <= 8
