import bz2
import io
import json

import numpy as np
import pytest

from delayed_oco.data import (
    DATASETS,
    Example,
    LibsvmParseError,
    compute_budget,
    densify,
    load_dataset,
    parse_libsvm,
    read_manifest,
    sample_and_split,
    write_libsvm,
)


def toy_examples(count, n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        idx = np.sort(rng.choice(np.arange(1, n + 1), size=int(rng.integers(1, n + 1)), replace=False))
        out.append(Example(idx, rng.normal(size=len(idx)), int(rng.choice([-1, 1]))))
    return out


def test_parse_example_line():
    examples, n = parse_libsvm(["+1 3:0.5 7:1.0\n"])
    assert n == 7 and len(examples) == 1
    x = examples[0].dense(7)
    np.testing.assert_array_equal(x, [0, 0, 0.5, 0, 0, 0, 1.0])
    assert examples[0].label == 1


def test_zero_one_labels_map_to_signs():
    examples, _ = parse_libsvm(io.StringIO("0 1:1\n1 2:1\n-1 1:2\n"))
    assert [e.label for e in examples] == [-1, 1, -1]


def test_empty_feature_line_and_comments():
    examples, n = parse_libsvm(["# header\n", "+1\n", "\n", "-1 2:3 # trailing\n"])
    assert len(examples) == 2 and n == 2
    np.testing.assert_array_equal(examples[0].dense(2), [0.0, 0.0])


def test_malformed_lines_are_all_reported():
    text = "+1 1:1\n2 1:1\n+1 3:1 2:1\n-1 1=4\n+1 1:nan\n"
    with pytest.raises(LibsvmParseError) as info:
        parse_libsvm(io.StringIO(text))
    assert [ln for ln, _ in info.value.problems] == [2, 3, 4, 5]
    assert "line 3" in str(info.value)


def test_empty_input_rejected():
    with pytest.raises(LibsvmParseError):
        parse_libsvm(io.StringIO(""))


def test_write_parse_roundtrip():
    examples = toy_examples(50, 12)
    buf = io.StringIO()
    write_libsvm(examples, buf)
    back, n = parse_libsvm(io.StringIO(buf.getvalue()))
    assert n <= 12
    X0, y0 = densify(examples, 12)
    X1, y1 = densify(back, 12)
    assert np.array_equal(X0, X1) and np.array_equal(y0, y1)


def test_sample_and_split_shapes_and_determinism():
    examples = toy_examples(300, 6)
    a = sample_and_split(examples, 6, total=100, train=80, seed=4, name="toy")
    b = sample_and_split(examples, 6, total=100, train=80, seed=4, name="toy")
    c = sample_and_split(examples, 6, total=100, train=80, seed=5, name="toy")
    assert a.train_X.shape == (80, 6) and a.test_X.shape == (20, 6)
    assert len(set(a.sample_indices.tolist())) == 100
    assert np.array_equal(a.sample_indices, b.sample_indices)
    assert not np.array_equal(a.sample_indices, c.sample_indices)
    np.testing.assert_array_equal(a.train_X[0], examples[a.sample_indices[0]].dense(6))
    with pytest.raises(ValueError):
        sample_and_split(examples, 6, total=301, train=80)


def test_compute_budget_uses_train_and_test():
    examples = [Example(np.array([1]), np.array([1.0]), 1) for _ in range(9)]
    examples.append(Example(np.array([1, 2]), np.array([3.0, 4.0]), -1))
    ds = sample_and_split(examples, 2, total=10, train=9, seed=0)
    w_max, G = compute_budget(ds, 0.01, 1.0)
    assert w_max == 5.0 and G == pytest.approx(5.01)


def test_hinge_losses_from_dataset():
    ds = sample_and_split(toy_examples(40, 4), 4, total=20, train=15, seed=1)
    losses = ds.hinge_losses(0.1)
    assert len(losses) == 15
    assert losses[0].value(np.zeros(4)) == 1.0


def test_missing_dataset_has_download_hint(tmp_path):
    with pytest.raises(FileNotFoundError) as info:
        load_dataset("w8a", data_dir=tmp_path)
    assert "libsvmtools" in str(info.value)


def test_load_compressed_and_validated(tmp_path):
    examples = toy_examples(30, 5)
    buf = io.StringIO()
    write_libsvm(examples, buf)
    (tmp_path / "toy.bz2").write_bytes(bz2.compress(buf.getvalue().encode()))
    (tmp_path / "m.json").write_text(json.dumps({"toy": {"path": "toy.bz2", "examples": 30, "features": 5}}))
    manifest = read_manifest(tmp_path / "m.json")
    back, n = load_dataset("toy", manifest=manifest)
    assert len(back) == 30 and n == 5
    bad = read_manifest(tmp_path / "m.json")
    bad["toy"]["examples"] = 31
    with pytest.raises(ValueError):
        load_dataset("toy", manifest=bad)


def test_registry_dimensions():
    assert {k: (v.examples, v.features) for k, v in DATASETS.items()} == {
        "ijcnn1": (49990, 22),
        "w8a": (49749, 300),
        "phishing": (11055, 68),
        "a9a": (32561, 123),
    }
