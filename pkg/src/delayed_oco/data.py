"""LIBSVM-format ingestion, sampling and the gradient budget of a dataset."""

from __future__ import annotations

import bz2
import gzip
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from delayed_oco.rng import make_generator

__all__ = [
    "DATASETS",
    "DatasetInfo",
    "Example",
    "ExperimentDataset",
    "LibsvmParseError",
    "compute_budget",
    "densify",
    "load_dataset",
    "parse_libsvm",
    "read_manifest",
    "sample_and_split",
    "write_libsvm",
]

LIBSVM_URL = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    examples: int
    features: int
    filename: str


# example and feature counts of the binary LIBSVM files used in the experiments
DATASETS: dict[str, DatasetInfo] = {
    "ijcnn1": DatasetInfo("ijcnn1", 49990, 22, "ijcnn1"),
    "w8a": DatasetInfo("w8a", 49749, 300, "w8a"),
    "phishing": DatasetInfo("phishing", 11055, 68, "phishing"),
    "a9a": DatasetInfo("a9a", 32561, 123, "a9a"),
}


class LibsvmParseError(ValueError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        head = "; ".join(f"line {ln}: {msg}" for ln, msg in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        super().__init__(f"malformed LIBSVM input: {head}{more}")


@dataclass(frozen=True, eq=False)
class Example:
    indices: np.ndarray  # 1-based, strictly increasing
    values: np.ndarray
    label: int

    @property
    def max_index(self) -> int:
        return int(self.indices[-1]) if len(self.indices) else 0

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        if len(self.indices) and self.max_index > n:
            raise ValueError(f"feature index {self.max_index} exceeds dimension {n}")
        out[self.indices - 1] = self.values
        return out


def _normalize_label(token: str) -> int:
    value = float(token)
    if value == 1.0:
        return 1
    if value in (-1.0, 0.0):
        return -1
    raise ValueError(f"label {token!r} is not binary (expected -1/+1 or 0/1)")


def parse_libsvm(stream: IO[str] | Iterable[str]) -> tuple[list[Example], int]:
    """Parse ``label idx:val idx:val ...`` lines.

    Returns the examples and ``n``, the largest feature index seen. Labels
    ``0`` map to ``-1``. All malformed lines are collected and reported
    together with their line numbers.
    """
    examples: list[Example] = []
    problems: list[tuple[int, str]] = []
    n = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = _normalize_label(tokens[0])
            idx = np.empty(len(tokens) - 1, dtype=np.int64)
            val = np.empty(len(tokens) - 1)
            prev = 0
            for k, tok in enumerate(tokens[1:]):
                key, sep, value = tok.partition(":")
                if not sep:
                    raise ValueError(f"token {tok!r} is not idx:value")
                j = int(key)
                if j <= prev:
                    raise ValueError(f"feature index {j} not strictly increasing (after {prev})")
                v = float(value)
                if not np.isfinite(v):
                    raise ValueError(f"non-finite value {value!r}")
                idx[k], val[k], prev = j, v, j
        except ValueError as exc:
            problems.append((lineno, str(exc)))
            continue
        idx.setflags(write=False)
        val.setflags(write=False)
        examples.append(Example(idx, val, label))
        n = max(n, prev)
    if problems:
        raise LibsvmParseError(problems)
    if not examples:
        raise LibsvmParseError([(0, "no examples")])
    return examples, n


def write_libsvm(examples: Iterable[Example], stream: IO[str]) -> None:
    for ex in examples:
        feats = " ".join(f"{int(j)}:{float(v)!r}" for j, v in zip(ex.indices, ex.values))
        stream.write(f"{ex.label:+d} {feats}".rstrip() + "\n")


def _open_text(path: Path) -> IO[str]:
    if path.suffix == ".bz2":
        return io.TextIOWrapper(bz2.open(path), encoding="utf-8")
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path), encoding="utf-8")
    return open(path, encoding="utf-8")


def densify(examples: Sequence[Example], n: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.zeros((len(examples), n))
    for r, ex in enumerate(examples):
        if len(ex.indices):
            if ex.max_index > n:
                raise ValueError(f"feature index {ex.max_index} exceeds dimension {n}")
            X[r, ex.indices - 1] = ex.values
    y = np.array([ex.label for ex in examples], dtype=np.int64)
    return X, y


@dataclass(frozen=True, eq=False)
class ExperimentDataset:
    train_X: np.ndarray
    train_y: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    sample_indices: np.ndarray  # positions in the source file, train first
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.train_X.shape[1]

    @property
    def horizon(self) -> int:
        return self.train_X.shape[0]

    def hinge_losses(self, lam: float) -> list:
        from delayed_oco.losses import HingeL2Loss

        return [
            HingeL2Loss(self.train_X[t], int(self.train_y[t]), lam, uid=int(self.sample_indices[t]))
            for t in range(self.horizon)
        ]


def sample_and_split(
    examples: Sequence[Example],
    n: int,
    total: int = 10_000,
    train: int = 8_000,
    seed: int = 0,
    name: str = "dataset",
) -> ExperimentDataset:
    """Uniform sample of ``total`` examples without replacement; the first
    ``train`` (in sampled order) form the round sequence, the rest the test set."""
    if not 0 < train <= total:
        raise ValueError("need 0 < train <= total")
    if len(examples) < total:
        raise ValueError(f"{name}: need {total} examples, file has {len(examples)}")
    rng = make_generator(seed, "sample")
    picked = rng.choice(len(examples), size=total, replace=False)
    X, y = densify([examples[k] for k in picked], n)
    picked.setflags(write=False)
    return ExperimentDataset(X[:train], y[:train], X[train:], y[train:], picked, name)


def compute_budget(dataset: ExperimentDataset, lam: float, R: float) -> tuple[float, float]:
    """``(w_max, G)`` with ``w_max`` the largest feature norm in the sample
    (train and test) and ``G = lam * R + w_max``."""
    norms = [np.linalg.norm(dataset.train_X, axis=1)]
    if len(dataset.test_X):
        norms.append(np.linalg.norm(dataset.test_X, axis=1))
    w_max = float(max(v.max() if v.size else 0.0 for v in norms))
    return w_max, lam * R + w_max


def read_manifest(path: str | Path) -> dict[str, dict]:
    """JSON object ``{name: {"path": ..., "examples": int, "features": int}}``;
    relative paths resolve against the manifest's directory."""
    path = Path(path)
    raw = json.loads(path.read_text())
    out = {}
    for name, entry in raw.items():
        if isinstance(entry, str):
            entry = {"path": entry}
        entry = dict(entry)
        p = Path(entry["path"])
        entry["path"] = p if p.is_absolute() else path.parent / p
        out[name] = entry
    return out


def _locate(name: str, data_dir: Path | None, manifest: dict | None) -> tuple[Path, dict]:
    info = DATASETS.get(name)
    expected = {"examples": info.examples, "features": info.features} if info else {}
    if manifest and name in manifest:
        entry = manifest[name]
        expected.update({k: entry[k] for k in ("examples", "features") if k in entry})
        candidates = [Path(entry["path"])]
    else:
        stem = info.filename if info else name
        base = data_dir if data_dir is not None else Path("data")
        candidates = [base / stem, base / f"{stem}.bz2", base / f"{stem}.txt", base / f"{stem}.libsvm"]
    for c in candidates:
        if c.is_file():
            return c, expected
    hint = f" Download it from {LIBSVM_URL}{info.filename}" if info else ""
    raise FileNotFoundError(f"dataset {name!r} not found (looked for {', '.join(map(str, candidates))}).{hint}")


def load_dataset(
    name: str,
    data_dir: str | Path | None = None,
    manifest: dict | None = None,
    *,
    validate: bool = True,
) -> tuple[list[Example], int]:
    """Parse a named dataset; ``n`` is the documented feature count when known."""
    path, expected = _locate(name, Path(data_dir) if data_dir is not None else None, manifest)
    with _open_text(path) as fh:
        examples, n_seen = parse_libsvm(fh)
    n = max(n_seen, int(expected.get("features", 0)))
    if validate and "examples" in expected and len(examples) != expected["examples"]:
        raise ValueError(f"{path}: {len(examples)} examples, expected {expected['examples']}")
    if validate and "features" in expected and n_seen > expected["features"]:
        raise ValueError(f"{path}: feature index {n_seen} exceeds documented {expected['features']}")
    return examples, n
