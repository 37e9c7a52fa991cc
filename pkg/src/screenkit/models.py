"""Baseline regressors: a uniform random predictor and a weighted random forest.

Both are fitted on training pIC50 values and persist to a single binary
artifact (see :func:`save`).
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from ._tree_kernels import build_tree, predict_forest
from .features import FeatureMatrix
from .rng import SplitMix64, derive_seed

MAGIC = b"SCRNKIT\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sHIQ")  # magic, version, header length, payload length


class ArtifactError(ValueError):
    """Unreadable, corrupted or incompatible model artifact."""


def weighted_mse(y, yhat, w) -> float:
    """``(1/N) * sum(w_i * (y_i - yhat_i)^2)``."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not (y.shape == yhat.shape == w.shape) or y.ndim != 1:
        raise ValueError("y, yhat and w must be 1-D and of equal length")
    if y.size == 0:
        raise ValueError("weighted_mse needs at least one sample")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return float(np.sum(w * (y - yhat) ** 2) / y.size)


@dataclass(frozen=True)
class RandomPredictorModel:
    low: float
    high: float
    seed: int = 0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("random predictor needs low < high")

    @classmethod
    def fit(cls, y_train, seed: int = 0) -> RandomPredictorModel:
        y = np.asarray(y_train, dtype=np.float64)
        return cls(float(y.min()), float(y.max()), seed)


def random_predict(m: RandomPredictorModel, n: int) -> np.ndarray:
    """``n`` seeded uniform draws on [low, high)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return SplitMix64(derive_seed(m.seed, 0x7A4D)).uniform(m.low, m.high, n)


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_depth: int | None = 20  # None grows until leaves are pure
    min_samples_leaf: int = 1
    features_per_split: float = 1 / 3
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1 or self.min_samples_leaf < 1 or (
                self.max_depth is not None and self.max_depth < 0):
            raise ValueError(f"invalid forest config {self}")
        if not 0 < self.features_per_split <= 1:
            raise ValueError("features_per_split must lie in (0, 1]")

    def n_try(self, n_cols: int) -> int:
        return max(1, min(n_cols, math.ceil(self.features_per_split * n_cols - 1e-12)))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def structure(self) -> tuple:
        """Hashable (feature, threshold) layout, used to compare tree shapes."""
        return tuple(zip(self.feature.tolist(), self.threshold.tolist()))


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[Tree, ...]
    config: ForestConfig
    feature_schema: tuple[str, ...]
    seed: int
    training_hash: str = ""
    extra: dict = field(default_factory=dict, compare=False)


def _as_array(X) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.column_names
    arr = np.asarray(X)
    return arr, tuple(f"x{j}" for j in range(arr.shape[1]))


def training_hash(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(repr((X.shape, str(X.dtype))).encode())
    for arr in (np.ascontiguousarray(X), y, w):
        h.update(arr.tobytes())
    return h.hexdigest()


def tree_seed(seed: int, tree_index: int) -> int:
    """Per-tree seed ``derive_seed(seed, tree_index)``; bootstrap and feature draws use sub-streams."""
    return derive_seed(seed, tree_index)


def _grow(Xf, y, w, n_rows, config, seed, t):
    ts = tree_seed(seed, t)
    if config.bootstrap:
        draws = SplitMix64(derive_seed(ts, 1)).integers(n_rows, n_rows)
        counts = np.bincount(draws, minlength=n_rows)
    else:
        counts = np.ones(n_rows, dtype=np.int64)
    rows = np.flatnonzero(counts).astype(np.int64)
    mult = counts[rows].astype(np.int64)
    max_depth = np.iinfo(np.int32).max if config.max_depth is None else config.max_depth
    out = build_tree(Xf, y, w, rows, mult, max_depth, config.min_samples_leaf,
                     config.n_try(Xf.shape[1]), np.uint64(derive_seed(ts, 2)))
    return Tree(*out[:5])


def rf_train(X, y, w=None, config: ForestConfig | None = None, seed: int = 0,
             n_jobs: int = 1) -> RandomForestModel:
    """Fit a bootstrap forest of weighted-variance regression trees.

    Parameters
    ----------
    X : FeatureMatrix or array of shape (n, p)
    y : array of shape (n,)
    w : optional per-row weights (all ones when omitted)
    config : ForestConfig
    seed : int
        Tree ``t`` draws from ``derive_seed(seed, t)``, so results do not
        depend on ``n_jobs``.
    """
    config = config or ForestConfig()
    values, names = _as_array(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise ValueError("feature matrix is empty")
    n = values.shape[0]
    if n < 2:
        raise ValueError("need at least two training rows")
    if y.shape != (n,):
        raise ValueError(f"y has {y.size} values for {n} rows")
    if values.dtype.kind == "f" and np.isnan(values).any():
        raise ValueError("feature matrix contains NaN")
    if not np.isfinite(y).all():
        raise ValueError("targets must be finite")
    w = np.ones(n) if w is None else np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per row")
    Xf = np.asfortranarray(values)

    def grow(t):
        return _grow(Xf, y, w, n, config, seed, t)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = tuple(pool.map(grow, range(config.n_estimators)))
    else:
        trees = tuple(grow(t) for t in range(config.n_estimators))
    return RandomForestModel(trees, config, tuple(names), int(seed), training_hash(values, y, w))


def _stack(trees):
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t.n_nodes for t in trees])
    cat = [np.concatenate([getattr(t, a) for t in trees]) for a in ("feature", "threshold", "left", "right", "value")]
    return offsets, cat


def rf_predict(m: RandomForestModel, X) -> np.ndarray:
    """Unweighted mean of the trees' leaf values per row."""
    if isinstance(X, FeatureMatrix):
        if X.column_names != m.feature_schema:
            raise ValueError("feature columns do not match the model's training schema")
        values = X.values
    else:
        values = np.asarray(X)
        if values.ndim != 2 or values.shape[1] != len(m.feature_schema):
            raise ValueError(f"expected {len(m.feature_schema)} feature columns")
    offsets, (feature, threshold, left, right, value) = _stack(m.trees)
    return predict_forest(np.ascontiguousarray(values), offsets, feature, threshold, left, right, value)


# -- artifact ---------------------------------------------------------------

def save(m) -> bytes:
    """Serialize a model.

    Layout: ``MAGIC`` (8 bytes), format version (u16), header length (u32),
    payload length (u64), UTF-8 JSON header, payload, then the SHA-256 of all
    preceding bytes.  Forest payloads are per-tree ``u32 node count`` followed
    by little-endian ``int32 feature, float64 threshold, int32 left,
    int32 right, float64 value`` arrays.
    """
    if isinstance(m, RandomForestModel):
        header = {
            "kind": "random_forest",
            "config": asdict(m.config),
            "feature_schema": list(m.feature_schema),
            "seed": m.seed,
            "training_hash": m.training_hash,
            "n_trees": len(m.trees),
            "toolkit_version": __version__,
            "extra": m.extra,
        }
        chunks = []
        for t in m.trees:
            chunks.append(struct.pack("<I", t.n_nodes))
            chunks.append(t.feature.astype("<i4").tobytes())
            chunks.append(t.threshold.astype("<f8").tobytes())
            chunks.append(t.left.astype("<i4").tobytes())
            chunks.append(t.right.astype("<i4").tobytes())
            chunks.append(t.value.astype("<f8").tobytes())
        payload = b"".join(chunks)
    elif isinstance(m, RandomPredictorModel):
        header = {"kind": "random_predictor", "low": m.low, "high": m.high, "seed": m.seed,
                  "toolkit_version": __version__}
        payload = b""
    else:
        raise TypeError(f"cannot serialize {type(m).__name__}")
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head), len(payload)) + head + payload
    return body + hashlib.sha256(body).digest()


def read_header(data: bytes) -> dict:
    _check(data)
    _, _, hlen, _ = _PREFIX.unpack_from(data)
    return json.loads(data[_PREFIX.size:_PREFIX.size + hlen])


def _check(data: bytes) -> None:
    if len(data) < _PREFIX.size + 32 or data[:8] != MAGIC:
        raise ArtifactError("not a model artifact (bad magic or truncated)")
    _, version, hlen, plen = _PREFIX.unpack_from(data)
    if version != FORMAT_VERSION:
        raise ArtifactError(f"artifact format version {version}; this build reads {FORMAT_VERSION}")
    end = _PREFIX.size + hlen + plen
    if len(data) != end + 32 or hashlib.sha256(data[:end]).digest() != data[end:]:
        raise ArtifactError("artifact checksum mismatch (truncated or corrupted)")


def load(data: bytes):
    """Inverse of :func:`save`; raises :class:`ArtifactError` on bad input."""
    header = read_header(data)
    _, _, hlen, plen = _PREFIX.unpack_from(data)
    payload = memoryview(data)[_PREFIX.size + hlen:_PREFIX.size + hlen + plen]
    if header["kind"] == "random_predictor":
        return RandomPredictorModel(header["low"], header["high"], header["seed"])
    if header["kind"] != "random_forest":
        raise ArtifactError(f"unknown artifact kind {header['kind']!r}")
    trees, pos = [], 0
    for _ in range(header["n_trees"]):
        (k,) = struct.unpack_from("<I", payload, pos)
        pos += 4
        arrays = []
        for dtype in ("<i4", "<f8", "<i4", "<i4", "<f8"):
            size = k * np.dtype(dtype).itemsize
            arrays.append(np.frombuffer(payload[pos:pos + size], dtype=dtype).astype(dtype[1:]))
            pos += size
        trees.append(Tree(*arrays))
    if pos != len(payload):
        raise ArtifactError("trailing bytes in forest payload")
    return RandomForestModel(tuple(trees), ForestConfig(**header["config"]), tuple(header["feature_schema"]),
                             header["seed"], header["training_hash"], header.get("extra", {}))


def save_file(m, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save(m))


def load_file(path):
    with open(path, "rb") as fh:
        return load(fh.read())
