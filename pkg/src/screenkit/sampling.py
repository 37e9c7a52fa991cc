"""Stratified splitting, train-only oversampling and class-balancing weights."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import SplitMix64, derive_seed

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


def largest_remainder(total: int, fractions) -> list[int]:
    """Integer sizes summing to ``total``, closest to ``total * fractions``.

    Floors first; leftover units go to the largest fractional parts, ties to
    the earlier split.
    """
    quotas = [total * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(fractions)), key=lambda j: (-(quotas[j] - sizes[j]), j))
    for j in order[:leftover]:
        sizes[j] += 1
    return sizes


@dataclass(frozen=True)
class SplitManifest:
    assignment: tuple[str, ...]
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0
    stratify_threshold: float = 6.0

    def indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return np.array([i for i, s in enumerate(self.assignment) if s == split], dtype=np.int64)

    def sidecar(self) -> dict:
        counts = {s: sum(1 for a in self.assignment if a == s) for s in SPLITS}
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "stratify_threshold": self.stratify_threshold,
            "n_records": len(self.assignment),
            "counts": counts,
            "rng": "splitmix64",
            "rounding": "largest-remainder",
        }


def stratified_split(labels, fractions=DEFAULT_FRACTIONS, seed: int = 0,
                     stratify_threshold: float = 6.0) -> SplitManifest:
    """Assign each record to train/val/test, preserving class prevalence.

    Each class is shuffled with its own SplitMix64 stream
    (``derive_seed(seed, class)``) and cut by largest-remainder sizes, so
    every split holds its class share to within one record.
    """
    labels = np.asarray(labels, dtype=bool)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ValueError("need three fractions (train, val, test)")
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be non-negative and sum to 1, got {fractions}")
    if labels.size == 0:
        raise ValueError("cannot split an empty dataset")
    assignment = np.empty(labels.size, dtype=object)
    for cls in (False, True):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            continue
        shuffled = SplitMix64(derive_seed(seed, int(cls))).permutation(members)
        start = 0
        for split, size in zip(SPLITS, largest_remainder(members.size, fractions)):
            assignment[shuffled[start:start + size]] = split
            start += size
    return SplitManifest(tuple(assignment.tolist()), fractions, int(seed), stratify_threshold)


def oversample_to_balance(train_indices, labels, seed: int) -> np.ndarray:
    """Balance the two classes of a training split by resampling the minority.

    Every original index is kept once; extra minority indices are drawn with
    replacement until both classes have the majority count.  The result is
    shuffled.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    labels = np.asarray(labels, dtype=bool)
    train_labels = labels[train_indices]
    pos = train_indices[train_labels]
    neg = train_indices[~train_labels]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("oversampling needs both classes in the training split")
    minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
    rng = SplitMix64(derive_seed(seed, 0x05A3))
    extra = minority[rng.integers(minority.size, majority.size - minority.size)]
    combined = np.concatenate([majority, minority, extra])
    return rng.permutation(combined)


def compute_weights(labels) -> np.ndarray:
    """Per-sample weights ``N / (2 * N_class)``; both classes then carry weight N/2."""
    labels = np.asarray(labels, dtype=bool)
    n = labels.size
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class weights need both classes present")
    return np.where(labels, n / (2.0 * n_pos), n / (2.0 * n_neg))


@dataclass(frozen=True)
class WeightedTrainingSet:
    indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_manifest(cls, manifest: SplitManifest, labels) -> WeightedTrainingSet:
        idx = manifest.indices("train")
        return cls(idx, compute_weights(np.asarray(labels, dtype=bool)[idx]))


def write_manifest(manifest: SplitManifest, path, weights: WeightedTrainingSet | None = None) -> Path:
    """Write ``row_id,split,weight`` plus a ``.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    weight_of = {}
    if weights is not None:
        weight_of = dict(zip(weights.indices.tolist(), weights.weights.tolist()))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row_id", "split", "weight"])
        for i, split in enumerate(manifest.assignment):
            w = weight_of.get(i)
            writer.writerow([i, split, "" if w is None else repr(w)])
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(manifest.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def read_manifest(path) -> tuple[SplitManifest, dict[int, float]]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    assignment, weights = [], {}
    with path.open(newline="", encoding="utf-8") as fh:
        for expected, row in enumerate(csv.DictReader(fh)):
            if int(row["row_id"]) != expected:
                raise ValueError(f"{path}: row_id {row['row_id']} out of order (expected {expected})")
            if row["split"] not in SPLITS:
                raise ValueError(f"{path}: unknown split {row['split']!r} for row {expected}")
            assignment.append(row["split"])
            if row["weight"]:
                weights[expected] = float(row["weight"])
    manifest = SplitManifest(tuple(assignment), tuple(sidecar["fractions"]), int(sidecar["seed"]),
                             float(sidecar["stratify_threshold"]))
    return manifest, weights
