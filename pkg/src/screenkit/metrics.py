"""Regression and virtual-screening metrics over scored compound lists.

Ranking-based metrics (enrichment, precision, AUC) order records by
descending prediction with ties broken by ascending id, so every report is
reproducible.  Metrics that are undefined for an input are returned as an
:class:`Undefined` marker carrying the reason, never as 0.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .curation import ACTIVITY_THRESHOLD, read_dataset

DEFAULT_TOP_FRACTIONS = (0.005, 0.01, 0.02, 0.05)
TIE_POLICY = "desc-score/asc-id"


@dataclass(frozen=True)
class Undefined:
    """Marker for a metric with no defined value on the given input."""

    reason: str

    def to_json(self) -> dict:
        return {"value": None, "undefined": self.reason}


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    y_true: float
    y_pred: float
    active: bool

    def __post_init__(self):
        if not (math.isfinite(self.y_true) and math.isfinite(self.y_pred)):
            raise ValueError(f"non-finite value in prediction record {self.id!r}")

    @classmethod
    def from_values(cls, id, y_true, y_pred, threshold: float = ACTIVITY_THRESHOLD) -> PredictionRecord:
        return cls(str(id), float(y_true), float(y_pred), float(y_true) >= threshold)


def make_records(ids, y_true, y_pred, threshold: float = ACTIVITY_THRESHOLD) -> list[PredictionRecord]:
    if not len(ids) == len(y_true) == len(y_pred):
        raise ValueError("ids, y_true and y_pred differ in length")
    return [PredictionRecord.from_values(i, t, p, threshold) for i, t, p in zip(ids, y_true, y_pred)]


def rank(records) -> list[PredictionRecord]:
    """Descending ``y_pred``; equal scores in ascending ``id``."""
    records = list(records)
    if not records:
        raise ValueError("cannot rank an empty record list")
    return sorted(records, key=lambda r: (-r.y_pred, r.id))


def top_k(n: int, x: float) -> int:
    """``max(1, round(x * n))`` with halves rounded away from zero."""
    if not 0 < x <= 1:
        raise ValueError(f"top fraction must lie in (0, 1], got {x}")
    k = int((Decimal(repr(x)) * n).quantize(Decimal(1), rounding=ROUND_HALF_UP))
    return max(1, min(n, k))


def _active_flags(records) -> np.ndarray:
    return np.fromiter((r.active for r in rank(records)), dtype=bool)


def precision_at(records, x: float) -> float:
    """Fraction of actives among the top ``K = top_k(n, x)`` ranked records."""
    flags = _active_flags(records)
    k = top_k(flags.size, x)
    return int(flags[:k].sum()) / k


def enrichment_factor(records, x: float):
    """Top-K active rate divided by the overall active rate."""
    flags = _active_flags(records)
    n_active = int(flags.sum())
    if n_active == 0:
        return Undefined("no actives: prevalence is zero")
    k = top_k(flags.size, x)
    return (int(flags[:k].sum()) / k) / (n_active / flags.size)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_roc(records) -> float:
    """Mann-Whitney probability that an active outscores an inactive (ties count 1/2)."""
    records = list(records)
    scores = np.array([r.y_pred for r in records], dtype=np.float64)
    active = np.array([r.active for r in records], dtype=bool)
    n_pos = int(active.sum())
    n_neg = active.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both actives and inactives")
    r = _average_ranks(scores)
    # rank sums are multiples of 1/2, so the U statistic is exact in binary
    u = math.fsum(r[active]) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def regression_metrics(records) -> tuple[float, float, object]:
    """``(mse, mae, r2)``; ``r2`` is :class:`Undefined` when ``y_true`` is constant."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    y = np.array([r.y_true for r in records])
    p = np.array([r.y_pred for r in records])
    resid = y - p
    mse = math.fsum(resid ** 2) / y.size
    mae = math.fsum(np.abs(resid)) / y.size
    ss_tot = math.fsum((y - math.fsum(y) / y.size) ** 2)
    if y.size < 2 or ss_tot == 0.0:
        r2 = Undefined("zero variance in y_true")
    else:
        r2 = 1.0 - math.fsum(resid ** 2) / ss_tot
    return mse, mae, r2


def active_mae(records):
    """Mean absolute error over active records only."""
    errs = [abs(r.y_true - r.y_pred) for r in records if r.active]
    if not errs:
        return Undefined("no active records")
    return math.fsum(errs) / len(errs)


def ranking_differential(records) -> float:
    """Mean prediction of actives minus mean prediction of inactives."""
    pos = [r.y_pred for r in records if r.active]
    neg = [r.y_pred for r in records if not r.active]
    if not pos or not neg:
        raise ValueError("ranking differential needs both actives and inactives")
    return math.fsum(pos) / len(pos) - math.fsum(neg) / len(neg)


@dataclass
class MetricsReport:
    n: int
    n_active: int
    prevalence: float
    mse: float
    mae: float
    r2: object
    active_mae: object
    auc_roc: object
    ranking_differential: object
    ef: dict[float, object]
    precision: dict[float, float]
    threshold: float = ACTIVITY_THRESHOLD
    tie_policy: str = TIE_POLICY
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(v):
            return v.to_json() if isinstance(v, Undefined) else v

        return {
            "n": self.n,
            "n_active": self.n_active,
            "prevalence": self.prevalence,
            "mse": self.mse,
            "mae": self.mae,
            "r2": enc(self.r2),
            "active_mae": enc(self.active_mae),
            "auc_roc": enc(self.auc_roc),
            "ranking_differential": enc(self.ranking_differential),
            "ef": {repr(x): enc(v) for x, v in self.ef.items()},
            "precision": {repr(x): v for x, v in self.precision.items()},
            "threshold": self.threshold,
            "tie_policy": self.tie_policy,
            "toolkit_version": __version__,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def fraction_rows(self) -> list[tuple[float, int, object, float]]:
        """``(fraction, K, EF, precision)`` rows for tables and plots."""
        return [(x, top_k(self.n, x), self.ef[x], self.precision[x]) for x in self.ef]


def _or_undefined(fn, records):
    try:
        return fn(records)
    except ValueError as exc:
        return Undefined(str(exc))


def evaluate(records, top_fractions=DEFAULT_TOP_FRACTIONS, threshold: float = ACTIVITY_THRESHOLD,
             provenance: dict | None = None) -> MetricsReport:
    """Compute every metric on one prediction set."""
    records = rank(records)
    n = len(records)
    n_active = sum(r.active for r in records)
    mse, mae, r2 = regression_metrics(records)
    return MetricsReport(
        n=n,
        n_active=n_active,
        prevalence=n_active / n,
        mse=mse,
        mae=mae,
        r2=r2,
        active_mae=active_mae(records),
        auc_roc=_or_undefined(auc_roc, records),
        ranking_differential=_or_undefined(ranking_differential, records),
        ef={x: enrichment_factor(records, x) for x in top_fractions},
        precision={x: precision_at(records, x) for x in top_fractions},
        threshold=threshold,
        provenance=dict(provenance or {}),
    )


def write_fraction_table(report: MetricsReport, path) -> None:
    """CSV ``fraction,k,ef,precision``; undefined EF is an empty cell."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fraction", "k", "ef", "precision"])
        for x, k, ef, prec in report.fraction_rows():
            writer.writerow([repr(x), k, "" if isinstance(ef, Undefined) else repr(ef), repr(prec)])


def ef_curve(records, fractions=None) -> list[tuple[float, object]]:
    """EF over a grid of top fractions (0.5% to 20% by default)."""
    if fractions is None:
        fractions = [round(0.005 * i, 3) for i in range(1, 41)]
    records = rank(records)
    return [(x, enrichment_factor(records, x)) for x in fractions]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_predictions(path, truth_path=None, threshold: float = ACTIVITY_THRESHOLD) -> list[PredictionRecord]:
    """Load predictions as records.

    Accepts ``id,y_true,y_pred`` directly, or ``SMILES,pred_pIC50`` joined
    against a curated ``SMILES,pIC50`` file given as ``truth_path``.

    Raises
    ------
    ValueError
        On an unknown header, a malformed value, or a prediction id that is
        absent from the truth file (the message names the id and line).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(enumerate(reader, start=2))
    out = []
    if {"id", "y_true", "y_pred"} <= set(header):
        for line, row in rows:
            try:
                out.append(PredictionRecord.from_values(row["id"], float(row["y_true"]), float(row["y_pred"]),
                                                        threshold))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
        return out
    if {"SMILES", "pred_pIC50"} <= set(header):
        if truth_path is None:
            raise ValueError(f"{path}: SMILES,pred_pIC50 predictions need a truth dataset to join against")
        truth = {r.smiles: r.pic50 for r in read_dataset(truth_path)}
        for line, row in rows:
            sid = row["SMILES"]
            if sid not in truth:
                raise ValueError(f"{path}:{line}: id {sid!r} not found in truth file {truth_path}")
            try:
                out.append(PredictionRecord.from_values(sid, truth[sid], float(row["pred_pIC50"]), threshold))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
        return out
    raise ValueError(f"{path}: expected header id,y_true,y_pred or SMILES,pred_pIC50, got {header}")


def write_predictions(ids, preds, path, id_column: str = "SMILES") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([id_column, "pred_pIC50"])
        for i, p in zip(ids, preds):
            writer.writerow([i, repr(float(p))])
