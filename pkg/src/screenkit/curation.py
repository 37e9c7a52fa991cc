"""Assay ingestion, duplicate resolution and pIC50 dataset summaries."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .chem import SmilesError, canonical_smiles

ACTIVITY_THRESHOLD = 6.0
POTENT_THRESHOLD = 7.0
HISTOGRAM_BIN_WIDTH = 0.5
ACTIVITY_KINDS = ("ac50_um", "pic50")


def to_pic50(ac50_um: float) -> float:
    """Convert a micromolar AC50 to pIC50, ``-log10(ac50_um * 1e-6)``."""
    if not (math.isfinite(ac50_um) and ac50_um > 0):
        raise ValueError(f"AC50 must be positive and finite, got {ac50_um!r}")
    return -math.log10(ac50_um * 1e-6)


def to_ac50_um(pic50: float) -> float:
    """Inverse of :func:`to_pic50`."""
    if not math.isfinite(pic50):
        raise ValueError(f"pIC50 must be finite, got {pic50!r}")
    return 10.0 ** (6.0 - pic50)


def label_activity(pic50: float, threshold: float = ACTIVITY_THRESHOLD) -> bool:
    return pic50 >= threshold


@dataclass(frozen=True)
class AssayRecord:
    source_id: str
    smiles: str
    ac50_um: float | None = None
    pic50: float | None = None
    row: int = field(default=0, compare=False)

    def __post_init__(self):
        if (self.ac50_um is None) == (self.pic50 is None):
            raise ValueError("exactly one of ac50_um / pic50 must be given")
        if self.ac50_um is not None and not self.ac50_um > 0:
            raise ValueError("ac50_um must be positive")

    def ac50_equivalent(self) -> float:
        return self.ac50_um if self.ac50_um is not None else to_ac50_um(self.pic50)


@dataclass(frozen=True)
class CuratedRecord:
    smiles: str
    pic50: float


@dataclass(frozen=True)
class Diagnostic:
    """A dropped row or structure, streamed as one JSON line."""

    source_id: str
    row: int
    message: str
    severity: str = "error"
    byte_offset: int | None = None

    def to_json(self) -> str:
        return json.dumps({k: v for k, v in asdict(self).items() if v is not None}, sort_keys=True)


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    path: Path
    smiles_column: str
    activity_column: str
    activity_kind: str

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> SourceConfig:
        missing = {"source_id", "path", "smiles_column", "activity_column", "activity_kind"} - set(d)
        if missing:
            raise ValueError(f"source config lacks keys: {sorted(missing)}")
        if d["activity_kind"] not in ACTIVITY_KINDS:
            raise ValueError(f"unknown activity kind {d['activity_kind']!r}; expected one of {ACTIVITY_KINDS}")
        path = Path(d["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return cls(d["source_id"], path, d["smiles_column"], d["activity_column"], d["activity_kind"])


def load_sources(config_path) -> list[SourceConfig]:
    """Read a JSON source list: ``{"sources": [{source_id, path, smiles_column,
    activity_column, activity_kind}, ...]}``.  Relative paths resolve against
    the config file's directory."""
    config_path = Path(config_path)
    data = json.loads(config_path.read_text(encoding="utf-8"))
    return [SourceConfig.from_dict(d, config_path.parent) for d in data["sources"]]


def ingest(sources: list[SourceConfig]) -> tuple[list[AssayRecord], list[Diagnostic]]:
    """Read every source CSV, dropping rows with missing SMILES or bad activity.

    Raises
    ------
    OSError
        If a source file cannot be read.
    ValueError
        If a source lacks its configured columns.
    """
    records: list[AssayRecord] = []
    diagnostics: list[Diagnostic] = []
    for src in sources:
        with open(src.path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in (src.smiles_column, src.activity_column):
                if col not in header:
                    raise ValueError(f"{src.source_id}: column {col!r} not in {src.path} header {header}")
            for line, row in enumerate(reader, start=2):
                smiles = (row.get(src.smiles_column) or "").strip()
                raw = (row.get(src.activity_column) or "").strip()
                if not smiles:
                    diagnostics.append(Diagnostic(src.source_id, line, "missing SMILES"))
                    continue
                try:
                    value = float(raw)
                except ValueError:
                    diagnostics.append(Diagnostic(src.source_id, line, f"non-numeric activity {raw!r}"))
                    continue
                if not math.isfinite(value):
                    diagnostics.append(Diagnostic(src.source_id, line, f"non-finite activity {raw!r}"))
                    continue
                if src.activity_kind == "ac50_um":
                    if value <= 0:
                        diagnostics.append(Diagnostic(src.source_id, line, f"non-positive AC50 {raw!r}"))
                        continue
                    records.append(AssayRecord(src.source_id, smiles, ac50_um=value, row=line))
                else:
                    records.append(AssayRecord(src.source_id, smiles, pic50=value, row=line))
    return records, diagnostics


def merge_and_dedup(records: list[AssayRecord], canonical_keys: bool = True
                    ) -> tuple[list[CuratedRecord], list[Diagnostic]]:
    """Collapse records sharing a structure into one pIC50 per compound.

    Duplicates are averaged in AC50 space (micromolar, arithmetic mean) and
    only then converted, so ``{1, 100}`` uM gives 4.2967 rather than 5.0.
    pIC50-only records are first turned back into AC50.  With
    ``canonical_keys=False`` the raw SMILES text is the key (audit mode).

    Output is sorted by key and independent of input order.
    """
    groups: dict[str, list[AssayRecord]] = {}
    diagnostics: list[Diagnostic] = []
    cache: dict[str, str | None] = {}
    for rec in records:
        if rec.smiles not in cache:
            try:
                cache[rec.smiles] = canonical_smiles(rec.smiles) if canonical_keys else rec.smiles
            except SmilesError as exc:
                cache[rec.smiles] = None
                first = exc.diagnostics[0]
                diagnostics.append(Diagnostic(rec.source_id, rec.row, f"invalid SMILES {rec.smiles!r}: {first.message}",
                                              byte_offset=first.byte_offset))
        key = cache[rec.smiles]
        if key is None:
            continue
        groups.setdefault(key, []).append(rec)
    curated = [CuratedRecord(key, _resolve(recs)) for key, recs in sorted(groups.items())]
    return curated, diagnostics


def _resolve(recs: list[AssayRecord]) -> float:
    ac50 = [r.ac50_equivalent() for r in recs]
    if len(set(ac50)) == 1:
        given = [r.pic50 for r in recs if r.pic50 is not None]
        if given:
            # keep a reported pIC50 verbatim rather than round-tripping it
            return min(given)
    return to_pic50(math.fsum(ac50) / len(ac50))


def write_dataset(records, path) -> None:
    """Write ``SMILES,pIC50`` with shortest round-trip float text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["SMILES", "pIC50"])
        for rec in records:
            writer.writerow([rec.smiles, repr(float(rec.pic50))])


def read_dataset(path) -> list[CuratedRecord]:
    """Read a curated CSV; extra columns after ``SMILES`` and ``pIC50`` are ignored."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "SMILES" not in header or "pIC50" not in header:
            raise ValueError(f"{path}: expected columns SMILES,pIC50, got {header}")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(CuratedRecord(row["SMILES"], float(row["pIC50"])))
            except ValueError:
                raise ValueError(f"{path}:{line}: bad pIC50 {row['pIC50']!r}") from None
        return out


@dataclass
class DatasetSummary:
    n: int
    mean: float
    median: float
    stddev: float
    min: float
    max: float
    n_active: int
    prevalence: float
    n_potent: int
    threshold: float = ACTIVITY_THRESHOLD
    potent_threshold: float = POTENT_THRESHOLD
    histogram: list[tuple[float, float, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["histogram"] = [{"low": lo, "high": hi, "count": c} for lo, hi, c in self.histogram]
        return d


def summarize(records, threshold: float = ACTIVITY_THRESHOLD,
              potent_threshold: float = POTENT_THRESHOLD) -> DatasetSummary:
    """Distribution statistics of a curated dataset.

    ``stddev`` is the population value; ``median`` is the lower middle
    element for even ``n``; "potent" means strictly above ``potent_threshold``.
    Histogram bins are 0.5 pIC50 wide, aligned on multiples of 0.5, lower
    edge inclusive.
    """
    values = sorted(r.pic50 for r in records)
    n = len(values)
    if n == 0:
        raise ValueError("cannot summarize an empty dataset")
    n_active = sum(1 for v in values if label_activity(v, threshold))
    lo_bin = math.floor(values[0] / HISTOGRAM_BIN_WIDTH)
    hi_bin = math.floor(values[-1] / HISTOGRAM_BIN_WIDTH)
    counts = [0] * (hi_bin - lo_bin + 1)
    for v in values:
        counts[math.floor(v / HISTOGRAM_BIN_WIDTH) - lo_bin] += 1
    histogram = [((lo_bin + j) * HISTOGRAM_BIN_WIDTH, (lo_bin + j + 1) * HISTOGRAM_BIN_WIDTH, c)
                 for j, c in enumerate(counts)]
    return DatasetSummary(
        n=n,
        mean=math.fsum(values) / n,
        median=values[(n - 1) // 2],
        stddev=statistics.pstdev(values),
        min=values[0],
        max=values[-1],
        n_active=n_active,
        prevalence=n_active / n,
        n_potent=sum(1 for v in values if v > potent_threshold),
        threshold=threshold,
        potent_threshold=potent_threshold,
        histogram=histogram,
    )
