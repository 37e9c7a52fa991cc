"""Circular fingerprints, descriptors and feature-matrix quality control.

Fingerprint identifiers
-----------------------
Every 64-bit identifier comes from :func:`screenkit.rng.hash_ints`, a fold of
the SplitMix64 finalizer (multipliers ``0xBF58476D1CE4E5B9`` and
``0x94D049BB133111EB``, increment ``0x9E3779B97F4A7C15``).

* radius 0: ``hash(atomic number, heavy degree, formal charge, total H,
  ring flag, aromatic flag)``
* radius r: ``hash(r, own id at r-1, *sorted((bond code, neighbor id at r-1)))``
  with bond codes single=1, double=2, triple=3, aromatic=4.

Each identifier at every radius up to the requested one sets bit
``id % width``.
"""

from __future__ import annotations

import csv
import io
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .chem import MoleculeGraph, circuit_rank, parse
from .chem.elements import ATOMIC_MASS, HYDROGEN_MASS
from .chem.graph import BondOrder
from .rng import hash_ints

DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 2048
ZERO_VARIANCE_TOL = 1e-12

DESCRIPTOR_NAMES = (
    "mol_weight",
    "heavy_atoms",
    "rings",
    "aromatic_atoms",
    "heteroatoms",
    "hbond_donors",
    "hbond_acceptors",
    "rotatable_bonds",
    "formal_charge",
)

FEATURE_MODES = ("fingerprints", "descriptors", "both")


@dataclass(frozen=True)
class Fingerprint:
    width: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.bits.shape != (self.width,):
            raise ValueError("bit vector length must equal width > 0")

    @property
    def on_bits(self) -> list[int]:
        return np.flatnonzero(self.bits).tolist()

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        return (isinstance(other, Fingerprint) and self.width == other.width
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.width, self.bits.tobytes()))


def atom_identifiers(g: MoleculeGraph, radius: int = DEFAULT_RADIUS) -> list[list[int]]:
    """Identifiers per radius: ``ids[r][atom]``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ids = [[
        hash_ints((atom.atomic_number, g.degree(i), atom.formal_charge, g.total_h(i),
                   int(g.in_ring(i)), int(atom.aromatic)))
        for i, atom in enumerate(g.atoms)
    ]]
    for r in range(1, radius + 1):
        prev = ids[-1]
        layer = []
        for i in range(g.n_atoms):
            env = sorted((int(g.bonds[k].order), prev[v]) for v, k in g.neighbors(i))
            flat = [r, prev[i]]
            for code, nid in env:
                flat.extend((code, nid))
            layer.append(hash_ints(flat))
        ids.append(layer)
    return ids


def morgan_fingerprint(g: MoleculeGraph, radius: int = DEFAULT_RADIUS,
                       width: int = DEFAULT_WIDTH) -> Fingerprint:
    """Binary circular fingerprint of ``g``."""
    if width < 8:
        raise ValueError("width must be >= 8")
    bits = np.zeros(width, dtype=bool)
    for layer in atom_identifiers(g, radius):
        for ident in layer:
            bits[ident % width] = True
    return Fingerprint(width, bits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.width != b.width:
        raise ValueError(f"fingerprint widths differ: {a.width} vs {b.width}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union


@dataclass(frozen=True)
class DescriptorVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


def descriptors(g: MoleculeGraph) -> DescriptorVector:
    """The nine fixed descriptors named in :data:`DESCRIPTOR_NAMES`.

    Donors are N/O atoms carrying at least one hydrogen, acceptors are all N/O
    atoms.  A rotatable bond is a single, non-ring bond whose two atoms both
    have heavy-atom degree >= 2.  ``rings`` is the circuit rank.
    """
    hs = [g.total_h(i) for i in range(g.n_atoms)]
    weight = sum(ATOMIC_MASS[a.element] for a in g.atoms) + HYDROGEN_MASS * sum(hs)
    heavy = sum(1 for a in g.atoms if a.element != "H")
    aromatic = sum(1 for a in g.atoms if a.aromatic)
    hetero = sum(1 for a in g.atoms if a.element not in ("C", "H"))
    donors = sum(1 for i, a in enumerate(g.atoms) if a.element in ("N", "O") and hs[i] > 0)
    acceptors = sum(1 for a in g.atoms if a.element in ("N", "O"))
    rotatable = sum(
        1 for k, b in enumerate(g.bonds)
        if b.order is BondOrder.SINGLE and k not in g.ring_bonds
        and g.degree(b.a) >= 2 and g.degree(b.b) >= 2
    )
    charge = sum(a.formal_charge for a in g.atoms)
    values = (weight, heavy, circuit_rank(g), aromatic, hetero, donors, acceptors, rotatable, charge)
    return DescriptorVector(DESCRIPTOR_NAMES, tuple(float(v) for v in values))


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-major feature table keyed by ``row_ids`` (canonical SMILES)."""

    values: np.ndarray
    column_names: tuple[str, ...]
    row_ids: tuple[str, ...] = ()
    standardized: bool = False
    scaler: Scaler | None = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise ValueError("values must be 2-D with one column per name")
        if self.row_ids and len(self.row_ids) != self.values.shape[0]:
            raise ValueError("row_ids length must match row count")
        if self.values.dtype.kind == "f" and not np.isfinite(self.values).all():
            raise ValueError("feature matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def take_rows(self, rows) -> FeatureMatrix:
        rows = np.asarray(rows, dtype=np.int64)
        ids = tuple(self.row_ids[i] for i in rows) if self.row_ids else ()
        return replace(self, values=self.values[rows], row_ids=ids)

    def select_columns(self, names) -> FeatureMatrix:
        """Columns in the order of ``names``; missing names raise ``KeyError``."""
        lookup = {n: j for j, n in enumerate(self.column_names)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise KeyError(f"columns missing from feature matrix: {missing[:5]}")
        cols = [lookup[n] for n in names]
        scaler = None
        if self.scaler is not None:
            scaler = Scaler(self.scaler.means[cols], self.scaler.stds[cols])
        return replace(self, values=self.values[:, cols], column_names=tuple(names), scaler=scaler)


def fingerprint_column_names(width: int) -> tuple[str, ...]:
    digits = len(str(width - 1))
    return tuple(f"fp{j:0{digits}d}" for j in range(width))


def featurize(molecules, mode: str = "fingerprints", radius: int = DEFAULT_RADIUS,
              width: int = DEFAULT_WIDTH, row_ids=None) -> FeatureMatrix:
    """Build a feature matrix from graphs or SMILES strings.

    Fingerprint-only matrices are stored as ``uint8`` to keep 100k-row
    datasets in memory; any descriptor column makes the matrix ``float64``.
    """
    if mode not in FEATURE_MODES:
        raise ValueError(f"mode must be one of {FEATURE_MODES}")
    graphs = [parse(m) if isinstance(m, str) else m for m in molecules]
    blocks, names = [], []
    if mode in ("fingerprints", "both"):
        fps = np.zeros((len(graphs), width), dtype=np.uint8)
        for r, g in enumerate(graphs):
            fps[r] = morgan_fingerprint(g, radius, width).bits
        blocks.append(fps)
        names.extend(fingerprint_column_names(width))
    if mode in ("descriptors", "both"):
        desc = np.array([descriptors(g).values for g in graphs], dtype=np.float64)
        blocks.append(desc.reshape(len(graphs), len(DESCRIPTOR_NAMES)))
        names.extend(DESCRIPTOR_NAMES)
    if len(blocks) == 1:
        values = blocks[0]
    else:
        values = np.hstack([b.astype(np.float64) for b in blocks])
    if row_ids is None:
        row_ids = tuple(m if isinstance(m, str) else "" for m in molecules)
        if not all(row_ids):
            row_ids = ()
    return FeatureMatrix(values, tuple(names), tuple(row_ids))


def _fit_block(m: FeatureMatrix, fit_rows) -> np.ndarray:
    rows = np.asarray(sorted(set(int(r) for r in fit_rows)), dtype=np.int64)
    if rows.size == 0:
        raise ValueError("fit_rows must be non-empty")
    return m.values[rows].astype(np.float64)


def drop_zero_variance(m: FeatureMatrix, fit_rows) -> tuple[FeatureMatrix, list[str]]:
    """Remove columns whose population stddev over ``fit_rows`` is below 1e-12."""
    std = _fit_block(m, fit_rows).std(axis=0)
    keep = std >= ZERO_VARIANCE_TOL
    if not keep.any():
        raise ValueError("every feature column has zero variance on the fitting rows")
    dropped = [n for n, k in zip(m.column_names, keep) if not k]
    if not dropped:
        return m, []
    kept = [n for n, k in zip(m.column_names, keep) if k]
    return m.select_columns(kept), dropped


def standardize(m: FeatureMatrix, fit_rows) -> FeatureMatrix:
    """Z-score every column with mean and population stddev from ``fit_rows``.

    Raises
    ------
    ValueError
        If a column is constant on ``fit_rows``; run :func:`drop_zero_variance` first.
    """
    block = _fit_block(m, fit_rows)
    means = block.mean(axis=0)
    stds = block.std(axis=0)
    bad = [n for n, s in zip(m.column_names, stds) if s < ZERO_VARIANCE_TOL]
    if bad:
        raise ValueError(f"zero-variance columns must be dropped before standardizing: {bad[:5]}")
    scaler = Scaler(means, stds)
    return replace(m, values=apply_scaler(m.values, scaler), standardized=True, scaler=scaler)


def apply_scaler(values: np.ndarray, scaler: Scaler) -> np.ndarray:
    return (values.astype(np.float64) - scaler.means) / scaler.stds


def save_matrix(m: FeatureMatrix, path) -> None:
    """Write ``.npz`` (binary) or ``.csv`` depending on the suffix.

    CSV layout: header ``SMILES,<column names...>`` then one row per
    compound.  The npz archive holds ``values``, ``column_names``,
    ``row_ids`` and, when standardized, ``scaler_means``/``scaler_stds``.
    """
    path = Path(path)
    if path.suffix == ".csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["SMILES", *m.column_names])
            as_int = m.values.dtype.kind in "ui"
            for rid, row in zip(m.row_ids or [""] * m.n_rows, m.values):
                writer.writerow([rid, *(str(int(v)) if as_int else repr(float(v)) for v in row)])
        return
    arrays = {
        "values": m.values,
        "column_names": np.array(m.column_names, dtype=str),
        "row_ids": np.array(m.row_ids, dtype=str),
        "standardized": np.array(m.standardized),
    }
    if m.scaler is not None:
        arrays["scaler_means"] = m.scaler.means
        arrays["scaler_stds"] = m.scaler.stds
    write_npz(path, arrays)


def write_npz(path, arrays: dict[str, np.ndarray]) -> None:
    """``np.savez`` equivalent with fixed zip timestamps, so output bytes are reproducible."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, array in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(array), allow_pickle=False)
            zf.writestr(info, buf.getvalue())


def load_matrix(path) -> FeatureMatrix:
    path = Path(path)
    if path.suffix == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            ids, rows = [], []
            for row in reader:
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
        if values.size and np.all(np.isin(values, (0.0, 1.0))):
            values = values.astype(np.uint8)
        return FeatureMatrix(values, tuple(header[1:]), tuple(ids))
    with np.load(path, allow_pickle=False) as data:
        scaler = None
        if "scaler_means" in data:
            scaler = Scaler(data["scaler_means"], data["scaler_stds"])
        return FeatureMatrix(
            data["values"],
            tuple(str(n) for n in data["column_names"]),
            tuple(str(r) for r in data["row_ids"]),
            bool(data["standardized"]),
            scaler,
        )
