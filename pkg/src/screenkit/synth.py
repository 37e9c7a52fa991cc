"""Synthetic screening benchmark with a planted activity motif.

Molecules are assembled from a closed set of fragments joined by single
bonds at hydrogen-bearing atoms.  Decoy fragments contain no sulfur, so the
thiophene sulfonamide motif is the only source of activity signal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .chem import Bond, BondOrder, MoleculeGraph, canonicalize, parse, perceive_rings
from .rng import SplitMix64, derive_seed

MOTIF = "c1ccc(s1)S(=O)(=O)N"
BASE_PIC50 = 4.5
PIC50_RANGE = (3.85, 9.10)
PREVALENCE_TOLERANCE = 0.003

RING_FRAGMENTS = (
    "c1ccccc1", "c1ccncc1", "c1cnccn1", "c1ccoc1", "C1CCCCC1", "C1CCNCC1",
    "C1COCCN1", "C1CCOC1", "C1CC1", "C1CCCC1", "c1ccc2ccccc2c1",
)
CHAIN_FRAGMENTS = (
    "C", "CC", "CCC", "CC(C)C", "O", "N", "C(=O)N", "C(=O)O", "OC", "C=C",
    "C#N", "F", "Cl", "Br", "C(F)(F)F", "NC(=O)C", "CO", "C(=O)",
)


@dataclass(frozen=True)
class SynthBenchSpec:
    n_compounds: int = 10_000
    prevalence: float = 0.021
    effect: float = 2.0
    noise: float = 0.2
    seed: int = 0
    min_fragments: int = 2
    max_fragments: int = 5

    def n_motif(self) -> int:
        """Number of motif-bearing molecules, ``round(prevalence * n)``.

        Raises
        ------
        ValueError
            If the settings are invalid or the prevalence cannot be met within
            0.3 percentage points at this ``n``.
        """
        if self.n_compounds < 1:
            raise ValueError("n_compounds must be >= 1")
        if not 0 <= self.prevalence <= 1:
            raise ValueError("prevalence must lie in [0, 1]")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if not 1 <= self.min_fragments <= self.max_fragments:
            raise ValueError("need 1 <= min_fragments <= max_fragments")
        k = int(np.floor(self.prevalence * self.n_compounds + 0.5))
        if abs(k / self.n_compounds - self.prevalence) > PREVALENCE_TOLERANCE or (self.prevalence > 0 and k == 0):
            raise ValueError(f"prevalence {self.prevalence} is unreachable with n={self.n_compounds} "
                             f"(closest is {k}/{self.n_compounds})")
        return k


@dataclass(frozen=True)
class SynthCompound:
    smiles: str
    pic50: float
    has_motif: bool


@lru_cache(maxsize=None)
def _fragment(smiles: str) -> MoleculeGraph:
    return parse(smiles)


def _attachable(g: MoleculeGraph) -> list[int]:
    return [i for i, a in enumerate(g.atoms) if not a.bracketed and g.implicit_h(i) >= 1]


def join(g1: MoleculeGraph, i: int, g2: MoleculeGraph, j: int) -> MoleculeGraph:
    """Disjoint union of two graphs plus a single bond ``g1[i]-g2[j]``."""
    off = g1.n_atoms
    atoms = g1.atoms + tuple(replace(a, index=a.index + off) for a in g2.atoms)
    bonds = g1.bonds + tuple(Bond(b.a + off, b.b + off, b.order) for b in g2.bonds)
    bonds += (Bond(i, j + off, BondOrder.SINGLE),)
    return perceive_rings(MoleculeGraph(atoms, bonds))


def _pick(rng: SplitMix64, items):
    return items[int(rng.integers(len(items), 1)[0])]


def assemble(rng: SplitMix64, spec: SynthBenchSpec, with_motif: bool) -> MoleculeGraph:
    n_frag = spec.min_fragments + int(rng.integers(spec.max_fragments - spec.min_fragments + 1, 1)[0])
    # at least one ring keeps decoys drug-like
    frags = [_pick(rng, RING_FRAGMENTS)]
    for _ in range(n_frag - 1):
        pool = RING_FRAGMENTS if rng.random(1)[0] < 0.4 else CHAIN_FRAGMENTS
        frags.append(_pick(rng, pool))
    if with_motif:
        frags.insert(int(rng.integers(len(frags) + 1, 1)[0]), MOTIF)
    g = _fragment(frags[0])
    for smi in frags[1:]:
        part = _fragment(smi)
        sites = _attachable(g)
        part_sites = _attachable(part)
        g = join(g, _pick(rng, sites), part, _pick(rng, part_sites))
    return g


def generate(spec: SynthBenchSpec, max_attempts_per_compound: int = 200) -> list[SynthCompound]:
    """Unique molecules with exactly :meth:`SynthBenchSpec.n_motif` carrying the motif.

    pIC50 is ``4.5 + effect * has_motif + N(0, noise)``, clamped to
    [3.85, 9.10].
    """
    k = spec.n_motif()
    n = spec.n_compounds
    flags = np.zeros(n, dtype=bool)
    flags[SplitMix64(derive_seed(spec.seed, 1)).permutation(n)[:k]] = True
    rng = SplitMix64(derive_seed(spec.seed, 2))
    noise = SplitMix64(derive_seed(spec.seed, 3)).normal(n) * spec.noise
    seen: set[str] = set()
    out = []
    for idx in range(n):
        for _ in range(max_attempts_per_compound):
            smi = canonicalize(assemble(rng, spec, bool(flags[idx])))
            if smi not in seen:
                break
        else:
            raise ValueError(f"fragment grammar exhausted after {len(out)} unique molecules")
        seen.add(smi)
        pic50 = BASE_PIC50 + spec.effect * flags[idx] + noise[idx]
        pic50 = float(min(max(pic50, PIC50_RANGE[0]), PIC50_RANGE[1]))
        out.append(SynthCompound(smi, pic50, bool(flags[idx])))
    return out


def write_bench(compounds, path) -> None:
    """CSV ``SMILES,pIC50,has_motif``; readable as a curated dataset."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["SMILES", "pIC50", "has_motif"])
        for c in compounds:
            writer.writerow([c.smiles, repr(c.pic50), int(c.has_motif)])
