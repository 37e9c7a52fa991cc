"""SMILES parsing, ring perception and canonical SMILES."""

from .canon import canonical_ranks, canonicalize, symmetry_classes
from .graph import Atom, Bond, BondOrder, MoleculeGraph, ParseDiagnostic
from .parser import MAX_SMILES_BYTES, SmilesError, parse
from .rings import MAX_RING_SIZE, circuit_rank, perceive_rings


def canonical_smiles(smiles: str) -> str:
    """Parse then canonicalize; raises :class:`SmilesError` on invalid input."""
    return canonicalize(parse(smiles))


__all__ = [
    "Atom", "Bond", "BondOrder", "MoleculeGraph", "ParseDiagnostic", "SmilesError",
    "MAX_RING_SIZE", "MAX_SMILES_BYTES", "canonical_ranks", "canonical_smiles",
    "canonicalize", "circuit_rank", "parse", "perceive_rings", "symmetry_classes",
]
