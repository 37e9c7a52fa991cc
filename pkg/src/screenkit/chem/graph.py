"""Molecular graph types."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

from .elements import ATOMIC_NUMBER, ORGANIC_SUBSET, PI_BOND_DONORS


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> int:
        """Contribution to atom valence; aromatic counts 1 (pi handled per atom)."""
        return 1 if self is BondOrder.AROMATIC else int(self)


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    isotope: int | None = None
    explicit_h: int | None = None
    index: int = 0

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBER[self.element]

    @property
    def bracketed(self) -> bool:
        return self.explicit_h is not None


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class ParseDiagnostic:
    byte_offset: int
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity} at byte {self.byte_offset}: {self.message}"


@dataclass(frozen=True)
class MoleculeGraph:
    """Immutable molecular graph.

    ``rings`` holds every simple cycle of at most ``MAX_RING_SIZE`` atoms as a
    frozenset of atom indices.  ``ring_bonds`` flags bonds lying on any cycle,
    whatever its size, so macrocycle membership is still recorded.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    rings: tuple[frozenset[int], ...] = ()
    ring_bonds: frozenset[int] = frozenset()
    warnings: tuple[ParseDiagnostic, ...] = field(default=(), compare=False)

    def __post_init__(self):
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for k, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, k))
            adj[bond.b].append((bond.a, k))
        object.__setattr__(self, "_adjacency", tuple(tuple(x) for x in adj))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> tuple[tuple[int, int], ...]:
        """``(neighbor atom, bond index)`` pairs of atom ``i``."""
        return self._adjacency[i]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def in_ring(self, i: int) -> bool:
        return any(k in self.ring_bonds for _, k in self._adjacency[i])

    def smallest_ring(self, i: int) -> int:
        """Size of the smallest perceived ring holding ``i``; 0 if acyclic, 99 for macrocycle-only."""
        sizes = [len(r) for r in self.rings if i in r]
        if sizes:
            return min(sizes)
        return 99 if self.in_ring(i) else 0

    def bond_valence(self, i: int) -> int:
        return sum(self.bonds[k].order.valence for _, k in self._adjacency[i])

    def implicit_h(self, i: int) -> int:
        """Hydrogen count an unbracketed atom would carry from organic-subset valence rules."""
        atom = self.atoms[i]
        valences = ORGANIC_SUBSET.get(atom.element)
        if valences is None:
            return 0
        used = self.bond_valence(i)
        if atom.aromatic:
            extra = 1 if atom.element in PI_BOND_DONORS else 0
            return max(0, valences[0] - used - extra)
        for v in valences:
            if v >= used:
                return v - used
        return 0

    def total_h(self, i: int) -> int:
        atom = self.atoms[i]
        if atom.explicit_h is not None:
            return atom.explicit_h
        return self.implicit_h(i)

    def with_rings(self, rings, ring_bonds) -> MoleculeGraph:
        return replace(self, rings=tuple(rings), ring_bonds=frozenset(ring_bonds))
