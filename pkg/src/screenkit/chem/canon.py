"""Canonical atom ranking and canonical SMILES output.

Ranking starts from a per-atom invariant (element, charge, degree, hydrogen
count, aromaticity, smallest ring size) and refines it Morgan style: each
round re-ranks atoms on ``(rank, sorted (neighbor rank, bond order))`` until
the number of classes stops growing.  Remaining ties are broken by promoting
one atom of the lowest tied class and refining again, which is
order-independent whenever tied atoms are symmetry equivalent.

Isotopes and stereo are not part of the ranking and are not written out.
"""

from __future__ import annotations

from .elements import ORGANIC_SUBSET
from .graph import BondOrder, MoleculeGraph

_BOND_TEXT = {BondOrder.SINGLE: "", BondOrder.DOUBLE: "=", BondOrder.TRIPLE: "#", BondOrder.AROMATIC: ""}


def atom_invariant(g: MoleculeGraph, i: int) -> tuple:
    atom = g.atoms[i]
    return (atom.atomic_number, atom.formal_charge, g.degree(i), g.total_h(i),
            atom.aromatic, g.smallest_ring(i))


def _dense_ranks(keys: list) -> list[int]:
    order = sorted(set(keys))
    lookup = {k: r for r, k in enumerate(order)}
    return [lookup[k] for k in keys]


def _refine(g: MoleculeGraph, ranks: list[int]) -> list[int]:
    n_classes = len(set(ranks))
    while True:
        keys = [
            (ranks[i], tuple(sorted((ranks[v], int(g.bonds[k].order)) for v, k in g.neighbors(i))))
            for i in range(g.n_atoms)
        ]
        new = _dense_ranks(keys)
        new_classes = len(set(new))
        if new_classes == n_classes:
            return new
        ranks, n_classes = new, new_classes


def symmetry_classes(g: MoleculeGraph) -> list[int]:
    """Refined ranks before tie breaking; equal values mark symmetry-equivalent atoms."""
    return _refine(g, _dense_ranks([atom_invariant(g, i) for i in range(g.n_atoms)]))


def canonical_ranks(g: MoleculeGraph) -> list[int]:
    """A total order of atoms (rank ``0..n-1``) independent of input numbering."""
    ranks = symmetry_classes(g)
    n = g.n_atoms
    while len(set(ranks)) < n:
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = min(r for r, c in counts.items() if c > 1)
        # Among the tied atoms prefer the one whose neighbor ranks sort lowest.
        members = [i for i in range(n) if ranks[i] == tied]
        pick = min(members, key=lambda i: (sorted(ranks[v] for v, _ in g.neighbors(i)), i))
        doubled = [2 * r for r in ranks]
        doubled[pick] -= 1
        ranks = _refine(g, _dense_ranks(doubled))
    return ranks


def _atom_text(g: MoleculeGraph, i: int) -> str:
    atom = g.atoms[i]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    h = g.total_h(i)
    if (atom.element in ORGANIC_SUBSET and atom.formal_charge == 0
            and h == g.implicit_h(i)):
        return symbol
    text = "[" + symbol
    if h:
        text += "H" if h == 1 else f"H{h}"
    q = atom.formal_charge
    if q:
        sign = "+" if q > 0 else "-"
        text += sign if abs(q) == 1 else f"{sign}{abs(q)}"
    return text + "]"


def _bond_text(g: MoleculeGraph, k: int) -> str:
    bond = g.bonds[k]
    if bond.order is BondOrder.SINGLE:
        if g.atoms[bond.a].aromatic and g.atoms[bond.b].aromatic:
            return "-"
        return ""
    if bond.order is BondOrder.AROMATIC and k not in g.ring_bonds:
        return ":"
    return _BOND_TEXT[bond.order]


def write_smiles(g: MoleculeGraph, ranks: list[int]) -> str:
    """SMILES for ``g`` traversed depth-first in ``ranks`` order."""
    n = g.n_atoms
    sorted_nbrs = [sorted(g.neighbors(i), key=lambda p: ranks[p[0]]) for i in range(n)]

    # Pass 1: spanning forest and ring-closure bonds.
    visited = [False] * n
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    openings: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    closings: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    tree_bond: set[int] = set()
    roots = []
    for start in sorted(range(n), key=lambda i: ranks[i]):
        if visited[start]:
            continue
        roots.append(start)
        visited[start] = True
        stack = [(start, -1, 0)]
        while stack:
            u, via, pos = stack[-1]
            if pos == len(sorted_nbrs[u]):
                stack.pop()
                continue
            stack[-1] = (u, via, pos + 1)
            v, k = sorted_nbrs[u][pos]
            if k == via:
                continue
            if not visited[v]:
                visited[v] = True
                tree_bond.add(k)
                children[u].append((v, k))
                stack.append((v, k, 0))
            elif k not in tree_bond and all(k != kk for _, kk in closings[u]) \
                    and all(k != kk for _, kk in openings[u]):
                # back edge from u to an ancestor v: v opens, u closes
                openings[v].append((u, k))
                closings[u].append((v, k))

    # Pass 2: emit.
    out: list[str] = []
    free_labels = list(range(1, 100))
    label_of: dict[int, int] = {}

    def label_text(label: int) -> str:
        return str(label) if label < 10 else f"%{label}"

    for root in roots:
        if out:
            out.append(".")
        stack: list = [("atom", root, -1)]
        while stack:
            item = stack.pop()
            if item[0] == "text":
                out.append(item[1])
                continue
            _, u, via = item
            if via >= 0:
                out.append(_bond_text(g, via))
            out.append(_atom_text(g, u))
            released = []
            for v, k in sorted(closings[u], key=lambda p: label_of[p[1]]):
                out.append(_bond_text(g, k) + label_text(label_of[k]))
                released.append(label_of.pop(k))
            for v, k in sorted(openings[u], key=lambda p: ranks[p[0]]):
                label = free_labels.pop(0)
                label_of[k] = label
                out.append(label_text(label))
            free_labels.extend(released)
            free_labels.sort()
            kids = children[u]
            # push in reverse: last child is the main chain, earlier ones are branches
            for idx in range(len(kids) - 1, -1, -1):
                v, k = kids[idx]
                if idx < len(kids) - 1:
                    stack.append(("text", ")"))
                    stack.append(("atom", v, k))
                    stack.append(("text", "("))
                else:
                    stack.append(("atom", v, k))
    return "".join(out)


def canonicalize(g: MoleculeGraph) -> str:
    """Canonical SMILES of ``g``: equal for graphs equal up to atom renumbering."""
    return write_smiles(g, canonical_ranks(g))
