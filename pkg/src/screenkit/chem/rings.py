"""Ring perception.

Two passes.  Bridge detection marks every bond that lies on some cycle
(ring bonds), which is all that ring-membership flags need and is exact for
macrocycles too.  A bounded depth-first search then enumerates each simple
cycle of at most ``MAX_RING_SIZE`` atoms, walking ring bonds only.
"""

from __future__ import annotations

from .graph import MoleculeGraph

MAX_RING_SIZE = 8


def ring_bond_indices(g: MoleculeGraph) -> set[int]:
    """Indices of bonds that are not bridges (iterative Tarjan lowlink)."""
    n = g.n_atoms
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # frames: (atom, bond used to enter, neighbor iterator position)
        stack = [(root, -1, 0)]
        while stack:
            u, via, pos = stack[-1]
            nbrs = g.neighbors(u)
            if pos < len(nbrs):
                stack[-1] = (u, via, pos + 1)
                v, k = nbrs[pos]
                if k == via:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, k, 0))
                else:
                    low[u] = min(low[u], disc[v])
            else:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        bridges.add(via)
    return set(range(len(g.bonds))) - bridges


def small_cycles(g: MoleculeGraph, ring_bonds: set[int], max_size: int = MAX_RING_SIZE):
    """All simple cycles with at most ``max_size`` atoms, as sorted atom tuples.

    Each cycle is found once: from its lowest-index atom, walking only atoms of
    higher index, and keeping the orientation whose second atom is smaller
    than its last.
    """
    adj = [[v for v, k in g.neighbors(u) if k in ring_bonds] for u in range(g.n_atoms)]
    found = []
    for start in range(g.n_atoms):
        if not adj[start]:
            continue
        path = [start]
        on_path = {start}

        def walk(u):
            for v in adj[u]:
                if v == start and len(path) >= 3:
                    if path[1] < path[-1]:
                        found.append(tuple(path))
                elif v > start and v not in on_path and len(path) < max_size:
                    path.append(v)
                    on_path.add(v)
                    walk(v)
                    path.pop()
                    on_path.discard(v)

        walk(start)
    return sorted(found, key=lambda c: (len(c), sorted(c)))


def perceive_rings(g: MoleculeGraph) -> MoleculeGraph:
    """Return ``g`` with ``rings`` and ``ring_bonds`` populated."""
    ring_bonds = ring_bond_indices(g)
    cycles = small_cycles(g, ring_bonds)
    return g.with_rings([frozenset(c) for c in cycles], ring_bonds)


def circuit_rank(g: MoleculeGraph) -> int:
    """Number of independent cycles, ``bonds - atoms + components``."""
    parent = list(range(g.n_atoms))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = g.n_atoms
    for bond in g.bonds:
        ra, rb = find(bond.a), find(bond.b)
        if ra != rb:
            parent[ra] = rb
            components -= 1
    return len(g.bonds) - g.n_atoms + components
