"""Shared fixtures and helpers for the screenkit test suite."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from screenkit.chem import Atom, Bond, MoleculeGraph, perceive_rings

FIXTURES = Path(__file__).parent / "fixtures"


def _read_pairs(name: str) -> list[tuple[str, str]]:
    pairs = []
    for line in (FIXTURES / name).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        left, right = line.split("\t")
        pairs.append((left, right))
    return pairs


def valid_smiles() -> list[tuple[str, str]]:
    """(name, SMILES) pairs of the valid corpus."""
    return _read_pairs("valid_smiles.txt")


def invalid_smiles() -> list[tuple[str, str]]:
    """(expected message fragment, SMILES) pairs of the invalid corpus."""
    return _read_pairs("invalid_smiles.txt")


def permute_graph(g: MoleculeGraph, perm: list[int], rng: random.Random) -> MoleculeGraph:
    """Relabel atoms so that old atom ``perm[k]`` becomes atom ``k``; bond order is shuffled too."""
    inv = {old: new for new, old in enumerate(perm)}
    atoms: list[Atom | None] = [None] * g.n_atoms
    for old, a in enumerate(g.atoms):
        atoms[inv[old]] = Atom(a.element, a.aromatic, a.formal_charge, a.isotope, a.explicit_h, inv[old])
    bonds = [Bond(inv[b.a], inv[b.b], b.order) for b in g.bonds]
    rng.shuffle(bonds)
    return perceive_rings(MoleculeGraph(tuple(atoms), tuple(bonds)))


@pytest.fixture
def curation_dir() -> Path:
    return FIXTURES / "curation"


@pytest.fixture(scope="session")
def synth_10k():
    """Default 10,000-compound synthetic benchmark (generated once per session)."""
    from screenkit.synth import SynthBenchSpec, generate

    spec = SynthBenchSpec(n_compounds=10_000, prevalence=0.021, seed=0)
    return spec, generate(spec)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion's outcome for the terminal summary."""
    import time
    from contextlib import contextmanager

    results = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    @contextmanager
    def criterion(number: int, title: str, budget_s: float | None):
        t0 = time.perf_counter()
        results[number] = (title, "FAIL", None, budget_s)
        yield
        elapsed = time.perf_counter() - t0
        results[number] = (title, "FAIL", elapsed, budget_s)
        if budget_s is not None:
            assert elapsed < budget_s, f"criterion {number} took {elapsed:.2f} s (budget {budget_s} s)"
        results[number] = (title, "PASS", elapsed, budget_s)

    return criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status, elapsed, budget = results[number]
        timing = "n/a" if elapsed is None else f"{elapsed:.2f} s"
        limit = f" / {budget:g} s" if budget is not None else ""
        terminalreporter.write_line(f"[{status}] {number:>2}. {title} ({timing}{limit})")
