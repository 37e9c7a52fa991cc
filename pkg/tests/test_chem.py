import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import invalid_smiles, permute_graph, valid_smiles
from screenkit.chem import (MAX_SMILES_BYTES, BondOrder, SmilesError, canonical_smiles, canonicalize, circuit_rank,
                            parse, perceive_rings, symmetry_classes)

VALID = valid_smiles()
INVALID = invalid_smiles()


def to_networkx(g) -> nx.Graph:
    """Labelled graph used as an independent isomorphism oracle."""
    G = nx.Graph()
    for i, a in enumerate(g.atoms):
        G.add_node(i, label=(a.element, a.aromatic, a.formal_charge, g.total_h(i)))
    for b in g.bonds:
        G.add_edge(b.a, b.b, order=int(b.order))
    return G


def isomorphic(g1, g2) -> bool:
    return nx.is_isomorphic(to_networkx(g1), to_networkx(g2),
                            node_match=lambda x, y: x["label"] == y["label"],
                            edge_match=lambda x, y: x["order"] == y["order"])


class TestParse:
    def test_single_atom(self):
        g = parse("C")
        assert g.n_atoms == 1 and len(g.bonds) == 0
        assert g.total_h(0) == 4

    def test_benzene_graph(self):
        g = parse("c1ccccc1")
        assert g.n_atoms == 6
        assert all(a.element == "C" and a.aromatic for a in g.atoms)
        assert len(g.bonds) == 6
        assert all(b.order == BondOrder.AROMATIC for b in g.bonds)
        assert [len(r) for r in g.rings] == [6]

    def test_unbalanced_branch_offset(self):
        with pytest.raises(SmilesError) as exc:
            parse("C(")
        d = exc.value.diagnostics[0]
        assert "unbalanced branch" in d.message and d.byte_offset == 1 and d.severity == "error"

    def test_dataset_alkynol(self):
        g = parse("CCC(C)(C#C)O")
        assert g.n_atoms == 7
        assert sum(b.order == BondOrder.TRIPLE for b in g.bonds) == 1
        quaternary = [i for i in range(g.n_atoms) if g.atoms[i].element == "C" and g.degree(i) == 4]
        assert quaternary == [2]

    def test_atom_order_follows_source(self):
        g = parse("OCN")
        assert [a.element for a in g.atoms] == ["O", "C", "N"]

    def test_stereo_markers_warn_and_vanish(self):
        g = parse("F/C=C\\F")
        assert len(g.warnings) == 2 and all(w.severity == "warning" for w in g.warnings)
        assert canonicalize(g) == canonical_smiles("FC=CF")
        assert canonical_smiles("C[C@@H](N)O") == canonical_smiles("CC(N)O")

    def test_isotope_parsed_but_not_canonical(self):
        g = parse("[13CH3]O")
        assert g.atoms[0].isotope == 13
        assert canonicalize(g) == canonical_smiles("CO")

    def test_disconnected_components(self):
        g = parse("[Na+].[Cl-]")
        assert g.n_atoms == 2 and not g.bonds
        assert canonicalize(g) == canonical_smiles("[Cl-].[Na+]")

    def test_charges_and_explicit_h(self):
        g = parse("[NH4+]")
        assert g.atoms[0].formal_charge == 1 and g.total_h(0) == 4
        g = parse("C[O-]")
        assert g.total_h(1) == 0

    def test_length_limit(self):
        parse("C" * MAX_SMILES_BYTES)
        with pytest.raises(SmilesError) as exc:
            parse("C" * (MAX_SMILES_BYTES + 1))
        assert "limit" in exc.value.diagnostics[0].message

    @pytest.mark.parametrize("expected,smiles", INVALID, ids=[s for _, s in INVALID])
    def test_invalid_corpus_rejected(self, expected, smiles):
        with pytest.raises(SmilesError) as exc:
            parse(smiles)
        diags = exc.value.diagnostics
        assert diags and diags[0].severity == "error"
        assert expected in diags[0].message
        assert 0 <= diags[0].byte_offset <= len(smiles.encode("utf-8"))

    @given(st.text(max_size=40))
    @settings(max_examples=400, deadline=None)
    def test_arbitrary_text_never_crashes(self, text):
        try:
            g = parse(text)
        except SmilesError as exc:
            assert exc.diagnostics
        else:
            canonicalize(g)

    @given(st.text(alphabet="CNOcnos()=#123[]+-H.Cl", max_size=30))
    @settings(max_examples=600, deadline=None)
    def test_smiles_alphabet_fuzz(self, text):
        try:
            g = parse(text)
        except SmilesError as exc:
            assert exc.diagnostics and all(d.byte_offset >= 0 for d in exc.diagnostics)
        else:
            c = canonicalize(g)
            assert canonical_smiles(c) == c


class TestRings:
    def test_methane_acyclic(self):
        assert parse("C").rings == ()

    def test_naphthalene_two_six_rings(self):
        g = parse("c1ccc2ccccc2c1")
        assert sorted(len(r) for r in g.rings) == [6, 6]
        assert circuit_rank(g) == 2

    def test_macrocycle_flagged_without_ring_set(self):
        g = parse("C1CCCCCCCCCC1")
        assert g.rings == ()
        assert all(g.in_ring(i) for i in range(g.n_atoms))
        assert circuit_rank(g) == 1

    def test_bridged_bicycle(self):
        # norbornane: two 5-rings and one 6-ring
        g = parse("C1CC2CCC1C2")
        assert sorted(len(r) for r in g.rings) == [5, 5, 6]

    @pytest.mark.parametrize("name,smiles", VALID, ids=[n for n, _ in VALID])
    def test_small_cycles_match_networkx(self, name, smiles):
        g = parse(smiles)
        G = nx.Graph([(b.a, b.b) for b in g.bonds])
        G.add_nodes_from(range(g.n_atoms))
        oracle = {frozenset(c) for c in nx.simple_cycles(G, length_bound=8) if len(c) >= 3}
        assert set(g.rings) == oracle


class TestCanonical:
    def test_same_molecule_same_string(self):
        assert canonical_smiles("OCC") == canonical_smiles("CCO")

    @pytest.mark.parametrize("name,smiles", VALID, ids=[n for n, _ in VALID])
    def test_round_trip_isomorphic_and_idempotent(self, name, smiles):
        g = parse(smiles)
        c = canonicalize(g)
        g2 = parse(c)
        assert isomorphic(g, g2)
        assert canonicalize(g2) == c

    @pytest.mark.parametrize("name,smiles", VALID[::6], ids=[n for n, _ in VALID[::6]])
    def test_permutation_invariance(self, name, smiles):
        g = parse(smiles)
        rng = random.Random(name)
        expected = canonicalize(g)
        for _ in range(25):
            perm = list(range(g.n_atoms))
            rng.shuffle(perm)
            h = permute_graph(g, perm, rng)
            assert isomorphic(g, h)
            assert canonicalize(h) == expected

    def test_symmetry_classes_of_benzene(self):
        assert len(set(symmetry_classes(parse("c1ccccc1")))) == 1

    def test_different_molecules_differ(self):
        strings = {canonicalize(parse(s)) for _, s in VALID}
        graphs = [parse(s) for _, s in VALID]
        distinct = sum(1 for i in range(len(graphs))
                       if not any(isomorphic(graphs[i], graphs[j]) for j in range(i)))
        assert len(strings) == distinct

    def test_perceive_rings_is_stable(self):
        g = parse("c1ccc2ccccc2c1")
        assert perceive_rings(g).rings == g.rings
