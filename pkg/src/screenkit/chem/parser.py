"""SMILES reader.

Covers the organic subset, bracket atoms (isotope, chirality, hydrogen
count, charge, atom class), the bond symbols ``- = # : / \\``, branches, ring
closures (``1``..``9`` and ``%nn``) and dot-disconnected components.
Stereo markers are accepted, reported as warnings and dropped.

Aromaticity is taken as written: lowercase atoms are aromatic and must lie
on a ring; an unmarked bond between two aromatic atoms is aromatic when it
lies on a ring and single otherwise (``c1ccccc1c1ccccc1`` is biphenyl).
"""

from __future__ import annotations

from .elements import AROMATIC_BRACKET, AROMATIC_ORGANIC, ORGANIC_SUBSET, is_element
from .graph import Atom, Bond, BondOrder, MoleculeGraph, ParseDiagnostic
from .rings import perceive_rings

MAX_SMILES_BYTES = 4096

_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}
_STEREO_BONDS = "/\\"
_DIGITS = frozenset("0123456789")


class SmilesError(ValueError):
    """Raised when a SMILES string is rejected; carries positioned diagnostics."""

    def __init__(self, smiles: str, diagnostics: list[ParseDiagnostic]):
        self.smiles = smiles
        self.diagnostics = diagnostics
        detail = "; ".join(str(d) for d in diagnostics)
        super().__init__(f"invalid SMILES {smiles!r}: {detail}")


class _Fail(Exception):
    pass


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.byte_at = [0]
        for ch in text:
            self.byte_at.append(self.byte_at[-1] + len(ch.encode("utf-8")))
        self.errors: list[ParseDiagnostic] = []
        self.warnings: list[ParseDiagnostic] = []

        self.atoms: list[Atom] = []
        self.atom_pos: list[int] = []
        # (a, b, order, written symbol or None, char position)
        self.bonds: list[tuple[int, int, BondOrder, str | None, int]] = []
        self.pairs: set[frozenset[int]] = set()
        self.rings: dict[int, tuple[int, str | None, int]] = {}
        self.branches: list[tuple[int, int, int]] = []  # (atom, '(' position, atom count at open)

    # -- diagnostics ------------------------------------------------------
    def fail(self, pos: int, message: str):
        self.errors.append(ParseDiagnostic(self.byte_at[pos], message, "error"))
        raise _Fail

    def warn(self, pos: int, message: str):
        self.warnings.append(ParseDiagnostic(self.byte_at[pos], message, "warning"))

    # -- graph building ---------------------------------------------------
    def add_atom(self, atom: Atom, pos: int) -> int:
        idx = len(self.atoms)
        self.atoms.append(Atom(atom.element, atom.aromatic, atom.formal_charge,
                               atom.isotope, atom.explicit_h, idx))
        self.atom_pos.append(pos)
        return idx

    def add_bond(self, a: int, b: int, symbol: str | None, pos: int):
        if a == b:
            self.fail(pos, "ring closure bonds an atom to itself")
        pair = frozenset((a, b))
        if pair in self.pairs:
            self.fail(pos, "duplicate bond between the same two atoms")
        self.pairs.add(pair)
        if symbol is None:
            both = self.atoms[a].aromatic and self.atoms[b].aromatic
            order = BondOrder.AROMATIC if both else BondOrder.SINGLE
        else:
            order = _BOND_SYMBOLS[symbol]
        self.bonds.append((a, b, order, symbol, pos))

    # -- tokens -----------------------------------------------------------
    def read_bracket(self, start: int) -> tuple[Atom, int]:
        text = self.text
        end = text.find("]", start)
        if end == -1:
            self.fail(start, "malformed bracket atom: missing ']'")
        body = text[start + 1:end]
        i = 0

        j = i
        while j < len(body) and body[j] in _DIGITS:
            j += 1
        isotope = int(body[i:j]) if j > i else None
        if isotope == 0:
            isotope = None
        i = j

        aromatic = False
        element = None
        two, one = body[i:i + 2], body[i:i + 1]
        if len(two) == 2 and two in AROMATIC_BRACKET and two.islower():
            element, aromatic, i = AROMATIC_BRACKET[two], True, i + 2
        elif one in AROMATIC_BRACKET:
            element, aromatic, i = AROMATIC_BRACKET[one], True, i + 1
        elif one.isupper():
            if len(two) == 2 and two[1].islower() and is_element(two):
                element, i = two, i + 2
            elif is_element(one):
                element, i = one, i + 1
            else:
                sym = two if len(two) == 2 and two[1].islower() else one
                self.fail(start + 1 + i, f"unknown element symbol {sym!r}")
        elif one == "*":
            self.fail(start + 1 + i, "wildcard atoms are not supported")
        elif one.isascii() and one.isalpha():
            self.fail(start + 1 + i, f"unknown element symbol {one!r}")
        else:
            self.fail(start, "malformed bracket atom: missing element symbol")

        if body[i:i + 1] == "@":
            chiral_start = i
            i += 2 if body[i:i + 2] == "@@" else 1
            if body[i:i + 2] in ("TH", "AL", "SP", "TB", "OH"):
                i += 2
                while i < len(body) and body[i] in _DIGITS:
                    i += 1
            self.warn(start + 1 + chiral_start, "chirality marker discarded")

        hcount = 0
        if body[i:i + 1] == "H":
            i += 1
            j = i
            while j < len(body) and body[j] in _DIGITS:
                j += 1
            hcount = int(body[i:j]) if j > i else 1
            i = j

        charge = 0
        if body[i:i + 1] in ("+", "-"):
            sign = 1 if body[i] == "+" else -1
            j = i + 1
            while j < len(body) and body[j] == body[i]:
                j += 1
            if j > i + 1:
                charge = sign * (j - i)
            else:
                k = j
                while k < len(body) and body[k] in _DIGITS:
                    k += 1
                charge = sign * (int(body[j:k]) if k > j else 1)
                j = k
            i = j

        if body[i:i + 1] == ":":
            j = i + 1
            while j < len(body) and body[j] in _DIGITS:
                j += 1
            if j == i + 1:
                self.fail(start + 1 + i, "malformed bracket atom: empty atom class")
            i = j

        if i != len(body):
            self.fail(start + 1 + i, f"malformed bracket atom: unexpected {body[i]!r}")
        atom = Atom(element, aromatic, charge, isotope, hcount)
        return atom, end + 1

    def read_ring_label(self, pos: int) -> tuple[int, int]:
        ch = self.text[pos]
        if ch == "%":
            digits = self.text[pos + 1:pos + 3]
            if len(digits) != 2 or not all(d in _DIGITS for d in digits):
                self.fail(pos, "malformed ring-closure label after '%'")
            return int(digits), pos + 3
        return int(ch), pos + 1

    def run(self) -> None:
        text = self.text
        n = len(text)
        prev: int | None = None
        bond: tuple[str, int] | None = None  # pending (symbol, position)
        pos = 0
        while pos < n:
            ch = text[pos]
            if ch in _BOND_SYMBOLS or ch in _STEREO_BONDS:
                if prev is None:
                    self.fail(pos, f"bond {ch!r} without a preceding atom")
                if bond is not None:
                    self.fail(pos, "two consecutive bond symbols")
                if ch in _STEREO_BONDS:
                    self.warn(pos, "directional bond marker discarded")
                    bond = ("", pos)
                else:
                    bond = (ch, pos)
                pos += 1
            elif ch in _DIGITS or ch == "%":
                if prev is None:
                    self.fail(pos, "ring-closure label without a preceding atom")
                label, nxt = self.read_ring_label(pos)
                symbol = bond[0] or None if bond else None
                if label in self.rings:
                    other, open_symbol, open_pos = self.rings.pop(label)
                    if open_symbol and symbol and open_symbol != symbol:
                        self.fail(pos, f"conflicting bond symbols on ring closure {label}")
                    self.add_bond(other, prev, open_symbol or symbol, pos)
                else:
                    self.rings[label] = (prev, symbol, pos)
                bond = None
                pos = nxt
            elif ch == "(":
                if prev is None:
                    self.fail(pos, "branch without a preceding atom")
                if bond is not None:
                    self.fail(bond[1], "bond symbol before branch")
                self.branches.append((prev, pos, len(self.atoms)))
                pos += 1
            elif ch == ")":
                if not self.branches:
                    self.fail(pos, "unbalanced branch: ')' without '('")
                if bond is not None:
                    self.fail(bond[1], "dangling bond at end of branch")
                anchor, _, count = self.branches.pop()
                if len(self.atoms) == count:
                    self.fail(pos, "empty branch")
                prev = anchor
                pos += 1
            elif ch == ".":
                if prev is None:
                    self.fail(pos, "empty component before '.'")
                if bond is not None:
                    self.fail(bond[1], "dangling bond before '.'")
                if self.branches:
                    self.fail(self.branches[-1][1], "unbalanced branch: '(' not closed before '.'")
                prev = None
                pos += 1
            else:
                if ch == "[":
                    atom, nxt = self.read_bracket(pos)
                elif text.startswith(("Cl", "Br"), pos):
                    atom, nxt = Atom(text[pos:pos + 2]), pos + 2
                elif ch in ORGANIC_SUBSET:
                    atom, nxt = Atom(ch), pos + 1
                elif ch in AROMATIC_ORGANIC:
                    atom, nxt = Atom(AROMATIC_ORGANIC[ch], aromatic=True), pos + 1
                elif ch == "*":
                    self.fail(pos, "wildcard atoms are not supported")
                elif ch.isascii() and ch.isalpha():
                    self.fail(pos, f"unknown element symbol {ch!r}")
                else:
                    self.fail(pos, f"unexpected character {ch!r}")
                idx = self.add_atom(atom, pos)
                if prev is not None:
                    symbol = bond[0] or None if bond else None
                    self.add_bond(prev, idx, symbol, bond[1] if bond else pos)
                bond = None
                prev = idx
                pos = nxt

        if bond is not None:
            self.errors.append(ParseDiagnostic(self.byte_at[bond[1]], "dangling bond at end of input"))
        for _, open_pos, _ in self.branches:
            self.errors.append(ParseDiagnostic(self.byte_at[open_pos], "unbalanced branch: '(' never closed"))
        for label, (_, _, open_pos) in sorted(self.rings.items(), key=lambda kv: kv[1][2]):
            self.errors.append(ParseDiagnostic(self.byte_at[open_pos], f"unclosed ring-closure digit {label}"))
        if prev is None and not self.errors and self.atoms:
            self.errors.append(ParseDiagnostic(self.byte_at[n - 1], "empty component after '.'"))


def parse(smiles: str) -> MoleculeGraph:
    """Parse a SMILES string into a ring-perceived :class:`MoleculeGraph`.

    Raises
    ------
    SmilesError
        With one positioned diagnostic per detected problem.
    """
    if isinstance(smiles, bytes):
        try:
            smiles = smiles.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SmilesError(repr(smiles), [ParseDiagnostic(exc.start, "input is not valid UTF-8")]) from None
    if not smiles:
        raise SmilesError(smiles, [ParseDiagnostic(0, "empty SMILES")])
    size = len(smiles.encode("utf-8"))
    if size > MAX_SMILES_BYTES:
        raise SmilesError(smiles[:32] + "...", [ParseDiagnostic(
            MAX_SMILES_BYTES, f"input is {size} bytes; limit is {MAX_SMILES_BYTES}")])

    reader = _Reader(smiles)
    try:
        reader.run()
    except _Fail:
        pass
    if reader.errors:
        raise SmilesError(smiles, reader.errors)

    draft = MoleculeGraph(tuple(reader.atoms),
                          tuple(Bond(a, b, order) for a, b, order, _, _ in reader.bonds))
    g = perceive_rings(draft)

    bonds = list(g.bonds)
    for k, (a, b, order, symbol, pos) in enumerate(reader.bonds):
        if order is BondOrder.AROMATIC and symbol is None and k not in g.ring_bonds:
            bonds[k] = Bond(a, b, BondOrder.SINGLE)
        elif order is BondOrder.AROMATIC and not (g.atoms[a].aromatic and g.atoms[b].aromatic):
            reader.errors.append(ParseDiagnostic(reader.byte_at[pos], "aromatic bond between non-aromatic atoms"))
    for i, atom in enumerate(g.atoms):
        if atom.aromatic and not g.in_ring(i):
            reader.errors.append(ParseDiagnostic(reader.byte_at[reader.atom_pos[i]],
                                                 f"aromatic atom {atom.element.lower()!r} is not in a ring"))
    if reader.errors:
        raise SmilesError(smiles, sorted(reader.errors, key=lambda d: d.byte_offset))

    return MoleculeGraph(g.atoms, tuple(bonds), g.rings, g.ring_bonds, tuple(reader.warnings))
