"""Molecule data model: one-hot typed graphs with 3D coordinates.

A molecule is a tuple (coords, atom_types, bonds, charges): coordinates are an
N x 3 array in Angstrom, element types an N x A one-hot matrix, bond types a
symmetric N x N x B one-hot tensor whose category 0 is "no bond", and formal
charges an N x K one-hot matrix. All categorical axes are defined by a
Vocabulary so the same arrays can be fed to samplers, models, and metrics
without re-encoding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "Vocabulary",
    "ValenceTable",
    "Molecule",
    "GEOM_DRUGS_ELEMENTS",
    "default_vocabulary",
    "default_valence_table",
    "atom_valences",
]


GEOM_DRUGS_ELEMENTS = (
    "H", "B", "C", "N", "O", "F", "Al", "Si",
    "P", "S", "Cl", "As", "Br", "I", "Hg", "Bi",
)

BOND_NAMES = ("none", "single", "double", "triple", "aromatic")
BOND_ORDERS = (0.0, 1.0, 2.0, 3.0, 1.5)


@dataclass(frozen=True)
class Vocabulary:
    """Categorical axes shared by every molecule in a run.

    Bond category 0 must be "none" (the absent-edge category); its numeric
    order is 0 so valence sums can ignore it.
    """

    elements: tuple[str, ...]
    bond_names: tuple[str, ...]
    bond_orders: tuple[float, ...]
    charge_values: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("duplicate element symbols in vocabulary")
        if len(set(self.bond_names)) != len(self.bond_names):
            raise ValueError("duplicate bond names in vocabulary")
        if len(set(self.charge_values)) != len(self.charge_values):
            raise ValueError("duplicate charge values in vocabulary")
        if len(self.bond_names) != len(self.bond_orders):
            raise ValueError("bond_names and bond_orders length mismatch")
        if self.bond_names[0] != "none" or self.bond_orders[0] != 0.0:
            raise ValueError('bond category 0 must be "none" with order 0')

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_bond_types(self) -> int:
        return len(self.bond_names)

    @property
    def n_charges(self) -> int:
        return len(self.charge_values)

    def element_index(self, symbol: str) -> int:
        try:
            return self.elements.index(symbol)
        except ValueError:
            raise KeyError(f"element {symbol!r} not in vocabulary") from None

    def charge_index(self, charge: int) -> int:
        try:
            return self.charge_values.index(charge)
        except ValueError:
            raise KeyError(f"charge {charge:+d} not in vocabulary") from None

    def bond_index(self, name: str) -> int:
        try:
            return self.bond_names.index(name)
        except ValueError:
            raise KeyError(f"bond type {name!r} not in vocabulary") from None

    def to_config(self) -> dict:
        return {
            "elements": list(self.elements),
            "bond_names": list(self.bond_names),
            "bond_orders": list(self.bond_orders),
            "charge_values": list(self.charge_values),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Vocabulary":
        return cls(
            elements=tuple(cfg["elements"]),
            bond_names=tuple(cfg["bond_names"]),
            bond_orders=tuple(float(o) for o in cfg["bond_orders"]),
            charge_values=tuple(int(c) for c in cfg["charge_values"]),
        )


def default_vocabulary(kekulized: bool = False) -> Vocabulary:
    """Drug-like default: 16 elements, charges -2..+2, optional aromatic bonds.

    With ``kekulized=True`` the aromatic category is dropped and aromatic
    input must already be expressed as alternating single/double bonds.
    """
    n = 4 if kekulized else 5
    return Vocabulary(
        elements=GEOM_DRUGS_ELEMENTS,
        bond_names=BOND_NAMES[:n],
        bond_orders=BOND_ORDERS[:n],
        charge_values=(-2, -1, 0, 1, 2),
    )


class ValenceTable:
    """Lookup of allowed total valences per (element, formal charge).

    Total valence is the sum of bond orders on an atom, with aromatic bonds
    counting 1.5. An empty set means no bonded arrangement is accepted;
    a set containing 0 marks a monatomic ion (e.g. Cl-) as the one case
    where a zero valence is legitimate.
    """

    def __init__(self, entries: dict[tuple[str, int], frozenset[float]]):
        self.entries = {k: frozenset(v) for k, v in entries.items()}

    def allowed(self, element: str, charge: int) -> frozenset[float] | None:
        """Allowed valence set, or None when the pair is not tabulated."""
        return self.entries.get((element, charge))

    def covers(self, vocab: Vocabulary) -> bool:
        return all(
            (el, ch) in self.entries
            for el in vocab.elements
            for ch in vocab.charge_values
        )

    def to_json(self) -> str:
        payload = {
            "version": 1,
            "entries": {
                f"{el} {ch:+d}": sorted(vals)
                for (el, ch), vals in sorted(self.entries.items())
            },
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ValenceTable":
        payload = json.loads(text)
        entries = {}
        for key, vals in payload["entries"].items():
            el, ch = key.split()
            entries[(el, int(ch))] = frozenset(float(v) for v in vals)
        return cls(entries)

    @classmethod
    def from_file(cls, path) -> "ValenceTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def default_valence_table() -> ValenceTable:
    """Table shipped with the package (data/valences.json), user-overridable."""
    text = resources.files("molgen.data").joinpath("valences.json").read_text("utf-8")
    return ValenceTable.from_json(text)


def _check_one_hot(mat: np.ndarray, what: str) -> None:
    if mat.ndim != 2:
        raise ValueError(f"{what} must be 2-D, got shape {mat.shape}")
    rowsum = mat.sum(axis=1)
    if not np.allclose(rowsum, 1.0, atol=1e-8):
        raise ValueError(f"{what} rows must sum to 1")
    if np.any(mat < -1e-12):
        raise ValueError(f"{what} has negative entries")


@dataclass(frozen=True)
class Molecule:
    """Immutable molecule record over a fixed Vocabulary.

    Arrays are stored read-only; derive modified copies through the
    ``with_*`` helpers.
    """

    coords: np.ndarray
    atom_types: np.ndarray
    bonds: np.ndarray
    charges: np.ndarray
    vocab: Vocabulary
    name: str = ""
    # set True to skip invariant checks for hot loops building many molecules
    _trusted: bool = field(default=False, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        atom_types = np.asarray(self.atom_types, dtype=np.float64)
        bonds = np.asarray(self.bonds, dtype=np.float64)
        charges = np.asarray(self.charges, dtype=np.float64)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "atom_types", atom_types)
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "charges", charges)
        if not self._trusted:
            self._validate()
        for arr in (coords, atom_types, bonds, charges):
            arr.setflags(write=False)

    def _validate(self) -> None:
        n = self.coords.shape[0]
        if n < 1:
            raise ValueError("molecule must contain at least one atom")
        if self.coords.shape != (n, 3):
            raise ValueError(f"coords must be ({n}, 3), got {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords contain non-finite values")
        _check_one_hot(self.atom_types, "atom_types")
        _check_one_hot(self.charges, "charges")
        if self.atom_types.shape != (n, self.vocab.n_elements):
            raise ValueError("atom_types shape does not match vocabulary")
        if self.charges.shape != (n, self.vocab.n_charges):
            raise ValueError("charges shape does not match vocabulary")
        b = self.vocab.n_bond_types
        if self.bonds.shape != (n, n, b):
            raise ValueError(f"bonds must be ({n}, {n}, {b}), got {self.bonds.shape}")
        rowsum = self.bonds.sum(axis=2)
        if not np.allclose(rowsum, 1.0, atol=1e-8):
            raise ValueError("bond entries must be one-hot over bond categories")
        if not np.allclose(self.bonds, np.swapaxes(self.bonds, 0, 1), atol=1e-12):
            raise ValueError("bond tensor must be symmetric")
        diag = self.bonds[np.arange(n), np.arange(n), :]
        if not np.allclose(diag[:, 0], 1.0, atol=1e-12):
            raise ValueError('bond diagonal must be the "none" category')

    # -- derived views ------------------------------------------------

    @property
    def n_atoms(self) -> int:
        return self.coords.shape[0]

    @property
    def element_indices(self) -> np.ndarray:
        return np.argmax(self.atom_types, axis=1)

    @property
    def symbols(self) -> list[str]:
        return [self.vocab.elements[i] for i in self.element_indices]

    @property
    def charge_ints(self) -> np.ndarray:
        idx = np.argmax(self.charges, axis=1)
        return np.asarray([self.vocab.charge_values[i] for i in idx])

    @property
    def bond_indices(self) -> np.ndarray:
        """N x N matrix of bond category indices (0 where no bond)."""
        return np.argmax(self.bonds, axis=2)

    def bond_order_matrix(self) -> np.ndarray:
        orders = np.asarray(self.vocab.bond_orders)
        return orders[self.bond_indices]

    def neighbors(self, i: int) -> np.ndarray:
        return np.nonzero(self.bond_indices[i] != 0)[0]

    def graph_equal(self, other: "Molecule") -> bool:
        """Same element sequence, bond categories, and charges (coords ignored)."""
        return (
            self.n_atoms == other.n_atoms
            and self.symbols == other.symbols
            and np.array_equal(self.bond_indices, other.bond_indices)
            and np.array_equal(self.charge_ints, other.charge_ints)
        )

    def with_coords(self, coords: np.ndarray, name: str | None = None) -> "Molecule":
        return Molecule(
            coords=np.array(coords, dtype=np.float64),
            atom_types=self.atom_types,
            bonds=self.bonds,
            charges=self.charges,
            vocab=self.vocab,
            name=self.name if name is None else name,
            _trusted=False,
        )

    # -- construction -------------------------------------------------

    @classmethod
    def from_graph(
        cls,
        symbols: list[str],
        coords: np.ndarray,
        bond_pairs: list[tuple[int, int, str]] | None = None,
        charge_ints: list[int] | None = None,
        vocab: Vocabulary | None = None,
        name: str = "",
    ) -> "Molecule":
        """Build from symbols, coordinates, and sparse (i, j, bond_name) edges."""
        vocab = vocab or default_vocabulary()
        n = len(symbols)
        atom_types = np.zeros((n, vocab.n_elements))
        for i, sym in enumerate(symbols):
            atom_types[i, vocab.element_index(sym)] = 1.0
        bonds = np.zeros((n, n, vocab.n_bond_types))
        bonds[:, :, 0] = 1.0
        for i, j, bname in bond_pairs or []:
            k = vocab.bond_index(bname)
            bonds[i, j, :] = 0.0
            bonds[j, i, :] = 0.0
            bonds[i, j, k] = 1.0
            bonds[j, i, k] = 1.0
        charges = np.zeros((n, vocab.n_charges))
        charge_ints = charge_ints or [0] * n
        for i, c in enumerate(charge_ints):
            charges[i, vocab.charge_index(int(c))] = 1.0
        return cls(
            coords=np.asarray(coords, dtype=np.float64),
            atom_types=atom_types,
            bonds=bonds,
            charges=charges,
            vocab=vocab,
            name=name,
        )


def atom_valences(mol: Molecule) -> np.ndarray:
    """Per-atom total valence: sum of numeric bond orders over all partners.

    Aromatic bonds contribute 1.5, absent bonds 0; the result is
    permutation-equivariant by construction.
    """
    return mol.bond_order_matrix().sum(axis=1)
