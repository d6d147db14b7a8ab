"""Metric bindings over plain arrays and index lists.

``BoundMolecule`` mirrors the primary molecule record with scriptable
fields: coordinates, integer element indices, sparse (i, j, bond_index)
edges, and integer formal charges. Validation happens in the primary
constructor, so shape problems raise the primary package's own messages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from molgen.geom import kabsch_rmsd as _kabsch_rmsd
from molgen.metrics import (
    CoverageConfig,
    coverage_amr as _coverage_amr,
    relaxation_geometry as _relaxation_geometry,
    relaxation_report as _relaxation_report,
    stability_report as _stability_report,
    w_angles as _w_angles,
    w_torsions as _w_torsions,
)
from molgen.molecule import (
    Molecule,
    ValenceTable,
    Vocabulary,
    default_valence_table,
    default_vocabulary,
)

__all__ = [
    "BoundMolecule",
    "kabsch_rmsd",
    "stability_report",
    "w_angles",
    "w_torsions",
    "coverage_amr",
    "relaxation_geometry",
    "relaxation_report",
]


@dataclass
class BoundMolecule:
    """Array-level molecule: coords (N x 3), element indices (N), sparse
    bonds [(i, j, bond_category), ...], formal charges (N)."""

    coords: np.ndarray
    elements: list[int]
    bonds: list[tuple[int, int, int]] = field(default_factory=list)
    charges: list[int] | None = None
    name: str = ""

    def to_molecule(self, vocab: Vocabulary | None = None) -> Molecule:
        vocab = vocab or default_vocabulary()
        coords = np.asarray(self.coords, dtype=np.float64)
        n = coords.shape[0] if coords.ndim == 2 else 0
        atom_types = np.zeros((n, vocab.n_elements))
        for i, e in enumerate(self.elements):
            atom_types[i, int(e)] = 1.0
        bonds = np.zeros((n, n, vocab.n_bond_types))
        bonds[:, :, 0] = 1.0
        for i, j, k in self.bonds:
            bonds[i, j, :] = 0.0
            bonds[j, i, :] = 0.0
            bonds[i, j, int(k)] = 1.0
            bonds[j, i, int(k)] = 1.0
        charges = np.zeros((n, vocab.n_charges))
        charge_ints = self.charges if self.charges is not None else [0] * n
        for i, c in enumerate(charge_ints):
            charges[i, vocab.charge_values.index(int(c))] = 1.0
        return Molecule(coords=coords, atom_types=atom_types, bonds=bonds,
                        charges=charges, vocab=vocab, name=self.name)

    @classmethod
    def from_molecule(cls, mol: Molecule) -> "BoundMolecule":
        idx = mol.bond_indices
        bonds = [(i, j, int(idx[i, j]))
                 for i in range(mol.n_atoms) for j in range(i + 1, mol.n_atoms)
                 if idx[i, j] != 0]
        return cls(coords=np.array(mol.coords),
                   elements=[int(e) for e in mol.element_indices],
                   bonds=bonds,
                   charges=[int(c) for c in mol.charge_ints],
                   name=mol.name)


def _as_molecules(items, vocab=None):
    return [m.to_molecule(vocab) if isinstance(m, BoundMolecule) else m for m in items]


def kabsch_rmsd(a, b) -> float:
    return _kabsch_rmsd(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def stability_report(mols, valence_table: ValenceTable | str | None = None,
                     vocab: Vocabulary | None = None) -> dict:
    table = valence_table
    if table is None:
        table = default_valence_table()
    elif isinstance(table, str):
        table = ValenceTable.from_file(table)
    return _stability_report(_as_molecules(mols, vocab), table).to_dict()


def w_angles(gen, ref, vocab: Vocabulary | None = None) -> float:
    return _w_angles(_as_molecules(gen, vocab), _as_molecules(ref, vocab))


def w_torsions(gen, ref, vocab: Vocabulary | None = None) -> float:
    return _w_torsions(_as_molecules(gen, vocab), _as_molecules(ref, vocab))


def coverage_amr(gen_sets, ref_sets, delta: float = 0.75, gen_per_ref: int = 2) -> dict:
    cfg = CoverageConfig(delta=delta, gen_per_ref=gen_per_ref)
    gen = [[np.asarray(c, dtype=np.float64) for c in group] for group in gen_sets]
    ref = [[np.asarray(c, dtype=np.float64) for c in group] for group in ref_sets]
    return _coverage_amr(gen, ref, cfg).to_dict()


def relaxation_geometry(init: BoundMolecule, relaxed: BoundMolecule,
                        vocab: Vocabulary | None = None) -> dict:
    deltas = _relaxation_geometry(*_as_molecules([init, relaxed], vocab))
    return {
        "bond": [(list(k), v) for k, v in deltas.bond],
        "angle": [(list(k), v) for k, v in deltas.angle],
        "torsion": [(list(k), v) for k, v in deltas.torsion],
    }


def relaxation_report(pairs, energies=None, vocab: Vocabulary | None = None) -> dict:
    mol_pairs = [tuple(_as_molecules(p, vocab)) for p in pairs]
    energy_pairs = None
    if energies is not None:
        energy_pairs = [(float(a), float(b)) for a, b in energies]
    return _relaxation_report(mol_pairs, energy_pairs).to_dict()
