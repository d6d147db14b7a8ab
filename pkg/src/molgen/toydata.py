"""Small synthetic molecules for toy training runs and demos.

Three template families, one template per atom count in 6..10. Every
template is neutral, connected, and valence-stable under the shipped table,
so a model that reproduces the graphs scores perfectly on the 2D metrics.

* ``organics``: methanol, methylamine, ethane, ethanol, ethylamine;
  idealized tetrahedral sketches with many equivalent hydrogens.
* ``distinct``: halide-rich molecules in which every element appears at
  most once, so atoms are individually identifiable from their type alone
  (no permutation ambiguity, but the one-of-each composition is the
  hardest target for per-atom categorical sampling).
* ``hybrid``: distinct heavy-atom skeletons with a few hydrogens, each
  identifiable through its unique heavy partner; a middle ground between
  the two above.
"""

from __future__ import annotations

import numpy as np

from .geom import random_rotation
from .molecule import Molecule, Vocabulary, default_vocabulary

__all__ = ["template_molecule", "template_sizes", "synthetic_dataset"]

_T = np.array([
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
]) / np.sqrt(3.0)

_CH, _CC, _CO, _CN, _OH, _NH = 1.09, 1.54, 1.43, 1.47, 0.96, 1.01


def _methanol():
    c = np.zeros(3)
    o = _CO * _T[0]
    coords = [c, o, _CH * _T[1], _CH * _T[2], _CH * _T[3], o + _OH * -_T[1]]
    symbols = ["C", "O", "H", "H", "H", "H"]
    bonds = [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (1, 5, "single")]
    return symbols, coords, bonds


def _methylamine():
    c = np.zeros(3)
    n = _CN * _T[0]
    coords = [c, n, _CH * _T[1], _CH * _T[2], _CH * _T[3],
              n + _NH * -_T[1], n + _NH * -_T[2]]
    symbols = ["C", "N", "H", "H", "H", "H", "H"]
    bonds = [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (1, 5, "single"), (1, 6, "single")]
    return symbols, coords, bonds


def _ethane():
    c1 = np.zeros(3)
    c2 = _CC * _T[0]
    coords = [c1, c2,
              _CH * _T[1], _CH * _T[2], _CH * _T[3],
              c2 + _CH * -_T[1], c2 + _CH * -_T[2], c2 + _CH * -_T[3]]
    symbols = ["C", "C", "H", "H", "H", "H", "H", "H"]
    bonds = [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (1, 5, "single"), (1, 6, "single"), (1, 7, "single")]
    return symbols, coords, bonds


def _ethanol():
    c1 = np.zeros(3)
    c2 = _CC * _T[0]
    o = c2 + _CO * -_T[1]
    coords = [c1, c2, o,
              _CH * _T[1], _CH * _T[2], _CH * _T[3],
              c2 + _CH * -_T[2], c2 + _CH * -_T[3],
              o + _OH * _T[2]]
    symbols = ["C", "C", "O", "H", "H", "H", "H", "H", "H"]
    bonds = [(0, 1, "single"), (1, 2, "single"),
             (0, 3, "single"), (0, 4, "single"), (0, 5, "single"),
             (1, 6, "single"), (1, 7, "single"), (2, 8, "single")]
    return symbols, coords, bonds


def _ethylamine():
    c1 = np.zeros(3)
    c2 = _CC * _T[0]
    n = c2 + _CN * -_T[1]
    coords = [c1, c2, n,
              _CH * _T[1], _CH * _T[2], _CH * _T[3],
              c2 + _CH * -_T[2], c2 + _CH * -_T[3],
              n + _NH * _T[0], n + _NH * _T[2]]
    symbols = ["C", "C", "N", "H", "H", "H", "H", "H", "H", "H"]
    bonds = [(0, 1, "single"), (1, 2, "single"),
             (0, 3, "single"), (0, 4, "single"), (0, 5, "single"),
             (1, 6, "single"), (1, 7, "single"),
             (2, 8, "single"), (2, 9, "single")]
    return symbols, coords, bonds


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _halomethanol():
    # C(F)(Cl)(Br)(O-H): every element once
    c = np.zeros(3)
    f = 1.35 * _T[0]
    cl = 1.77 * _T[1]
    br = 1.94 * _T[2]
    o = 1.43 * _T[3]
    h = o + 0.96 * -_T[0]
    return (["C", "F", "Cl", "Br", "O", "H"], [c, f, cl, br, o, h],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (4, 5, "single")])


def _haloamine():
    # C(N(H)(F))(Cl)(Br)(I)
    c = np.zeros(3)
    n = 1.47 * _T[0]
    cl = 1.77 * _T[1]
    br = 1.94 * _T[2]
    i = 2.14 * _T[3]
    h = n + 1.01 * -_T[1]
    f = n + 1.40 * -_T[2]
    return (["C", "N", "Cl", "Br", "I", "H", "F"], [c, n, cl, br, i, h, f],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (1, 5, "single"), (1, 6, "single")])


def _halophosphite():
    # C(P(O(H))(F))(Cl)(Br)(I)
    c = np.zeros(3)
    p = 1.85 * _T[0]
    cl = 1.77 * _T[1]
    br = 1.94 * _T[2]
    i = 2.14 * _T[3]
    o = p + 1.60 * -_T[1]
    f = p + 1.58 * -_T[2]
    h = o + 0.96 * -_T[3]
    return (["C", "P", "Cl", "Br", "I", "O", "F", "H"], [c, p, cl, br, i, o, f, h],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (1, 5, "single"), (1, 6, "single"), (5, 7, "single")])


def _halothioether():
    # C(N(H)(S(F)))(O(I))(Cl)(Br)
    c = np.zeros(3)
    n = 1.47 * _T[0]
    o = 1.43 * _T[1]
    cl = 1.77 * _T[2]
    br = 1.94 * _T[3]
    h = n + 1.01 * -_T[1]
    s = n + 1.70 * -_T[2]
    f = s + 1.60 * -_T[3]
    i = o + 2.10 * -_T[0]
    return (["C", "N", "O", "Cl", "Br", "H", "S", "F", "I"],
            [c, n, o, cl, br, h, s, f, i],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (1, 5, "single"), (1, 6, "single"), (6, 7, "single"), (2, 8, "single")])


def _haloring():
    # four-membered ring C-N-S-O with a silyl halide branch and iodine
    c = np.zeros(3)
    n = np.array([1.47, 0.0, 0.0])
    s = np.array([2.05, 1.55, 0.0])
    o = np.array([0.75, 2.10, 0.3])
    si = c + 1.87 * _unit([-1.0, -0.8, 1.0])
    f = si + 1.57 * _unit([-1.0, 0.8, 1.2])
    cl = si + 2.02 * _unit([-1.2, -1.0, -0.6])
    br = si + 2.18 * _unit([0.6, -1.4, 1.4])
    i = c + 2.14 * _unit([0.4, -1.0, -1.3])
    h = n + 1.01 * _unit([0.8, -0.9, 0.9])
    return (["C", "N", "S", "O", "Si", "F", "Cl", "Br", "I", "H"],
            [c, n, s, o, si, f, cl, br, i, h],
            [(0, 1, "single"), (1, 2, "single"), (2, 3, "single"), (3, 0, "single"),
             (0, 4, "single"), (4, 5, "single"), (4, 6, "single"), (4, 7, "single"),
             (0, 8, "single"), (1, 9, "single")])


def _hybrid6():
    # C(H)(F)(Cl)(O-H): distinct heavies, hydrogens identified by parent
    c = np.zeros(3)
    f = 1.35 * _T[0]
    cl = 1.77 * _T[1]
    o = 1.43 * _T[2]
    h_c = 1.09 * _T[3]
    h_o = o + 0.96 * -_T[0]
    return (["C", "F", "Cl", "O", "H", "H"], [c, f, cl, o, h_c, h_o],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (3, 5, "single")])


def _hybrid7():
    # C(H)(F)(Cl)(N(H)(H))
    c = np.zeros(3)
    f = 1.35 * _T[0]
    cl = 1.77 * _T[1]
    n = 1.47 * _T[2]
    h_c = 1.09 * _T[3]
    h_n1 = n + 1.01 * -_T[0]
    h_n2 = n + 1.01 * -_T[3]
    return (["C", "F", "Cl", "N", "H", "H", "H"], [c, f, cl, n, h_c, h_n1, h_n2],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"),
             (0, 4, "single"), (3, 5, "single"), (3, 6, "single")])


def _hybrid8():
    # C(H)(F)(Cl)(P(H)(O-H))
    c = np.zeros(3)
    f = 1.35 * _T[0]
    cl = 1.77 * _T[1]
    p = 1.85 * _T[2]
    h_c = 1.09 * _T[3]
    o = p + 1.60 * -_T[0]
    h_p = p + 1.42 * -_T[3]
    h_o = o + 0.96 * -_T[1]
    return (["C", "F", "Cl", "P", "H", "O", "H", "H"],
            [c, f, cl, p, h_c, o, h_p, h_o],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (3, 5, "single"), (3, 6, "single"), (5, 7, "single")])


def _hybrid9():
    # C(H)(F)(O-H)(N(H)(S-H))
    c = np.zeros(3)
    f = 1.35 * _T[0]
    o = 1.43 * _T[1]
    n = 1.47 * _T[2]
    h_c = 1.09 * _T[3]
    h_o = o + 0.96 * -_T[2]
    s = n + 1.70 * -_T[0]
    h_n = n + 1.01 * -_T[3]
    h_s = s + 1.34 * -_T[1]
    return (["C", "F", "O", "N", "H", "H", "S", "H", "H"],
            [c, f, o, n, h_c, h_o, s, h_n, h_s],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (2, 5, "single"), (3, 6, "single"), (3, 7, "single"), (6, 8, "single")])


def _hybrid10():
    # C(H)(H)(F)(Si(H)(Cl)(S(O-H))): one small symmetric pair of hydrogens
    c = np.zeros(3)
    si = 1.87 * _T[0]
    f = 1.35 * _T[1]
    h_c1 = 1.09 * _T[2]
    h_c2 = 1.09 * _T[3]
    cl = si + 2.02 * -_T[1]
    h_si = si + 1.48 * -_T[2]
    s = si + 2.14 * -_T[3]
    o = s + 1.66 * _unit(_T[0] + _T[1])
    h_o = o + 0.96 * _unit(_T[2] - _T[3])
    return (["C", "Si", "F", "H", "H", "Cl", "H", "S", "O", "H"],
            [c, si, f, h_c1, h_c2, cl, h_si, s, o, h_o],
            [(0, 1, "single"), (0, 2, "single"), (0, 3, "single"), (0, 4, "single"),
             (1, 5, "single"), (1, 6, "single"), (1, 7, "single"),
             (7, 8, "single"), (8, 9, "single")])


_FAMILIES = {
    "organics": {6: _methanol, 7: _methylamine, 8: _ethane, 9: _ethanol, 10: _ethylamine},
    "distinct": {6: _halomethanol, 7: _haloamine, 8: _halophosphite,
                 9: _halothioether, 10: _haloring},
    "hybrid": {6: _hybrid6, 7: _hybrid7, 8: _hybrid8, 9: _hybrid9, 10: _hybrid10},
}


def template_sizes(family: str = "organics") -> list[int]:
    return sorted(_FAMILIES[family])


def template_molecule(n_atoms: int, vocab: Vocabulary | None = None, name: str = "",
                      family: str = "organics") -> Molecule:
    templates = _FAMILIES[family]
    if n_atoms not in templates:
        raise ValueError(f"no {family} template with {n_atoms} atoms; have {sorted(templates)}")
    symbols, coords, bonds = templates[n_atoms]()
    return Molecule.from_graph(symbols, np.asarray(coords), bonds,
                               None, vocab or default_vocabulary(),
                               name or f"{family}_{n_atoms}")


def synthetic_dataset(count: int, rng: np.random.Generator,
                      sizes: list[int] | None = None,
                      jitter: float = 0.02,
                      vocab: Vocabulary | None = None,
                      family: str = "organics") -> list[Molecule]:
    """Templates with per-sample coordinate jitter and a random rotation."""
    sizes = sizes or template_sizes(family)
    vocab = vocab or default_vocabulary()
    out = []
    for i in range(count):
        n = int(rng.choice(sizes))
        base = template_molecule(n, vocab, family=family)
        coords = base.coords @ random_rotation(rng).T
        coords = coords + jitter * rng.standard_normal(coords.shape)
        out.append(base.with_coords(coords, name=f"toy_{i:04d}"))
    return out
