"""Benchmark metric suite.

Covers the 2D graph checks (per-atom valence stability, whole-molecule
stability, connectivity-based validity), 1D Wasserstein distances over bond
angle and torsion distributions, conformer-ensemble coverage and average
minimum RMSD, and the geometry/energy deltas between generated structures
and their relaxed counterparts. Everything is a pure function of its inputs
and deterministic, so reports are reproducible bit for bit.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import kabsch_rmsd
from .molecule import Molecule, ValenceTable, atom_valences

logger = logging.getLogger(__name__)

__all__ = [
    "StabilityReport",
    "CoverageConfig",
    "CoverageResult",
    "RelaxationReport",
    "GeometryDeltas",
    "SweepResult",
    "atom_stable",
    "stability_report",
    "connected_valid",
    "wasserstein1_1d",
    "bond_angle_observations",
    "torsion_observations",
    "w_angles",
    "w_torsions",
    "kabsch_rmsd",
    "coverage_amr",
    "relaxation_geometry",
    "relaxation_report",
    "size_sweep",
]

_VALENCE_TOL = 1e-9


# ---------------------------------------------------------------------------
# 2D stability and validity
# ---------------------------------------------------------------------------

def atom_stable(mol: Molecule, i: int, table: ValenceTable) -> bool:
    """True when atom i's total valence appears in the lookup table for its
    element and formal charge; untabulated pairs count as unstable."""
    valence = float(atom_valences(mol)[i])
    allowed = table.allowed(mol.symbols[i], int(mol.charge_ints[i]))
    if allowed is None:
        logger.warning("no valence entry for (%s, %+d); counted unstable",
                       mol.symbols[i], int(mol.charge_ints[i]))
        return False
    return any(abs(valence - v) < _VALENCE_TOL for v in allowed)


def _molecule_atom_flags(mol: Molecule, table: ValenceTable) -> np.ndarray:
    valences = atom_valences(mol)
    symbols = mol.symbols
    charges = mol.charge_ints
    flags = np.zeros(mol.n_atoms, dtype=bool)
    for i in range(mol.n_atoms):
        allowed = table.allowed(symbols[i], int(charges[i]))
        if allowed is None:
            logger.warning("no valence entry for (%s, %+d); counted unstable",
                           symbols[i], int(charges[i]))
            continue
        flags[i] = any(abs(float(valences[i]) - v) < _VALENCE_TOL for v in allowed)
    return flags


def _single_component(mol: Molecule) -> bool:
    n = mol.n_atoms
    if n == 1:
        return True
    adj = mol.bond_indices != 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def connected_valid(mol: Molecule, table: ValenceTable) -> bool:
    """Single connected bond graph and every atom valence-stable.

    This is the shipped proxy for sanitization-based validity; it is
    systematically stricter/looser than cheminformatics sanitizers in edge
    cases and is documented as such.
    """
    return _single_component(mol) and bool(_molecule_atom_flags(mol, table).all())


@dataclass
class StabilityReport:
    n_molecules: int
    n_atoms: int
    atom_stability: float
    molecule_stability: float
    connected_validity: float
    per_size: dict[int, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_molecules": self.n_molecules,
            "n_atoms": self.n_atoms,
            "atom_stability": self.atom_stability,
            "molecule_stability": self.molecule_stability,
            "connected_validity": self.connected_validity,
            "per_size": {str(k): v for k, v in sorted(self.per_size.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def stability_report(mols: list[Molecule], table: ValenceTable) -> StabilityReport:
    """Fractions of stable atoms, stable molecules, and connected-valid
    molecules, with a per-atom-count breakdown."""
    if not mols:
        raise ValueError("empty molecule list")
    atom_total = 0
    atom_ok = 0
    rows: dict[int, dict] = {}
    mol_ok = 0
    valid_ok = 0
    for mol in mols:
        flags = _molecule_atom_flags(mol, table)
        stable = bool(flags.all())
        valid = stable and _single_component(mol)
        atom_total += mol.n_atoms
        atom_ok += int(flags.sum())
        mol_ok += stable
        valid_ok += valid
        row = rows.setdefault(mol.n_atoms, {"count": 0, "atom_ok": 0, "atom_total": 0,
                                            "stable": 0, "valid": 0})
        row["count"] += 1
        row["atom_ok"] += int(flags.sum())
        row["atom_total"] += mol.n_atoms
        row["stable"] += stable
        row["valid"] += valid
    per_size = {
        size: {
            "count": row["count"],
            "atom_stability": row["atom_ok"] / row["atom_total"],
            "molecule_stability": row["stable"] / row["count"],
            "connected_validity": row["valid"] / row["count"],
        }
        for size, row in rows.items()
    }
    return StabilityReport(
        n_molecules=len(mols),
        n_atoms=atom_total,
        atom_stability=atom_ok / atom_total,
        molecule_stability=mol_ok / len(mols),
        connected_validity=valid_ok / len(mols),
        per_size=per_size,
    )


# ---------------------------------------------------------------------------
# 1D Wasserstein machinery
# ---------------------------------------------------------------------------

def wasserstein1_1d(samples_a, samples_b, range_clamp: tuple[float, float] | None = None) -> float:
    """W1 between two empirical distributions on the line.

    Computed as the integral of |F_a - F_b| over the merged sample support
    (the sorted-quantile transport cost); symmetric, and zero exactly when
    the multisets coincide.
    """
    a = np.sort(np.asarray(samples_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(samples_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    if range_clamp is not None:
        lo, hi = range_clamp
        a = np.clip(a, lo, hi)
        b = np.clip(b, lo, hi)
    grid = np.sort(np.concatenate([a, b]))
    widths = np.diff(grid)
    if widths.size == 0:
        return 0.0
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * widths))


def _w1_periodic(samples_a, samples_b, period: float = 360.0) -> float:
    """Quantile-paired W1 where each pairing is charged the circular distance
    min(|a-b|, period-|a-b|); used for torsion angles."""
    a = np.sort(np.asarray(samples_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(samples_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    probs = np.unique(np.concatenate([
        np.arange(1, a.size) / a.size,
        np.arange(1, b.size) / b.size,
        [0.0, 1.0],
    ]))
    total = 0.0
    for lo, hi in zip(probs[:-1], probs[1:]):
        mid = 0.5 * (lo + hi)
        qa = a[min(int(mid * a.size), a.size - 1)]
        qb = b[min(int(mid * b.size), b.size - 1)]
        d = abs(qa - qb)
        total += (hi - lo) * min(d, period - d)
    return float(total)


# ---------------------------------------------------------------------------
# internal coordinates
# ---------------------------------------------------------------------------

def _angle_deg(xi, xj, xk) -> float:
    """Angle at the central atom j, in degrees within [0, 180]."""
    u = xi - xj
    v = xk - xj
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def _dihedral_deg(xi, xj, xk, xl) -> float:
    """Signed dihedral in degrees within (-180, 180]."""
    b1 = xj - xi
    b2 = xk - xj
    b3 = xl - xk
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    b2n = b2 / max(np.linalg.norm(b2), 1e-300)
    m1 = np.cross(n1, b2n)
    x = float(np.dot(n1, n2))
    y = float(np.dot(m1, n2))
    ang = math.degrees(math.atan2(y, x))
    return 180.0 if ang <= -180.0 else ang


def bond_angle_observations(mol: Molecule) -> list[tuple[str, float]]:
    """(central element, angle in degrees) for every bonded triple i-j-k."""
    out = []
    bond_idx = mol.bond_indices
    symbols = mol.symbols
    for j in range(mol.n_atoms):
        nbrs = np.nonzero(bond_idx[j] != 0)[0]
        for ai in range(len(nbrs)):
            for ak in range(ai + 1, len(nbrs)):
                i, k = int(nbrs[ai]), int(nbrs[ak])
                out.append((symbols[j], _angle_deg(mol.coords[i], mol.coords[j], mol.coords[k])))
    return out


def _bond_in_cycle(adj: np.ndarray, j: int, k: int) -> bool:
    """A bond is in a cycle iff its endpoints stay connected without it."""
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [j]
    seen[j] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj[u])[0]:
            if (u == j and v == k) or (u == k and v == j):
                continue
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen[k])


def torsion_observations(mol: Molecule) -> list[tuple[str, float]]:
    """(central bond category, torsion angle mod 360) over rotatable bonds.

    A bond j-k is rotatable when it is a single bond outside any cycle and
    both ends have degree >= 2; one torsion is measured per such bond,
    using the lexicographically smallest neighbor pair (i, l).
    """
    out = []
    bond_idx = mol.bond_indices
    adj = bond_idx != 0
    single = mol.vocab.bond_index("single")
    for j in range(mol.n_atoms):
        for k in range(j + 1, mol.n_atoms):
            if bond_idx[j, k] != single:
                continue
            nbr_j = [int(v) for v in np.nonzero(adj[j])[0] if v != k]
            nbr_k = [int(v) for v in np.nonzero(adj[k])[0] if v != j]
            if not nbr_j or not nbr_k:
                continue
            if _bond_in_cycle(adj, j, k):
                continue
            i, l = min(nbr_j), min(nbr_k)
            ang = _dihedral_deg(mol.coords[i], mol.coords[j], mol.coords[k], mol.coords[l])
            out.append((mol.vocab.bond_names[bond_idx[j, k]], ang % 360.0))
    return out


def _weighted_w1(gen_obs: list[tuple[str, float]], ref_obs: list[tuple[str, float]],
                 w1_fn) -> float:
    """Reference-frequency-weighted W1 across per-category distributions.

    Categories present in the reference but absent from the generated data
    are charged against a degenerate distribution at the reference median
    (and logged), so the sum stays defined.
    """
    if not ref_obs:
        raise ValueError("reference set has no observations")
    ref_by: dict[str, list[float]] = {}
    for key, val in ref_obs:
        ref_by.setdefault(key, []).append(val)
    gen_by: dict[str, list[float]] = {}
    for key, val in gen_obs:
        gen_by.setdefault(key, []).append(val)
    total_ref = sum(len(v) for v in ref_by.values())
    result = 0.0
    for key in sorted(ref_by):
        weight = len(ref_by[key]) / total_ref
        gen_vals = gen_by.get(key)
        if not gen_vals:
            logger.warning("category %r missing from generated data; "
                           "using degenerate distribution at the reference median", key)
            gen_vals = [float(np.median(ref_by[key]))]
        result += weight * w1_fn(gen_vals, ref_by[key])
    return result


def w_angles(gen: list[Molecule], ref: list[Molecule]) -> float:
    """Weighted W1 between bond-angle distributions, grouped by the central
    atom's element and weighted by reference frequency. Degrees."""
    gen_obs = [o for m in gen for o in bond_angle_observations(m)]
    ref_obs = [o for m in ref for o in bond_angle_observations(m)]
    if not ref_obs:
        raise ValueError("no bonded triples in the reference set")
    return _weighted_w1(gen_obs, ref_obs, wasserstein1_1d)


def w_torsions(gen: list[Molecule], ref: list[Molecule]) -> float:
    """Weighted periodic W1 between torsion distributions, grouped by the
    rotatable bond's category. Callers restrict inputs to valid molecules."""
    gen_obs = [o for m in gen for o in torsion_observations(m)]
    ref_obs = [o for m in ref for o in torsion_observations(m)]
    if not ref_obs:
        raise ValueError("no rotatable torsions in the reference set")
    return _weighted_w1(gen_obs, ref_obs, _w1_periodic)


# ---------------------------------------------------------------------------
# conformer coverage / AMR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageConfig:
    delta: float = 0.75       # RMSD threshold, Angstrom
    gen_per_ref: int = 2      # generated conformers per reference conformer

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass
class CoverageResult:
    cov_precision_mean: float
    cov_precision_median: float
    amr_precision_mean: float
    amr_precision_median: float
    cov_recall_mean: float
    cov_recall_median: float
    amr_recall_mean: float
    amr_recall_median: float
    per_molecule: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "cov_precision_mean", "cov_precision_median",
            "amr_precision_mean", "amr_precision_median",
            "cov_recall_mean", "cov_recall_median",
            "amr_recall_mean", "amr_recall_median")}
        d["per_molecule"] = self.per_molecule
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _coords_of(x) -> np.ndarray:
    return x.coords if isinstance(x, Molecule) else np.asarray(x, dtype=np.float64)


def coverage_amr(gen_sets, ref_sets, cfg: CoverageConfig = CoverageConfig()) -> CoverageResult:
    """Coverage and average-minimum-RMSD, precision and recall.

    Per molecule, precision scans each generated conformer for its nearest
    reference; recall swaps the roles. Coverages are fractions in [0, 1];
    the aggregate is both the mean and the median across molecules.
    """
    if len(gen_sets) != len(ref_sets) or not gen_sets:
        raise ValueError("generated and reference conformer groupings must align")
    rows = []
    for gens, refs in zip(gen_sets, ref_sets):
        if not len(gens) or not len(refs):
            raise ValueError("empty conformer set")
        g = [_coords_of(x) for x in gens]
        r = [_coords_of(x) for x in refs]
        rmsd = np.array([[kabsch_rmsd(gk, rl) for rl in r] for gk in g])
        min_over_ref = rmsd.min(axis=1)   # best match per generated conformer
        min_over_gen = rmsd.min(axis=0)   # best match per reference conformer
        rows.append({
            "cov_precision": float((min_over_ref < cfg.delta).mean()),
            "amr_precision": float(min_over_ref.mean()),
            "cov_recall": float((min_over_gen < cfg.delta).mean()),
            "amr_recall": float(min_over_gen.mean()),
        })
    agg = {}
    for key in ("cov_precision", "amr_precision", "cov_recall", "amr_recall"):
        vals = np.array([row[key] for row in rows])
        agg[f"{key}_mean"] = float(vals.mean())
        agg[f"{key}_median"] = float(np.median(vals))
    return CoverageResult(per_molecule=rows, **agg)


# ---------------------------------------------------------------------------
# relaxation deltas
# ---------------------------------------------------------------------------

@dataclass
class GeometryDeltas:
    bond: list[tuple[tuple, float]]
    angle: list[tuple[tuple, float]]
    torsion: list[tuple[tuple, float]]


def _enumerate_bonds(mol: Molecule):
    bond_idx = mol.bond_indices
    for i in range(mol.n_atoms):
        for j in range(i + 1, mol.n_atoms):
            if bond_idx[i, j] != 0:
                yield i, j


def _enumerate_angles(mol: Molecule):
    adj = mol.bond_indices != 0
    for j in range(mol.n_atoms):
        nbrs = np.nonzero(adj[j])[0]
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                yield int(nbrs[a]), j, int(nbrs[b])


def _enumerate_torsions(mol: Molecule):
    """Every bonded 4-atom path i-j-k-l with distinct atoms, one direction."""
    adj = mol.bond_indices != 0
    for j in range(mol.n_atoms):
        for k in np.nonzero(adj[j])[0]:
            k = int(k)
            if j >= k:
                continue
            for i in np.nonzero(adj[j])[0]:
                i = int(i)
                if i == k:
                    continue
                for l in np.nonzero(adj[k])[0]:
                    l = int(l)
                    if l == j or l == i:
                        continue
                    yield i, j, k, l


def relaxation_geometry(init: Molecule, relaxed: Molecule) -> GeometryDeltas:
    """Per-internal-coordinate deltas between a structure and its relaxation.

        bond:    |r_init - r_opt|
        angle:   min(|d|, 180 - |d|),  d = theta_init - theta_opt
        torsion: min(|d|, 360 - |d|),  d = phi_init - phi_opt (signed)

    Both molecules must share the identical bond graph and atom order.
    """
    if not init.graph_equal(relaxed):
        raise ValueError("initial and relaxed structures have different graphs")
    symbols = init.symbols
    bnames = init.vocab.bond_names
    bond_idx = init.bond_indices

    bond_rows = []
    for i, j in _enumerate_bonds(init):
        r0 = np.linalg.norm(init.coords[i] - init.coords[j])
        r1 = np.linalg.norm(relaxed.coords[i] - relaxed.coords[j])
        a, b = sorted((symbols[i], symbols[j]))
        key = (a, bnames[bond_idx[i, j]], b)
        bond_rows.append((key, abs(float(r0 - r1))))

    angle_rows = []
    for i, j, k in _enumerate_angles(init):
        t0 = _angle_deg(init.coords[i], init.coords[j], init.coords[k])
        t1 = _angle_deg(relaxed.coords[i], relaxed.coords[j], relaxed.coords[k])
        d = abs(t0 - t1)
        a, b = sorted((symbols[i], symbols[k]))
        key = (a, symbols[j], b)
        angle_rows.append((key, min(d, 180.0 - d)))

    torsion_rows = []
    for i, j, k, l in _enumerate_torsions(init):
        p0 = _dihedral_deg(init.coords[i], init.coords[j], init.coords[k], init.coords[l])
        p1 = _dihedral_deg(relaxed.coords[i], relaxed.coords[j], relaxed.coords[k], relaxed.coords[l])
        d = abs(p0 - p1)
        a, b = sorted((symbols[j], symbols[k]))
        key = (a, bnames[bond_idx[j, k]], b)
        torsion_rows.append((key, min(d, 360.0 - d)))

    return GeometryDeltas(bond=bond_rows, angle=angle_rows, torsion=torsion_rows)


@dataclass
class RelaxationReport:
    bond_length_delta: float
    bond_angle_delta: float
    torsion_delta: float
    n_pairs: int
    median_delta_e: float | None = None
    mean_delta_e: float | None = None

    def to_dict(self) -> dict:
        return {
            "bond_length_delta": self.bond_length_delta,
            "bond_angle_delta": self.bond_angle_delta,
            "torsion_delta": self.torsion_delta,
            "n_pairs": self.n_pairs,
            "median_delta_e": self.median_delta_e,
            "mean_delta_e": self.mean_delta_e,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _group_weighted_mean(rows: list[tuple[tuple, float]]) -> float:
    """Frequency-weighted mean of per-group means over (types) groups.

    With weights equal to group frequencies this reduces to the plain mean,
    but the grouped path is kept so per-group tables can be inspected.
    """
    if not rows:
        return 0.0
    groups: dict[tuple, list[float]] = {}
    for key, val in rows:
        groups.setdefault(key, []).append(val)
    total = sum(len(v) for v in groups.values())
    return float(sum(len(v) / total * np.mean(v) for v in groups.values()))


def relaxation_report(pairs: list[tuple[Molecule, Molecule]],
                      energies: list[tuple[float, float]] | None = None) -> RelaxationReport:
    """Aggregate geometry deltas (and optionally relaxation energies) over
    (initial, relaxed) pairs.

    Energies are (E_initial, E_optimized) in kcal/mol; the reported quantity
    is E_optimized - E_initial per pair, summarized by median and mean.
    """
    if not pairs:
        raise ValueError("no structure pairs")
    bond_rows: list[tuple[tuple, float]] = []
    angle_rows: list[tuple[tuple, float]] = []
    torsion_rows: list[tuple[tuple, float]] = []
    for init, relaxed in pairs:
        deltas = relaxation_geometry(init, relaxed)
        bond_rows.extend(deltas.bond)
        angle_rows.extend(deltas.angle)
        torsion_rows.extend(deltas.torsion)
    median_de = mean_de = None
    if energies is not None:
        de = np.array([opt - init for init, opt in energies], dtype=np.float64)
        median_de = float(np.median(de))
        mean_de = float(de.mean())
    return RelaxationReport(
        bond_length_delta=_group_weighted_mean(bond_rows),
        bond_angle_delta=_group_weighted_mean(angle_rows),
        torsion_delta=_group_weighted_mean(torsion_rows),
        n_pairs=len(pairs),
        median_delta_e=median_de,
        mean_delta_e=mean_de,
    )


# ---------------------------------------------------------------------------
# size sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    per_size: dict[int, StabilityReport]
    errors: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_size": {str(k): v.to_dict() for k, v in sorted(self.per_size.items())},
            "errors": {str(k): v for k, v in sorted(self.errors.items())},
        }


def size_sweep(source, sizes: list[int], count: int, table: ValenceTable) -> SweepResult:
    """Stability/validity as a function of molecule size.

    `source(n_atoms, count)` must return `count` molecules with `n_atoms`
    atoms each; a failing size is recorded as all-zero with its diagnostic
    instead of aborting the sweep.
    """
    per_size: dict[int, StabilityReport] = {}
    errors: dict[int, str] = {}
    for size in sizes:
        try:
            mols = source(size, count)
            if len(mols) != count:
                raise ValueError(f"source returned {len(mols)} molecules, expected {count}")
            per_size[size] = stability_report(mols, table)
        except Exception as exc:  # per-size isolation is the contract
            errors[size] = f"{type(exc).__name__}: {exc}"
            per_size[size] = StabilityReport(
                n_molecules=0, n_atoms=0, atom_stability=0.0,
                molecule_stability=0.0, connected_validity=0.0)
    return SweepResult(per_size=per_size, errors=errors)


# ---------------------------------------------------------------------------
# plain-text tables
# ---------------------------------------------------------------------------

def render_table(headers: list[str], rows: list[list]) -> str:
    """Aligned fixed-width text table used by the report writers."""
    cells = [[str(h) for h in headers]]
    for row in rows:
        cells.append([f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    widths = [max(len(r[c]) for r in cells) for c in range(len(headers))]
    lines = []
    for idx, row in enumerate(cells):
        lines.append("  ".join(s.rjust(w) for s, w in zip(row, widths)))
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
