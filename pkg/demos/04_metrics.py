"""The benchmark metric suite on small synthetic molecules.

Run:  python demos/04_metrics.py
"""

import numpy as np

from molgen.geom import kabsch_rmsd, random_rotation
from molgen.metrics import (
    CoverageConfig,
    coverage_amr,
    relaxation_report,
    stability_report,
    w_angles,
    w_torsions,
    wasserstein1_1d,
)
from molgen.molecule import default_valence_table
from molgen.toydata import synthetic_dataset

rng = np.random.default_rng(3)
table = default_valence_table()

reference = synthetic_dataset(40, rng)
generated = synthetic_dataset(40, np.random.default_rng(99), jitter=0.08)

rep = stability_report(generated, table)
print("2D:  atom stability", round(rep.atom_stability, 3),
      " molecule stability", round(rep.molecule_stability, 3),
      " connected validity", round(rep.connected_validity, 3))

print("\nW1 basics:", wasserstein1_1d([0.0], [1.0]),
      wasserstein1_1d([0.0, 0.0], [0.0, 1.0]))
print("bond-angle W1 (jittered vs reference):", round(w_angles(generated, reference), 4))
print("torsion W1   (jittered vs reference):", round(w_torsions(generated, reference), 4))

# Conformer ensembles: two generated per reference, judged by Kabsch RMSD.
ref_sets, gen_sets = [], []
for mol in reference[:10]:
    refs = [mol.coords]
    gens = [mol.coords + 0.05 * rng.standard_normal(mol.coords.shape),
            mol.coords @ random_rotation(rng).T + 1.0 * rng.standard_normal(3)]
    ref_sets.append(refs)
    gen_sets.append(gens)
cov = coverage_amr(gen_sets, ref_sets, CoverageConfig(delta=0.75))
print("\ncoverage precision mean:", round(cov.cov_precision_mean, 3),
      " AMR precision mean:", round(cov.amr_precision_mean, 3))
print("coverage recall mean:   ", round(cov.cov_recall_mean, 3),
      " AMR recall mean:   ", round(cov.amr_recall_mean, 3))

# Relaxation deltas: a structure against a slightly perturbed "relaxed" twin.
pairs = [(m, m.with_coords(m.coords + 0.01 * rng.standard_normal(m.coords.shape)))
         for m in reference[:10]]
energies = [(5.0 + rng.random(), 5.0) for _ in pairs]
relax = relaxation_report(pairs, energies)
print("\nrelaxation:", "bond", round(relax.bond_length_delta, 4), "A |",
      "angle", round(relax.bond_angle_delta, 3), "deg |",
      "torsion", round(relax.torsion_delta, 3), "deg |",
      "median dE", round(relax.median_delta_e, 3), "kcal/mol")

print("\nKabsch: rigid motion recovered to",
      kabsch_rmsd(reference[0].coords,
                  reference[0].coords @ random_rotation(rng).T + rng.standard_normal(3)))
