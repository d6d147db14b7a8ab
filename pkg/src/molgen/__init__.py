"""molgen: generative dynamics and benchmarks for 3D molecules.

Continuous (denoising / flow-matching) and discrete (categorical diffusion /
discrete flow) interpolants, an equivariant transformer denoiser on a
built-in reverse-mode tape, molecule file I/O, and the evaluation metric
suite, wired together by the ``molgen`` command-line harness.
"""

__version__ = "0.1.0"

from .molecule import (  # noqa: F401
    Molecule,
    ValenceTable,
    Vocabulary,
    atom_valences,
    default_valence_table,
    default_vocabulary,
)
from .molio import parse_sdf_v2000, parse_xyz, write_sdf, write_sdf_v2000, write_xyz  # noqa: F401
from .geom import kabsch_rmsd, kabsch_rotation, random_rotation, remove_com  # noqa: F401
from .schedules import (  # noqa: F401
    Schedule,
    TimeDistribution,
    TrackSchedules,
    cfm_vector_field,
    ddpm_loss,
    ddpm_step,
    euler_step,
    interpolate,
    invert_interpolant,
    noise_to_eps_param,
    rotational_align,
    sample_com_free_noise,
    sample_time,
    score_to_vector_field,
)
from .discrete import (  # noqa: F401
    TransitionKernel,
    build_uniform_kernel,
    d3pm_cross_entropy,
    dfm_interpolate,
    dfm_step,
    forward_marginal,
    posterior_step,
)
from .metrics import (  # noqa: F401
    CoverageConfig,
    atom_stable,
    connected_valid,
    coverage_amr,
    relaxation_geometry,
    relaxation_report,
    size_sweep,
    stability_report,
    w_angles,
    w_torsions,
    wasserstein1_1d,
)
