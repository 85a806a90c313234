"""Steklov-Dirichlet eigenvalues of perforated domains near the spherical shell."""

from .shell import (
    AsymptoticRegime,
    ShellGeometry,
    asymptotic_curve,
    coarse_upper_bound,
    radius_for_volume,
    shell_eigenfunction,
    shell_eigenvalue,
    unit_ball_volume,
    unit_sphere_area,
)
from .sphere import (
    HarmonicSpectrum,
    SphereFunction,
    SphereGrid,
    analyze,
    integrate,
    normalize_to_volume,
    random_perturbation,
    surface_gradient_sq,
    synthesize,
    volume_of_nearly_spherical,
    w1inf_norm,
)
from .functionals import (
    PerforatedDomain,
    WeightedPair,
    f_profile,
    h_profile,
    rayleigh_upper_bound,
    weighted_pair,
)
from .stability import (
    ExpansionResidual,
    StabilityReport,
    expansion_residuals,
    key_estimate_check,
    leading_constant,
    q_coefficients,
    quantitative_bound_check,
)
from .oracle import DtnSolution, assemble, build_mesh, oracle_sigma1, sign_and_simplicity_check, solve_sigma1

__version__ = "0.1.0"
