"""Neural-field equations with random data: solvers, a-priori bound
verification, and Monte Carlo forward uncertainty quantification."""

__version__ = "0.1.0"

from .domain import Domain, build_grid2d, build_interval, load_mesh
from .operators import (
    Field,
    KappaSet,
    PhaseSpace,
    apply_kernel,
    compute_kappas,
    field_norm,
    growth_bound,
    kernel_norm,
    kernel_norm_bound,
    vector_field,
)
from .random_data import (
    DataRealization,
    NoiseSpec,
    derive_seed,
    eval_firing,
    eval_firing_deriv,
    eval_forcing,
    sample_realization,
)
from .solver import PicardTrace, SolutionPath, picard_solve, rk_solve, voc_residual
from .bounds import BoundsReport, check_bounds, lp_regularity_estimate, theoretical_bounds
from .projection import (
    Projector,
    build_interpolatory,
    build_orthogonal,
    project_field,
    projected_kappas,
    solve_projected,
)
from .uq import SolverOptions, UqSummary, estimate_lp, run_monte_carlo

__all__ = [name for name in dir() if not name.startswith("_")]
