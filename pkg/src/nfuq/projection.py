"""Interpolatory and orthogonal projectors onto nested hat-function subspaces.

The semi-discrete layer: a projector P onto the span of piecewise-linear hat
functions over a uniform coarse subgrid of a fine interval domain.  The
projected dynamics u' = P N(t, u), u(0) = P v inherit the a-priori bounds of
the full problem with the input magnitudes replaced by their projected
counterparts (kappa_{w,n} etc.), each dominated by ||P|| kappa_alpha.

Interpolatory projectors reproduce nodal values at the coarse nodes and have
sup-norm exactly 1 (hat bases are a nonnegative partition of unity);
orthogonal projectors solve the quadrature-weighted normal equations and
have weighted-2-norm exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsReport, check_bounds
from .domain import Domain
from .errors import ValidationError
from .operators import (
    Field,
    KappaSet,
    PhaseSpace,
    _derived_kappas,
    as_space,
    values_norm,
)
from .random_data import DataRealization, forcing_values
from .solver import SolutionPath, picard_solve, rk_solve


@dataclass
class Projector:
    """Projection onto a nested piecewise-linear subspace of a fine interval."""

    fine_domain: Domain
    coarse_indices: np.ndarray      # fine-node index of each coarse node
    basis: np.ndarray               # hat values phi_j(x_i), fine x coarse
    matrix: np.ndarray              # full fine -> fine action
    kind: str                       # "interpolatory" | "orthogonal"
    norm_estimate: float = field(default=1.0)

    @property
    def coarse_count(self) -> int:
        return len(self.coarse_indices)


def _hat_basis(fine: Domain, coarse_count: int):
    if fine.kind != "interval":
        raise ValidationError("projectors are built over interval domains only")
    nf = fine.n
    if not (2 <= coarse_count <= nf):
        raise ValidationError(
            f"coarse_count must lie in [2, {nf}], got {coarse_count}"
        )
    if (nf - 1) % (coarse_count - 1) != 0:
        raise ValidationError(
            f"coarse grid of {coarse_count} nodes does not nest in {nf} fine nodes: "
            f"{nf - 1} intervals not divisible by {coarse_count - 1}"
        )
    stride = (nf - 1) // (coarse_count - 1)
    idx = np.arange(0, nf, stride)
    xf = fine.nodes[:, 0]
    xc = xf[idx]
    basis = np.empty((nf, coarse_count))
    for j in range(coarse_count):
        e = np.zeros(coarse_count)
        e[j] = 1.0
        basis[:, j] = np.interp(xf, xc, e)
    return idx, basis


def _l2_operator_norm(matrix: np.ndarray, weights: np.ndarray,
                      tol: float = 1e-13, max_iter: int = 20000) -> float:
    """Induced L2(q) operator norm by power iteration on the normal matrix.

    Deterministic start vector; converges from below, so the estimate never
    overstates the norm.
    """
    s = np.sqrt(weights)
    b = matrix * s[:, None] / s[None, :]
    m = b.T @ b
    n = len(weights)
    z = 1.0 + np.arange(n) / (3.0 * n)  # deterministic, not orthogonal to extremes
    z /= np.linalg.norm(z)
    lam = 0.0
    for _ in range(max_iter):
        w = m @ z
        lam_new = float(z @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        z = w / norm_w
        if abs(lam_new - lam) <= tol * max(lam_new, 1e-30):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))


def build_interpolatory(fine: Domain, coarse_count: int) -> Projector:
    """Nodal-value projector: (P v)(x) = sum_j v(x_j) phi_j(x)."""
    idx, basis = _hat_basis(fine, coarse_count)
    matrix = np.zeros((fine.n, fine.n))
    matrix[:, idx] = basis
    norm_est = float(np.max(np.sum(np.abs(matrix), axis=1)))  # exact sup-norm
    return Projector(fine, idx, basis, matrix, "interpolatory", norm_est)


def build_orthogonal(fine: Domain, coarse_count: int) -> Projector:
    """Weighted-L2 projector: coefficients solve the hat-basis Gram system."""
    idx, basis = _hat_basis(fine, coarse_count)
    q = fine.weights
    gram = basis.T @ (q[:, None] * basis)  # tridiagonal, SPD, well-conditioned
    coef_map = np.linalg.solve(gram, basis.T * q[None, :])
    matrix = basis @ coef_map
    norm_est = _l2_operator_norm(matrix, q)
    return Projector(fine, idx, basis, matrix, "orthogonal", norm_est)


def project_field(proj: Projector, v: Field) -> Field:
    if len(v.values) != proj.fine_domain.n:
        raise ValidationError("field does not live on the projector's fine domain")
    return Field(proj.matrix @ v.values, v.space, v.domain)


def projected_kappas(
    proj: Projector,
    real: DataRealization,
    space,
    T: float = None,
    time_grid: np.ndarray | None = None,
) -> KappaSet:
    """Input magnitudes of the projected problem.

    kappa_{w,n} is the induced operator norm of the composed matrix P W:
    exact max-row-sum in C, power iteration in L2.  kappa_{g,n}, kappa_{v,n}
    are norms of projected data; firing magnitudes are unaffected by spatial
    projection.
    """
    space = as_space(space)
    domain = real.domain
    if time_grid is None:
        if T is None:
            raise ValidationError("projected_kappas needs either T or a time_grid")
        time_grid = np.linspace(0.0, T, 201)

    pw = proj.matrix @ (real.kernel_matrix * domain.weights[None, :])
    if space is PhaseSpace.C:
        kappa_w = float(np.max(np.sum(np.abs(pw), axis=1)))
    else:
        kappa_w = _l2_operator_norm(pw, domain.weights)

    if real.firing_params is None:
        kappa_f = kappa_fprime = 0.0
    else:
        fmax, steep, _ = real.firing_params
        kappa_f = abs(fmax)
        kappa_fprime = abs(fmax) * abs(steep) / 4.0

    kappa_g = max(
        values_norm(proj.matrix @ forcing_values(real, t), space, domain.weights)
        for t in np.atleast_1d(time_grid)
    )
    kappa_v = values_norm(proj.matrix @ real.initial_values, space, domain.weights)
    return _derived_kappas(
        real.mode, kappa_w, kappa_f, kappa_fprime, kappa_g, kappa_v, domain.measure
    )


def solve_projected(
    proj: Projector,
    real: DataRealization,
    space,
    T: float,
    method: str = "rk",
    **options,
) -> tuple[SolutionPath, BoundsReport]:
    """Solve the projected dynamics and check the projected a-priori bounds.

    Solver options are forwarded (picard: time_steps/tol/max_iter; rk:
    rtol/atol/output_steps).  The bound constants are built from the
    projected kappas evaluated on the solution's own time grid.
    """
    space = as_space(space)
    if method == "picard":
        time_steps = options.pop("time_steps", 200)
        kappas = projected_kappas(
            proj, real, space, time_grid=np.linspace(0.0, T, time_steps + 1)
        )
        path, _ = picard_solve(
            real,
            space,
            real.domain,
            T,
            time_steps=time_steps,
            projector=proj.matrix,
            kappas=kappas,
            **options,
        )
    elif method == "rk":
        path = rk_solve(real, space, real.domain, T, projector=proj.matrix, **options)
        kappas = projected_kappas(proj, real, space, time_grid=path.times)
    else:
        raise ValidationError(f"method must be 'picard' or 'rk', got {method!r}")

    report = check_bounds(path, kappas, real.mode, T)
    return path, report
