"""Discrete nonlocal machinery: kernel norms, the kernel integral operator,
the pointwise firing map, and the full vector field u' = -u + W F(u) + g.

Two phase-space settings are supported throughout: continuous fields under
the sup norm, and square-integrable fields under the quadrature-weighted
2-norm.  All norms and operator bounds are computed for the *discrete*
Nystrom system, which keeps every a-priori inequality exact at the level the
solvers actually integrate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import Domain
from .errors import ValidationError
from .random_data import (
    DataRealization,
    NoiseSpec,
    base_kernel_matrix,
    eval_firing,
    forcing_values,
)


class PhaseSpace(str, Enum):
    """Functional setting: sup norm (C) or quadrature-weighted 2-norm (L2)."""

    C = "C"
    L2 = "L2"


def as_space(space) -> PhaseSpace:
    if isinstance(space, PhaseSpace):
        return space
    try:
        return PhaseSpace(space)
    except ValueError:
        raise ValidationError(f"phase space must be 'C' or 'L2', got {space!r}") from None


@dataclass
class Field:
    """Nodal values of one spatial field in a given phase space."""

    values: np.ndarray
    space: PhaseSpace
    domain: Domain

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.space = as_space(self.space)
        if self.values.shape != (self.domain.n,):
            raise ValidationError(
                f"field has {self.values.shape} values for {self.domain.n} nodes"
            )


def values_norm(values: np.ndarray, space: PhaseSpace, weights: np.ndarray) -> float:
    """Norm of raw nodal values: max |u_i| (C) or sqrt(sum q_i u_i^2) (L2)."""
    if as_space(space) is PhaseSpace.C:
        return float(np.max(np.abs(values)))
    return float(np.sqrt(np.dot(weights, values * values)))


def field_norm(u: Field) -> float:
    return values_norm(u.values, u.space, u.domain.weights)


def matrix_kernel_norm(kernel: np.ndarray, weights: np.ndarray, space: PhaseSpace) -> float:
    """Kernel norm of a nodal kernel matrix.

    C:  max_i sum_j q_j |K_ij|   (discrete max_x int |k(x, .)|)
    L2: sqrt(sum_ij q_i q_j K_ij^2)
    Both equal or dominate the induced operator norm of u -> K (q u).
    """
    if as_space(space) is PhaseSpace.C:
        return float(np.max(np.abs(kernel) @ weights))
    return float(np.sqrt(weights @ (kernel * kernel) @ weights))


def kernel_norm(real: DataRealization, space) -> float:
    """Kernel-space magnitude of one realization's synaptic kernel."""
    return matrix_kernel_norm(real.kernel_matrix, real.domain.weights, as_space(space))


def kernel_norm_bound(spec: NoiseSpec, domain: Domain, space) -> float:
    """Essential supremum of the kernel norm over the perturbation box.

    Both kernel norms are monotone in the entrywise magnitudes, so the
    supremum over the box [lo, hi] is attained by the entrywise envelope
    max(|k0 + lo|, |k0 + hi|) on the base-kernel support.  For nonnegative
    boxes this is the all-upper-corner kernel.
    """
    base = base_kernel_matrix(spec, domain)
    lo, hi = spec.perturb_range
    envelope = np.where(
        base != 0.0,
        np.maximum(np.abs(base + lo), np.abs(base + hi)),
        np.abs(base),
    )
    return matrix_kernel_norm(envelope, domain.weights, as_space(space))


def apply_kernel(real: DataRealization, u: Field) -> Field:
    """Kernel integral operator: (W u)_i = sum_j q_j K_ij u_j."""
    if u.domain is not real.domain and u.domain.n != real.domain.n:
        raise ValidationError("field and realization live on different domains")
    w = real.domain.weights
    return Field(real.kernel_matrix @ (w * u.values), u.space, u.domain)


def make_rhs(real: DataRealization):
    """Fast closure computing the vector field on raw nodal values.

    Weights are folded into the kernel matrix once; the firing map is the
    identity in linear mode and the saturating sigmoid otherwise.
    """
    kq = real.kernel_matrix * real.domain.weights[None, :]
    if real.firing_params is None:

        def rhs(t, u):
            return -u + kq @ u + forcing_values(real, t)

    else:

        def rhs(t, u):
            return -u + kq @ eval_firing(real, u) + forcing_values(real, t)

    return rhs


def vector_field(real: DataRealization, space, t: float, u: Field) -> Field:
    """Full vector field N(t, u) = -u + W F(u) + g(., t) as a Field."""
    return Field(make_rhs(real)(t, u.values), as_space(space), u.domain)


@dataclass(frozen=True)
class KappaSet:
    """Realization-wise input magnitudes and the derived Lipschitz data.

    kappa_f / kappa_fprime are zero in linear mode.  kappa_N is the Lipschitz
    constant of the vector field; bn_intercept the constant part of its growth
    bound, so that ||N(t, u)|| <= slope * ||u|| + bn_intercept with slope
    1 + kappa_w (linear) or 1 (nonlinear).
    """

    mode: str
    kappa_w: float
    kappa_f: float
    kappa_fprime: float
    kappa_g: float
    kappa_v: float
    kappa_D: float
    kappa_N: float
    bn_intercept: float


def growth_bound(kappas: KappaSet, unorm: float, mode: str) -> float:
    """Bound on ||N(t, u)|| given ||u|| = unorm."""
    if mode == "linear":
        return (1.0 + kappas.kappa_w) * unorm + kappas.kappa_g
    return unorm + kappas.kappa_w * kappas.kappa_D * kappas.kappa_f + kappas.kappa_g


def _derived_kappas(mode, kappa_w, kappa_f, kappa_fprime, kappa_g, kappa_v, measure):
    kappa_d = max(1.0, float(np.sqrt(measure)))
    if mode == "linear":
        kappa_n = 1.0 + kappa_w
        intercept = kappa_g
    else:
        kappa_n = 1.0 + kappa_d * kappa_w * kappa_fprime
        intercept = kappa_g + kappa_d * kappa_w * kappa_f
    return KappaSet(
        mode=mode,
        kappa_w=kappa_w,
        kappa_f=kappa_f,
        kappa_fprime=kappa_fprime,
        kappa_g=kappa_g,
        kappa_v=kappa_v,
        kappa_D=kappa_d,
        kappa_N=kappa_n,
        bn_intercept=intercept,
    )


def compute_kappas(
    real: DataRealization,
    space,
    domain: Domain | None = None,
    T: float = None,
    time_grid: np.ndarray | None = None,
) -> KappaSet:
    """All input magnitudes for one realization.

    The sigmoid suprema are closed-form (sup f = fmax, sup f' = fmax *
    steepness / 4); the forcing norm is the max over the solver time grid,
    a discretization of the sup over [0, T].
    """
    space = as_space(space)
    if domain is None:
        domain = real.domain
    if time_grid is None:
        if T is None:
            raise ValidationError("compute_kappas needs either T or an explicit time_grid")
        time_grid = np.linspace(0.0, T, 201)
    q = domain.weights

    kappa_w = kernel_norm(real, space)
    if real.firing_params is None:
        kappa_f = kappa_fprime = 0.0
    else:
        fmax, steep, _ = real.firing_params
        kappa_f = abs(fmax)
        kappa_fprime = abs(fmax) * abs(steep) / 4.0
    kappa_g = max(
        values_norm(forcing_values(real, t), space, q) for t in np.atleast_1d(time_grid)
    )
    kappa_v = values_norm(real.initial_values, space, q)
    return _derived_kappas(
        real.mode, kappa_w, kappa_f, kappa_fprime, kappa_g, kappa_v, domain.measure
    )
