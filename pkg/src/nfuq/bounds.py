"""A-priori solution bounds and their verification against computed paths.

For one realization with input magnitudes (kappa_w, kappa_f, kappa_g,
kappa_v, kappa_D) the solution obeys explicit bounds:

linear mode (exponential-in-time, via variation of constants + Gronwall):
    ||u(t)||  <= (kappa_v + kappa_g t) e^{kappa_w t}          =: M(t)
    ||u||_C0  <= M(T)                                          =: M0
    ||u||_C1  <= kappa_g + (2 + kappa_w) M0                    =: M1

nonlinear mode (time-homogeneous, via majorization of the bounded terms):
    kappa     := kappa_g + kappa_D kappa_w kappa_f
    M(t) = M0 := 2 max(kappa_v, kappa)
    M1        := 2 M0 + kappa

These hold for the discrete Nystrom system exactly (the same quadrature
defines both the dynamics and the constants), so a violation beyond the
small relative slack indicates a solver or constant-computation bug, not a
failure of the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .operators import KappaSet
from .solver import SolutionPath

#: Relative slack absorbing time-grid and rounding error in bound checks.
CHECK_SLACK = 1e-8

_MARGIN_FLOOR = 1e-12


@dataclass
class BoundsReport:
    """Theoretical constants, observed norms, and pass/fail flags."""

    mode: str
    m0: float
    m1: float
    m_curve: Callable[[float], float] = field(repr=False)
    observed_c0: float | None = None
    observed_c1: float | None = None
    pass_pointwise: bool | None = None
    pass_c0: bool | None = None
    pass_c1: bool | None = None
    margin: float | None = None

    @property
    def all_pass(self) -> bool:
        return bool(self.pass_pointwise and self.pass_c0 and self.pass_c1)


def theoretical_bounds(kappas: KappaSet, mode: str, T: float) -> BoundsReport:
    """Fill the bound constants for one realization; no path involved."""
    kv, kg, kw = kappas.kappa_v, kappas.kappa_g, kappas.kappa_w
    if mode == "linear":
        def m_curve(t):
            return (kv + kg * t) * math.exp(kw * t)

        m0 = m_curve(T)
        m1 = kg + (2.0 + kw) * m0
    else:
        kap = kg + kappas.kappa_D * kw * kappas.kappa_f
        m0 = 2.0 * max(kv, kap)
        m1 = 2.0 * m0 + kap

        def m_curve(t, _m0=m0):
            return _m0

    return BoundsReport(mode=mode, m0=m0, m1=m1, m_curve=m_curve)


def check_bounds(
    path: SolutionPath, kappas: KappaSet, mode: str, T: float | None = None
) -> BoundsReport:
    """Assert the pointwise, C0, and C1 bounds against a computed path.

    Each check allows a relative slack of CHECK_SLACK; the report's margin is
    the smallest relative headroom over the three checks.
    """
    if path.states.shape[0] != len(path.times):
        raise ValidationError("path has mismatched time grid and state count")
    if path.states.shape[1] != path.domain.n:
        raise ValidationError("path states do not match the domain node count")
    if T is None:
        T = float(path.times[-1])

    report = theoretical_bounds(kappas, mode, T)
    norms = path.state_norms()
    curve = np.array([report.m_curve(t) for t in path.times])

    report.observed_c0 = path.c0_norm()
    report.observed_c1 = path.c1_norm()
    report.pass_pointwise = bool(np.all(norms <= curve * (1.0 + CHECK_SLACK)))
    report.pass_c0 = report.observed_c0 <= report.m0 * (1.0 + CHECK_SLACK)
    report.pass_c1 = report.observed_c1 <= report.m1 * (1.0 + CHECK_SLACK)

    margins = [
        float(np.min((curve - norms) / np.maximum(curve, _MARGIN_FLOOR))),
        (report.m0 - report.observed_c0) / max(report.m0, _MARGIN_FLOOR),
        (report.m1 - report.observed_c1) / max(report.m1, _MARGIN_FLOOR),
    ]
    report.margin = min(margins)
    return report


def lp_sample_bound_c0(kappas: KappaSet, mode: str, T: float) -> float:
    """Per-sample C0 majorant used by the moment-side Lp constants."""
    return theoretical_bounds(kappas, mode, T).m0


def lp_regularity_estimate(
    paths: list[SolutionPath],
    p: int,
    kappas: list[KappaSet],
    mode: str,
    T: float,
    kappa_w_bound: float | None = None,
):
    """Empirical Lp(Omega, C0) estimate and its theorem-side constant.

    empirical = (mean_i c0_i^p)^(1/p) over the sample paths.  The bound is
    the explicit constant with expectations replaced by sample means:

    linear:    (2^{p-1} e^{p T kw_max} (mean kappa_v^p + T^p mean kappa_g^p))^{1/p},
               where kw_max is an essential bound on kappa_w over the
               parameter box (see operators.kernel_norm_bound);
    nonlinear: (mean M0_i^p)^{1/p} with the per-sample time-homogeneous M0.

    Both dominate the empirical estimate sample-by-sample, so the inequality
    is exact at any sample size, not just in the limit.
    """
    if not paths:
        raise ValidationError("lp_regularity_estimate needs at least one path")
    if len(paths) != len(kappas):
        raise ValidationError("need one KappaSet per path")
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}")

    c0 = np.array([path.c0_norm() for path in paths])
    empirical = float(np.mean(c0**p) ** (1.0 / p))

    if mode == "linear":
        if kappa_w_bound is None:
            raise ValidationError(
                "linear mode needs kappa_w_bound (essential bound on the kernel norm)"
            )
        kv = np.array([k.kappa_v for k in kappas])
        kg = np.array([k.kappa_g for k in kappas])
        inner = np.mean(kv**p) + T**p * np.mean(kg**p)
        bound = float(
            (2.0 ** (p - 1) * math.exp(p * T * kappa_w_bound) * inner) ** (1.0 / p)
        )
    else:
        m0 = np.array([lp_sample_bound_c0(k, mode, T) for k in kappas])
        bound = float(np.mean(m0**p) ** (1.0 / p))
    return empirical, bound


def lp_regularity_estimate_c1(
    paths: list[SolutionPath],
    p: int,
    kappas: list[KappaSet],
    mode: str,
    T: float,
):
    """C1 analogue: empirical (mean c1^p)^{1/p} against the M1 sample moments."""
    if not paths:
        raise ValidationError("lp_regularity_estimate_c1 needs at least one path")
    c1 = np.array([path.c1_norm() for path in paths])
    m1 = np.array([theoretical_bounds(k, mode, T).m1 for k in kappas])
    return float(np.mean(c1**p) ** (1.0 / p)), float(np.mean(m1**p) ** (1.0 / p))
