"""Shared fixtures and builders for the test suite."""

import dataclasses

import numpy as np
import pytest

from nfuq import NoiseSpec, build_interval, sample_realization
from nfuq.operators import KappaSet


def tame_spec(mode="nonlinear", **overrides):
    """Desk-scale spec with the cortical-run structure but reduced ranges.

    Keeps kappa_N small enough that Picard converges in a few dozen sweeps
    on unit-scale horizons.
    """
    base = dict(
        mode=mode,
        f_range=(0.0, 1.5),
        mu_range=(2.0, 6.0),
        perturb_range=(0.0, 0.5),
        amplitude=2.0,
        center=(2.5, 0.0, 0.0),
        widths=(1.5, 1.0, 30.0),
        speed_range=(1.0, 3.0),
    )
    base.update(overrides)
    return NoiseSpec(**base)


def decay_spec(value=1.0):
    """Zero kernel, zero forcing, constant initial state: u(t) = value * e^{-t}."""
    return NoiseSpec(
        mode="linear",
        kernel_scale=0.0,
        amplitude=0.0,
        initial_kind="constant",
        initial_range=(value, value),
    )


def constant_forcing_spec(c=1.0):
    """Zero kernel, g identically c (exact in float64), zero initial state.

    The transverse Gaussian factor is exp(-x^2 / (2 * 1e18)), which rounds to
    1.0 for any desk-scale coordinate; speed zero pins the pulse factor at
    sech(0)^2 = 1.
    """
    return NoiseSpec(
        mode="linear",
        kernel_scale=0.0,
        amplitude=c,
        widths=(1e9, 1.0, 1e9),
        center=(0.0, 0.0, 0.0),
        speed_range=(0.0, 0.0),
        initial_kind="zero",
    )


def pm1_spec():
    """Zero kernel/forcing, initial state = +1 or -1 with equal probability."""
    return NoiseSpec(
        mode="linear",
        kernel_scale=0.0,
        amplitude=0.0,
        initial_kind="constant",
        initial_range=(-1.0, 1.0),
        initial_law="sign",
    )


def with_kernel(real, kernel):
    """Copy of a realization with the kernel matrix replaced (tests only)."""
    return dataclasses.replace(real, kernel_matrix=np.array(kernel, dtype=float))


def with_initial(real, values):
    return dataclasses.replace(real, initial_values=np.array(values, dtype=float))


def make_kappas(mode="linear", kappa_w=0.0, kappa_f=0.0, kappa_fprime=0.0,
                kappa_g=0.0, kappa_v=0.0, kappa_D=1.0):
    """KappaSet with the derived fields filled consistently."""
    if mode == "linear":
        kappa_n = 1.0 + kappa_w
        intercept = kappa_g
    else:
        kappa_n = 1.0 + kappa_D * kappa_w * kappa_fprime
        intercept = kappa_g + kappa_D * kappa_w * kappa_f
    return KappaSet(
        mode=mode, kappa_w=kappa_w, kappa_f=kappa_f, kappa_fprime=kappa_fprime,
        kappa_g=kappa_g, kappa_v=kappa_v, kappa_D=kappa_D,
        kappa_N=kappa_n, bn_intercept=intercept,
    )


@pytest.fixture
def unit_interval():
    return build_interval(0.0, 1.0, 21)


@pytest.fixture
def decay_realization(unit_interval):
    return sample_realization(decay_spec(), unit_interval, seed=1)
