import dataclasses
import math

import numpy as np
import pytest

from conftest import constant_forcing_spec, decay_spec, tame_spec, with_kernel

from nfuq import (
    build_interval,
    compute_kappas,
    picard_solve,
    rk_solve,
    sample_realization,
    voc_residual,
)
from nfuq.errors import PicardConvergenceError, ValidationError
from nfuq.random_data import derive_seed
from nfuq.solver import SolutionPath


@pytest.fixture
def interval():
    return build_interval(0.0, 1.0, 21)


def _sup_err(path, exact):
    return max(
        np.max(np.abs(path.states[k] - exact(t))) for k, t in enumerate(path.times)
    )


def test_picard_exponential_decay(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    path, trace = picard_solve(real, "C", interval, T=2.0, time_steps=200)
    assert trace.converged
    assert _sup_err(path, lambda t: math.exp(-t)) < 5e-4
    assert np.array_equal(path.states[0], real.initial_values)


def test_picard_constant_forcing(interval):
    real = sample_realization(constant_forcing_spec(1.0), interval, seed=1)
    path, _ = picard_solve(real, "C", interval, T=2.0, time_steps=200)
    assert _sup_err(path, lambda t: 1.0 - math.exp(-t)) < 5e-4


def test_rk_analytic_cases(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    path = rk_solve(real, "C", interval, T=2.0)
    assert _sup_err(path, lambda t: math.exp(-t)) < 1e-5

    real = sample_realization(constant_forcing_spec(1.0), interval, seed=1)
    path = rk_solve(real, "C", interval, T=2.0)
    assert _sup_err(path, lambda t: 1.0 - math.exp(-t)) < 1e-5


def test_cross_solver_agreement_nonlinear():
    dom = build_interval(0.0, 5.0, 51)
    spec = tame_spec()
    real = sample_realization(spec, dom, seed=17)
    T = 0.3
    p_pic, _ = picard_solve(real, "C", dom, T=T, time_steps=1000)
    p_rk = rk_solve(real, "C", dom, T=T, output_steps=1000)
    diff = max(
        np.max(np.abs(p_pic.states[k] - p_rk.states[k])) for k in range(len(p_pic.times))
    )
    assert diff < 1e-4


def test_picard_grid_refinement_second_order(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    errs = []
    for steps in (50, 100, 200, 400):
        path, _ = picard_solve(real, "C", interval, T=2.0, time_steps=steps)
        errs.append(_sup_err(path, lambda t: math.exp(-t)))
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.0 < coarse / fine < 5.0


def test_picard_envelope_on_random_realizations():
    dom = build_interval(0.0, 5.0, 41)
    spec = tame_spec()
    for i in range(10):
        real = sample_realization(spec, dom, seed=derive_seed(7, i))
        probe = compute_kappas(real, "C", dom, T=1.0)
        T = min(2.0, 6.0 / probe.kappa_N)
        path, trace = picard_solve(real, "C", dom, T=T, time_steps=200)
        assert trace.converged
        assert len(trace.iterate_diffs) == trace.iterations
        for diff, env in zip(trace.iterate_diffs, trace.theoretical_envelope):
            assert diff <= env * (1 + 1e-6)


def test_picard_nonconvergence_carries_trace(interval):
    real = sample_realization(tame_spec(), interval, seed=3)
    with pytest.raises(PicardConvergenceError) as err:
        picard_solve(real, "C", interval, T=2.0, time_steps=100, tol=1e-12, max_iter=2)
    assert err.value.trace is not None
    assert err.value.trace.iterations == 2
    assert not err.value.trace.converged


def test_picard_uniqueness_of_fixed_point(interval):
    # zero starting iterate converges to the same path: the initial state
    # still enters through the integral-equation datum
    real = sample_realization(tame_spec(initial_kind="bump",
                                        initial_range=(0.5, 0.5),
                                        bump_center=(2.5, 0, 0)), interval, seed=5)
    tol = 1e-10
    a, _ = picard_solve(real, "C", interval, T=1.0, time_steps=100, tol=tol)
    b, _ = picard_solve(real, "C", interval, T=1.0, time_steps=100, tol=tol,
                        initial_iterate="zero")
    assert np.max(np.abs(a.states - b.states)) < 10 * tol


def test_rk_self_convergence_under_rtol_halving():
    dom = build_interval(0.0, 5.0, 31)
    real = sample_realization(tame_spec(), dom, seed=23)
    T = 1.5
    ref = rk_solve(real, "C", dom, T=T, rtol=1e-11, atol=1e-13)
    errs = []
    for rtol in (1e-4, 5e-5, 2.5e-5, 1.25e-5):
        path = rk_solve(real, "C", dom, T=T, rtol=rtol, atol=1e-12)
        errs.append(np.max(np.abs(path.states[-1] - ref.states[-1])))
    assert errs[0] > errs[1] > errs[2] > errs[3]


def test_rk_symmetric_kernel_spectral_bound():
    # linear, symmetric kernel, no forcing: ||u(t)|| <= e^{(kw - 1) t} ||v||
    dom = build_interval(0.0, 2.0, 25)
    rng = np.random.default_rng(8)
    a = rng.normal(scale=0.4, size=(dom.n, dom.n))
    spec = dataclasses.replace(
        decay_spec(), initial_kind="bump", initial_range=(1.0, 1.0),
        bump_center=(1.0, 0, 0), bump_width=0.5,
    )
    real = with_kernel(sample_realization(spec, dom, seed=2), (a + a.T) / 2.0)
    path = rk_solve(real, "L2", dom, T=3.0)
    k = compute_kappas(real, "L2", dom, time_grid=path.times)
    norms = path.state_norms()
    envelope = np.exp((k.kappa_w - 1.0) * path.times) * k.kappa_v
    assert np.all(norms <= envelope * (1 + 1e-6))


def test_rk_rejects_bad_arguments(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    with pytest.raises(ValidationError):
        rk_solve(real, "C", interval, T=-1.0)
    with pytest.raises(ValidationError):
        picard_solve(real, "C", interval, T=1.0, time_steps=1)


def test_voc_residual_exact_decay_path(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    times = np.linspace(0.0, 2.0, 201)
    states = np.exp(-times)[:, None] * real.initial_values[None, :]
    path = SolutionPath(times, states, -states, "C", interval)
    assert voc_residual(path, real) < 1e-10


def test_voc_residual_of_converged_picard_path():
    # tol dominates the O(h^2) mismatch between the two discrete integral forms
    dom = build_interval(0.0, 1.0, 21)
    real = sample_realization(tame_spec(), dom, seed=31)
    tol = 1e-4
    path, _ = picard_solve(real, "C", dom, T=1.0, time_steps=200, tol=tol)
    assert voc_residual(path, real) < 10 * tol


def test_voc_residual_detects_corruption(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    path, _ = picard_solve(real, "C", interval, T=2.0, time_steps=100)
    states = path.states.copy()
    states[40, 7] += 1.0
    bad = SolutionPath(path.times, states, path.derivs, "C", interval)
    assert voc_residual(bad, real) >= 0.5


def test_solution_path_norm_accessors(interval):
    real = sample_realization(decay_spec(), interval, seed=1)
    path, _ = picard_solve(real, "C", interval, T=2.0, time_steps=100)
    assert path.c0_norm() == pytest.approx(1.0, abs=1e-12)  # max at t = 0
    # derivative sup is |u'(0)| = 1 for pure decay
    assert path.c1_norm() == pytest.approx(2.0, abs=1e-3)
