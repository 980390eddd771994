import math

import numpy as np
import pytest

from conftest import decay_spec, tame_spec

from nfuq import (
    Field,
    build_interpolatory,
    build_orthogonal,
    build_interval,
    compute_kappas,
    field_norm,
    project_field,
    projected_kappas,
    rk_solve,
    sample_realization,
    solve_projected,
)
from nfuq.errors import ValidationError
from nfuq.random_data import derive_seed


@pytest.fixture
def fine():
    return build_interval(0.0, 1.0, 41)


def test_partition_of_unity_and_idempotence(fine):
    for build in (build_interpolatory, build_orthogonal):
        proj = build(fine, 11)
        assert np.max(np.abs(proj.basis.sum(axis=1) - 1.0)) < 1e-12
        pp = proj.matrix @ proj.matrix
        assert np.max(np.abs(pp - proj.matrix)) < 1e-12
        assert proj.norm_estimate >= 1.0 - 1e-12


def test_identity_when_coarse_equals_fine(fine):
    proj = build_interpolatory(fine, fine.n)
    assert np.array_equal(proj.matrix, np.eye(fine.n))
    v = np.sin(3.0 * fine.nodes[:, 0])
    out = project_field(proj, Field(v, "C", fine))
    assert np.array_equal(out.values, v)


def test_affine_functions_reproduced_exactly(fine):
    proj = build_interpolatory(fine, 11)
    v = 0.7 + 2.0 * fine.nodes[:, 0]
    out = project_field(proj, Field(v, "C", fine))
    assert np.max(np.abs(out.values - v)) < 1e-13


def test_interpolation_error_second_order():
    fine = build_interval(0.0, 1.0, 257)
    v = np.sin(np.pi * fine.nodes[:, 0])
    errs = []
    for m in (9, 17, 33):
        proj = build_interpolatory(fine, m)
        out = project_field(proj, Field(v, "C", fine))
        errs.append(np.max(np.abs(out.values - v)))
    for coarse, finer in zip(errs, errs[1:]):
        assert 3.0 < coarse / finer < 5.0


def test_interpolatory_sup_contraction(fine):
    proj = build_interpolatory(fine, 21)
    assert proj.norm_estimate == pytest.approx(1.0, abs=1e-14)
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.normal(size=fine.n)
        out = project_field(proj, Field(v, "C", fine))
        assert field_norm(out) <= np.max(np.abs(v)) * (1 + 1e-14)


def test_orthogonal_l2_contraction(fine):
    proj = build_orthogonal(fine, 21)
    assert proj.norm_estimate == pytest.approx(1.0, abs=1e-9)
    rng = np.random.default_rng(2)
    for _ in range(100):
        v = Field(rng.normal(size=fine.n), "L2", fine)
        assert field_norm(project_field(proj, v)) <= field_norm(v) * (1 + 1e-10)


def test_nesting_divisibility_enforced(fine):
    with pytest.raises(ValidationError):
        build_interpolatory(fine, 12)  # 40 intervals not divisible by 11
    with pytest.raises(ValidationError):
        build_interpolatory(fine, 1)
    grid = build_interval(0.0, 1.0, 41)
    assert build_interpolatory(grid, 41).coarse_count == 41


def test_projected_kappas_identity(fine):
    real = sample_realization(tame_spec(), fine, seed=3)
    proj = build_interpolatory(fine, fine.n)
    full = compute_kappas(real, "C", fine, T=1.0)
    ident = projected_kappas(proj, real, "C", T=1.0)
    assert ident.kappa_w == pytest.approx(full.kappa_w, abs=1e-12)
    assert ident.kappa_g == pytest.approx(full.kappa_g, abs=1e-12)
    assert ident.kappa_v == pytest.approx(full.kappa_v, abs=1e-12)


def test_projected_kappas_dominated(fine):
    # kappa_{alpha,n} <= ||P_n|| kappa_alpha, with hat interpolatory norm 1 in C
    spec = tame_spec(initial_kind="bump", initial_range=(0.2, 0.8),
                     bump_center=(0.5, 0, 0), bump_width=0.3)
    for i in range(25):
        real = sample_realization(spec, fine, seed=derive_seed(31, i))
        for build, space in ((build_interpolatory, "C"), (build_orthogonal, "L2")):
            proj = build(fine, 11)
            full = compute_kappas(real, space, fine, T=1.0)
            kn = projected_kappas(proj, real, space, T=1.0)
            bound = proj.norm_estimate * (1 + 1e-8)
            assert kn.kappa_w <= bound * full.kappa_w
            assert kn.kappa_g <= bound * full.kappa_g
            assert kn.kappa_v <= bound * full.kappa_v


def test_power_iteration_matches_row_sum_oracle(fine):
    # in C the composed-operator norm has a closed form; power iteration in L2
    # must stay below the Hilbert-Schmidt kernel norm
    from nfuq.projection import _l2_operator_norm

    real = sample_realization(tame_spec(), fine, seed=9)
    proj = build_interpolatory(fine, 21)
    pw = proj.matrix @ (real.kernel_matrix * fine.weights[None, :])
    row_sum = float(np.max(np.sum(np.abs(pw), axis=1)))
    kn_c = projected_kappas(proj, real, "C", T=1.0)
    assert kn_c.kappa_w == row_sum
    l2_norm = _l2_operator_norm(pw, fine.weights)
    # cross-check against dense SVD in the weighted metric
    s = np.sqrt(fine.weights)
    svd = float(np.linalg.svd(pw * s[:, None] / s[None, :], compute_uv=False)[0])
    assert l2_norm == pytest.approx(svd, rel=1e-9)


def test_solve_projected_identity_matches_full(fine):
    real = sample_realization(tame_spec(), fine, seed=12)
    proj = build_interpolatory(fine, fine.n)
    path_p, report = solve_projected(proj, real, "C", T=1.0)
    path = rk_solve(real, "C", fine, T=1.0)
    assert np.max(np.abs(path_p.states - path.states)) < 1e-12
    assert report.all_pass


def test_projection_commutes_with_scalar_decay(fine):
    spec = decay_spec()
    spec = type(spec)(**{**{f.name: getattr(spec, f.name) for f in spec.__dataclass_fields__.values()},
                         "initial_kind": "bump", "initial_range": (1.0, 1.0),
                         "bump_center": (0.5, 0.0, 0.0), "bump_width": 0.2})
    real = sample_realization(spec, fine, seed=2)
    proj = build_interpolatory(fine, 21)
    path, _ = solve_projected(proj, real, "C", T=2.0)
    pv = proj.matrix @ real.initial_values
    for k, t in enumerate(path.times):
        assert np.max(np.abs(path.states[k] - math.exp(-t) * pv)) < 1e-5


def test_projected_bounds_hold_both_kinds(fine):
    for mode in ("linear", "nonlinear"):
        spec = tame_spec(mode=mode)
        for i in range(5):
            real = sample_realization(spec, fine, seed=derive_seed(61, i))
            for build, space in ((build_interpolatory, "C"), (build_orthogonal, "L2")):
                for size in (11, 21):
                    _, report = solve_projected(build(fine, size), real, space, T=3.0)
                    assert report.all_pass, (mode, space, size, report.margin)


def test_projected_picard_matches_projected_rk(fine):
    real = sample_realization(tame_spec(), fine, seed=14)
    proj = build_interpolatory(fine, 21)
    p_rk, _ = solve_projected(proj, real, "C", T=0.5, method="rk", output_steps=400)
    p_pi, _ = solve_projected(proj, real, "C", T=0.5, method="picard", time_steps=400)
    assert np.max(np.abs(p_rk.states - p_pi.states)) < 1e-4


def test_nested_refinement_converges_monotonically():
    fine = build_interval(0.0, 5.0, 161)
    real = sample_realization(tame_spec(), fine, seed=15)
    full = rk_solve(real, "C", fine, T=2.0)
    errs = []
    for size in (11, 21, 41):
        proj = build_interpolatory(fine, size)
        path, _ = solve_projected(proj, real, "C", T=2.0)
        errs.append(max(
            np.max(np.abs(path.states[k] - full.states[k]))
            for k in range(len(path.times))
        ))
    assert errs[0] > errs[1] > errs[2]
