"""Monte Carlo forward uncertainty propagation.

Samples independent data realizations (seed i derived from the base seed by
a SplitMix64 step), solves each one, checks its a-priori bounds, and
accumulates mean/variance fields of the final-time state with a
deterministic pairwise moment reduction: partial (count, mean, M2) blocks
are merged in sample-index order along a fixed binary tree, so the summary
is bit-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import check_bounds, lp_regularity_estimate, lp_regularity_estimate_c1
from .domain import Domain
from .errors import MonteCarloError, NumericalError, ValidationError
from .operators import Field, KappaSet, as_space, compute_kappas, kernel_norm_bound
from .random_data import NoiseSpec, derive_seed, sample_realization
from .solver import SolutionPath, picard_solve, rk_solve

#: Abort threshold: more than this fraction of failed samples kills the run.
MAX_FAILURE_FRACTION = 0.10


@dataclass
class SolverOptions:
    """Per-sample solver configuration shared by the drivers and the CLI."""

    method: str = "rk"
    time_steps: int = 200
    tol: float = 1e-10
    max_iter: int = 200
    rtol: float = 1e-6
    atol: float = 1e-9
    output_steps: int = 200


@dataclass
class SampleResult:
    index: int
    seed: int
    path: SolutionPath = field(repr=False)
    kappas: KappaSet = field(repr=False)
    c0: float = 0.0
    c1: float = 0.0
    bounds_pass: bool = False


@dataclass
class LpReport:
    c0: float
    c1: float
    c0_bound: float
    c1_bound: float


@dataclass
class UqSummary:
    sample_count: int
    mean_final: Field
    var_final: Field
    mean_c0: float
    lp_norms: dict
    bound_pass_rate: float
    failed_seeds: list


def _merge_moments(a, b):
    # Chan et al. pairwise combination of (count, mean, M2)
    na, ma, m2a = a
    nb, mb, m2b = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = m2a + m2b + delta * delta * (na * nb / n)
    return (n, mean, m2)


class _PairwiseMoments:
    """Streaming mean/M2 with a binary-counter pairwise merge tree.

    The tree shape depends only on how many values were pushed, and pushes
    happen in sample-index order, so the reduction is independent of
    scheduling and numerically reproducible.
    """

    def __init__(self):
        self._stack = []  # (count, mean, M2), counts strictly decreasing

    def push(self, values: np.ndarray):
        block = (1, values.astype(float), np.zeros_like(values, dtype=float))
        while self._stack and self._stack[-1][0] == block[0]:
            block = _merge_moments(self._stack.pop(), block)
        self._stack.append(block)

    def finalize(self):
        if not self._stack:
            raise ValidationError("no samples accumulated")
        block = self._stack[-1]
        for other in reversed(self._stack[:-1]):
            block = _merge_moments(other, block)
        return block


def _resolve_workers(workers: int | None) -> int:
    cap = os.environ.get("NFUQ_THREADS")
    cap = int(cap) if cap else None
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    if cap is not None:
        workers = min(workers, cap)
    return max(1, workers)


def solve_sample(
    spec: NoiseSpec,
    domain: Domain,
    space,
    T: float,
    index: int,
    base_seed: int,
    options: SolverOptions,
) -> SampleResult:
    """Sample, solve, and bound-check one realization (pure in its inputs)."""
    seed = derive_seed(base_seed, index)
    real = sample_realization(spec, domain, seed)
    if options.method == "picard":
        path, _ = picard_solve(
            real, space, domain, T,
            time_steps=options.time_steps, tol=options.tol, max_iter=options.max_iter,
        )
    else:
        path = rk_solve(
            real, space, domain, T,
            rtol=options.rtol, atol=options.atol, output_steps=options.output_steps,
        )
    kappas = compute_kappas(real, space, domain, time_grid=path.times)
    report = check_bounds(path, kappas, real.mode)
    return SampleResult(
        index=index,
        seed=seed,
        path=path,
        kappas=kappas,
        c0=path.c0_norm(),
        c1=path.c1_norm(),
        bounds_pass=report.all_pass,
    )


def estimate_lp(results: list[SampleResult], p_values, mode: str, T: float,
                kappa_w_bound: float | None = None) -> dict:
    """Power-mean norms of the sample paths with theorem-side constants."""
    if not results:
        raise ValidationError("estimate_lp needs at least one sample")
    paths = [r.path for r in results]
    kappas = [r.kappas for r in results]
    out = {}
    for p in p_values:
        emp0, bnd0 = lp_regularity_estimate(paths, p, kappas, mode, T, kappa_w_bound)
        emp1, bnd1 = lp_regularity_estimate_c1(paths, p, kappas, mode, T)
        out[p] = LpReport(c0=emp0, c1=emp1, c0_bound=bnd0, c1_bound=bnd1)
    return out


def run_monte_carlo(
    spec: NoiseSpec,
    domain: Domain,
    space,
    T: float,
    n_samples: int,
    base_seed: int,
    options: SolverOptions | None = None,
    workers: int | None = None,
    p_values=(1, 2, 4),
    on_sample=None,
) -> UqSummary:
    """Run the forward-UQ loop and return mean/variance fields and Lp norms.

    `on_sample(result)` is invoked in sample-index order for every successful
    sample (the CLI uses it to serialize per-sample fields).  Individual
    solver failures are recorded and excluded; more than 10% failures aborts
    with :class:`MonteCarloError`.
    """
    space = as_space(space)
    if n_samples < 2:
        raise ValidationError(f"need at least 2 samples, got {n_samples}")
    options = options or SolverOptions()

    def job(i):
        try:
            return solve_sample(spec, domain, space, T, i, base_seed, options)
        except NumericalError as exc:
            return (i, derive_seed(base_seed, i), exc)

    workers = _resolve_workers(workers)
    if workers == 1:
        outcomes = map(job, range(n_samples))
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        outcomes = pool.map(job, range(n_samples))

    moments = _PairwiseMoments()
    results = []
    failed = []
    for outcome in outcomes:  # index order regardless of completion order
        if isinstance(outcome, tuple):
            failed.append(outcome[:2])
            continue
        results.append(outcome)
        moments.push(outcome.path.states[-1])
        if on_sample is not None:
            on_sample(outcome)
    if workers > 1:
        pool.shutdown()

    if len(failed) > MAX_FAILURE_FRACTION * n_samples:
        raise MonteCarloError(
            f"{len(failed)}/{n_samples} samples failed "
            f"(first failure: seed {failed[0][1]})"
        )
    if len(results) < 2:
        raise MonteCarloError("fewer than 2 successful samples; no variance estimate")

    count, mean, m2 = moments.finalize()
    var = m2 / (count - 1)

    kw_bound = None
    if spec.mode == "linear":
        kw_bound = kernel_norm_bound(spec, domain, space)
    lp = estimate_lp(results, p_values, spec.mode, T, kw_bound)

    return UqSummary(
        sample_count=len(results),
        mean_final=Field(mean, space, domain),
        var_final=Field(var, space, domain),
        mean_c0=float(np.mean([r.c0 for r in results])),
        lp_norms=lp,
        bound_pass_rate=float(np.mean([r.bounds_pass for r in results])),
        failed_seeds=failed,
    )
