"""Command-line entry point: solve / bounds / uq / project / selftest.

Every run writes a `summary.txt` (flat `key = value`, mirroring the config
format) containing the fully resolved configuration, seeds, package version,
and results, so a run can be reproduced bit-exactly from its summary.  Field
files are CSV with a coordinate header and 17-significant-digit floats.

Exit codes: 0 success, 1 validation/config error, 2 numerical failure,
3 bound-check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import check_bounds
from .config import RunConfig, config_items, parse_config
from .errors import ConfigError, NfuqError, NumericalError, ValidationError
from .operators import compute_kappas, kernel_norm_bound
from .projection import build_interpolatory, build_orthogonal, projected_kappas, solve_projected
from .random_data import derive_seed, sample_realization
from .solver import picard_solve, rk_solve, voc_residual
from .uq import run_monte_carlo

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_BOUNDS = 3


def _write_field(path: Path, domain, values):
    dim = domain.dim
    header = ",".join(f"x{i}" for i in range(dim)) + ",value"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for node, val in zip(domain.nodes, values):
            coords = ",".join(f"{c:.17g}" for c in node)
            fh.write(f"{coords},{val:.17g}\n")


def _write_summary(path: Path, cfg: RunConfig, extra: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nfuq_version = {__version__}\n")
        for key, value in config_items(cfg):
            fh.write(f"{key} = {value}\n")
        for key, value in extra.items():
            if isinstance(value, float):
                value = f"{value:.17g}"
            fh.write(f"{key} = {value}\n")


def _write_error(outdir: Path, stage: str, exc: Exception):
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "error.txt", "w", encoding="utf-8") as fh:
        fh.write(f"stage = {stage}\n")
        fh.write(f"type = {type(exc).__name__}\n")
        fh.write(f"message = {exc}\n")


def _solve_path(cfg: RunConfig, domain, real):
    if cfg.solver.method == "picard":
        path, _ = picard_solve(
            real, cfg.space, domain, cfg.T,
            time_steps=cfg.solver.time_steps,
            tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
        )
        return path
    return rk_solve(
        real, cfg.space, domain, cfg.T,
        rtol=cfg.solver.rtol, atol=cfg.solver.atol,
        output_steps=cfg.solver.output_steps,
    )


def cmd_solve(cfg: RunConfig, outdir: Path) -> int:
    domain = cfg.build_domain()
    seed = cfg.uq.base_seed
    real = sample_realization(cfg.noise, domain, seed)
    path = _solve_path(cfg, domain, real)
    kappas = compute_kappas(real, cfg.space, domain, time_grid=path.times)
    report = check_bounds(path, kappas, real.mode)

    with open(outdir / "index.csv", "w", encoding="utf-8") as fh:
        fh.write("time,filename\n")
        for k, t in enumerate(path.times):
            name = f"state_{k:05d}.csv"
            _write_field(outdir / name, domain, path.states[k])
            fh.write(f"{t:.17g},{name}\n")

    _write_summary(outdir / "summary.txt", cfg, {
        "seed": seed,
        "kappa_w": kappas.kappa_w,
        "kappa_g": kappas.kappa_g,
        "kappa_v": kappas.kappa_v,
        "kappa_N": kappas.kappa_N,
        "observed_c0": report.observed_c0,
        "observed_c1": report.observed_c1,
        "bound_m0": report.m0,
        "bound_m1": report.m1,
        "bounds_pass": report.all_pass,
        "voc_residual": voc_residual(path, real),
    })
    return EXIT_OK if report.all_pass else EXIT_BOUNDS


def cmd_bounds(cfg: RunConfig, outdir: Path) -> int:
    domain = cfg.build_domain()
    rows = []
    for i in range(cfg.bounds.realizations):
        seed = derive_seed(cfg.uq.base_seed, i)
        real = sample_realization(cfg.noise, domain, seed)
        path = _solve_path(cfg, domain, real)
        kappas = compute_kappas(real, cfg.space, domain, time_grid=path.times)
        report = check_bounds(path, kappas, real.mode)
        rows.append((i, seed, report))

    with open(outdir / "bounds_report.csv", "w", encoding="utf-8") as fh:
        fh.write("index,seed,m0,m1,observed_c0,observed_c1,margin,passed\n")
        for i, seed, rep in rows:
            fh.write(
                f"{i},{seed},{rep.m0:.17g},{rep.m1:.17g},{rep.observed_c0:.17g},"
                f"{rep.observed_c1:.17g},{rep.margin:.17g},{int(rep.all_pass)}\n"
            )
    pass_rate = sum(rep.all_pass for _, _, rep in rows) / len(rows)
    _write_summary(outdir / "summary.txt", cfg, {
        "realizations": len(rows),
        "pass_rate": pass_rate,
        "min_margin": min(rep.margin for _, _, rep in rows),
    })
    return EXIT_OK if pass_rate == 1.0 else EXIT_BOUNDS


def cmd_uq(cfg: RunConfig, outdir: Path) -> int:
    domain = cfg.build_domain()
    samples_dir = outdir / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)

    def on_sample(result):
        _write_field(
            samples_dir / f"sample_{result.index:05d}.csv",
            domain,
            result.path.states[-1],
        )

    summary = run_monte_carlo(
        cfg.noise, domain, cfg.space, cfg.T,
        n_samples=cfg.uq.samples, base_seed=cfg.uq.base_seed,
        options=cfg.solver, p_values=cfg.uq.p_values, on_sample=on_sample,
    )
    _write_field(outdir / "mean_final.csv", domain, summary.mean_final.values)
    _write_field(outdir / "var_final.csv", domain, summary.var_final.values)

    extra = {
        "base_seed": cfg.uq.base_seed,
        "sample_count": summary.sample_count,
        "failed_count": len(summary.failed_seeds),
        "mean_c0": summary.mean_c0,
        "bound_pass_rate": summary.bound_pass_rate,
        "max_var_final": float(np.max(summary.var_final.values)),
    }
    for p, rep in summary.lp_norms.items():
        extra[f"lp_{p}_c0"] = rep.c0
        extra[f"lp_{p}_c0_bound"] = rep.c0_bound
        extra[f"lp_{p}_c1"] = rep.c1
        extra[f"lp_{p}_c1_bound"] = rep.c1_bound
    _write_summary(outdir / "summary.txt", cfg, extra)
    return EXIT_OK if summary.bound_pass_rate == 1.0 else EXIT_BOUNDS


def cmd_project(cfg: RunConfig, outdir: Path) -> int:
    domain = cfg.build_domain()
    build = build_interpolatory if cfg.space.value == "C" else build_orthogonal
    seed = cfg.uq.base_seed
    real = sample_realization(cfg.noise, domain, seed)
    kappas_full = compute_kappas(real, cfg.space, domain, T=cfg.T)

    rows = []
    all_ok = True
    for size in cfg.projection.coarse_sizes:
        proj = build(domain, size)
        path, report = solve_projected(
            proj, real, cfg.space, cfg.T, method=cfg.solver.method,
        )
        kap_n = projected_kappas(proj, real, cfg.space, T=cfg.T)
        kappa_ok = (
            kap_n.kappa_w <= proj.norm_estimate * kappas_full.kappa_w * (1 + 1e-8)
            and kap_n.kappa_g <= proj.norm_estimate * kappas_full.kappa_g * (1 + 1e-8)
            and kap_n.kappa_v <= proj.norm_estimate * kappas_full.kappa_v * (1 + 1e-8)
        )
        all_ok = all_ok and report.all_pass and kappa_ok
        rows.append((size, proj.norm_estimate, report, kappa_ok))
        _write_field(outdir / f"projected_final_{size:04d}.csv", domain, path.states[-1])

    with open(outdir / "projection_report.csv", "w", encoding="utf-8") as fh:
        fh.write("coarse_size,projector_norm,m0,observed_c0,bounds_pass,kappa_pass\n")
        for size, pnorm, rep, kok in rows:
            fh.write(
                f"{size},{pnorm:.17g},{rep.m0:.17g},{rep.observed_c0:.17g},"
                f"{int(rep.all_pass)},{int(kok)}\n"
            )
    _write_summary(outdir / "summary.txt", cfg, {
        "seed": seed,
        "projector_kind": "interpolatory" if cfg.space.value == "C" else "orthogonal",
        "levels": " ".join(str(s) for s in cfg.projection.coarse_sizes),
        "all_pass": all_ok,
    })
    return EXIT_OK if all_ok else EXIT_BOUNDS


def cmd_selftest(cfg: RunConfig, outdir: Path) -> int:
    """Quick analytic sanity battery; independent of the config file."""
    from .domain import build_interval
    from .random_data import NoiseSpec

    checks = []
    domain = build_interval(0.0, 1.0, 21)
    decay = NoiseSpec(
        mode="linear", kernel_scale=0.0, amplitude=0.0,
        initial_kind="constant", initial_range=(1.0, 1.0),
    )
    real = sample_realization(decay, domain, seed=1)

    path, trace = picard_solve(real, "C", domain, T=2.0, time_steps=200)
    err = max(
        abs(path.states[k][0] - math.exp(-t)) for k, t in enumerate(path.times)
    )
    checks.append(("picard_exponential_decay", err < 5e-4, f"sup_err={err:.2e}"))
    checks.append(("picard_converged", trace.converged, f"iters={trace.iterations}"))

    path = rk_solve(real, "C", domain, T=2.0)
    err = max(
        abs(path.states[k][0] - math.exp(-t)) for k, t in enumerate(path.times)
    )
    checks.append(("rk_exponential_decay", err < 1e-5, f"sup_err={err:.2e}"))

    res = voc_residual(path, real)
    checks.append(("voc_residual_small", res < 1e-4, f"residual={res:.2e}"))

    failures = 0
    for name, ok, detail in checks:
        print(f"selftest {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        failures += 0 if ok else 1
    _write_summary(outdir / "summary.txt", cfg, {
        "selftest_checks": len(checks),
        "selftest_failures": failures,
    })
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


_COMMANDS = {
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "uq": cmd_uq,
    "project": cmd_project,
    "selftest": cmd_selftest,
}


def run(subcommand: str, cfg: RunConfig, outdir) -> int:
    """Execute one pipeline; returns the process exit code."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[subcommand](cfg, outdir)
    except (ConfigError, ValidationError) as exc:
        _write_error(outdir, subcommand, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        _write_error(outdir, subcommand, exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.uq.base_seed = args.seed
    if args.samples is not None:
        cfg.uq.samples = args.samples
    if args.mode is not None:
        cfg.noise = type(cfg.noise)(**{**_noise_kwargs(cfg.noise), "mode": args.mode})
    if args.space is not None:
        from .operators import as_space

        cfg.space = as_space(args.space)
    if args.solver is not None:
        cfg.solver.method = args.solver
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _noise_kwargs(spec):
    from dataclasses import fields as dc_fields

    return {f.name: getattr(spec, f.name) for f in dc_fields(spec)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nfuq",
        description="Neural-field equations with random data: solve, verify bounds, run forward UQ.",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="INI-style run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--mode", choices=["linear", "nonlinear"], default=None)
    parser.add_argument("--space", choices=["C", "L2"], default=None)
    parser.add_argument("--solver", choices=["picard", "rk"], default=None)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code = run(args.subcommand, cfg, cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
