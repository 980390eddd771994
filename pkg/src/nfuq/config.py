"""Run configuration: flat INI-style sections of `key = value` lines.

The parser is deliberately hand-rolled so every error (unknown key,
duplicate, type mismatch, range violation) can name the key and its line
number.  `#` starts a comment; values are whitespace-separated scalars.
An empty file is valid: every key has a documented default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import Domain, build_grid2d, build_interval, load_mesh
from .errors import ConfigError
from .operators import PhaseSpace, as_space
from .random_data import NoiseSpec
from .uq import SolverOptions


@dataclass
class DomainConfig:
    kind: str = "interval"
    extents: tuple = (0.0, 5.0)          # interval: (a, b); grid2d: (x0, x1, y0, y1)
    resolution: tuple = (41,)            # interval: (n,); grid2d: (nx, ny)
    mesh_path: str = ""


@dataclass
class UqConfig:
    samples: int = 100
    base_seed: int = 2024
    p_values: tuple = (1, 2, 4)


@dataclass
class ProjectionConfig:
    coarse_sizes: tuple = (11, 21)


@dataclass
class BoundsConfig:
    realizations: int = 50


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    solver: SolverOptions = field(default_factory=SolverOptions)
    space: PhaseSpace = PhaseSpace.C
    T: float = 10.0
    out: str = "nfuq-out"
    uq: UqConfig = field(default_factory=UqConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)

    def build_domain(self) -> Domain:
        d = self.domain
        if d.kind == "interval":
            (a, b), (n,) = d.extents, d.resolution
            return build_interval(a, b, int(n))
        if d.kind == "grid2d":
            x0, x1, y0, y1 = d.extents
            nx, ny = d.resolution
            return build_grid2d(((x0, x1), (y0, y1)), int(nx), int(ny))
        if d.kind == "mesh":
            if not d.mesh_path:
                raise ConfigError("domain kind 'mesh' needs mesh_path")
            return load_mesh(d.mesh_path)
        raise ConfigError(f"unknown domain kind {d.kind!r}")


def _floats(text, count=None):
    vals = tuple(float(tok) for tok in text.split())
    if count is not None and len(vals) not in (count if isinstance(count, tuple) else (count,)):
        raise ValueError(f"expected {count} numbers, got {len(vals)}")
    return vals


def _ints(text):
    return tuple(int(tok) for tok in text.split())


def _one_float(text):
    return float(text)


def _one_int(text):
    return int(text)


def _string(text):
    return text


def _range2(text):
    vals = _floats(text, 2)
    return (vals[0], vals[1])


def _vec3(text):
    vals = _floats(text)
    if len(vals) > 3:
        raise ValueError(f"expected at most 3 numbers, got {len(vals)}")
    return tuple(vals) + (0.0,) * (3 - len(vals))


# section -> key -> (target attribute path, converter)
_SCHEMA = {
    "domain": {
        "kind": ("domain.kind", _string),
        "extents": ("domain.extents", _floats),
        "resolution": ("domain.resolution", _ints),
        "mesh_path": ("domain.mesh_path", _string),
    },
    "noise": {
        "mode": ("noise.mode", _string),
        "f_range": ("noise.f_range", _range2),
        "mu_range": ("noise.mu_range", _range2),
        "threshold": ("noise.threshold", _one_float),
        "amplitude": ("noise.amplitude", _one_float),
        "center": ("noise.center", _vec3),
        "widths": ("noise.widths", _vec3),
        "speed_range": ("noise.speed_range", _range2),
        "kernel_sigma": ("noise.kernel_sigma", _one_float),
        "kernel_cutoff": ("noise.kernel_cutoff", _one_float),
        "kernel_scale": ("noise.kernel_scale", _one_float),
        "perturb_range": ("noise.perturb_range", _range2),
        "initial": ("noise.initial_kind", _string),
        "initial_range": ("noise.initial_range", _range2),
        "initial_law": ("noise.initial_law", _string),
        "bump_center": ("noise.bump_center", _vec3),
        "bump_width": ("noise.bump_width", _one_float),
    },
    "solver": {
        "method": ("solver.method", _string),
        "T": ("T", _one_float),
        "time_steps": ("solver.time_steps", _one_int),
        "tol": ("solver.tol", _one_float),
        "max_iter": ("solver.max_iter", _one_int),
        "rtol": ("solver.rtol", _one_float),
        "atol": ("solver.atol", _one_float),
        "output_steps": ("solver.output_steps", _one_int),
    },
    "run": {
        "space": ("space", _string),
        "out": ("out", _string),
    },
    "uq": {
        "samples": ("uq.samples", _one_int),
        "base_seed": ("uq.base_seed", _one_int),
        "p_values": ("uq.p_values", _ints),
    },
    "projection": {
        "coarse_sizes": ("projection.coarse_sizes", _ints),
    },
    "bounds": {
        "realizations": ("bounds.realizations", _one_int),
    },
}


def _read_items(path):
    """Raw (section, key) -> (value text, line number) with syntax checks."""
    items = {}
    section = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in _SCHEMA:
                    raise ConfigError(f"line {lineno}: unknown section [{section}]")
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            if section is None:
                raise ConfigError(f"line {lineno}: key outside any [section]")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _SCHEMA[section]:
                raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
            if (section, key) in items:
                first = items[(section, key)][1]
                raise ConfigError(
                    f"line {lineno}: duplicate key {key!r} in [{section}] "
                    f"(first set at line {first})"
                )
            items[(section, key)] = (value, lineno)
    return items


def _validate(cfg: RunConfig):
    d = cfg.domain
    if d.kind not in ("interval", "grid2d", "mesh"):
        raise ConfigError(f"domain.kind must be interval|grid2d|mesh, got {d.kind!r}")
    if d.kind == "interval" and (len(d.extents) != 2 or len(d.resolution) != 1):
        raise ConfigError("interval domain needs extents 'a b' and resolution 'n'")
    if d.kind == "grid2d" and (len(d.extents) != 4 or len(d.resolution) != 2):
        raise ConfigError("grid2d domain needs extents 'x0 x1 y0 y1' and resolution 'nx ny'")
    if cfg.solver.method not in ("picard", "rk"):
        raise ConfigError(f"solver.method must be picard|rk, got {cfg.solver.method!r}")
    if not cfg.T > 0:
        raise ConfigError(f"T must be > 0, got {cfg.T}")
    for name, val in (
        ("solver.time_steps", cfg.solver.time_steps),
        ("solver.max_iter", cfg.solver.max_iter),
        ("uq.samples", cfg.uq.samples),
        ("bounds.realizations", cfg.bounds.realizations),
    ):
        if val < 2:
            raise ConfigError(f"{name} must be >= 2, got {val}")
    for name, val in (
        ("solver.tol", cfg.solver.tol),
        ("solver.rtol", cfg.solver.rtol),
        ("solver.atol", cfg.solver.atol),
    ):
        if not (val > 0 and math.isfinite(val)):
            raise ConfigError(f"{name} must be a positive finite number, got {val}")
    if any(p < 1 for p in cfg.uq.p_values):
        raise ConfigError(f"uq.p_values must all be >= 1, got {cfg.uq.p_values}")
    if any(c < 2 for c in cfg.projection.coarse_sizes):
        raise ConfigError(f"projection.coarse_sizes must be >= 2, got {cfg.projection.coarse_sizes}")


def parse_config(path) -> RunConfig:
    """Parse and fully validate a config file; defaults fill unset keys."""
    items = _read_items(path)
    cfg = RunConfig()
    noise_kwargs = {}
    for (section, key), (text, lineno) in items.items():
        attr_path, convert = _SCHEMA[section][key]
        try:
            value = convert(text)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from None
        if attr_path.startswith("noise."):
            noise_kwargs[attr_path.split(".", 1)[1]] = (value, key, lineno)
        elif "." in attr_path:
            obj_name, attr = attr_path.split(".", 1)
            setattr(getattr(cfg, obj_name), attr, value)
        else:
            setattr(cfg, attr_path, value)
    if noise_kwargs:
        try:
            cfg.noise = NoiseSpec(**{k: v for k, (v, _, _) in noise_kwargs.items()})
        except ConfigError as exc:
            lines = ", ".join(f"{key} (line {ln})" for _, key, ln in noise_kwargs.values())
            raise ConfigError(f"[noise] {exc} -- set from: {lines}") from None
    try:
        cfg.space = as_space(cfg.space)
    except Exception:
        raise ConfigError(f"run.space must be C or L2, got {cfg.space!r}") from None
    _validate(cfg)
    return cfg


def _fmt(value):
    if isinstance(value, PhaseSpace):
        return value.value
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _resolved(cfg: RunConfig, section: str, attr_path: str):
    sources = {
        "domain": cfg.domain,
        "noise": cfg.noise,
        "solver": cfg.solver,
        "run": cfg,
        "uq": cfg.uq,
        "projection": cfg.projection,
        "bounds": cfg.bounds,
    }
    if "." in attr_path:
        _, attr = attr_path.split(".", 1)
        return getattr(sources[section], attr)
    return getattr(cfg, attr_path)  # top-level fields like T, space, out


def serialize_config(cfg: RunConfig) -> str:
    """Emit every resolved key; parse(serialize(cfg)) round-trips equal."""
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key, (attr_path, _) in keys.items():
            out.append(f"{key} = {_fmt(_resolved(cfg, section, attr_path))}")
        out.append("")
    return "\n".join(out)


def config_items(cfg: RunConfig):
    """(section.key, formatted value) pairs for the run summary."""
    for section, keys in _SCHEMA.items():
        for key, (attr_path, _) in keys.items():
            yield f"{section}.{key}", _fmt(_resolved(cfg, section, attr_path))
