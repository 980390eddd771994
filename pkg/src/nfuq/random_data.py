"""Seeded finite-dimensional-noise samplers for the neural-field input data.

A :class:`NoiseSpec` fixes the parametric families: a sigmoidal firing rate
with random maximum and steepness, a traveling localized pulse with random
speed, a cutoff-Gaussian base kernel whose nonzero matrix entries receive
independent uniform perturbations, and a (possibly random-amplitude) initial
state.  :func:`sample_realization` turns a spec, a domain, and a 64-bit seed
into one evaluable realization together with the flat parameter vector that
generated it.

Reproducibility contract: all draws come from counter-based Philox streams
keyed by (seed, stream id), one stream per data source, so every parameter is
a pure function of (spec, domain, seed) regardless of iteration order or
thread scheduling, and the four parameter sub-vectors are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain import Domain
from .errors import ConfigError

# stream ids, one per independent data source
STREAM_KERNEL = 0
STREAM_FIRING = 1
STREAM_FORCING = 2
STREAM_INITIAL = 3

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

MODES = ("linear", "nonlinear")
INITIAL_KINDS = ("zero", "constant", "bump")
INITIAL_LAWS = ("uniform", "sign")

# exponent magnitude beyond which the sigmoid saturates instead of overflowing
_EXP_CLIP = 700.0


def _splitmix64(x: int) -> int:
    """SplitMix64 finalizer; decorrelates structured integer inputs."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Per-sample seed for Monte Carlo: one SplitMix64 stream step."""
    return _splitmix64((base_seed + (index + 1) * _GOLDEN) & _MASK64)


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    """Counter-based generator for one (seed, stream) pair."""
    key = np.array(
        [_splitmix64(seed & _MASK64), _splitmix64((seed ^ _GOLDEN) + stream_id)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _check_range(name, rng):
    lo, hi = rng
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ConfigError(f"{name} must be a finite interval [lo, hi], got {rng!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Parametric noise model; defaults reproduce the motivating cortical run.

    All random parameters have uniform marginals over the given ranges.
    In linear mode the firing-rate ranges are ignored (the firing map is the
    identity).  `kernel_scale = 0` switches the base kernel off entirely; the
    perturbation support rule then suppresses all kernel randomness as well.
    """

    mode: str = "nonlinear"
    # firing rate f(u) = fmax / (1 + exp(-steepness (u - threshold)))
    f_range: tuple = (0.0, 3.0)
    mu_range: tuple = (10.0, 15.0)
    threshold: float = 0.5
    # forcing: pulse traveling along the second coordinate at random speed
    amplitude: float = 10.0
    center: tuple = (-27.0, 70.0, 43.0)
    widths: tuple = (30.0, 1.0, 30.0)
    speed_range: tuple = (1.0, 10.0)
    # base kernel: kernel_scale * exp(-|x-x'|^2 / kernel_sigma), cut off at kernel_cutoff
    kernel_sigma: float = 10.0 / 3.0
    kernel_cutoff: float = math.sqrt(10.0 / 3.0 * math.log(10.0))
    kernel_scale: float = 1.0
    perturb_range: tuple = (0.0, 3.0)
    # initial state: zero, random-amplitude constant, or random-amplitude Gaussian bump
    initial_kind: str = "zero"
    initial_range: tuple = (0.0, 0.0)
    initial_law: str = "uniform"
    bump_center: tuple = (0.0, 0.0, 0.0)
    bump_width: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("f_range", "mu_range", "speed_range", "perturb_range", "initial_range"):
            _check_range(name, getattr(self, name))
        if not self.kernel_sigma > 0:
            raise ConfigError(f"kernel_sigma must be > 0, got {self.kernel_sigma}")
        if self.kernel_cutoff < 0:
            raise ConfigError(f"kernel_cutoff must be >= 0, got {self.kernel_cutoff}")
        if not all(s > 0 for s in self.widths):
            raise ConfigError(f"all forcing widths must be > 0, got {self.widths}")
        if self.initial_kind not in INITIAL_KINDS:
            raise ConfigError(f"initial_kind must be one of {INITIAL_KINDS}")
        if self.initial_law not in INITIAL_LAWS:
            raise ConfigError(f"initial_law must be one of {INITIAL_LAWS}")
        if self.initial_kind == "bump" and not self.bump_width > 0:
            raise ConfigError(f"bump_width must be > 0, got {self.bump_width}")


def base_kernel_matrix(spec: NoiseSpec, domain: Domain) -> np.ndarray:
    """Deterministic kernel at the nodes: Gaussian in distance, hard cutoff."""
    x = domain.nodes
    diff = x[:, None, :] - x[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    k = spec.kernel_scale * np.exp(-dist2 / spec.kernel_sigma)
    k[dist2 > spec.kernel_cutoff**2] = 0.0
    return k


@dataclass(frozen=True)
class DataRealization:
    """One sample of (kernel, firing rate, forcing, initial state).

    `y` is the flat parameter vector that generated the realization, in
    stream order (kernel perturbations row-major over the support, then
    firing, forcing, initial); `param_slices` maps source name to its
    sub-vector.  Regenerating with the same (spec, domain, seed) reproduces
    `y` bit-exactly.
    """

    spec: NoiseSpec
    domain: Domain
    seed: int
    y: np.ndarray
    kernel_matrix: np.ndarray
    firing_params: tuple | None  # (fmax, steepness, threshold) or None in linear mode
    speed: float
    initial_values: np.ndarray
    param_slices: dict = field(repr=False)

    def __post_init__(self):
        for arr in (self.y, self.kernel_matrix, self.initial_values):
            arr.setflags(write=False)

    @property
    def mode(self) -> str:
        return self.spec.mode

    @cached_property
    def _pulse_coord(self):
        # second spatial coordinate; absent coordinates sit at the pulse center
        if self.domain.dim >= 2:
            return self.domain.nodes[:, 1]
        return np.full(self.domain.n, self.spec.center[1])

    @cached_property
    def _gauss_profile(self):
        # time-independent transverse factors of the pulse (coordinates 1 and 3)
        spec = self.spec
        nodes = self.domain.nodes
        expo = -((nodes[:, 0] - spec.center[0]) ** 2) / (2 * spec.widths[0] ** 2)
        if self.domain.dim >= 3:
            expo = expo - (nodes[:, 2] - spec.center[2]) ** 2 / (2 * spec.widths[2] ** 2)
        return np.exp(expo)


def sample_realization(spec: NoiseSpec, domain: Domain, seed: int) -> DataRealization:
    """Draw one realization of the random data.

    Kernel perturbations are applied at the matrix-entry level: every entry
    where the base kernel is nonzero receives an independent uniform draw, so
    the perturbation never widens the kernel support.
    """
    slices = {}
    parts = []
    pos = 0

    def record(name, values):
        nonlocal pos
        values = np.atleast_1d(np.asarray(values, dtype=float))
        slices[name] = slice(pos, pos + values.size)
        parts.append(values)
        pos += values.size

    base = base_kernel_matrix(spec, domain)
    support = base != 0.0
    gen_w = _stream(seed, STREAM_KERNEL)
    lo, hi = spec.perturb_range
    draws = gen_w.uniform(lo, hi, size=base.shape)
    kernel = base + np.where(support, draws, 0.0)
    record("w", draws[support])  # row-major over the support

    firing = None
    if spec.mode == "nonlinear":
        gen_f = _stream(seed, STREAM_FIRING)
        fmax = gen_f.uniform(*spec.f_range)
        steep = gen_f.uniform(*spec.mu_range)
        firing = (fmax, steep, spec.threshold)
        record("f", [fmax, steep])
    else:
        record("f", np.empty(0))

    gen_g = _stream(seed, STREAM_FORCING)
    speed = gen_g.uniform(*spec.speed_range)
    record("g", [speed])

    if spec.initial_kind == "zero":
        initial = np.zeros(domain.n)
        record("v", np.empty(0))
    else:
        gen_v = _stream(seed, STREAM_INITIAL)
        lo, hi = spec.initial_range
        if spec.initial_law == "sign":
            amp = hi if gen_v.uniform(0.0, 1.0) >= 0.5 else lo
        else:
            amp = gen_v.uniform(lo, hi)
        record("v", [amp])
        if spec.initial_kind == "constant":
            initial = np.full(domain.n, amp)
        else:
            c = np.asarray(spec.bump_center[: domain.dim])
            d2 = np.sum((domain.nodes - c) ** 2, axis=1)
            initial = amp * np.exp(-d2 / (2 * spec.bump_width**2))

    return DataRealization(
        spec=spec,
        domain=domain,
        seed=seed,
        y=np.concatenate(parts) if parts else np.empty(0),
        kernel_matrix=kernel,
        firing_params=firing,
        speed=speed,
        initial_values=initial,
        param_slices=slices,
    )


def forcing_values(real: DataRealization, t: float) -> np.ndarray:
    """Forcing field at all nodes: A sech^2((x2 - y2 + t c)/s2) * Gaussian(x1, x3)."""
    spec = real.spec
    arg = (real._pulse_coord - spec.center[1] + t * real.speed) / spec.widths[1]
    return spec.amplitude * real._gauss_profile / np.cosh(arg) ** 2


def eval_forcing(real: DataRealization, node_index: int, t: float) -> float:
    """Forcing at one node; coordinates the domain lacks sit at the pulse center."""
    return float(forcing_values(real, t)[node_index])


def eval_firing(real: DataRealization, u):
    """Firing rate at voltage u: sigmoid in nonlinear mode, identity in linear.

    Saturates exactly (to 0 or the maximum rate) once the exponent magnitude
    exceeds the overflow guard.
    """
    if real.firing_params is None:
        return u
    fmax, steep, h = real.firing_params
    z = steep * (np.asarray(u, dtype=float) - h)
    out = fmax / (1.0 + np.exp(-np.clip(z, -_EXP_CLIP, _EXP_CLIP)))
    out = np.where(z < -_EXP_CLIP, 0.0, np.where(z > _EXP_CLIP, fmax, out))
    return float(out) if np.ndim(u) == 0 else out


def eval_firing_deriv(real: DataRealization, u):
    """du-derivative of the firing rate; 1 in linear mode."""
    if real.firing_params is None:
        return 1.0 if np.ndim(u) == 0 else np.ones_like(np.asarray(u, dtype=float))
    fmax, steep, h = real.firing_params
    z = steep * (np.asarray(u, dtype=float) - h)
    s = 1.0 / (1.0 + np.exp(-np.clip(z, -_EXP_CLIP, _EXP_CLIP)))
    out = np.where(np.abs(z) > _EXP_CLIP, 0.0, fmax * steep * s * (1.0 - s))
    return float(out) if np.ndim(u) == 0 else out
