"""Quadrature-discretized spatial domains.

Every nonlocal operator in the package reduces to a weighted sum over the
nodes of a :class:`Domain`.  Three constructors are provided: intervals with
composite-trapezoid weights, tensor-product rectangles with product-trapezoid
weights, and triangulated surfaces with vertex-lumped weights (one third of
the incident triangle area per vertex) read from an OFF file.

Node ordering is part of the contract: ascending for intervals, lexicographic
in (x1, x2) for grids, file order for meshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshFormatError, ValidationError

KINDS = ("interval", "grid2d", "triangulated-surface")


@dataclass(frozen=True)
class Domain:
    """Compact spatial domain with a fixed quadrature rule.

    nodes    -- (n, d) coordinates, d in {1, 2, 3}
    weights  -- (n,) positive quadrature weights, units length^d
    measure  -- total |D|; must telescope to weights.sum()
    kind     -- one of KINDS
    """

    nodes: np.ndarray
    weights: np.ndarray
    measure: float
    kind: str

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.kind not in KINDS:
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if nodes.ndim != 2 or nodes.shape[1] not in (1, 2, 3):
            raise ConfigError("nodes must be (n, d) with d in {1, 2, 3}")
        if len(weights) != len(nodes) or len(nodes) < 2:
            raise ConfigError("need one weight per node and at least 2 nodes")
        if not np.all(weights > 0):
            raise ValidationError("all quadrature weights must be positive")
        total = float(weights.sum())
        if abs(total - self.measure) > 1e-12 * max(abs(self.measure), 1.0):
            raise ValidationError(
                f"weight sum {total!r} does not telescope to measure {self.measure!r}"
            )
        nodes.setflags(write=False)
        weights.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def build_interval(a: float, b: float, n: int) -> Domain:
    """Uniform nodes on [a, b] with composite trapezoid weights."""
    if not b > a:
        raise ConfigError(f"interval needs a < b, got a={a}, b={b}")
    if n < 2:
        raise ConfigError(f"interval needs at least 2 nodes, got n={n}")
    nodes = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    weights = np.full(n, h)
    weights[0] = weights[-1] = h / 2
    return Domain(nodes[:, None], weights, b - a, "interval")


def build_grid2d(extents, nx: int, ny: int) -> Domain:
    """Tensor-product grid on a rectangle with product-trapezoid weights.

    extents -- ((x0, x1), (y0, y1)); nodes ordered lexicographically in (x1, x2).
    """
    (x0, x1), (y0, y1) = extents
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"degenerate rectangle extents {extents!r}")
    if nx < 2 or ny < 2:
        raise ConfigError(f"grid needs nx, ny >= 2, got {nx}x{ny}")
    gx = build_interval(x0, x1, nx)
    gy = build_interval(y0, y1, ny)
    xs = gx.nodes[:, 0]
    ys = gy.nodes[:, 0]
    nodes = np.column_stack(
        [np.repeat(xs, ny), np.tile(ys, nx)]
    )
    weights = np.outer(gx.weights, gy.weights).ravel()
    return Domain(nodes, weights, (x1 - x0) * (y1 - y0), "grid2d")


def load_mesh(path) -> Domain:
    """Triangulated surface from an OFF-like file, vertex-lumped quadrature.

    Format: line 1 "OFF"; line 2 "<nv> <nt> 0"; nv lines "x y z"; nt lines
    "3 i j k" with 0-based vertex indices.  Each vertex weight is one third
    of the total area of its incident triangles.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise MeshFormatError(msg, line=lineno)

    if not lines or lines[0].strip() != "OFF":
        fail(1, "expected literal header 'OFF'")
    if len(lines) < 2:
        fail(2, "missing vertex/triangle count line")
    header = lines[1].split()
    if len(header) != 3:
        fail(2, f"expected '<nv> <nt> 0', got {lines[1]!r}")
    try:
        nv, nt = int(header[0]), int(header[1])
    except ValueError:
        fail(2, f"non-integer counts in {lines[1]!r}")
    if len(lines) < 2 + nv + nt:
        fail(len(lines), f"file ends early: need {nv} vertices and {nt} triangles")

    verts = np.empty((nv, 3))
    for i in range(nv):
        lineno = 3 + i
        parts = lines[2 + i].split()
        if len(parts) != 3:
            fail(lineno, f"expected 3 vertex coordinates, got {lines[2 + i]!r}")
        try:
            verts[i] = [float(p) for p in parts]
        except ValueError:
            fail(lineno, f"non-numeric vertex coordinate in {lines[2 + i]!r}")

    weights = np.zeros(nv)
    total_area = 0.0
    for k in range(nt):
        lineno = 3 + nv + k
        parts = lines[2 + nv + k].split()
        if len(parts) != 4 or parts[0] != "3":
            fail(lineno, f"expected '3 i j k', got {lines[2 + nv + k]!r}")
        try:
            i, j, l = int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError:
            fail(lineno, f"non-integer vertex index in {lines[2 + nv + k]!r}")
        if not all(0 <= v < nv for v in (i, j, l)):
            fail(lineno, f"vertex index out of range in {lines[2 + nv + k]!r}")
        area = 0.5 * np.linalg.norm(
            np.cross(verts[j] - verts[i], verts[l] - verts[i])
        )
        if area <= 0.0:
            raise ValidationError(
                f"degenerate (zero-area) triangle ({i}, {j}, {l}) at line {lineno}"
            )
        total_area += area
        weights[[i, j, l]] += area / 3.0
    if nt == 0:
        raise MeshFormatError("mesh contains no triangles", line=2)

    return Domain(verts, weights, total_area, "triangulated-surface")
