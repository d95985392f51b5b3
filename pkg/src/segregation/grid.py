"""Uniform grids, multi-component fields and quadrature over balls and spheres.

Everything downstream (solver, frequency functionals, interface geometry)
works on a :class:`MultiField`: ``k`` nonnegative components sampled on the
nodes of a uniform 1D or 2D :class:`Grid`.  Fields are treated as immutable
once built; derived arrays (interpolants, nodal gradients) are cached.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

# relative slack when testing points against the grid bounds (round-off in x0 + r*e_theta)
_BOUNDS_SLACK = 1e-12
# resolution of the sub-cell position used by lattice-relative sampling
_LATTICE_SNAP = 2.0**-32


class GridError(ValueError):
    """Invalid grid specification or a query outside the grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid with ``n[d]`` nodes per axis."""

    dim: int
    bounds: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (m - 1) for (lo, hi), m in zip(self.bounds, self.n))

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        # lo + i*h exactly, not linspace (which rounds the last node to hi)
        return tuple(lo + np.arange(m) * hh for (lo, _), m, hh in zip(self.bounds, self.n, self.h))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def node(self, index: Sequence[int]) -> np.ndarray:
        return np.array([ax[i] for ax, i in zip(self.axes, index)])

    def nearest_index(self, x: Sequence[float]) -> tuple[int, ...]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for d in range(self.dim):
            lo = self.bounds[d][0]
            i = int(round((x[d] - lo) / self.h[d]))
            idx.append(min(max(i, 0), self.n[d] - 1))
        return tuple(idx)

    def extent(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bounds])

    def dist_to_boundary(self, x: Sequence[float]) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(min(min(x[d] - lo, hi - x[d]) for d, (lo, hi) in enumerate(self.bounds)))

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Boolean mask of points (shape ``(m, dim)``) inside the bounds shrunk by ``margin``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        ok = np.ones(len(pts), dtype=bool)
        for d, (lo, hi) in enumerate(self.bounds):
            slack = _BOUNDS_SLACK * (hi - lo)
            ok &= (pts[:, d] >= lo + margin - slack) & (pts[:, d] <= hi - margin + slack)
        return ok

    def ball_inside(self, x0: Sequence[float], r: float) -> bool:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        slack = _BOUNDS_SLACK * float(self.extent().max())
        return self.dist_to_boundary(x0) >= r - slack

    def to_dict(self) -> dict:
        return {"dim": self.dim, "bounds": [list(b) for b in self.bounds], "n": list(self.n)}


def make_grid(dim: int, bounds, n) -> Grid:
    """Build a uniform grid.

    ``bounds`` is ``(lo, hi)`` in 1D or a sequence of per-axis pairs; ``n`` is an
    int (same count on every axis) or a per-axis sequence.  At least 3 nodes per
    axis are required.
    """
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    b = np.asarray(bounds, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (dim, 1))
    if b.shape != (dim, 2):
        raise GridError(f"bounds must give one (lo, hi) pair per axis, got shape {b.shape}")
    nn = (int(n),) * dim if np.isscalar(n) else tuple(int(m) for m in n)
    if len(nn) != dim:
        raise GridError(f"need {dim} node counts, got {len(nn)}")
    if any(m < 3 for m in nn):
        raise GridError(f"need at least 3 nodes per axis, got {nn}")
    if np.any(b[:, 1] <= b[:, 0]):
        raise GridError(f"degenerate or inverted bounds {b.tolist()}")
    return Grid(dim, tuple((float(lo), float(hi)) for lo, hi in b), nn)


@dataclass(frozen=True)
class ReactionParams:
    """Cubic-linear reaction ``f_i(s) = mu_i s^3 - lam_i s``."""

    mu: tuple[float, ...]
    lam: tuple[float, ...]

    def f(self, i: int, s):
        return self.mu[i] * s**3 - self.lam[i] * s

    def primitive(self, i: int, s):
        return 0.25 * self.mu[i] * s**4 - 0.5 * self.lam[i] * s**2

    def to_dict(self) -> dict:
        return {"mu": list(self.mu), "lam": list(self.lam)}


@dataclass(frozen=True)
class ScalarSample:
    value: float
    location: tuple[float, ...]


def coupling_matrix(k: int, a=1.0) -> np.ndarray:
    """Symmetric coupling with zero diagonal; ``a`` is a scalar or a full matrix."""
    if np.isscalar(a):
        m = np.full((k, k), float(a))
        np.fill_diagonal(m, 0.0)
        return m
    m = np.array(a, dtype=float)
    if m.shape != (k, k):
        raise ValueError(f"coupling matrix must be {k}x{k}, got {m.shape}")
    return m


@dataclass(eq=False)
class MultiField:
    """``k`` components sampled on ``grid``; ``values`` has shape ``(k, *grid.shape)``."""

    grid: Grid
    values: np.ndarray
    beta: float = 0.0
    a: np.ndarray = field(default=None)  # type: ignore[assignment]
    reaction: ReactionParams | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.grid.dim + 1 or self.values.shape[1:] != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.k < 2:
            raise ValueError("a MultiField needs at least two components")
        self.a = coupling_matrix(self.k, 1.0 if self.a is None else self.a)
        if not np.allclose(self.a, self.a.T) or np.any(np.diag(self.a) != 0):
            raise ValueError("coupling matrix must be symmetric with zero diagonal")
        off = self.a[~np.eye(self.k, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("off-diagonal couplings must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def replace(self, **changes) -> "MultiField":
        kw = dict(grid=self.grid, values=self.values, beta=self.beta, a=self.a, reaction=self.reaction)
        kw.update(changes)
        return MultiField(**kw)

    @cached_property
    def _interp(self) -> RegularGridInterpolator:
        vals = np.moveaxis(self.values, 0, -1)
        return RegularGridInterpolator(self.grid.axes, vals, method="linear", bounds_error=False, fill_value=None)

    @cached_property
    def node_gradients(self) -> np.ndarray:
        """Central-difference gradients at the nodes, shape ``(k, dim, *shape)``."""
        g = self.grid
        out = np.empty((self.k, g.dim) + g.shape)
        for i in range(self.k):
            grads = np.gradient(self.values[i], *g.h, edge_order=2)
            if g.dim == 1:
                grads = [grads]
            for d in range(g.dim):
                out[i, d] = grads[d]
        return out

    @cached_property
    def _grad_interp(self) -> RegularGridInterpolator:
        vals = self.node_gradients.reshape((-1,) + self.grid.shape)
        return RegularGridInterpolator(self.grid.axes, np.moveaxis(vals, 0, -1), method="linear",
                                       bounds_error=False, fill_value=None)

    def _points(self, x, margin: float = 0.0) -> tuple[np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim <= 1
        pts = pts.reshape(-1, self.grid.dim)
        if not np.all(self.grid.contains(pts, margin)):
            bad = pts[~self.grid.contains(pts, margin)][0]
            raise GridError(f"point {bad.tolist()} is outside the admissible region of the grid")
        return pts, single

    def interpolate(self, x) -> np.ndarray:
        """Multilinear interpolation of every component.

        A single point gives shape ``(k,)``; an ``(m, dim)`` array gives ``(k, m)``.
        """
        pts, single = self._points(x)
        out = self._interp(pts).T
        return out[:, 0] if single else out

    def gradient(self, x, strict: bool = True) -> np.ndarray:
        """Central-difference gradients interpolated to ``x``: ``(k, dim)`` or ``(k, m, dim)``.

        With ``strict`` (default) ``x`` must lie at least one cell away from the
        boundary so that every node used carries a genuinely central difference;
        otherwise the one-sided boundary differences are accepted.
        """
        pts, single = self._points(x, margin=self.grid.hmin * (1 - 1e-9) if strict else 0.0)
        out = self._grad_interp(pts).reshape(len(pts), self.k, self.grid.dim).transpose(1, 0, 2)
        return out[:, 0] if single else out

    def lattice_position(self, x0) -> tuple[np.ndarray, np.ndarray]:
        """Node index ``i0`` and fractional offset ``phi`` (cell units) with ``x0 = lo + (i0 + phi) h``.

        ``phi`` is snapped to a multiple of ``2**-32`` so that shifting ``x0``
        by a lattice vector changes ``i0`` only.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        t = np.array([(x0[d] - lo) / hh for d, ((lo, _), hh) in enumerate(zip(self.grid.bounds, self.grid.h))])
        i0 = np.floor(t)
        phi = np.round((t - i0) / _LATTICE_SNAP) * _LATTICE_SNAP
        carry = phi >= 1.0
        return (i0 + carry).astype(int), np.where(carry, phi - 1.0, phi)

    def sample_around(self, x0, offsets, gradients: bool = False) -> np.ndarray:
        """Multilinear samples at ``x0 + offsets`` computed in lattice coordinates.

        The weights depend only on the offsets and the sub-cell position of
        ``x0``, so the result is bit-for-bit covariant under lattice shifts.
        Returns ``(k, m)`` values or, with ``gradients``, ``(k, m, dim)``
        interpolated nodal gradients.
        """
        g = self.grid
        offsets = np.asarray(offsets, dtype=float).reshape(-1, g.dim)
        i0, phi = self.lattice_position(x0)
        d = phi + offsets / np.asarray(g.h)
        fl = np.floor(d)
        w = d - fl
        idx = i0 + fl.astype(int)
        n = np.asarray(g.n)
        top = idx == n - 1  # points on the upper boundary: last cell, weight 1
        idx = np.where(top, n - 2, idx)
        w = np.where(top, 1.0, w)
        if np.any(idx < 0) or np.any(idx > n - 2):
            raise GridError("sample points outside the grid")
        src = self.node_gradients.reshape((-1,) + g.shape) if gradients else self.values
        out = np.zeros((src.shape[0], len(offsets)))
        for corner in np.ndindex(*(2,) * g.dim):
            c = np.asarray(corner)
            wt = np.prod(np.where(c == 1, w, 1.0 - w), axis=1)
            ii = tuple((idx[:, a] + c[a]) for a in range(g.dim))
            out += src[(slice(None),) + ii] * wt
        if gradients:
            return out.reshape(self.k, g.dim, -1).transpose(0, 2, 1)
        return out

    def to_metadata(self) -> dict:
        meta = self.grid.to_dict()
        meta.update(k=self.k, beta=self.beta, a=self.a.tolist(),
                    reaction=None if self.reaction is None else self.reaction.to_dict())
        return meta


# --- quadrature -------------------------------------------------------------

ScalarFn = Callable[[np.ndarray], np.ndarray]

# Multiplier on the sphere quadrature weights.  Always 1 in normal use; the
# fixture self-test perturbs it to show that the oracle suite detects it.
SPHERE_WEIGHT_SCALE = 1.0


def _check_ball(grid: Grid, x0, r: float) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (grid.dim,):
        raise GridError(f"center must have {grid.dim} coordinates")
    if r <= 0:
        raise GridError("radius must be positive")
    if not grid.ball_inside(x0, r):
        raise GridError(f"ball B_{r:g}({x0.tolist()}) exits the domain")
    return x0


def n_theta_for(grid: Grid, r: float) -> int:
    return max(64, math.ceil(2 * math.pi * r / grid.hmin))


def circle_points(x0, r: float, n_theta: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return np.column_stack([x0[0] + r * np.cos(theta), x0[1] + r * np.sin(theta)])


def check_ball(grid: Grid, x0, r: float) -> np.ndarray:
    """Validated centre array; raises :class:`GridError` if ``B_r(x0)`` leaves the grid."""
    return _check_ball(grid, x0, r)


def sphere_rule(grid: Grid, r: float, n_theta: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Offsets from the centre and weights of the sphere quadrature.

    In 1D the "sphere" is the point pair ``+-r`` (counting measure); in 2D a
    periodic trapezoid rule over ``n_theta`` equispaced angles.
    """
    if grid.dim == 1:
        return np.array([[-r], [r]]), np.full(2, SPHERE_WEIGHT_SCALE)
    n_theta = n_theta or n_theta_for(grid, r)
    off = circle_points(np.zeros(2), r, n_theta)
    return off, np.full(n_theta, 2 * np.pi * r / n_theta * SPHERE_WEIGHT_SCALE)


def ball_rule_polar(grid: Grid, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the polar ball rule.

    Gauss-Legendre in the radius times the periodic trapezoid rule in angle
    (plain Gauss-Legendre on ``[-r, r]`` in 1D); smooth in ``r``.
    """
    if grid.dim == 1:
        n_s = max(16, math.ceil(2 * r / grid.hmin))
        t, w = np.polynomial.legendre.leggauss(n_s)
        return (r * t)[:, None], r * w
    n_s = max(16, math.ceil(r / grid.hmin))
    t, w = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * r * (t + 1)
    ws = 0.5 * r * w
    n_t = n_theta_for(grid, r)
    theta = 2 * np.pi * np.arange(n_t) / n_t
    S, T = np.meshgrid(s, theta, indexing="ij")
    off = np.column_stack([(S * np.cos(T)).ravel(), (S * np.sin(T)).ravel()])
    weights = np.broadcast_to((ws * s)[:, None] * (2 * np.pi / n_t), S.shape).ravel()
    return off, weights


def sphere_integral(g: ScalarFn, grid: Grid, x0, r: float, n_theta: int | None = None) -> float:
    """Integral of ``g`` over the sphere of radius ``r`` about ``x0`` (see :func:`sphere_rule`).

    ``g`` maps an ``(m, dim)`` array of points to ``m`` values.
    """
    x0 = _check_ball(grid, x0, r)
    off, w = sphere_rule(grid, r, n_theta)
    return float(np.sum(g(x0 + off) * w))


def ball_integral(g: ScalarFn, grid: Grid, x0, r: float, subsamples: int = 4, method: str = "cells") -> float:
    """Integral of ``g`` over the ball ``B_r(x0)``.

    ``method="cells"``: each grid cell meeting the ball is split into
    ``subsamples**dim`` subcells and ``g`` is evaluated at the subcell centers
    that fall inside the ball (in 1D the subcells are clipped exactly).
    ``method="polar"``: see :func:`ball_rule_polar`; smooth in ``r``, which
    the monotonicity audits rely on.
    """
    x0 = _check_ball(grid, x0, r)
    if method == "polar":
        off, w = ball_rule_polar(grid, r)
        return float(np.sum(g(x0 + off) * w))
    if method != "cells":
        raise ValueError(f"unknown ball quadrature {method!r}")
    s = subsamples
    if grid.dim == 1:
        lo0, _ = grid.bounds[0]
        h = grid.h[0]
        hs = h / s
        i0 = max(int(math.floor((x0[0] - r - lo0) / h)), 0)
        i1 = min(int(math.ceil((x0[0] + r - lo0) / h)), grid.n[0] - 1)
        left = lo0 + i0 * h + hs * np.arange((i1 - i0) * s)
        right = left + hs
        w = np.clip(np.minimum(right, x0[0] + r) - np.maximum(left, x0[0] - r), 0.0, None)
        keep = w > 0
        mid = 0.5 * (left + right)[keep]
        return float(np.sum(g(mid[:, None]) * w[keep]))
    pts_axes = []
    for d in range(2):
        lo0 = grid.bounds[d][0]
        h = grid.h[d]
        i0 = max(int(math.floor((x0[d] - r - lo0) / h)), 0)
        i1 = min(int(math.ceil((x0[d] + r - lo0) / h)), grid.n[d] - 1)
        pts_axes.append(lo0 + i0 * h + (np.arange((i1 - i0) * s) + 0.5) * h / s)
    X, Y = np.meshgrid(*pts_axes, indexing="ij")
    inside = (X - x0[0]) ** 2 + (Y - x0[1]) ** 2 <= r * r
    pts = np.column_stack([X[inside], Y[inside]])
    if len(pts) == 0:
        return 0.0
    return float(np.sum(g(pts)) * grid.cell_volume / s**2)


# --- persistence ------------------------------------------------------------

def save_field(f: MultiField, directory) -> list[Path]:
    """Write ``meta.json`` plus one little-endian float64 row-major blob per component."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "meta.json").write_text(json.dumps(f.to_metadata(), indent=2, sort_keys=True))
    paths = [d / "meta.json"]
    for i in range(f.k):
        p = d / f"comp_{i}.f64"
        np.ascontiguousarray(f.values[i], dtype="<f8").tofile(p)
        paths.append(p)
    return paths


def load_field(directory) -> MultiField:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    grid = make_grid(meta["dim"], meta["bounds"], meta["n"])
    vals = np.stack([np.fromfile(d / f"comp_{i}.f64", dtype="<f8").reshape(grid.shape)
                     for i in range(meta["k"])])
    rx = meta.get("reaction")
    reaction = None if rx is None else ReactionParams(tuple(rx["mu"]), tuple(rx["lam"]))
    return MultiField(grid, vals, beta=meta["beta"], a=np.array(meta["a"]), reaction=reaction)
