"""Almgren frequency, Alt-Caffarelli-Friedman functional and their monotonicity audits.

For a field ``u`` in dimension ``N`` and a ball ``B_r(x0)`` inside the domain:

    H(r) = r^(1-N) * int_{dB_r} sum_i u_i^2
    E(r) = r^(2-N) * int_{B_r} sum_i |grad u_i|^2 + 2 beta sum_{i<j} a_ij u_i^2 u_j^2
    N(r) = E(r) / H(r)

``form="segregated"`` drops the interaction term from ``E``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import Grid, MultiField, ball_integral, ball_rule_polar, check_ball, sphere_integral, sphere_rule

H_FLOOR = 1e-30
FORMS = ("beta", "segregated")


class DegenerateCenterError(ValueError):
    """All components vanish on the sphere, so the frequency is 0/0."""


@dataclass
class FrequencyProfile:
    center: np.ndarray
    radii: np.ndarray
    H: np.ndarray
    E: np.ndarray
    N: np.ndarray
    form: str = "beta"

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")

    def to_csv(self, path) -> Path:
        return _write_csv(path, ["r", "H", "E", "N"], [self.radii, self.H, self.E, self.N])


@dataclass
class ACFProfile:
    radii: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    J: np.ndarray
    pair: tuple[int, int]
    # hypotheses of the ACF formula, reported but not enforced:
    # sphere-mass ratio bound (lambda) and lower bound on the u_i sphere mass (mu)
    mass_ratio_bound: float = float("nan")
    mass_lower_bound: float = float("nan")
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> Path:
        return _write_csv(path, ["r", "J1", "J2", "J"], [self.radii, self.J1, self.J2, self.J])


def _write_csv(path, header, cols) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])
    return p


def _interaction(f: MultiField, u2: np.ndarray) -> np.ndarray:
    out = np.zeros(u2.shape[1])
    for i in range(f.k):
        for j in range(i + 1, f.k):
            out = out + 2 * f.beta * f.a[i, j] * u2[i] * u2[j]
    return out


def H(f: MultiField, x0, r: float) -> float:
    x0 = check_ball(f.grid, x0, r)
    off, w = sphere_rule(f.grid, r)
    u = f.sample_around(x0, off)
    return r ** (1 - f.grid.dim) * float(np.sum(np.sum(u * u, axis=0) * w))


def E(f: MultiField, x0, r: float, form: str = "beta", quadrature: str = "polar") -> float:
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    x0 = check_ball(f.grid, x0, r)
    if quadrature == "polar":
        off, w = ball_rule_polar(f.grid, r)
        grad = f.sample_around(x0, off, gradients=True)
        dens = np.sum(grad**2, axis=(0, 2))
        if form == "beta" and f.beta > 0:
            dens = dens + _interaction(f, f.sample_around(x0, off) ** 2)
        total = float(np.sum(dens * w))
    else:
        def g(pts):
            dens = np.sum(f.gradient(pts) ** 2, axis=(0, 2))
            if form == "beta" and f.beta > 0:
                dens = dens + _interaction(f, f.interpolate(pts) ** 2)
            return dens
        total = ball_integral(g, f.grid, x0, r, method=quadrature)
    return r ** (2 - f.grid.dim) * total


def N(f: MultiField, x0, r: float, form: str = "beta", quadrature: str = "polar") -> float:
    h = H(f, x0, r)
    if h < H_FLOOR:
        raise DegenerateCenterError(f"H={h:.3e} below floor at center {np.atleast_1d(x0).tolist()}, r={r:g}")
    return E(f, x0, r, form, quadrature) / h


def admissible_radius_range(grid: Grid, x0) -> tuple[float, float]:
    """``[4h, dist(x0, boundary) - 2h]``: below 4h the quadrature is meaningless."""
    return 4 * grid.hmin, grid.dist_to_boundary(x0) - 2 * grid.hmin


def geometric_radii(r_min: float, r_max: float, n_r: int) -> np.ndarray:
    if not 0 < r_min < r_max:
        raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    return np.geomspace(r_min, r_max, n_r)


def frequency_profile(f: MultiField, x0, r_min: float | None = None, r_max: float | None = None,
                      n_r: int = 32, form: str = "beta", quadrature: str = "polar",
                      radii: Sequence[float] | None = None) -> FrequencyProfile:
    """H, E, N at ``n_r`` geometrically spaced radii (defaults: the admissible range)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if radii is None:
        lo, hi = admissible_radius_range(f.grid, x0)
        radii = geometric_radii(lo if r_min is None else r_min, hi if r_max is None else r_max, n_r)
    radii = np.asarray(radii, dtype=float)
    hs = np.array([H(f, x0, r) for r in radii])
    if np.any(hs < H_FLOOR):
        raise DegenerateCenterError(f"H below floor at center {x0.tolist()}")
    es = np.array([E(f, x0, r, form, quadrature) for r in radii])
    return FrequencyProfile(x0, radii, hs, es, es / hs, form)


def audit_frequency_monotonicity(p: FrequencyProfile) -> float:
    """Largest drop ``N(r_m) - N(r_{m+1})`` between consecutive radii (0 if monotone)."""
    if len(p.radii) < 3:
        raise ValueError("need at least 3 radii")
    return float(max(0.0, np.max(p.N[:-1] - p.N[1:])))


def audit_logH_identity(f: MultiField, x0, radii: Sequence[float], form: str = "beta",
                        quadrature: str = "polar") -> float:
    """Max relative mismatch between d/dr log H (finite differences) and 2N/r."""
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3:
        raise ValueError("need at least 3 radii")
    p = frequency_profile(f, x0, radii=radii, form=form, quadrature=quadrature)
    dlog = np.gradient(np.log(p.H), radii, edge_order=2)[1:-1]
    rhs = (2 * p.N / radii)[1:-1]
    scale = np.maximum(np.abs(rhs), np.max(np.abs(rhs)) * 1e-12 + 1e-300)
    return float(np.max(np.abs(dlog - rhs) / scale))


def _value_at(p: FrequencyProfile, arr: np.ndarray, r: float) -> float:
    if not p.radii[0] <= r <= p.radii[-1]:
        raise ValueError(f"r={r:g} outside the profile range [{p.radii[0]:g}, {p.radii[-1]:g}]")
    return float(np.interp(math.log(r), np.log(p.radii), arr))


def audit_eh_growth(p: FrequencyProfile, r_tilde: float, gamma: float | None = None) -> float:
    """Largest relative decrease of ``(E + H) / r^(2 gamma)`` over radii beyond ``r_tilde``.

    ``gamma`` defaults to the frequency at ``r_tilde`` (log-linear interpolation).
    """
    if gamma is None:
        gamma = _value_at(p, p.N, r_tilde)
    keep = p.radii >= r_tilde * (1 - 1e-12)
    q = (p.E[keep] + p.H[keep]) / p.radii[keep] ** (2 * gamma)
    if len(q) < 2:
        return 0.0
    return float(max(0.0, np.max((q[:-1] - q[1:]) / q[:-1])))


def _kernel(dim: int):
    if dim == 2:
        return lambda pts, x0: 1.0
    return lambda pts, x0: np.abs(pts[:, 0] - x0[0])  # |x|^(2-N) = |x| in 1D


def acf_profile(f: MultiField, pair: tuple[int, int] = (0, 1), r_min: float = 1.0, r_max: float = 5.0,
                n_r: int = 32, center=None, quadrature: str = "polar",
                radii: Sequence[float] | None = None) -> ACFProfile:
    """``J_1, J_2`` and ``J = J_1 J_2 / r^4`` for a component pair about ``center``."""
    i, j = pair
    x0 = np.zeros(f.grid.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    radii = geometric_radii(r_min, r_max, n_r) if radii is None else np.asarray(radii, dtype=float)
    ker = _kernel(f.grid.dim)
    aij = f.a[i, j]

    def dens(c):
        def g(pts):
            grad = f.gradient(pts)
            u = f.interpolate(pts)
            return (np.sum(grad[c] ** 2, axis=-1) + f.beta * aij * u[i] ** 2 * u[j] ** 2) * ker(pts, x0)
        return g

    J1 = np.array([ball_integral(dens(i), f.grid, x0, r, method=quadrature) for r in radii])
    J2 = np.array([ball_integral(dens(j), f.grid, x0, r, method=quadrature) for r in radii])
    J = J1 * J2 / radii**4

    def mass(c, r):
        return sphere_integral(lambda pts: f.interpolate(pts)[c] ** 2, f.grid, x0, r)

    m1 = np.array([mass(i, r) for r in radii])
    m2 = np.array([mass(j, r) for r in radii])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = m1 / m2
        lam = float(np.max(np.maximum(ratio, 1 / ratio)))
    mu = float(np.min(m1 / radii ** (f.grid.dim - 1)))
    return ACFProfile(radii, J1, J2, J, (i, j), lam, mu, {"center": x0.tolist(), "beta": f.beta})


def audit_acf(p: ACFProfile, beta: float, C: float = 1.0) -> float:
    """Largest relative decrease of ``J(r) exp(-C (beta r^2)^(-1/4))`` along the radii."""
    q = p.J * np.exp(-C * (beta * p.radii**2) ** -0.25)
    if np.all(q == 0):
        return 0.0
    return float(max(0.0, np.max((q[:-1] - q[1:]) / np.where(q[:-1] > 0, q[:-1], 1.0))))
