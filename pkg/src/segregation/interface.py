"""Interface extraction, blow-up rescaling and flatness of the interface.

The interface of a field is the set where the two largest components
coincide.  On a grid it is located on edges where the difference of a
dominating pair changes sign, with sub-grid placement by linear interpolation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq, minimize
from scipy.spatial import cKDTree

from .grid import Grid, MultiField, make_grid
from .monotonicity import H as H_of
from .profile import Profile1D

TAU_TRIPLE = 0.05
TAU_GRAD = 0.05


class RadiusBracketError(ValueError):
    """``beta H r^2 = 1`` has no root in the admissible radius range."""

    def __init__(self, msg: str, side: str):
        super().__init__(msg)
        self.side = side


class ComparisonUndefinedError(ValueError):
    pass


@dataclass
class InterfaceSet:
    points: np.ndarray                  # (m, dim)
    pairs: np.ndarray                   # (m, 2) int, i1 < i2
    singular: np.ndarray                # (m,) bool
    grad_diff: np.ndarray               # (m, dim), gradient of u_i1 - u_i2
    spacing: float                      # grid spacing the set was extracted at
    segments: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=int))
    frequency: np.ndarray | None = None  # optional N(u, x, rho) per point

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.grad_diff, axis=1)

    def subset(self, mask) -> "InterfaceSet":
        mask = np.asarray(mask)
        idx = np.nonzero(mask)[0] if mask.dtype == bool else mask
        remap = -np.ones(len(self), dtype=int)
        remap[idx] = np.arange(len(idx))
        seg = remap[self.segments] if len(self.segments) else self.segments
        seg = seg[np.all(seg >= 0, axis=1)] if len(seg) else seg
        freq = None if self.frequency is None else self.frequency[idx]
        return InterfaceSet(self.points[idx], self.pairs[idx], self.singular[idx], self.grad_diff[idx],
                            self.spacing, seg, freq)

    def densified(self, spacing: float | None = None) -> np.ndarray:
        """Points plus samples along the connecting segments at ``spacing`` (default h/8).

        The fine default keeps the directed distance from a sampled line to
        the set from being dominated by gaps between interface samples.
        """
        spacing = spacing or self.spacing / 8
        out = [self.points]
        for a, b in self.segments:
            p, q = self.points[a], self.points[b]
            n = int(math.ceil(np.linalg.norm(q - p) / spacing))
            if n > 1:
                t = np.arange(1, n)[:, None] / n
                out.append(p + t * (q - p))
        return np.vstack(out)

    def nearest(self, target, mask=None) -> int:
        d = np.linalg.norm(self.points - np.asarray(target, dtype=float), axis=1)
        if mask is not None:
            d = np.where(mask, d, np.inf)
        if len(d) == 0 or not np.isfinite(d.min()):
            raise ValueError("no interface point available")
        return int(np.argmin(d))

    def to_csv(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        coords = ["x", "y"][: self.dim]
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(coords + ["i1", "i2", "singular", "grad_norm"])
            for pt, pr, s, g in zip(self.points, self.pairs, self.singular, self.grad_norm):
                w.writerow([f"{c:.17g}" for c in pt] + [int(pr[0]), int(pr[1]), int(bool(s)), f"{g:.17g}"])
        return p


def _top_two(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-u, axis=0, kind="stable")
    return order[0], order[1]


def extract_interface(f: MultiField, zero_tol: float = 1e-12, dominance_tol: float = 1e-12) -> InterfaceSet:
    """Locate the interface on grid edges (and on nodes where the top pair ties exactly).

    For every edge and every candidate pair (the top two components at either
    endpoint) a strict sign change of ``u_i - u_j`` yields a point by linear
    interpolation; it is kept only if ``u_i = u_j`` dominates the remaining
    components there.  Differences below ``zero_tol * max(u)`` count as ties.
    """
    g = f.grid
    u = f.values
    scale = float(np.max(u)) if np.max(u) > 0 else 1.0
    ztol = zero_tol * scale
    dtol = dominance_tol * scale
    t1, t2 = _top_two(u)
    lo_idx = np.minimum(t1, t2)
    hi_idx = np.maximum(t1, t2)

    pts: list[np.ndarray] = []
    prs: list[np.ndarray] = []
    keys: list[tuple] = []  # ("n", node) or ("e", axis, node-of-lower-end) for connectivity

    # nodes where the top pair ties
    node_d = np.take_along_axis(u, t1[None], 0)[0] - np.take_along_axis(u, t2[None], 0)[0]
    tie = node_d <= ztol
    for idx in zip(*np.nonzero(tie)):
        pts.append(g.node(idx))
        prs.append(np.array([lo_idx[idx], hi_idx[idx]]))
        keys.append(("n",) + tuple(int(i) for i in idx))

    def sgn(d):
        return np.where(d > ztol, 1, np.where(d < -ztol, -1, 0))

    for axis in range(g.dim):
        sl_p = [slice(None)] * g.dim
        sl_q = [slice(None)] * g.dim
        sl_p[axis] = slice(0, -1)
        sl_q[axis] = slice(1, None)
        up = u[(slice(None),) + tuple(sl_p)]
        uq = u[(slice(None),) + tuple(sl_q)]
        cand = [(lo_idx[tuple(sl_p)], hi_idx[tuple(sl_p)]), (lo_idx[tuple(sl_q)], hi_idx[tuple(sl_q)])]
        found: dict[tuple, set] = {}
        for ci, cj in cand:
            dp = np.take_along_axis(up, ci[None], 0)[0] - np.take_along_axis(up, cj[None], 0)[0]
            dq = np.take_along_axis(uq, ci[None], 0)[0] - np.take_along_axis(uq, cj[None], 0)[0]
            cross = sgn(dp) * sgn(dq) < 0
            for idx in zip(*np.nonzero(cross)):
                i, j = int(ci[idx]), int(cj[idx])
                if (i, j) in found.setdefault(idx, set()):
                    continue
                found[idx].add((i, j))
                t = dp[idx] / (dp[idx] - dq[idx])
                vals = (1 - t) * up[(slice(None),) + idx] + t * uq[(slice(None),) + idx]
                others = np.delete(vals, [i, j])
                if len(others) and min(vals[i], vals[j]) < others.max() - dtol:
                    continue
                p = g.node(idx)
                p[axis] += t * g.h[axis]
                pts.append(p)
                prs.append(np.array([i, j]))
                keys.append(("e", axis) + tuple(int(v) for v in idx))

    if not pts:
        empty = np.empty((0, g.dim))
        return InterfaceSet(empty, np.empty((0, 2), dtype=int), np.empty(0, dtype=bool), empty, g.hmin)
    points = np.array(pts)
    pairs = np.array(prs, dtype=int)
    grads = f.gradient(points, strict=False)  # (k, m, dim)
    gd = grads[pairs[:, 0], np.arange(len(points))] - grads[pairs[:, 1], np.arange(len(points))]
    segs = _connect(g, keys, pairs) if g.dim == 2 else np.empty((0, 2), dtype=int)
    return InterfaceSet(points, pairs, np.zeros(len(points), dtype=bool), gd, g.hmin, segs)


def _connect(g: Grid, keys: list[tuple], pairs: np.ndarray) -> np.ndarray:
    """Marching-squares style connectivity: join the points on each cell's boundary."""
    cells: dict[tuple, list[int]] = {}

    def add(cell, p):
        i, j = cell
        if 0 <= i < g.n[0] - 1 and 0 <= j < g.n[1] - 1:
            cells.setdefault(cell, []).append(p)

    for p, key in enumerate(keys):
        if key[0] == "n":
            i, j = key[1:]
            for c in ((i, j), (i - 1, j), (i, j - 1), (i - 1, j - 1)):
                add(c, p)
        else:
            axis, i, j = key[1:]
            if axis == 0:  # edge (i,j)-(i+1,j): bottom of cell (i,j), top of (i,j-1)
                add((i, j), p)
                add((i, j - 1), p)
            else:          # edge (i,j)-(i,j+1): left of cell (i,j), right of (i-1,j)
                add((i, j), p)
                add((i - 1, j), p)
    segs = set()
    for members in cells.values():
        by_pair: dict[tuple, list[int]] = {}
        for p in members:
            by_pair.setdefault(tuple(pairs[p]), []).append(p)
        for group in by_pair.values():
            if len(group) == 2:
                segs.add(tuple(sorted(group)))
            elif len(group) == 4:
                # saddle cell: keep the shorter of the two non-crossing pairings
                a, b, c, d = group
                options = [((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))]
                pts = np.array([_point_of(keys[p], g) for p in group])
                pos = {p: m for m, p in enumerate(group)}

                def length(opt):
                    return sum(np.linalg.norm(pts[pos[p]] - pts[pos[q]]) for p, q in opt)

                segs.update(tuple(sorted(s)) for s in min(options, key=length))
    return np.array(sorted(segs), dtype=int).reshape(-1, 2)


def _point_of(key: tuple, g: Grid) -> np.ndarray:
    """Approximate location of a connectivity key (edge midpoint or node)."""
    if key[0] == "n":
        return g.node(key[1:])
    p = g.node(key[2:])
    p[key[1]] += 0.5 * g.h[key[1]]
    return p


def classify_singular(f: MultiField, iface: InterfaceSet, tau_triple: float = TAU_TRIPLE,
                      tau_grad: float = TAU_GRAD) -> InterfaceSet:
    """Flag points with a third component within ``tau_triple`` of the top value
    or a top-pair gradient below ``tau_grad`` times the median over the interface."""
    if len(iface) == 0:
        return iface
    vals = f.interpolate(iface.points)  # (k, m)
    m = np.arange(len(iface))
    top = np.maximum(vals[iface.pairs[:, 0], m], vals[iface.pairs[:, 1], m])
    third = np.full(len(iface), -np.inf)
    for l in range(f.k):
        other = (iface.pairs[:, 0] != l) & (iface.pairs[:, 1] != l)
        third = np.where(other, np.maximum(third, vals[l]), third)
    triple = top - third <= tau_triple * top
    gn = iface.grad_norm
    flat = gn < tau_grad * np.median(gn)
    return replace(iface, singular=triple | flat)


def definition_violation(f: MultiField, iface: InterfaceSet) -> float:
    """Largest violation of ``u_i1 = u_i2 >= u_l`` over the interface points (0 if none)."""
    if len(iface) == 0:
        return 0.0
    vals = f.interpolate(iface.points)
    m = np.arange(len(iface))
    a = vals[iface.pairs[:, 0], m]
    b = vals[iface.pairs[:, 1], m]
    worst = np.abs(a - b)
    lowest = np.minimum(a, b)
    for l in range(f.k):
        worst = np.maximum(worst, vals[l] - lowest)
    return float(max(0.0, worst.max()))


def interface_frequencies(f: MultiField, iface: InterfaceSet, rho: float) -> InterfaceSet:
    """Attach ``N(u, x, rho)`` per point (NaN where the ball leaves the domain)."""
    from .monotonicity import N

    out = np.full(len(iface), np.nan)
    for m, p in enumerate(iface.points):
        if f.grid.ball_inside(p, rho):
            out[m] = N(f, p, rho)
    return replace(iface, frequency=out)


# --- blow-up ----------------------------------------------------------------

def find_r_beta(f: MultiField, x, r_min: float | None = None, r_max: float | None = None,
                rtol: float = 1e-6) -> float:
    """Root of the increasing map ``r -> beta H(u, x, r) r^2 - 1``."""
    if f.beta <= 0:
        raise ValueError("find_r_beta needs beta > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = 4 * f.grid.hmin if r_min is None else r_min
    hi = f.grid.dist_to_boundary(x) - 2 * f.grid.hmin if r_max is None else r_max

    def phi(r):
        return f.beta * H_of(f, x, r) * r * r - 1.0

    flo, fhi = phi(lo), phi(hi)
    if flo > 0:
        raise RadiusBracketError(f"beta H r^2 = {flo + 1:.3g} > 1 already at r_min={lo:g} (grid too coarse)", "below")
    if fhi < 0:
        raise RadiusBracketError(f"beta H r^2 = {fhi + 1:.3g} < 1 at r_max={hi:g} (beta too small)", "above")
    return float(brentq(phi, lo, hi, rtol=rtol, xtol=rtol * lo))


@dataclass
class BlowupProfile:
    center: np.ndarray
    radius: float
    window: float
    H_center: float
    field: MultiField  # rescaled samples v on the window grid, beta = 1

    @property
    def dim(self) -> int:
        return self.field.grid.dim


def blowup(f: MultiField, x, r_beta: float, R_w: float, spacing: float | None = None,
           max_nodes: int = 401) -> BlowupProfile:
    """Sample ``v(y) = u(x + r_beta y) / H(u, x, r_beta)^(1/2)`` on ``[-R_w, R_w]^dim``.

    ``v`` solves the system with ``beta = 1``.  The default window spacing is
    half the field spacing in blow-up units (capped at ``max_nodes`` per axis).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(f.grid.contains((x + r_beta * R_w)[None]) & f.grid.contains((x - r_beta * R_w)[None])):
        raise ValueError(f"blow-up window of half-width {R_w:g} (= {r_beta * R_w:g} in x) exits the domain")
    spacing = spacing or f.grid.hmin / r_beta / 2
    n = min(int(math.ceil(2 * R_w / spacing)) + 1, max_nodes)
    n += (n + 1) % 2  # odd so that y = 0 is a node
    wg = make_grid(f.grid.dim, [(-R_w, R_w)] * f.grid.dim, n)
    Y = np.column_stack([m.ravel() for m in wg.mesh()])
    Hc = H_of(f, x, r_beta)
    vals = f.interpolate(x + r_beta * Y) / math.sqrt(Hc)
    v = MultiField(wg, vals.reshape((f.k,) + wg.shape), beta=1.0, a=f.a)
    return BlowupProfile(x, r_beta, R_w, Hc, v)


def _profile_scale(profile: Profile1D, t: float, dim: int) -> float:
    """Amplitude ``lam`` with ``H(lam W(lam(. - t)), 0, 1) = 1``."""
    if dim == 1:
        s = np.array([1.0 - t, -1.0 - t])
        weight = 1.0
    else:
        th = 2 * np.pi * np.arange(256) / 256
        s = np.cos(th) - t
        weight = 2 * np.pi / 256

    def g(loglam):
        lam = math.exp(loglam)
        w1, w2 = profile(lam * s)
        return lam * lam * weight * float(np.sum(w1**2 + w2**2)) - 1.0

    return math.exp(brentq(g, -12.0, 12.0, xtol=1e-13))


@dataclass
class ProfileFit:
    distance: float
    angle: float
    shift: float
    swapped: bool
    scale: float


def fit_profile(bp: BlowupProfile, profile: Profile1D, threshold: float = 0.1,
                max_points: int = 101) -> ProfileFit:
    """Best sup-norm match of the blow-up by the 1D profile (see :func:`compare_to_profile`)."""
    v = bp.field
    dim = bp.dim
    sups = v.values.reshape(v.k, -1).max(axis=1)
    live = np.nonzero(sups >= threshold * sups.max())[0]
    if len(live) >= 3:
        raise ComparisonUndefinedError(f"{len(live)} components above threshold; comparison with the 1D profile "
                                       "is undefined at points of higher multiplicity")
    i, j = np.argsort(-sups)[:2]
    stride = max(1, int(math.ceil(v.grid.n[0] / max_points)))
    sub = (slice(None),) + (slice(None, None, stride),) * dim
    vals = v.values[sub].reshape(v.k, -1)
    Y = np.column_stack([m[(slice(None, None, stride),) * dim].ravel() for m in v.grid.mesh()])
    rest = [c for c in range(v.k) if c not in (i, j)]
    rest_err = float(np.max(vals[rest])) if rest else 0.0

    scale_cache: dict[float, float] = {}

    def lam_of(t):
        key = round(t, 12)
        if key not in scale_cache:
            scale_cache[key] = _profile_scale(profile, t, dim)
        return scale_cache[key]

    def dist(params, swapped):
        phi, t = (0.0, params[0]) if dim == 1 else params
        lam = lam_of(t)
        s = Y[:, 0] - t if dim == 1 else Y[:, 0] * math.cos(phi) + Y[:, 1] * math.sin(phi) - t
        w1, w2 = profile(lam * s)
        a, b = (w2, w1) if swapped else (w1, w2)
        return max(float(np.max(np.abs(vals[i] - lam * a))), float(np.max(np.abs(vals[j] - lam * b))), rest_err)

    grad = v.gradient(np.zeros(dim))
    gdir = grad[i] - grad[j]
    phi0 = math.atan2(gdir[1], gdir[0]) if dim == 2 else 0.0
    best = None
    for swapped in (False, True):
        if dim == 1:
            starts = [np.array([t]) for t in np.linspace(-1, 1, 21)]
        else:
            base = phi0 + (math.pi if swapped else 0.0)
            starts = [np.array([base + dp, t]) for dp in np.deg2rad([-10, 0, 10]) for t in (-0.5, 0.0, 0.5)]
        coarse = min(starts, key=lambda p0: dist(p0, swapped))
        res = minimize(dist, coarse, args=(swapped,), method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000})
        cand = (float(res.fun), res.x, swapped)
        if best is None or cand[0] < best[0]:
            best = cand
    d, params, swapped = best
    phi, t = (0.0, float(params[0])) if dim == 1 else (float(params[0]), float(params[1]))
    return ProfileFit(d, phi, t, swapped, lam_of(t))


def compare_to_profile(bp: BlowupProfile, profile: Profile1D, threshold: float = 0.1) -> float:
    """Sup-norm distance from the blow-up to the closest rigid copy of the 1D profile.

    Minimises over translation along the normal, reflection (component swap)
    and, in 2D, the normal angle; the profile is extended constantly in the
    tangential direction and scaled so that ``H(V, 0, 1) = 1`` like the
    blow-up itself.  Components other than the dominating pair are compared
    with zero.
    """
    return fit_profile(bp, profile, threshold).distance


# --- flatness ----------------------------------------------------------------

def hausdorff_distance(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if len(A) == 0 or len(B) == 0:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    dab = cKDTree(B).query(A)[0].max()
    dba = cKDTree(A).query(B)[0].max()
    return float(max(dab, dba))


@dataclass
class FlatnessReport:
    center: np.ndarray
    radii: np.ndarray
    delta: np.ndarray
    normal_angles: np.ndarray

    def to_csv(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "delta", "normal_angle"])
            for r, d, a in zip(self.radii, self.delta, self.normal_angles):
                w.writerow([f"{r:.17g}", f"{d:.17g}", f"{a:.17g}"])
        return p


def _line_delta(G: np.ndarray, x: np.ndarray, r: float, phi: float, step: float, tree: cKDTree) -> float:
    t = np.array([math.cos(phi), math.sin(phi)])
    rel = G - x
    # every point of G lies in B_r, so its projection falls inside the segment
    d_set_to_line = float(np.max(np.abs(rel[:, 0] * t[1] - rel[:, 1] * t[0])))
    n = int(math.ceil(2 * r / step))
    s = np.linspace(-r, r, n + 1)
    d_line_to_set = float(tree.query(x + s[:, None] * t)[0].max())
    return max(d_set_to_line, d_line_to_set) / r


def reifenberg_flatness(interface, x, radii: Sequence[float], spacing: float | None = None,
                        n_angles: int = 360) -> FlatnessReport:
    """``delta(r) = min over lines L through x of dist_H(Gamma cap B_r, L cap B_r) / r``.

    ``interface`` is an :class:`InterfaceSet` (densified along its segments)
    or a plain ``(m, 2)`` point array.  Lines are sampled at ``spacing``
    (default half the grid spacing); the angle scan is refined once around
    the best coarse angle.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if isinstance(interface, InterfaceSet):
        pts = interface.densified()
        spacing = spacing or interface.spacing / 2
    else:
        pts = np.asarray(interface, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
    if pts.shape[1] == 1 or len(x) == 1:
        return FlatnessReport(x, radii, np.zeros(len(radii)), np.zeros(len(radii)))
    if spacing is None:
        raise ValueError("spacing is required for a plain point array")
    deltas, normals = [], []
    for r in radii:
        G = pts[np.linalg.norm(pts - x, axis=1) <= r]
        if len(G) == 0:
            raise ValueError(f"no interface points within r={r:g} of {x.tolist()}")
        tree = cKDTree(G)
        coarse = np.pi * np.arange(n_angles) / n_angles
        vals = np.array([_line_delta(G, x, r, a, spacing, tree) for a in coarse])
        best = coarse[int(np.argmin(vals))]
        fine = best + (np.pi / n_angles) * np.linspace(-1, 1, 41)
        fvals = np.array([_line_delta(G, x, r, a, spacing, tree) for a in fine])
        m = int(np.argmin(fvals))
        deltas.append(min(fvals[m], vals.min()))
        normals.append((fine[m] + np.pi / 2) % np.pi)
    return FlatnessReport(x, radii, np.array(deltas), np.array(normals))


def local_separation_components(f: MultiField, x, R: float, pair: tuple[int, int] | None = None,
                                zero_tol: float = 1e-12) -> int:
    """Number of grid-connected components of ``B_R(x)`` minus the sign-change band of ``u_i - u_j``."""
    g = f.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if pair is None:
        vals = f.interpolate(x)
        pair = tuple(int(c) for c in np.argsort(-vals)[:2])
    i, j = pair
    d = f.values[i] - f.values[j]
    scale = float(np.max(np.abs(f.values)))
    s = np.where(d > zero_tol * scale, 1, np.where(d < -zero_tol * scale, -1, 0))
    mesh = g.mesh()
    inside = sum((m - c) ** 2 for m, c in zip(mesh, x)) <= R * R
    band = s == 0
    for axis in range(g.dim):
        change = np.diff(s, axis=axis) != 0
        lo = [slice(None)] * g.dim
        hi = [slice(None)] * g.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        band[tuple(lo)] |= change
        band[tuple(hi)] |= change
    _, count = ndimage.label(inside & ~band)
    return int(count)
