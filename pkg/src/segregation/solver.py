"""Finite-difference solver for the strongly competing system.

Solves, on the interior nodes of a uniform grid with Dirichlet data,

    Delta u_i = beta * u_i * sum_{j != i} a_ij u_j**2 - f_i(u_i),   i = 1..k,

with the optional reaction ``f_i(s) = mu_i s^3 - lam_i s``.

The iteration is a semi-implicit Gauss-Seidel sweep over the components: for
component ``i`` the competition term is frozen at the current values of the
other components and moved to the diagonal,

    (-Delta_h + beta * sum_j a_ij u_j**2 + lam_i^+) u_i = mu_i u_i^3 + lam_i^- u_i,

and this linear system is solved exactly (tridiagonal in 1D, sparse LU in 2D).
The matrix is an M-matrix, so the update is nonnegative whenever the data
are, and with ``f = 0`` each component update is the exact minimiser of the
discrete energy in that component, so the energy never increases.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, MultiField, ReactionParams, coupling_matrix

log = logging.getLogger(__name__)

SCHEMES = ("semi-implicit-gauss-seidel",)


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    """Iteration budget exhausted; ``field`` holds the last iterate."""

    def __init__(self, msg: str, residual: float, field: MultiField | None = None):
        super().__init__(msg)
        self.residual = residual
        self.field = field


class DivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-8
    max_iters: int = 20000
    damping: float = 1.0
    scheme: str = "semi-implicit-gauss-seidel"
    continuation_factor: float = 2.0
    min_damping: float = 1.0 / 64
    log_path: str | None = None

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.continuation_factor > 1:
            raise ValueError("continuation_factor must exceed 1")


@dataclass(eq=False)
class BoundaryData:
    """Dirichlet traces stored as full nodal arrays; only boundary nodes are read."""

    grid: Grid
    traces: np.ndarray

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=float)
        if self.traces.shape[1:] != self.grid.shape:
            raise ValueError("trace arrays must match the grid shape")
        mask = boundary_mask(self.grid)
        t = self.traces[:, mask]
        if np.any(t < 0):
            raise ValueError("boundary traces must be nonnegative")
        if np.sum(np.any(t > 0, axis=1)) < 2:
            raise ValueError("at least two components need a nontrivial boundary trace")

    @property
    def k(self) -> int:
        return self.traces.shape[0]

    @classmethod
    def from_functions(cls, grid: Grid, fns: Sequence[Callable]) -> "BoundaryData":
        """Evaluate ``fn(*coords)`` for each component on the nodes."""
        mesh = grid.mesh()
        return cls(grid, np.stack([np.broadcast_to(np.asarray(fn(*mesh), float), grid.shape) for fn in fns]))

    @classmethod
    def from_field(cls, f: MultiField) -> "BoundaryData":
        return cls(f.grid, f.values.copy())


def boundary_mask(grid: Grid) -> np.ndarray:
    m = np.zeros(grid.shape, dtype=bool)
    if grid.dim == 1:
        m[[0, -1]] = True
    else:
        m[[0, -1], :] = True
        m[:, [0, -1]] = True
    return m


def _interior(a: np.ndarray) -> np.ndarray:
    return a[(slice(1, -1),) * a.ndim]


def laplacian_interior(u: np.ndarray, h: Sequence[float]) -> np.ndarray:
    """Standard (2*dim+1)-point Laplacian at the interior nodes of ``u``."""
    inner = (slice(1, -1),) * u.ndim
    out = np.zeros(tuple(s - 2 for s in u.shape))
    for d in range(u.ndim):
        lo = list(inner)
        hi = list(inner)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        out += (u[tuple(lo)] - 2 * u[inner] + u[tuple(hi)]) / h[d] ** 2
    return out


@lru_cache(maxsize=8)
def _neg_laplacian_matrix(grid: Grid) -> sp.csc_matrix:
    blocks = []
    for d, m in enumerate(grid.n):
        mi = m - 2
        blocks.append(sp.diags([-np.ones(mi - 1), 2 * np.ones(mi), -np.ones(mi - 1)], [-1, 0, 1]) / grid.h[d] ** 2)
    if grid.dim == 1:
        return blocks[0].tocsc()
    ix = sp.identity(grid.n[0] - 2)
    iy = sp.identity(grid.n[1] - 2)
    return (sp.kron(blocks[0], iy) + sp.kron(ix, blocks[1])).tocsc()


def _coupling_sum(u: np.ndarray, a: np.ndarray, i: int) -> np.ndarray:
    s = np.zeros(u.shape[1:])
    for j in range(u.shape[0]):
        if j != i:
            s += a[i, j] * u[j] ** 2
    return s


def _block_solve(grid: Grid, diag_extra: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(-Delta_h + diag_extra) x = rhs`` on the interior nodes."""
    if grid.dim == 1:
        h2 = grid.h[0] ** 2
        m = rhs.size
        ab = np.empty((3, m))
        ab[0, :] = -1.0 / h2
        ab[2, :] = -1.0 / h2
        ab[1, :] = 2.0 / h2 + diag_extra
        return sla.solve_banded((1, 1), ab, rhs, check_finite=False)
    A = _neg_laplacian_matrix(grid) + sp.diags(diag_extra.ravel())
    return spla.spsolve(A.tocsc(), rhs.ravel()).reshape(rhs.shape)


def residual_array(f: MultiField) -> np.ndarray:
    """Pointwise residual ``Delta_h u_i - beta u_i sum a_ij u_j^2 + f_i(u_i)`` at interior nodes."""
    g = f.grid
    u = f.values
    out = np.empty((f.k,) + tuple(m - 2 for m in g.shape))
    for i in range(f.k):
        r = laplacian_interior(u[i], g.h) - f.beta * _interior(u[i] * _coupling_sum(u, f.a, i))
        if f.reaction is not None:
            r += f.reaction.f(i, _interior(u[i]))
        out[i] = r
    return out


def residual(f: MultiField) -> float:
    """Max-norm discrete residual over all components and interior nodes."""
    return float(np.max(np.abs(residual_array(f))))


def energy(f: MultiField) -> float:
    """Discrete energy whose component-wise minimisers are the block updates.

    ``sum_i 1/2 |grad_h u_i|^2`` over grid edges plus, over interior nodes,
    ``beta/2 sum_{i<j} a_ij u_i^2 u_j^2 - sum_i F_i(u_i)``; all times the cell volume.
    """
    g = f.grid
    u = f.values
    e = 0.0
    for d in range(g.dim):
        du = np.diff(u, axis=d + 1) / g.h[d]
        e += 0.5 * float(np.sum(du * du))
    inner = u[(slice(None),) + (slice(1, -1),) * g.dim]
    inter = 0.0
    for i in range(f.k):
        for j in range(i + 1, f.k):
            inter += f.a[i, j] * float(np.sum(inner[i] ** 2 * inner[j] ** 2))
    e += 0.5 * f.beta * inter
    if f.reaction is not None:
        e -= sum(float(np.sum(f.reaction.primitive(i, inner[i]))) for i in range(f.k))
    return e * g.cell_volume


def _harmonic_extension(grid: Grid, traces: np.ndarray) -> np.ndarray:
    u = traces.copy()
    mask = boundary_mask(grid)
    inner_shape = tuple(m - 2 for m in grid.shape)
    for i in range(u.shape[0]):
        b = np.where(mask, u[i], 0.0)
        rhs = laplacian_interior(b, grid.h)  # boundary neighbours only, centre is zero
        _interior(u[i])[...] = _block_solve(grid, np.zeros(inner_shape), rhs)
    return np.clip(u, 0.0, None)


class _Telemetry:
    def __init__(self, path: str | None, history: list | None):
        self.history = history
        self.fh = None
        if path is not None:
            p = Path(path)
            new = not p.exists()
            p.parent.mkdir(parents=True, exist_ok=True)
            self.fh = open(p, "a", newline="")
            self.writer = csv.writer(self.fh)
            if new:
                self.writer.writerow(["iter", "residual", "energy"])

    def record(self, it: int, res: float, en: float):
        if self.history is not None:
            self.history.append((it, res, en))
        if self.fh is not None:
            self.writer.writerow([it, repr(res), repr(en)])

    def close(self):
        if self.fh is not None:
            self.fh.close()


def solve(grid: Grid, k: int, a, beta: float, boundary: BoundaryData,
          reaction: ReactionParams | None = None, config: SolverConfig | None = None,
          initial: np.ndarray | None = None, history: list | None = None) -> MultiField:
    """Converge the discrete system to ``config.residual_tol``.

    ``initial`` (interior values are used, boundary values are overwritten with
    the Dirichlet data) defaults to the componentwise harmonic extension of the
    traces.  Pass a list as ``history`` to collect ``(iter, residual, energy)``.
    Raises :class:`ConvergenceError` when ``max_iters`` is exhausted and
    :class:`DivergenceError` on non-finite iterates.
    """
    cfg = config or SolverConfig()
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if boundary.k != k or boundary.grid != grid:
        raise ValueError("boundary data does not match grid / component count")
    a = coupling_matrix(k, a)
    mask = boundary_mask(grid)
    if initial is None:
        u = _harmonic_extension(grid, boundary.traces)
    else:
        u = np.clip(np.array(initial, dtype=float), 0.0, None)
        u[:, mask] = boundary.traces[:, mask]

    f = MultiField(grid, u, beta=beta, a=a, reaction=reaction)
    tel = _Telemetry(cfg.log_path, history)
    omega = cfg.damping
    try:
        res = residual(f)
        en = energy(f)
        tel.record(0, res, en)
        it = 0
        while res > cfg.residual_tol:
            if it >= cfg.max_iters:
                raise ConvergenceError(
                    f"no convergence in {cfg.max_iters} sweeps at beta={beta:g}: residual {res:.3e}", res, f)
            it += 1
            _sweep(f, omega)
            if not np.all(np.isfinite(f.values)):
                raise DivergenceError(f"non-finite iterate at sweep {it} (beta={beta:g})")
            new_res = residual(f)
            en = energy(f)
            tel.record(it, new_res, en)
            if new_res > res and omega > cfg.min_damping:
                omega = max(omega / 2, cfg.min_damping)
                log.debug("residual rose %.3e -> %.3e; damping now %g", res, new_res, omega)
            res = new_res
        log.info("beta=%g converged in %d sweeps, residual %.3e", beta, it, res)
    finally:
        tel.close()
    return MultiField(grid, f.values, beta=beta, a=a, reaction=reaction)


def _sweep(f: MultiField, omega: float) -> None:
    g = f.grid
    u = f.values
    inner_shape = tuple(m - 2 for m in g.shape)
    mask = boundary_mask(g)
    for i in range(f.k):
        ui = _interior(u[i])
        diag = f.beta * _interior(_coupling_sum(u, f.a, i))
        rhs = laplacian_interior(np.where(mask, u[i], 0.0), g.h)
        if f.reaction is not None:
            mu, lam = f.reaction.mu[i], f.reaction.lam[i]
            diag = diag + max(lam, 0.0)
            rhs = rhs + mu * ui**3 + max(-lam, 0.0) * ui
        new = _block_solve(g, diag.reshape(inner_shape), rhs)
        if omega < 1.0:
            new = (1 - omega) * ui + omega * new
        ui[...] = np.clip(new, 0.0, None)


def continue_in_beta(solution: MultiField, beta_next: float, config: SolverConfig | None = None,
                     history: list | None = None) -> MultiField:
    """Warm-started solve at ``beta_next`` keeping the boundary data of ``solution``."""
    if not beta_next > solution.beta:
        raise ValueError(f"beta_next={beta_next:g} must exceed the current beta={solution.beta:g}")
    bd = BoundaryData.from_field(solution)
    return solve(solution.grid, solution.k, solution.a, beta_next, bd, solution.reaction, config,
                 initial=solution.values, history=history)


def geometric_schedule(start: float, stop: float, factor: float = 2.0) -> list[float]:
    """``start, start*factor, ...`` up to and including ``stop`` (within round-off)."""
    if not (start > 0 and stop >= start and factor > 1):
        raise ValueError("need 0 < start <= stop and factor > 1")
    n = int(math.floor(math.log(stop / start) / math.log(factor) + 1e-9))
    return [start * factor**m for m in range(n + 1)]
