"""The unique 1D entire solution of ``W1'' = W1 W2^2, W2'' = W1^2 W2``.

Normalised by ``W2(x) = W1(-x)`` and ``W1'(+inf) = 1``; the Hamiltonian
``W1'^2 + W2'^2 - W1^2 W2^2`` is then identically 1.  Shooting from ``x = 0``
with ``W1(0) = W2(0) = a`` and ``W1'(0) = -W2'(0) = sqrt((1 + a^4) / 2)``
leaves one free parameter, fixed by bisection: too small an ``a`` drives
``W2`` through zero, too large an ``a`` makes it turn round and blow up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline


class ProfileError(RuntimeError):
    pass


@dataclass(eq=False)
class Profile1D:
    x: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    dW1: np.ndarray
    dW2: np.ndarray
    a: float
    hamiltonian_residual: float
    slope_at_infinity: float

    @property
    def L(self) -> float:
        return float(self.x[-1])

    def hamiltonian(self) -> np.ndarray:
        return self.dW1**2 + self.dW2**2 - self.W1**2 * self.W2**2

    @cached_property
    def _splines(self):
        return (CubicHermiteSpline(self.x, self.W1, self.dW1), CubicHermiteSpline(self.x, self.W2, self.dW2))

    def __call__(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate ``(W1, W2)`` anywhere; beyond ``+-L`` the linear asymptote and 0 are used."""
        y = np.asarray(y, dtype=float)
        s1, s2 = self._splines
        yc = np.clip(y, -self.L, self.L)
        w1 = s1(yc)
        w2 = s2(yc)
        hi = y > self.L
        lo = y < -self.L
        w1 = np.where(hi, self.W1[-1] + self.dW1[-1] * (y - self.L), np.where(lo, 0.0, w1))
        w2 = np.where(lo, self.W2[0] - self.dW2[0] * (-self.L - y), np.where(hi, 0.0, w2))
        return w1, w2


def _rhs(s: np.ndarray) -> np.ndarray:
    w1, w2, p1, p2 = s
    return np.array([p1, p2, w1 * w2 * w2, w1 * w1 * w2])


def _rk4(s: np.ndarray, h: float) -> np.ndarray:
    k1 = _rhs(s)
    k2 = _rhs(s + 0.5 * h * k1)
    k3 = _rhs(s + 0.5 * h * k2)
    k4 = _rhs(s + h * k3)
    return s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def initial_state(a: float) -> np.ndarray:
    b = math.sqrt((1 + a**4) / 2)
    return np.array([a, a, b, -b])


def shoot(a: float, L: float, h: float, record: bool = False):
    """Integrate from 0 towards ``L``.

    Returns ``(outcome, states)`` with outcome -1 when ``W2`` changes sign
    (``a`` too small), +1 when ``W2`` stops decreasing (``a`` too large) and
    0 when neither happens before ``L``.  ``states`` holds every step when
    ``record`` is set.
    """
    n = int(round(L / h))
    s = initial_state(a)
    out = [s] if record else None
    for _ in range(n):
        s = _rk4(s, h)
        if record:
            out.append(s)
        if s[1] < 0:
            return -1, np.array(out) if record else None
        if s[3] >= 0:
            return 1, np.array(out) if record else None
    return 0, np.array(out) if record else None


def find_shooting_value(L: float = 10.0, h: float = 1e-3, bracket=(0.1, 2.0)) -> tuple[float, float]:
    """Bisect on ``a`` down to adjacent floating-point numbers; returns the final bracket."""
    lo, hi = bracket
    if shoot(lo, L, h)[0] != -1 or shoot(hi, L, h)[0] != 1:
        raise ProfileError(f"shooting bracket {bracket} does not separate undershoot from overshoot")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo, hi
        outcome = shoot(mid, L, h)[0]
        if outcome < 0:
            lo = mid
        elif outcome > 0:
            hi = mid
        else:
            return mid, mid


def _tail(state: np.ndarray, x0: float, L: float, h: float, n: int) -> np.ndarray:
    """Continue past the point where shooting loses precision.

    ``W2`` is tiny there; it is carried by its decaying WKB branch
    ``(log W2)' = -W1 - W1' / (2 W1)`` while ``W1'' = W1 W2^2`` is integrated.
    """
    w1, w2, p1, p2 = state
    y = np.array([w1, p1, math.log(w2)])

    def f(y):
        return np.array([y[1], y[0] * math.exp(2 * y[2]), -y[0] - y[1] / (2 * y[0])])

    rows = []
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        w2 = math.exp(y[2])
        rows.append([y[0], w2, y[1], w2 * (-y[0] - y[1] / (2 * y[0]))])
    return np.array(rows).reshape(-1, 4)


def solve_entire_profile_1d(L: float = 10.0, h: float = 1e-3, tol: float = 1e-6,
                            agreement: float = 1e-6) -> Profile1D:
    """Compute the normalised entire profile on ``[-L, L]``.

    The two trajectories bracketing the shooting value agree up to some
    ``x_cut`` (relative ``W2`` disagreement below ``agreement``); beyond it
    the decaying tail is continued asymptotically.  Raises
    :class:`ProfileError` when the Hamiltonian or the slope at ``L`` misses
    ``tol``.
    """
    if L < 10:
        raise ValueError("L must be at least 10")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = int(round(L / h))
    h = L / n
    lo, hi = find_shooting_value(L, h)
    _, s_lo = shoot(lo, L, h, record=True)
    _, s_hi = shoot(hi, L, h, record=True)
    m = min(len(s_lo), len(s_hi))
    w2a, w2b = s_lo[:m, 1], s_hi[:m, 1]
    bad = np.nonzero((np.abs(w2a - w2b) > agreement * np.abs(w2a)) | (s_lo[:m, 3] >= 0) | (w2a <= 0))[0]
    cut = (bad[0] if len(bad) else m) - 1
    if cut < 1:
        raise ProfileError("shooting trajectories disagree from the start")
    right = 0.5 * (s_lo[: cut + 1] + s_hi[: cut + 1])
    if cut < n:
        right = np.vstack([right, _tail(right[-1], cut * h, L, h, n - cut)])
    xr = h * np.arange(n + 1)
    # W2(x) = W1(-x): mirror the right half exactly
    x = np.concatenate([-xr[:0:-1], xr])
    W1 = np.concatenate([right[:0:-1, 1], right[:, 0]])
    W2 = np.concatenate([right[:0:-1, 0], right[:, 1]])
    dW1 = np.concatenate([-right[:0:-1, 3], right[:, 2]])
    dW2 = np.concatenate([-right[:0:-1, 2], right[:, 3]])
    ham = dW1**2 + dW2**2 - W1**2 * W2**2
    prof = Profile1D(x, W1, W2, dW1, dW2, a=0.5 * (lo + hi),
                     hamiltonian_residual=float(np.max(np.abs(ham - 1))), slope_at_infinity=float(dW1[-1]))
    if prof.hamiltonian_residual > tol or abs(prof.slope_at_infinity - 1) > tol:
        raise ProfileError(f"tolerance {tol:g} not reached at L={L:g}: Hamiltonian residual "
                           f"{prof.hamiltonian_residual:.3e}, W1'(L)-1 = {prof.slope_at_infinity - 1:.3e}")
    return prof


@lru_cache(maxsize=1)
def default_profile() -> Profile1D:
    """The profile on ``[-10, 10]`` at the default step (computed once per process)."""
    return solve_entire_profile_1d()
