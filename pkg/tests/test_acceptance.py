"""Acceptance criteria, each at its stated tolerance; one PASS/FAIL line per criterion."""

import math
import time

import numpy as np

from segregation.asymptotics import (audit_dominated_decay, audit_singular_decay, audit_upper_bound,
                                     fit_power_law)
from segregation.fixtures import frequency_oracle
from segregation.grid import MultiField
from segregation.interface import hausdorff_distance
from segregation.monotonicity import N, audit_frequency_monotonicity, audit_logH_identity, frequency_profile
from segregation.solver import solve

from conftest import ACCEPTANCE_LINES, record_at


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def sweep_seconds(records, lo=-math.inf, hi=math.inf):
    return sum(r.seconds for r in records if lo <= r.beta <= hi)


def test_criterion_01_frequency_oracles():
    t0 = time.perf_counter()
    res = [frequency_oracle("x", 1.0), frequency_oracle("x2-y2", 2.0)]
    dt = time.perf_counter() - t0
    ok = all(r.passed for r in res) and dt < 10
    verdict(1, ok, "; ".join(r.detail for r in res) + f"; {dt:.1f} s (limit 10 s)")


def test_criterion_02_monotonicity_on_solved_fields(tilted_config, tilted_sweep):
    parts, ok = [], True
    for beta, start in ((1e3, 2.0**9), (1e5, 2.0**16)):
        rec = record_at(tilted_sweep, start)
        c = tilted_config
        f = solve(c.grid, c.k, c.a, beta, c.boundary(), c.reaction, c.solver, initial=rec.field.values)
        x0 = record_at(tilted_sweep, start).point
        p = frequency_profile(f, x0, n_r=32)
        viol = audit_frequency_monotonicity(p) / np.max(np.abs(p.N))
        logh = audit_logH_identity(f, x0, p.radii)
        ok &= viol <= 1e-3 and logh <= 1e-2
        parts.append(f"beta={beta:g}: monotonicity violation {viol:.2e} (<=1e-3), log-H mismatch {logh:.2e} (<=1e-2)")
    verdict(2, ok, "; ".join(parts))


def test_criterion_03_entire_profile(profile):
    x = np.linspace(-10, 10, 4001)
    w1, w2 = profile(x)
    ham = float(np.max(np.abs(profile.hamiltonian() - 1)))
    sym = float(np.max(np.abs(w2 - profile(-x)[0])))
    slope = abs(profile.slope_at_infinity - 1)
    ok = ham <= 1e-6 and sym <= 1e-8 and slope <= 1e-4
    verdict(3, ok, f"Hamiltonian error {ham:.2e} (<=1e-6), symmetry {sym:.2e} (<=1e-8), "
                   f"|W1'(L)-1| {slope:.2e} (<=1e-4)")


WINDOW_1D = (2.0**7, 2.0**18)


def test_criterion_04_regular_interface_decay(sym1d_sweep):
    recs = [r for r in sym1d_sweep if WINDOW_1D[0] <= r.beta <= WINDOW_1D[1]]
    fit = fit_power_law([r.beta for r in recs], [r.values[0] for r in recs])
    secs = sweep_seconds(sym1d_sweep)
    ok = abs(fit.exponent + 0.25) <= 0.05 and fit.r2 >= 0.99 and secs < 300 and all(r.converged for r in recs)
    verdict(4, ok, f"exponent of u1(x_beta) {fit.exponent:.4f} (-0.25+-0.05), r2 {fit.r2:.5f} (>=0.99), "
                   f"{len(recs)} betas, sweep {secs:.1f} s (limit 300 s)")


def test_criterion_05_upper_bound(sym1d_sweep):
    a = audit_upper_bound(sym1d_sweep, (0, 1), WINDOW_1D)
    slope = 0.0 if a.all_zero else a.fit.exponent
    ok = -0.05 <= slope <= 0.05
    vals = [r.sup_interaction[(0, 1)] for r in sym1d_sweep if WINDOW_1D[0] <= r.beta <= WINDOW_1D[1]]
    verdict(5, ok, f"log-log slope of sup_K beta u1^2 u2^2 {slope:.4f} (in [-0.05, 0.05]); "
                   f"values {vals[0]:.4f} -> {vals[-1]:.4f}")


def test_criterion_06_dominated_decay(three_comp_sweep):
    fit = audit_dominated_decay(three_comp_sweep, 2)
    ok = fit.r2 >= 0.98 and fit.c > 0 and fit.r2 > fit.power_r2
    verdict(6, ok, f"stretched exponential C2={fit.C2:.2f}, rate {fit.c:.4g} (>0), r2 {fit.r2:.5f} (>=0.98), "
                   f"power-law r2 {fit.power_r2:.5f}")


def test_criterion_07_singular_acceleration(cross_config, cross_sweep):
    window = (2.0**7, 2.0**14)
    a = audit_singular_decay(cross_sweep, window)
    last = cross_sweep[-1]
    freq = float(last.N_rho[-1])
    secs = sweep_seconds(cross_sweep)
    ok = (a.fit.exponent <= -0.27 and freq >= 1.4 and secs < 1200 and cross_config.grid.n == (129, 129)
          and last.beta == window[1])
    verdict(7, ok, f"exponent of sum u_i at the center {a.fit.exponent:.4f} (<=-0.27), "
                   f"N(rho={cross_config.rho[-1]:g}) {freq:.4f} at beta={last.beta:g} (>=1.4), "
                   f"sweep {secs:.1f} s (limit 1200 s)")


def test_criterion_08_blowup_convergence(tilted_sweep):
    d10 = record_at(tilted_sweep, 2.0**10).profile_distance
    d14 = record_at(tilted_sweep, 2.0**14).profile_distance
    ok = d14 <= 0.05 and d14 < d10
    verdict(8, ok, f"profile distance {d14:.4f} at beta=2^14 (<=0.05) vs {d10:.4f} at beta=2^10")


def test_criterion_09_reifenberg_flatness(tilted_config, tilted_sweep, cross_config, cross_sweep):
    radii = list(tilted_config.analytics.flatness_radii)
    assert radii == [0.2, 0.1, 0.05]
    d = record_at(tilted_sweep, 2.0**12).delta
    dc = cross_sweep[-1].delta[list(cross_config.analytics.flatness_radii).index(0.05)]
    ok = bool(np.all(np.diff(d) < 0) and d[-1] <= 0.05 and dc >= 0.2)
    verdict(9, ok, f"tilted delta(0.2, 0.1, 0.05) = {np.round(d, 4).tolist()} (decreasing, last <=0.05); "
                   f"cross center delta(0.05) = {dc:.4f} (>=0.2)")


def test_criterion_10_local_separation(sym1d_sweep, tilted_sweep):
    counts = {name: sorted({r.separation for r in recs})
              for name, recs in (("1d-symmetric", sym1d_sweep), ("2d-tilted", tilted_sweep))}
    ok = all(c == [2] for c in counts.values()) and all(r.converged for r in sym1d_sweep + tilted_sweep)
    verdict(10, ok, f"component counts over every beta: {counts} (want exactly 2)")


def test_criterion_11_property_suites(rng):
    from segregation.grid import make_grid

    g = make_grid(2, [(-0.5, 0.5), (-0.5, 0.5)], 129)
    X, Y = g.mesh()
    base = np.stack([np.maximum(X - Y, 0) + 0.1 * np.sin(7 * X) ** 2, np.maximum(Y - X, 0) + 0.2])
    f = MultiField(g, base, beta=30.0)
    scale_err = 0.0
    for c in rng.uniform(0.1, 10.0, 20):
        fc = MultiField(g, c * base, beta=30.0 / c**2)
        for r in (0.05, 0.1, 0.2):
            scale_err = max(scale_err, abs(N(fc, [0, 0], r) / N(f, [0, 0], r) - 1))
    shift_exact = True
    for s in (1, 8, 17):
        moved = np.zeros_like(base)
        moved[:, s:, :] = base[:, :-s, :]
        fm = MultiField(g, moved, beta=30.0)
        shift_exact &= all(N(fm, [-0.1 + s * g.h[0], 0.0], r) == N(f, [-0.1, 0.0], r) for r in (0.05, 0.1, 0.2))

    axioms = True
    for _ in range(1000):
        a, b, c = (rng.normal(size=(rng.integers(1, 20), 2)) for _ in range(3))
        dab, dba, dac, dbc = (hausdorff_distance(a, b), hausdorff_distance(b, a), hausdorff_distance(a, c),
                              hausdorff_distance(b, c))
        axioms &= dab == dba and dab >= 0 and hausdorff_distance(a, a) == 0 and dac <= dab + dbc + 1e-12

    betas = 2.0 ** np.arange(7, 19)
    worst = 0.0
    for _ in range(1000):
        p = rng.uniform(-0.5, 0.0)
        noisy = 2.0 * betas**p * (1 + 0.01 * rng.standard_normal(len(betas)))
        worst = max(worst, abs(fit_power_law(betas, noisy).exponent - p))

    ok = scale_err <= 1e-13 and shift_exact and axioms and worst <= 0.02
    verdict(11, ok, f"scaling invariance rel err {scale_err:.1e}, lattice-shift bit-exact {shift_exact}, "
                    f"Hausdorff axioms on 1000 triples {axioms}, worst planted-exponent error {worst:.4f} (<=0.02)")
