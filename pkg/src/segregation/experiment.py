"""Experiment configuration (TOML) and the canonical boundary-data presets."""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .grid import Grid, ReactionParams, coupling_matrix, make_grid
from .solver import BoundaryData, SolverConfig, geometric_schedule

PRESETS = ("1d-symmetric-2comp", "1d-3comp", "2d-tilted-2comp", "2d-cross-4comp", "custom")
CHECKS = ("interface_decay", "upper_bound", "singular_decay", "dominated_decay", "regular_frequency",
          "frequency_gap", "separation", "flatness", "singular_flatness", "profile_convergence")

# geometry of the tilted preset: interface normal angle and curvature coefficient
TILT_ANGLE = math.radians(30.0)
TILT_CURVATURE = 0.5


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


@dataclass(frozen=True)
class AnalyticsConfig:
    track: tuple[float, ...] | None = None       # initial tracked point (default: domain centre)
    rho: tuple[float, ...] = ()                   # frequency radii; empty -> (8h,)
    compact_shrink: float = 0.1                   # K = domain shrunk by this fraction per side
    dominated_radius: float = 0.1                 # ball for sup of dominated components
    separation_radius: float = 0.1                # ball for the local-separation flood fill
    blowup_window: float = 2.0                    # half-width R_w in blow-up units
    profile_comparison: bool = True
    flatness_radii: tuple[float, ...] = ()       # 2D only
    fit_min_beta: float = 100.0
    fit_max_beta: float = math.inf
    checks: tuple[str, ...] = ()                  # enabled report checks (empty -> preset defaults)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    preset: str
    grid: Grid
    k: int
    a: np.ndarray
    schedule: tuple[float, ...]
    solver: SolverConfig
    analytics: AnalyticsConfig
    reaction: ReactionParams | None = None
    output: str = "runs/out"
    traces_file: str | None = None

    def __post_init__(self):
        if len(self.schedule) == 0:
            raise ConfigError("schedule: empty beta schedule")
        if any(b < 0 for b in self.schedule):
            raise ConfigError("schedule: beta must be nonnegative")
        if any(b2 <= b1 for b1, b2 in zip(self.schedule, self.schedule[1:])):
            raise ConfigError("schedule: values must be strictly increasing")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {self.preset!r}; choose from {PRESETS}")
        expected = _PRESET_K.get(self.preset)
        if expected is not None and self.k != expected:
            raise ConfigError(f"model.k: preset {self.preset} has {expected} components, got {self.k}")
        if self.preset.startswith("1d") != (self.grid.dim == 1) and self.preset != "custom":
            raise ConfigError(f"grid.dim: preset {self.preset} needs dim={1 if self.preset.startswith('1d') else 2}")

    @property
    def rho(self) -> tuple[float, ...]:
        return self.analytics.rho or (8 * self.grid.hmin,)

    @property
    def track(self) -> np.ndarray:
        if self.analytics.track is not None:
            return np.array(self.analytics.track, dtype=float)
        return np.array([0.5 * (lo + hi) for lo, hi in self.grid.bounds])

    def to_dict(self) -> dict:
        an = asdict(self.analytics)
        an["fit_max_beta"] = None if math.isinf(self.analytics.fit_max_beta) else self.analytics.fit_max_beta
        return {
            "name": self.name,
            "preset": self.preset,
            "grid": self.grid.to_dict(),
            "k": self.k,
            "a": self.a.tolist(),
            "schedule": list(self.schedule),
            "solver": {k: v for k, v in asdict(self.solver).items() if k != "log_path"},
            "analytics": an,
            "reaction": None if self.reaction is None else self.reaction.to_dict(),
            "traces_file": self.traces_file,
        }

    def hash(self) -> str:
        """Digest of everything that determines the numbers (the output directory excluded)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()

    def boundary(self) -> BoundaryData:
        return preset_boundary(self.preset, self.grid, self.k, self.traces_file)


_PRESET_K = {"1d-symmetric-2comp": 2, "1d-3comp": 3, "2d-tilted-2comp": 2, "2d-cross-4comp": 4}


def default_residual_tol(grid: Grid) -> float:
    """``1e-8``, raised above the round-off floor ``~4 eps / h^2`` of the discrete Laplacian."""
    return max(1e-8, 16 * np.finfo(float).eps / grid.hmin**2)


def _tilt_coordinates(X, Y):
    c, s = math.cos(TILT_ANGLE), math.sin(TILT_ANGLE)
    sx, sy = X - 0.5, Y - 0.5
    return c * sx + s * sy, -s * sx + c * sy


def tilted_potential(X, Y):
    """Harmonic ``w = s + q (s^2 - t^2)`` in coordinates rotated about the square centre."""
    s, t = _tilt_coordinates(X, Y)
    return s + TILT_CURVATURE * (s * s - t * t)


def preset_boundary(preset: str, grid: Grid, k: int, traces_file: str | None = None) -> BoundaryData:
    if preset == "1d-symmetric-2comp":
        return BoundaryData.from_functions(grid, [lambda x: 1 - x, lambda x: x])
    if preset == "1d-3comp":
        return BoundaryData.from_functions(grid, [lambda x: 1 - x, lambda x: x, lambda x: 0.1 * (1 - x)])
    if preset == "2d-tilted-2comp":
        return BoundaryData.from_functions(
            grid, [lambda X, Y: np.maximum(tilted_potential(X, Y), 0.0),
                   lambda X, Y: np.maximum(-tilted_potential(X, Y), 0.0)])

    if preset == "2d-cross-4comp":
        def quadrant(sx, sy):
            return lambda X, Y: np.where((sx * X >= 0) & (sy * Y >= 0), np.abs(X * Y), 0.0)
        return BoundaryData.from_functions(grid, [quadrant(1, 1), quadrant(-1, 1), quadrant(-1, -1), quadrant(1, -1)])
    if preset == "custom":
        if traces_file is None:
            raise ConfigError("boundary.traces: custom preset needs a traces file (.npy, shape (k, *grid))")
        arr = np.load(traces_file)
        if arr.shape != (k,) + grid.shape:
            raise ConfigError(f"boundary.traces: array shape {arr.shape} != {(k,) + grid.shape}")
        return BoundaryData(grid, arr)
    raise ConfigError(f"preset: unknown preset {preset!r}")


_PRESET_DEFAULTS: dict[str, dict[str, Any]] = {
    "1d-symmetric-2comp": dict(dim=1, bounds=[(0.0, 1.0)], n=2001, stop=2.0**16,
                               analytics=dict(flatness_radii=()),
                               checks=("interface_decay", "upper_bound", "regular_frequency", "separation")),
    "1d-3comp": dict(dim=1, bounds=[(0.0, 1.0)], n=2001, stop=2.0**16,
                     analytics=dict(flatness_radii=()),
                     checks=("dominated_decay", "regular_frequency", "separation")),
    "2d-tilted-2comp": dict(dim=2, bounds=[(0.0, 1.0)] * 2, n=129, stop=2.0**16, tol=1e-7,
                            analytics=dict(flatness_radii=(0.2, 0.1, 0.05)),
                            checks=("interface_decay", "regular_frequency", "separation", "flatness",
                                    "profile_convergence")),
    "2d-cross-4comp": dict(dim=2, bounds=[(-1.0, 1.0)] * 2, n=129, stop=2.0**14, tol=1e-7,
                           analytics=dict(flatness_radii=(0.2, 0.1, 0.05), rho_extra=(0.75,),
                                          profile_comparison=False),
                           checks=("singular_decay", "frequency_gap", "singular_flatness")),
    "custom": dict(checks=()),
}


def _get(table: dict, key: str, kind, where: str, default=None):
    if key not in table:
        return default
    v = table[key]
    ok = {
        "num": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "str": lambda v: isinstance(v, str),
        "bool": lambda v: isinstance(v, bool),
        "nums": lambda v: isinstance(v, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                      for x in v),
        "strs": lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v),
    }[kind](v)
    if not ok:
        raise ConfigError(f"{where}.{key}: expected {kind}, got {v!r}")
    return v


def _check_keys(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML parse error: {e}") from e
    return config_from_dict(raw, base_dir)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), p.parent)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    _check_keys(raw, {"name", "preset", "output", "grid", "model", "reaction", "schedule", "solver",
                      "analytics", "boundary"}, "config")
    preset = _get(raw, "preset", "str", "config")
    if preset is None:
        raise ConfigError("config.preset: missing (one of %s)" % (PRESETS,))
    if preset not in PRESETS:
        raise ConfigError(f"config.preset: unknown preset {preset!r}; choose from {PRESETS}")
    d = _PRESET_DEFAULTS[preset]
    name = _get(raw, "name", "str", "config", preset)
    output = _get(raw, "output", "str", "config", f"runs/{name}")
    if base_dir is not None and not Path(output).is_absolute():
        output = str(Path(base_dir) / output)

    gt = raw.get("grid", {})
    _check_keys(gt, {"dim", "bounds", "n"}, "grid")
    dim = _get(gt, "dim", "int", "grid", d.get("dim"))
    bounds = gt.get("bounds", d.get("bounds"))
    n = gt.get("n", d.get("n"))
    if dim is None or bounds is None or n is None:
        raise ConfigError("grid: dim, bounds and n are required for this preset")
    try:
        grid = make_grid(dim, [tuple(b) for b in bounds], n)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"grid: {e}") from e

    mt = raw.get("model", {})
    _check_keys(mt, {"k", "a"}, "model")
    k = _get(mt, "k", "int", "model", _PRESET_K.get(preset))
    if k is None:
        raise ConfigError("model.k: required for the custom preset")
    try:
        a = coupling_matrix(k, mt.get("a", 1.0))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"model.a: {e}") from e

    reaction = None
    if "reaction" in raw:
        rt = raw["reaction"]
        _check_keys(rt, {"mu", "lam"}, "reaction")
        mu = _get(rt, "mu", "nums", "reaction", [0.0] * k)
        lam = _get(rt, "lam", "nums", "reaction", [0.0] * k)
        if len(mu) != k or len(lam) != k:
            raise ConfigError(f"reaction: mu and lam need {k} entries")
        reaction = ReactionParams(tuple(float(v) for v in mu), tuple(float(v) for v in lam))

    st = raw.get("schedule", {})
    _check_keys(st, {"values", "start", "stop", "factor"}, "schedule")
    if "values" in st:
        schedule = tuple(float(v) for v in _get(st, "values", "nums", "schedule"))
    else:
        start = _get(st, "start", "num", "schedule", 1.0)
        stop = _get(st, "stop", "num", "schedule", d.get("stop"))
        factor = _get(st, "factor", "num", "schedule", 2.0)
        if stop is None:
            raise ConfigError("schedule.stop: required for the custom preset")
        try:
            schedule = tuple(geometric_schedule(float(start), float(stop), float(factor)))
        except ValueError as e:
            raise ConfigError(f"schedule: {e}") from e

    sv = raw.get("solver", {})
    _check_keys(sv, {"residual_tol", "max_iters", "damping", "scheme", "continuation_factor", "min_damping"},
                "solver")
    try:
        solver = SolverConfig(
            residual_tol=float(_get(sv, "residual_tol", "num", "solver", d.get("tol", default_residual_tol(grid)))),
            max_iters=_get(sv, "max_iters", "int", "solver", 20000),
            damping=float(_get(sv, "damping", "num", "solver", 1.0)),
            scheme=_get(sv, "scheme", "str", "solver", "semi-implicit-gauss-seidel"),
            continuation_factor=float(_get(sv, "continuation_factor", "num", "solver", 2.0)),
            min_damping=float(_get(sv, "min_damping", "num", "solver", 1.0 / 64)),
        )
    except ValueError as e:
        raise ConfigError(f"solver: {e}") from e

    at = raw.get("analytics", {})
    _check_keys(at, {f for f in AnalyticsConfig.__dataclass_fields__}, "analytics")
    ad = d.get("analytics", {})
    rho = _get(at, "rho", "nums", "analytics", None)
    if rho is None:
        rho = (8 * grid.hmin,) + tuple(ad.get("rho_extra", ()))
    fmax = _get(at, "fit_max_beta", "num", "analytics", math.inf)
    track = _get(at, "track", "nums", "analytics", None)
    if track is not None and len(track) != grid.dim:
        raise ConfigError(f"analytics.track: needs {grid.dim} coordinates")
    analytics = AnalyticsConfig(
        track=None if track is None else tuple(float(v) for v in track),
        rho=tuple(float(v) for v in rho),
        compact_shrink=float(_get(at, "compact_shrink", "num", "analytics", 0.1)),
        dominated_radius=float(_get(at, "dominated_radius", "num", "analytics", 0.1)),
        separation_radius=float(_get(at, "separation_radius", "num", "analytics", 0.1)),
        blowup_window=float(_get(at, "blowup_window", "num", "analytics", 2.0)),
        profile_comparison=_get(at, "profile_comparison", "bool", "analytics", ad.get("profile_comparison", True)),
        flatness_radii=tuple(float(v) for v in _get(at, "flatness_radii", "nums", "analytics",
                                                    ad.get("flatness_radii", ()))),
        fit_min_beta=float(_get(at, "fit_min_beta", "num", "analytics", 100.0)),
        fit_max_beta=float(fmax),
        checks=tuple(_get(at, "checks", "strs", "analytics", d.get("checks", ()))),
    )
    unknown = [c for c in analytics.checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"analytics.checks: unknown check(s) {unknown}; choose from {CHECKS}")
    if not 0 <= analytics.compact_shrink < 0.5:
        raise ConfigError("analytics.compact_shrink: must lie in [0, 0.5)")

    bt = raw.get("boundary", {})
    _check_keys(bt, {"traces"}, "boundary")
    traces = _get(bt, "traces", "str", "boundary", None)
    if traces is not None and base_dir is not None and not Path(traces).is_absolute():
        traces = str(Path(base_dir) / traces)

    return ExperimentConfig(name=name, preset=preset, grid=grid, k=k, a=a, schedule=schedule, solver=solver,
                            analytics=analytics, reaction=reaction, output=output, traces_file=traces)


def preset_config(preset: str, **overrides) -> ExperimentConfig:
    """Configuration of a canonical preset; ``overrides`` are top-level TOML tables/keys."""
    raw: dict[str, Any] = {"preset": preset}
    raw.update(overrides)
    return config_from_dict(raw)
