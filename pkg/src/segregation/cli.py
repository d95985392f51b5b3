"""Command line: ``segregation run <config>``, ``report <dir>``, ``verify-fixtures``.

Exit codes: 0 pass, 1 a check (or a solve) failed, 2 usage/configuration/artifact error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import grid as grid_mod
from .asymptotics import (WORKERS_ENV, compute_fits, evaluate_checks, run_sweep, worker_count,
                          write_fits_json, write_sweep_csv)
from .experiment import ConfigError, ExperimentConfig, load_config
from .grid import save_field
from .interface import classify_singular, extract_interface, reifenberg_flatness
from .monotonicity import frequency_profile

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
MANIFEST = "manifest.json"
PERTURBED_WEIGHT = 1.05

log = logging.getLogger("segregation")


def _field_dir(m: int, beta: float) -> str:
    return f"fields/{m:03d}_beta_{beta:.17g}"


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    """Execute the sweep and write fields, CSVs, fits and the manifest; returns the manifest."""
    out = Path(out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    entries: list[dict] = []
    last = {}

    def on_field(rec, f):
        rel = _field_dir(len(entries), rec.beta)
        save_field(f, out / rel)
        entries.append({"beta": rec.beta, "status": rec.status, "field_dir": rel})
        last["field"], last["rec"] = f, rec

    records = run_sweep(cfg, on_field=on_field)
    # failed records have no dump; merge them in schedule order
    by_beta = {e["beta"]: e for e in entries}
    rec_entries = []
    for r in records:
        e = by_beta.get(r.beta, {"beta": r.beta, "status": r.status, "field_dir": None})
        e["seconds"] = round(r.seconds, 3)
        rec_entries.append(e)

    artifacts = {"sweep_csv": "sweep.csv", "fits_json": "fits.json"}
    write_sweep_csv(records, cfg, out / "sweep.csv")
    write_fits_json(compute_fits(records, cfg), out / "fits.json")
    if last:
        f, rec = last["field"], last["rec"]
        tag = "_".join(f"{c:.6g}" for c in rec.point)
        iface = classify_singular(f, extract_interface(f))
        iface.to_csv(out / "interface.csv")
        artifacts["interface_csv"] = "interface.csv"
        try:
            frequency_profile(f, rec.point).to_csv(out / f"freq_{tag}.csv")
            artifacts["frequency_csv"] = f"freq_{tag}.csv"
        except ValueError as e:
            log.warning("frequency profile skipped: %s", e)
        if cfg.grid.dim == 2 and cfg.analytics.flatness_radii:
            try:
                reifenberg_flatness(iface, rec.point, cfg.analytics.flatness_radii).to_csv(out / "flatness.csv")
                artifacts["flatness_csv"] = "flatness.csv"
            except ValueError as e:
                log.warning("flatness report skipped: %s", e)

    manifest = {
        "name": cfg.name,
        "preset": cfg.preset,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "checks": list(cfg.analytics.checks),
        "records": rec_entries,
        "artifacts": artifacts,
        "complete": all(r.converged for r in records),
        "versions": {"segregation": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "timings": {"total_seconds": round(time.perf_counter() - t0, 3)},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return manifest


class ArtifactError(RuntimeError):
    pass


def load_manifest(run_dir) -> dict:
    d = Path(run_dir)
    p = d / MANIFEST
    if not p.is_file():
        raise ArtifactError(f"no {MANIFEST} in {d}")
    m = json.loads(p.read_text())
    paths = list(m.get("artifacts", {}).values())
    paths += [e["field_dir"] + "/meta.json" for e in m.get("records", []) if e.get("field_dir")]
    missing = [q for q in paths if not (d / q).exists()]
    if missing:
        raise ArtifactError(f"manifest lists missing artifacts: {missing[:5]}")
    return m


def report(run_dir, stream=None) -> int:
    stream = stream or sys.stdout
    m = load_manifest(run_dir)
    fits = json.loads((Path(run_dir) / m["artifacts"]["fits_json"]).read_text())
    results = evaluate_checks(fits)
    print(f"run {m['name']} ({m['preset']}), config {m['config_hash'][:12]}", file=stream)
    failed = [e["beta"] for e in m["records"] if e["status"] != "converged"]
    if failed:
        print(f"  solver failures at beta = {failed}", file=stream)
    all_ok = not failed
    for name in m["checks"]:
        mine = [r for r in results if r.name == name or r.name.startswith(name + "_")]
        if not mine:
            print(f"  FAIL {name}: no result recorded", file=stream)
            all_ok = False
        for r in mine:
            print(f"  {'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=stream)
            all_ok &= r.passed
    return EXIT_PASS if all_ok else EXIT_FAIL


def verify_fixtures(perturb_quadrature: bool = False, stream=None) -> int:
    from .fixtures import run_fixtures

    stream = stream or sys.stdout
    saved = grid_mod.SPHERE_WEIGHT_SCALE
    grid_mod.SPHERE_WEIGHT_SCALE = PERTURBED_WEIGHT if perturb_quadrature else 1.0
    try:
        results = run_fixtures()
    finally:
        grid_mod.SPHERE_WEIGHT_SCALE = saved
    for r in results:
        print(f"  {'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=stream)
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segregation", description=__doc__.splitlines()[0],
                                epilog=f"Worker threads for per-beta analytics: ${WORKERS_ENV} (default 1).")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run a beta-sweep from a TOML config")
    r.add_argument("config")
    r.add_argument("--output", help="override the output directory of the config")
    q = sub.add_parser("report", help="print pass/fail per check of a finished run")
    q.add_argument("run_dir")
    v = sub.add_parser("verify-fixtures", help="analytic-oracle suite (no PDE solve)")
    v.add_argument("--perturb-quadrature", action="store_true",
                   help="self-test: scale the sphere quadrature weights by %g; the suite must fail" % PERTURBED_WEIGHT)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            worker_count()
            cfg = load_config(args.config)
            m = run_experiment(cfg, Path(args.output) if args.output else None)
            print(f"wrote {len(m['records'])} records to {args.output or cfg.output}")
            return EXIT_PASS if m["complete"] else EXIT_FAIL
        if args.verb == "report":
            return report(args.run_dir)
        return verify_fixtures(args.perturb_quadrature)
    except (ConfigError, ArtifactError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
