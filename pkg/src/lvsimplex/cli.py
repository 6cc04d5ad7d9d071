"""Command-line front end.

Exit codes: 0 success, 2 bad config, 3 drift abort during simulation,
4 continuation stalled on every target, 5 plot requested for m != 3.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classify import classify
from .config import COMMANDS, ConfigError, RunConfig
from .dynamics import (DRIFT_ABORTED, _pmap, find_fixed_points, find_periodic, iterate,
                       preimage, surjectivity_probe)
from .io import atomic_write, dumps, fmt, read_trajectory_csv, sha256_file, trajectory_csv
from .plot import render_ternary
from .simplex import as_point

log = logging.getLogger("lvsimplex")

EXIT_OK, EXIT_CONFIG, EXIT_DRIFT, EXIT_STALLED, EXIT_PLOT = 0, 2, 3, 4, 5
MANIFEST = "manifest.json"


class RunResult:
    def __init__(self):
        self.files: dict[str, str] = {}
        self.summary: dict = {}
        self.code = EXIT_OK


def _points(rows, m, what):
    out = []
    for i, r in enumerate(rows):
        if len(r) != m:
            raise ConfigError(f"{what} #{i + 1} has {len(r)} coordinates, operator has m={m}")
        try:
            out.append(as_point(r))
        except ValueError as exc:
            raise ConfigError(f"{what} #{i + 1}: {exc}") from None
    return out


def run_simulate(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    starts = _points(cfg.section("simulate")["starts"], V.m, "start")
    profile = cfg.profile
    trajs = _pmap(lambda x: iterate(V, x, profile), starts, cfg.threads)
    res = RunResult()
    runs = []
    for i, t in enumerate(trajs, 1):
        name = f"trajectory_{i:03d}.csv"
        res.files[name] = trajectory_csv(t)
        runs.append({"file": name, "start": t.start, "status": t.status,
                     "steps": t.n_steps, "at_step": t.at_step,
                     "limit": t.limit, "last": t.last, "drift_total": t.drift_total,
                     "stride": t.stride, "message": t.message})
        if t.status == DRIFT_ABORTED:
            res.code = EXIT_DRIFT
    res.summary = {"operator": V.label, "trajectories": runs}
    return res


def run_classify(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    report = classify(V, cfg.section("classify")["budget"], cfg.seed, cfg.profile)
    res = RunResult()
    res.files["classification.json"] = dumps(report.to_dict())
    res.summary = {k: getattr(report, k).kind for k in ("m1", "m0", "f_monotone", "injective")}
    return res


def run_fixed_points(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    fps = find_fixed_points(V, cfg.section("fixed-points")["grid_density"], cfg.profile,
                            threads=cfg.threads)
    lines = [",".join(["index", *[f"x_{k}" for k in range(1, V.m + 1)], "residual", "face"])]
    for i, fp in enumerate(fps, 1):
        lines.append(",".join([str(i), *[fmt(c) for c in fp.point], fmt(fp.residual),
                               '"' + str(fp.face) + '"']))
    res = RunResult()
    res.files["fixed_points.csv"] = "\n".join(lines) + "\n"
    bound = 2 ** V.m - 1
    res.summary = {"operator": V.label, "count": len(fps), "face_count_bound": bound,
                   "meets_bound": len(fps) >= bound}
    print(f"{len(fps)} fixed points found; 2^m - 1 = {bound}")
    return res


def run_periodic(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    sec = cfg.section("periodic")
    orbits = find_periodic(V, sec["r_max"], sec["grid_density"], cfg.profile,
                           threads=cfg.threads)
    doc = {"schema": "lvsimplex.periodic/1", "operator": V.describe(),
           "r_max": sec["r_max"], "grid_density": sec["grid_density"],
           "orbits": [{"period": o.period, "residual": o.residual, "orbit": o.orbit}
                      for o in orbits]}
    res = RunResult()
    res.files["periodic.json"] = dumps(doc)
    res.summary = {"operator": V.label, "orbits": len(orbits)}
    return res


def _preimage_doc(r) -> dict:
    return {"target": r.target, "status": r.status, "preimage": r.preimage,
            "residual": r.residual, "message": r.message,
            "path": [{"eps": e, "point": x} for e, x in r.path]}


def run_preimage(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    sec = cfg.section("preimage")
    targets = _points(sec["targets"], V.m, "target")
    results = _pmap(lambda y: preimage(V, y, sec["n_steps"], cfg.profile), targets,
                    cfg.threads)
    res = RunResult()
    res.files["preimage.json"] = dumps({"schema": "lvsimplex.preimage/1",
                                        "operator": V.describe(),
                                        "results": [_preimage_doc(r) for r in results]})
    ok = sum(r.ok for r in results)
    res.summary = {"operator": V.label, "solved": ok, "targets": len(results)}
    if ok == 0:
        res.code = EXIT_STALLED
    return res


def run_surjectivity(cfg: RunConfig) -> RunResult:
    V = cfg.build_operator()
    sec = cfg.section("surjectivity")
    rep = surjectivity_probe(V, sec["n_targets"], cfg.seed, cfg.profile, sec["n_steps"],
                             cfg.threads)
    doc = {"schema": "lvsimplex.surjectivity/1", "operator": V.describe(),
           "seed": cfg.seed, "n_targets": rep.n_targets,
           "success_rate": rep.success_rate, "worst_residual": rep.worst_residual,
           "failures": [{"target": r.target, "residual": r.residual, "message": r.message}
                        for r in rep.failures]}
    res = RunResult()
    res.files["surjectivity.json"] = dumps(doc)
    res.summary = {"operator": V.label, "success_rate": rep.success_rate,
                   "worst_residual": rep.worst_residual}
    if rep.success_rate == 0.0:
        res.code = EXIT_STALLED
    return res


def run_plot(cfg: RunConfig) -> RunResult:
    csv_path = cfg.section("plot")["csv"]
    if not csv_path:
        raise ConfigError("plot needs a trajectory CSV (--csv or [plot].csv)")
    try:
        _, pts = read_trajectory_csv(csv_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    res = RunResult()
    if pts.shape[1] != 3:
        res.code = EXIT_PLOT
        res.summary = {"error": f"ternary plot needs m=3, got m={pts.shape[1]}"}
        return res
    res.files[Path(csv_path).stem + ".svg"] = render_ternary(pts, Path(csv_path).name)
    res.summary = {"points": int(len(pts))}
    return res


RUNNERS = {
    "simulate": run_simulate,
    "classify": run_classify,
    "fixed-points": run_fixed_points,
    "periodic": run_periodic,
    "preimage": run_preimage,
    "surjectivity": run_surjectivity,
    "plot": run_plot,
}


def write_outputs(out_dir: Path, command: str, cfg: RunConfig, res: RunResult,
                  duration: float) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in res.files.items():
        atomic_write(out_dir / name, text)
    inventory = []
    for p in sorted(out_dir.iterdir()):
        if p.is_file() and p.name != MANIFEST and not p.name.startswith("."):
            inventory.append({"name": p.name, "sha256": sha256_file(p),
                              "bytes": p.stat().st_size, "written": p.name in res.files})
    manifest = {"schema": "lvsimplex.manifest/1", "tool_version": __version__,
                "command": command, "exit_code": res.code, "config": cfg.to_mapping(),
                "duration_seconds": round(duration, 6), "files": inventory,
                "summary": res.summary}
    return atomic_write(out_dir / MANIFEST, dumps(manifest))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvsimplex",
                                     description="Lotka-Volterra type operators on the simplex")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output directory (overrides `out`)")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides `seed`)")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "plot":
            sp.add_argument("--csv", help="trajectory CSV to render")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        raw = RunConfig.load(args.config)
        if args.command == "plot" and args.csv:
            raw.sections.setdefault("plot", {})["csv"] = args.csv
        cfg = raw.bind(args.command, args.seed, args.out, args.threads)
        with np.errstate(all="ignore"):
            res = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if res.code == EXIT_PLOT:
        print(res.summary["error"], file=sys.stderr)
        return EXIT_PLOT
    manifest = write_outputs(Path(cfg.out), args.command, cfg, res, time.perf_counter() - t0)
    log.info("wrote %s", manifest)
    return res.code


if __name__ == "__main__":
    sys.exit(main())
