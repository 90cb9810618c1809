"""Command-line interface.

Subcommands:
  scan      detect the most likely cluster in a real panel
  simulate  run a study grid from a JSON config
  windows   dump the enumerated window set for audit
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, io
from ._core import BACKEND
from .geometry import build_distance_matrix, enumerate_windows
from .inference import PermutationPlan, permutation_test
from .simulation import DISTRIBUTIONS, SHIFTS, SimulationConfig, france_departement_sites, run_study
from .stats import METHODS


class CliError(Exception):
    def __init__(self, message, category="config", code=2):
        super().__init__(message)
        self.category = category
        self.code = code


def _add_sites_args(parser):
    parser.add_argument("--sites", required=True, help="sites CSV (site_id,x,y or site_id,lon,lat)")
    parser.add_argument("--coordinate-mode", choices=["planar", "geodetic"], default="planar")
    parser.add_argument("--max-radius-km", type=float, default=None,
                        help="only consider windows up to this radius")
    parser.add_argument("--max-fraction", type=float, default=0.5,
                        help="max window size as a fraction of all sites")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfscan",
                                     description="spatial scan statistics for multivariate functional data")
    parser.add_argument("--version", action="version", version=f"mfscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="scan a functional panel for spatial clusters")
    _add_sites_args(scan)
    scan.add_argument("--data", required=True, help="long-format panel CSV (site_id,time,var...)")
    scan.add_argument("--method", choices=list(METHODS), required=True)
    scan.add_argument("--permutations", type=int, default=999)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--alpha-level", type=float, default=0.05)
    scan.add_argument("--workers", type=int, default=1)
    scan.add_argument("--out", required=True, help="output directory")

    sim = sub.add_parser("simulate", help="run a simulation study from a JSON config")
    sim.add_argument("--config", required=True, help="study grid JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=None, help="override the config's worker count")

    win = sub.add_parser("windows", help="enumerate and dump the scan windows")
    _add_sites_args(win)
    win.add_argument("--out", required=True, help="output directory")
    return parser


def _load_geometry(args):
    sites = io.load_sites(args.sites, args.coordinate_mode)
    if args.max_radius_km is not None and args.max_radius_km < 0:
        raise CliError("--max-radius-km must be nonnegative")
    if not 0 < args.max_fraction <= 1:
        raise CliError("--max-fraction must be in (0, 1]")
    dist = build_distance_matrix(sites)
    windows = enumerate_windows(dist, max_radius=args.max_radius_km,
                                max_fraction=args.max_fraction)
    return sites, windows


def _cmd_scan(args) -> int:
    if args.permutations < 1:
        raise CliError("--permutations must be at least 1 (M >= 1)")
    if not 0 < args.alpha_level < 1:
        raise CliError("--alpha-level must be in (0, 1)")
    if args.workers < 1:
        raise CliError("--workers must be at least 1")
    sites, windows = _load_geometry(args)
    data = io.load_functional_csv(args.data, sites)
    if len(windows) == 0:
        raise CliError("window enumeration produced no candidate clusters", category="compute", code=1)
    plan = PermutationPlan(n_permutations=args.permutations, master_seed=args.seed)
    report = permutation_test(data, windows, args.method, plan,
                              alpha=args.alpha_level, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_config = {
        "sites_path": str(args.sites),
        "data_path": str(args.data),
        "coordinate_mode": args.coordinate_mode,
        "max_radius_km": args.max_radius_km,
        "max_fraction": args.max_fraction,
        "seed": args.seed,
        "alpha_level": args.alpha_level,
        "backend": BACKEND,
        "version": __version__,
    }
    io.write_json(out / "report.json",
                  io.scan_report_payload(report, sites, data, windows, run_config))
    io.write_windows_csv(out / "windows.csv", windows, sites)
    io.write_statistics_csv(out / "statistics.csv", report.statistic_values, sites)
    io.write_plotdata_csv(out / "plotdata.csv", data, sites, report.mlc)
    sig = "significant" if report.p_value < args.alpha_level else "not significant"
    print(f"method={report.method} statistic={report.scan_statistic:.6g} "
          f"p_value={report.p_value:.6g} ({sig} at {args.alpha_level:g})")
    print(f"MLC: {report.mlc.size} sites centered at "
          f"{sites.site_ids[report.mlc.center_index]} radius {report.mlc.radius:.6g}")
    print(f"secondary clusters: {len(report.secondary_clusters)}")
    print(f"report written to {out / 'report.json'} "
          f"[{report.metadata['elapsed_seconds']:.2f}s, backend={BACKEND}]")
    return 0


def _study_cells(cfg: dict):
    defaults = {
        "n_times": int(cfg.get("n_times", 101)),
        "n_terms": int(cfg.get("n_terms", 100)),
        "replications": int(cfg.get("replications", 100)),
        "n_permutations": int(cfg.get("permutations", 199)),
        "seed": int(cfg.get("seed", 0)),
        "significance": float(cfg.get("significance", 0.05)),
    }
    if defaults["n_permutations"] < 1:
        raise CliError("permutations must be at least 1 (M >= 1)")
    cells = []
    for dist in cfg.get("distributions", ["normal"]):
        for rho in cfg.get("rhos", [0.2]):
            for shift in cfg.get("shifts", ["delta1"]):
                for alpha in cfg.get("alphas", [0.0]):
                    cells.append(SimulationConfig(
                        distribution=dist, rho=float(rho),
                        shift_type=shift, alpha=float(alpha), **defaults,
                    ))
    return cells


def _cmd_simulate(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read study config {args.config}: {exc}", category="input", code=1)
    for d in cfg.get("distributions", []):
        if d not in DISTRIBUTIONS:
            raise CliError(f"unknown distribution {d!r}")
    for s in cfg.get("shifts", []):
        if s not in SHIFTS:
            raise CliError(f"unknown shift {s!r}")
    methods = cfg.get("methods", list(METHODS))
    for m in methods:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}")
    cells = _study_cells(cfg)

    if cfg.get("sites"):
        sites = io.load_sites(cfg["sites"], cfg.get("coordinate_mode", "planar"))
    else:
        sites = france_departement_sites()
    windows = enumerate_windows(
        build_distance_matrix(sites),
        max_radius=cfg.get("max_radius"),
        max_fraction=float(cfg.get("max_fraction", 0.5)),
    )
    workers = args.workers if args.workers is not None else int(cfg.get("workers", 1))
    if workers < 1:
        raise CliError("workers must be at least 1")
    report = run_study(cells, methods=methods, sites=sites, windows=windows,
                       true_cluster=cfg.get("true_cluster"), workers=workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_study_summary_csv(out / "summary.csv", report)
    io.write_study_plotdata_csv(out / "plotdata.csv", report)
    io.write_json(out / "detail.json", {"rows": report.detail})
    print(f"{len(cells)} cells x {len(methods)} methods -> {out / 'summary.csv'}")
    for row in report.summary:
        print(f"  {row['method']:7s} {row['distribution']:8s} rho={row['rho']:<4g} "
              f"{row['shift_type']} alpha={row['alpha']:<6g} power={row['power']:.3f}")
    return 0


def _cmd_windows(args) -> int:
    sites, windows = _load_geometry(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_windows_csv(out / "windows.csv", windows, sites)
    print(f"{len(windows)} windows over {sites.n_sites} sites -> {out / 'windows.csv'}")
    return 0


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "scan":
            return _cmd_scan(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_windows(args)
    except CliError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    except io.InputDataError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error [compute]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
