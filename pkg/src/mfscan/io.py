"""CSV ingestion with strict validation, and report/plot-data writers.

Sites come as ``site_id,x,y`` (planar km) or ``site_id,lon,lat``
(geodetic degrees).  Functional panels come in long format,
``site_id,time,<var1>,<var2>,...`` with a complete site x time grid.
All output files are schema-stable across methods and deterministic for
a given seed (no timestamps, no worker counts).
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .fdata import FunctionalDataset, TimeGrid
from .geometry import SiteMap, WindowSet


class InputDataError(ValueError):
    """Malformed or inconsistent input file."""


_SITE_HEADERS = {"planar": ["site_id", "x", "y"], "geodetic": ["site_id", "lon", "lat"]}


def load_sites(path, mode: str = "planar") -> SiteMap:
    """Read and validate a sites CSV for the given coordinate mode."""
    if mode not in _SITE_HEADERS:
        raise InputDataError(f"unknown coordinate mode {mode!r}")
    expected = _SITE_HEADERS[mode]
    ids = []
    coords = []
    lines = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputDataError(f"{path}: empty file, need at least 2 sites") from None
        header = [h.strip() for h in header]
        if header != expected:
            raise InputDataError(
                f"{path}: expected header {','.join(expected)!r} for "
                f"{mode} mode, found {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InputDataError(f"{path}:{lineno}: expected 3 fields, found {len(row)}")
            sid = row[0].strip()
            if not sid:
                raise InputDataError(f"{path}:{lineno}: empty site_id")
            try:
                a, b = float(row[1]), float(row[2])
            except ValueError:
                raise InputDataError(f"{path}:{lineno}: non-numeric coordinate") from None
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InputDataError(f"{path}:{lineno}: non-finite coordinate")
            if sid in lines:
                raise InputDataError(
                    f"{path}:{lineno}: duplicate site_id {sid!r} (first seen on line {lines[sid]})"
                )
            lines[sid] = lineno
            ids.append(sid)
            coords.append((a, b))
    if len(ids) < 2:
        raise InputDataError(f"{path}: need at least 2 sites, found {len(ids)}")
    if mode == "geodetic":
        for sid, (lon, lat) in zip(ids, coords):
            if not (-180.0 <= lon <= 360.0 and -90.0 <= lat <= 90.0):
                raise InputDataError(f"{path}: site {sid!r} has out-of-range lon/lat")
    seen = {}
    for sid, xy in zip(ids, coords):
        if xy in seen:
            raise InputDataError(
                f"{path}: sites {seen[xy]!r} and {sid!r} share identical coordinates {xy}"
            )
        seen[xy] = sid
    return SiteMap(site_ids=tuple(ids), coords=np.asarray(coords), coordinate_mode=mode)


def load_functional_csv(path, sites: SiteMap) -> FunctionalDataset:
    """Read a long-format panel and align it to the site map order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputDataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "site_id" or header[1] != "time":
            raise InputDataError(
                f"{path}: expected header 'site_id,time,<var>...', found {','.join(header)!r}"
            )
        variables = tuple(header[2:])
        site_index = {sid: i for i, sid in enumerate(sites.site_ids)}
        cells = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputDataError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            sid = row[0].strip()
            if sid not in site_index:
                raise InputDataError(f"{path}:{lineno}: unknown site_id {sid!r}")
            try:
                t = float(row[1])
            except ValueError:
                raise InputDataError(f"{path}:{lineno}: non-numeric time {row[1]!r}") from None
            key = (sid, t)
            if key in cells:
                raise InputDataError(
                    f"{path}:{lineno}: duplicate row for site {sid!r} at time {t!r}"
                )
            vals = []
            for name, raw in zip(variables, row[2:]):
                raw = raw.strip()
                try:
                    v = float(raw) if raw else math.nan
                except ValueError:
                    raise InputDataError(
                        f"{path}:{lineno}: non-numeric value {raw!r} for {name!r}"
                    ) from None
                vals.append(v)
            cells[key] = (lineno, vals)
    times = sorted({t for (_, t) in cells})
    if len(times) < 2:
        raise InputDataError(f"{path}: need at least 2 time points, found {len(times)}")
    n, p, T = sites.n_sites, len(variables), len(times)
    values = np.full((n, p, T), np.nan)
    gaps = []
    for i, sid in enumerate(sites.site_ids):
        for k, t in enumerate(times):
            got = cells.get((sid, t))
            if got is None:
                gaps.append(f"site {sid!r} at time {t!r} (all variables)")
                if len(gaps) > 10:
                    break
                continue
            _, vals = got
            for a, v in enumerate(vals):
                if math.isnan(v):
                    gaps.append(f"site {sid!r} at time {t!r}, variable {variables[a]!r}")
                else:
                    values[i, a, k] = v
            if len(gaps) > 10:
                break
        if len(gaps) > 10:
            break
    if gaps:
        shown = "; ".join(gaps[:10])
        more = "" if len(gaps) <= 10 else " (and more)"
        raise InputDataError(f"{path}: incomplete grid, missing {shown}{more}")
    return FunctionalDataset(values, TimeGrid.from_points(np.asarray(times)), variables)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_json_ready(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _window_payload(window, sites: SiteMap):
    return {
        "center_index": int(window.center_index),
        "center_site_id": sites.site_ids[window.center_index],
        "radius": float(window.radius),
        "size": window.size,
        "member_site_ids": [sites.site_ids[i] for i in window.members],
    }


def scan_report_payload(report, sites: SiteMap, data: FunctionalDataset,
                        windows: WindowSet, run_config: dict) -> dict:
    """JSON payload for a scan run.

    Deliberately excludes wall-clock time and worker count so reruns of
    the same seed produce byte-identical files.
    """
    return {
        "method": report.method,
        "scan_statistic": float(report.scan_statistic),
        "p_value": float(report.p_value),
        "most_likely_cluster": _window_payload(report.mlc, sites),
        "secondary_clusters": [
            {**_window_payload(sc.window, sites),
             "statistic": float(sc.value), "p_value": float(sc.p_value)}
            for sc in report.secondary_clusters
        ],
        "n_permutations": report.n_permutations,
        "permutation_statistics": [float(v) for v in report.permutation_values],
        "dataset": {
            "n_sites": data.n_sites,
            "n_vars": data.n_vars,
            "n_times": data.n_times,
            "variables": list(data.variables),
        },
        "n_windows": len(windows),
        "config": run_config,
    }


def write_windows_csv(path, windows: WindowSet, sites: SiteMap) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id", "center_site_id", "radius", "size", "member_site_ids"])
        for k, w in enumerate(windows):
            writer.writerow([
                k,
                sites.site_ids[w.center_index],
                repr(float(w.radius)),
                w.size,
                ";".join(sites.site_ids[i] for i in w.members),
            ])


def write_statistics_csv(path, statistic_values, sites: SiteMap) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id", "method", "center_site_id", "radius", "size",
                         "statistic", "degenerate"])
        for k, sv in enumerate(statistic_values):
            w = sv.window
            writer.writerow([
                k,
                sv.method,
                sites.site_ids[w.center_index],
                repr(float(w.radius)),
                w.size,
                "" if sv.degenerate else repr(float(sv.value)),
                int(sv.degenerate),
            ])


def write_plotdata_csv(path, data: FunctionalDataset, sites: SiteMap, mlc) -> None:
    """Per-site curves labeled in/out of the MLC, plus group mean curves."""
    inside = set(mlc.members)
    t = data.grid.points
    x = data.values
    idx_in = sorted(inside)
    idx_out = [i for i in range(data.n_sites) if i not in inside]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "site_id", "in_mlc", "variable", "time", "value"])
        for i, sid in enumerate(sites.site_ids):
            flag = int(i in inside)
            for a, var in enumerate(data.variables):
                for k in range(data.n_times):
                    writer.writerow([f"site:{sid}", sid, flag, var,
                                     repr(float(t[k])), repr(float(x[i, a, k]))])
        for label, rows, flag in (("mean_in_mlc", idx_in, 1), ("mean_out_mlc", idx_out, 0)):
            if not rows:
                continue
            mean = x[rows].mean(axis=0)
            for a, var in enumerate(data.variables):
                for k in range(data.n_times):
                    writer.writerow([label, "", flag, var,
                                     repr(float(t[k])), repr(float(mean[a, k]))])


def write_study_summary_csv(path, report) -> None:
    cols = ["method", "distribution", "rho", "shift_type", "alpha", "replications",
            "n_permutations", "seed", "n_reject", "power", "mean_tpr", "mean_fpr", "mean_f"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in report.summary:
            writer.writerow([_csv_cell(row[c]) for c in cols])


def write_study_plotdata_csv(path, report) -> None:
    """Tidy x-y series: one row per (panel, method, metric, alpha)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shift_type", "distribution", "rho", "method", "metric",
                         "alpha", "value"])
        for row in report.summary:
            for metric, key in (("power", "power"), ("tpr", "mean_tpr"),
                                ("fpr", "mean_fpr"), ("f_measure", "mean_f")):
                writer.writerow([
                    row["shift_type"], row["distribution"], _csv_cell(row["rho"]),
                    row["method"], metric, _csv_cell(row["alpha"]), _csv_cell(row[key]),
                ])


def _csv_cell(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return v
