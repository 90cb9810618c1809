#!/usr/bin/env python3
"""Benchmark: compiled scan kernels vs the pure-numpy fallback.

Builds a representative workload (the 94-site map, 101-point grid,
two variables) and times one full window-family evaluation per method
for each backend, plus the rank-field construction and the pairwise
sign field.  Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--repeats N] [--sites M]
"""

import argparse
import time

import numpy as np

from mfscan import _kernels_py
from mfscan.geometry import build_distance_matrix, enumerate_windows
from mfscan.simulation import SimulationConfig, france_departement_sites, generate_dataset
from mfscan.stats import METHODS, ScanContext

try:
    from mfscan import _kernels
except ImportError:
    _kernels = None


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def swap_backend(impl):
    import mfscan._core as core
    for name in ("lh_scan", "hotelling_scan", "wilcoxon_scan", "npfss_scan",
                 "sign_sums", "rank_field"):
        setattr(core, name, getattr(impl, name))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--sites", type=int, default=94,
                        help="subset of the shipped 94-site map to use")
    args = parser.parse_args()

    sites = france_departement_sites()
    if args.sites < sites.n_sites:
        from mfscan.geometry import SiteMap
        sites = SiteMap(sites.site_ids[: args.sites], sites.coords[: args.sites],
                        sites.coordinate_mode)
    windows = enumerate_windows(build_distance_matrix(sites))
    config = SimulationConfig(distribution="normal", rho=0.2,
                              shift_type="delta1", alpha=1.5)
    data = generate_dataset(config, range(8), sites.n_sites, 12345)
    perm = np.random.default_rng(0).permutation(sites.n_sites).astype(np.int64)

    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))
    else:
        print("compiled extension not available; timing the fallback only")

    print(f"n={sites.n_sites} sites, {len(windows)} windows, "
          f"p={data.n_vars}, T={data.n_times}, best of {args.repeats}\n")
    header = f"{'kernel':<22}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    rows = []
    for method in METHODS:
        rows.append((f"scan {method}", lambda impl, m=method: _scan_once(m, data, windows, perm)))
    rows.append(("pairwise sign field", lambda impl: _sign_once(data)))
    rows.append(("rank field (Tyler)", lambda impl: _ranks_once(data)))

    for label, runner in rows:
        times = []
        for name, impl in backends:
            swap_backend(impl)
            times.append(time_call(lambda: runner(impl), args.repeats))
        line = f"{label:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2 and times[0] > 0:
            line += f"{times[1] / times[0]:>9.1f}x"
        print(line)
    if _kernels is not None:
        swap_backend(_kernels)


def _scan_once(method, data, windows, perm):
    ctx = ScanContext(method, data, windows)
    ctx.values()
    ctx.values(perm)


def _sign_once(data):
    from mfscan.stats import pairwise_sign_field
    pairwise_sign_field(data)


def _ranks_once(data):
    from mfscan.stats import compute_pointwise_ranks
    compute_pointwise_ranks(data)


if __name__ == "__main__":
    main()
