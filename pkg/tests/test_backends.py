"""Compiled kernels and the numpy fallback must agree."""

import numpy as np
import pytest

import mfscan._core as core
from mfscan import _kernels_py
from mfscan.stats import METHODS, ScanContext, compute_pointwise_ranks
from conftest import random_dataset, random_geometry

_compiled = pytest.importorskip("mfscan._kernels")

KERNEL_NAMES = ("lh_scan", "hotelling_scan", "wilcoxon_scan", "npfss_scan",
                "sign_sums", "rank_field")


@pytest.fixture
def with_backend():
    saved = {name: getattr(core, name) for name in KERNEL_NAMES}

    def use(impl):
        for name in KERNEL_NAMES:
            setattr(core, name, getattr(impl, name))

    yield use
    for name, fn in saved.items():
        setattr(core, name, fn)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("seed", [0, 1])
def test_scan_values_agree(method, seed, with_backend):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 24))
    p = int(rng.choice([1, 2, 3])) if method != "MRBFSS" else int(rng.choice([2, 3]))
    data = random_dataset(rng, max(n, p + 2), p, int(rng.integers(3, 12)))
    _, _, windows = random_geometry(rng, data.n_sites)
    perm = rng.permutation(data.n_sites).astype(np.int64)
    out = {}
    for label, impl in (("compiled", _compiled), ("python", _kernels_py)):
        with_backend(impl)
        ctx = ScanContext(method, data, windows)
        out[label] = (ctx.values(), ctx.values(perm))
    tol = 1e-6 if method == "MRBFSS" else 1e-10
    for i in range(2):
        (vc, dc), (vp, dp) = out["compiled"][i], out["python"][i]
        assert np.array_equal(dc, dp)
        keep = ~dc.astype(bool)
        assert np.allclose(vc[keep], vp[keep], rtol=tol, atol=tol)


def test_sign_sums_agree(with_backend, rng):
    data = random_dataset(rng, 15, 3, 7)
    a = _compiled.sign_sums(data.values, data.grid.weights)
    b = _kernels_py.sign_sums(data.values, data.grid.weights)
    assert np.allclose(a, b, atol=1e-12)


def test_rank_fields_agree(with_backend, rng):
    data = random_dataset(rng, 16, 2, 6)
    with_backend(_compiled)
    fc = compute_pointwise_ranks(data)
    with_backend(_kernels_py)
    fp = compute_pointwise_ranks(data)
    assert np.allclose(fc.ranks, fp.ranks, atol=1e-9)
    assert np.allclose(fc.transforms, fp.transforms, rtol=1e-6)
    assert np.allclose(fc.sq_norm_total, fp.sq_norm_total, rtol=1e-9)
    assert np.array_equal(fc.iterations, fp.iterations)


def test_benchmark_script_runs():
    import subprocess
    import sys
    from pathlib import Path
    script = Path(__file__).parent.parent / "benchmarks" / "bench_kernels.py"
    out = subprocess.run(
        [sys.executable, str(script), "--sites", "16", "--repeats", "1"],
        capture_output=True, text=True, timeout=300,
    )
    assert out.returncode == 0, out.stderr
    assert "speedup" in out.stdout or "fallback only" in out.stdout


def test_jacobi_eigensolver_matches_lapack(rng):
    """The extension's small symmetric eigensolver against numpy."""
    # exercised indirectly: scan a dataset whose pooled covariances are
    # well conditioned and compare per-window Hotelling values
    data = random_dataset(rng, 12, 3, 5, scale=2.0)
    _, _, windows = random_geometry(rng, 12)
    ctx_args = ScanContext("MDFFSS", data, windows)
    vals_c, _ = ctx_args.values()
    # fallback uses numpy.linalg.eigvalsh/solve
    import mfscan._core as core_mod
    saved = core_mod.hotelling_scan
    core_mod.hotelling_scan = _kernels_py.hotelling_scan
    try:
        vals_p, _ = ScanContext("MDFFSS", data, windows).values()
    finally:
        core_mod.hotelling_scan = saved
    assert np.allclose(vals_c, vals_p, rtol=1e-10)
