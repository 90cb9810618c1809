"""Synthetic data generator and study harness.

Artificial panels carry two variables per site: a quintic-sine baseline
and a cubic-polynomial baseline, plus a basis-expansion noise process
whose paired coefficients control the cross-component correlation, plus
an optional mean shift on a designated true cluster.  Studies sweep
(distribution, correlation, shift, intensity) cells, run the full
scan-and-permutation pipeline per replication, and aggregate power,
true/false positive rates and F-measure.
"""

from __future__ import annotations

import importlib.resources
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fdata import FunctionalDataset, TimeGrid
from .geometry import SiteMap, build_distance_matrix, enumerate_windows
from .inference import PermutationPlan, permutation_test
from .stats import METHODS, ScanContext, compute_pointwise_ranks, pairwise_sign_field

DISTRIBUTIONS = ("normal", "student4", "chisq4")
SHIFTS = ("delta1", "delta2", "delta3")

#: the eight-site Paris-region cluster used with the shipped 94-site map
DEFAULT_TRUE_CLUSTER = ("75", "77", "78", "91", "92", "93", "94", "95")

NOISE_TERMS = 100
NOISE_BASE = 1.5
NOISE_DECAY = 0.2


def france_departement_sites() -> SiteMap:
    """The 94 mainland French departement capitals (geodetic lon/lat)."""
    ids = []
    coords = []
    ref = importlib.resources.files("mfscan").joinpath("data/fr_departements.csv")
    lines = ref.read_text().strip().splitlines()
    for line in lines[1:]:
        sid, lon, lat = line.split(",")
        ids.append(sid)
        coords.append((float(lon), float(lat)))
    return SiteMap(site_ids=tuple(ids), coords=np.asarray(coords), coordinate_mode="geodetic")


def sample_noise_coefficients(distribution: str, rho: float, n: int, K: int,
                              rng) -> np.ndarray:
    """Paired expansion coefficients, shape (n, K, 2).

    Each pair has zero mean, unit marginal variance and cross-component
    correlation ``rho``:

    * ``normal``: bivariate normal.
    * ``student4``: a bivariate normal with covariance ``rho/2``
      off-diagonal, scaled by a per-site chi-square(4) mixing variable
      (one draw per site, shared across the K terms).
    * ``chisq4``: componentwise sums of 4 squared standard normals whose
      cross-correlation is ``sqrt(rho)``, centered and standardized.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must be in (-1, 1)")
    if distribution == "normal":
        z1 = rng.standard_normal((n, K))
        z2 = rng.standard_normal((n, K))
        out = np.stack([z1, rho * z1 + np.sqrt(1.0 - rho**2) * z2], axis=2)
    elif distribution == "student4":
        u1 = rng.standard_normal((n, K))
        u2 = rng.standard_normal((n, K))
        u = np.stack([u1, rho * u1 + np.sqrt(1.0 - rho**2) * u2], axis=2) / np.sqrt(2.0)
        v = rng.chisquare(4, size=n)
        out = u * np.sqrt(4.0 / v)[:, None, None]
    elif distribution == "chisq4":
        r = np.sqrt(rho)
        a = rng.standard_normal((n, K, 4))
        b0 = rng.standard_normal((n, K, 4))
        b = r * a + np.sqrt(1.0 - r**2) * b0
        u = np.stack([(a**2).sum(axis=2), (b**2).sum(axis=2)], axis=2)
        out = (u - 4.0) / (2.0 * np.sqrt(2.0))
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return out


def delta_shift(shift_type: str, alpha: float, t):
    """Cluster mean shift at time(s) t, as an array of shape (..., 2)."""
    t = np.asarray(t, dtype=np.float64)
    if shift_type == "delta1":
        base = alpha * t
    elif shift_type == "delta2":
        base = alpha * t * (1.0 - t)
    elif shift_type == "delta3":
        base = alpha * np.exp(-100.0 * (t - 0.5) ** 2) / 3.0
    else:
        raise ValueError(f"unknown shift_type {shift_type!r}")
    return np.stack([base, base], axis=-1)


def noise_basis(points: np.ndarray, n_terms: int = NOISE_TERMS) -> np.ndarray:
    """Expansion basis on the grid, shape (K, T): constant first term,
    then alternating sine/cosine harmonics."""
    t = np.asarray(points, dtype=np.float64)
    k = np.arange(1, n_terms + 1)
    basis = np.empty((n_terms, t.size))
    basis[0] = 1.0
    for kk in k[1:]:
        if kk % 2 == 0:
            basis[kk - 1] = np.sqrt(2.0) * np.sin(kk * np.pi * t)
        else:
            basis[kk - 1] = np.sqrt(2.0) * np.cos((kk - 1) * np.pi * t)
    return basis


def noise_pointwise_variance(points, n_terms: int = NOISE_TERMS) -> np.ndarray:
    """Exact per-time variance of each noise component."""
    basis = noise_basis(points, n_terms)
    k = np.arange(1, n_terms + 1)
    scales = NOISE_BASE * NOISE_DECAY**k
    return (scales[:, None] * basis**2).sum(axis=0)


def baseline_mean(points) -> np.ndarray:
    """Cluster-free mean curve of the two components, shape (2, T)."""
    t = np.asarray(points, dtype=np.float64)
    return np.stack([
        np.sin(2.0 * np.pi * t**2) ** 5,
        1.0 + 2.3 * t + 3.4 * t**2 + 1.5 * t**3,
    ])


@dataclass(frozen=True)
class SimulationConfig:
    """One study cell."""

    distribution: str = "normal"
    rho: float = 0.2
    shift_type: str = "delta1"
    alpha: float = 0.0
    n_times: int = 101
    n_terms: int = NOISE_TERMS
    replications: int = 100
    n_permutations: int = 199
    seed: int = 0
    significance: float = 0.05

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.shift_type not in SHIFTS:
            raise ValueError(f"unknown shift_type {self.shift_type!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.n_times < 2 or self.n_terms < 1 or self.replications < 1:
            raise ValueError("invalid simulation sizes")


def generate_dataset(config: SimulationConfig, true_cluster, n_sites: int,
                     rng) -> FunctionalDataset:
    """One artificial panel on the uniform grid over [0, 1]."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    grid = TimeGrid.uniform(config.n_times)
    t = grid.points
    basis = noise_basis(t, config.n_terms)
    k = np.arange(1, config.n_terms + 1)
    scales = np.sqrt(NOISE_BASE * NOISE_DECAY**k)
    z = sample_noise_coefficients(config.distribution, config.rho,
                                  n_sites, config.n_terms, rng)
    noise = np.einsum("ika,k,kt->iat", z, scales, basis, optimize=True)
    values = baseline_mean(t)[None, :, :] + noise
    if config.alpha > 0:
        shift = delta_shift(config.shift_type, config.alpha, t).T  # (2, T)
        values[np.asarray(sorted(true_cluster), dtype=np.intp)] += shift[None]
    return FunctionalDataset(values, grid)


@dataclass(frozen=True)
class DetectionMetrics:
    rejected: bool
    tpr: float
    fpr: float
    ppv: float
    f_measure: float


def evaluate_detection(detected, true_cluster, n_sites: int, rejected: bool) -> DetectionMetrics:
    """Site-level detection quality of one scan against the true cluster."""
    true_set = set(true_cluster)
    det = set() if detected is None else set(detected.members)
    hits = len(det & true_set)
    tpr = hits / len(true_set) if true_set else 0.0
    out_size = n_sites - len(true_set)
    fpr = len(det - true_set) / out_size if out_size else 0.0
    ppv = hits / len(det) if det else 0.0
    f = 2.0 * ppv * tpr / (ppv + tpr) if (ppv + tpr) > 0 else 0.0
    return DetectionMetrics(rejected=rejected, tpr=tpr, fpr=fpr, ppv=ppv, f_measure=f)


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated rates per (cell, method) plus optional per-replication rows."""

    summary: list
    detail: list = field(default_factory=list)


def resolve_true_cluster(sites: SiteMap, windows, selector=None):
    """Site indices of the planted cluster.

    ``selector`` may be a list of site ids, or ``{"seed_site": id,
    "size": s}`` picking the smallest enumerated window of at least
    ``s`` members containing the seed site (exact size preferred).
    By default the eight Paris-region sites of the shipped map are used.
    """
    if selector is None:
        selector = list(DEFAULT_TRUE_CLUSTER)
    if isinstance(selector, dict):
        seed_site = sites.index_of(str(selector["seed_site"]))
        size = int(selector.get("size", 8))
        exact = [w for w in windows if w.size == size and seed_site in w.members]
        pool = exact or [w for w in windows if w.size >= size and seed_site in w.members]
        if not pool:
            raise ValueError(f"no enumerated window of size >= {size} contains the seed site")
        best = min(pool, key=lambda w: (w.size, w.radius, w.center_index))
        return tuple(best.members)
    return tuple(sorted(sites.index_of(str(s)) for s in selector))


def _replication_seed(master_seed: int, cell_index: int, rep_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(cell_index, rep_index))


def run_study(configs, methods=METHODS, sites: SiteMap = None, windows=None,
              true_cluster=None, workers: int = 1, keep_detail: bool = True) -> SimulationReport:
    """Run every cell of a study grid.

    Per replication: generate a panel, scan it with each method, assess
    the MLC by permutation and score the detection.  All methods share
    the replication's dataset and permutation plan.  Results depend only
    on the configuration and seeds, not on ``workers``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no study cells")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if sites is None:
        sites = france_departement_sites()
    if windows is None:
        windows = enumerate_windows(build_distance_matrix(sites))
    cluster_idx = resolve_true_cluster(sites, windows, true_cluster)
    n_sites = sites.n_sites

    summary = []
    detail = []
    for cell_index, config in enumerate(configs):
        def one_replication(rep, _config=config, _cell=cell_index):
            seq = _replication_seed(_config.seed, _cell, rep)
            data = generate_dataset(_config, cluster_idx, n_sites,
                                    np.random.default_rng(seq.spawn(1)[0]))
            plan = PermutationPlan(
                n_permutations=_config.n_permutations,
                master_seed=int(seq.generate_state(1)[0]),
            )
            shared_ranks = None
            shared_signs = None
            rows = {}
            for method in methods:
                if method == "MRBFSS" and shared_ranks is None:
                    shared_ranks = compute_pointwise_ranks(data)
                if method == "NPFSS" and shared_signs is None:
                    shared_signs = pairwise_sign_field(data)
                context = ScanContext(method, data, windows,
                                      rank_field=shared_ranks, sign_field=shared_signs)
                report = permutation_test(data, windows, method, plan,
                                          alpha=_config.significance, context=context)
                rejected = report.p_value < _config.significance
                metrics = evaluate_detection(report.mlc, cluster_idx, n_sites, rejected)
                rows[method] = (report, metrics)
            return rows

        reps = range(config.replications)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one_replication, reps))
        else:
            results = [one_replication(r) for r in reps]

        for method in methods:
            metrics = [res[method][1] for res in results]
            rejecting = [mt for mt in metrics if mt.rejected]
            k = len(rejecting)
            summary.append({
                "method": method,
                "distribution": config.distribution,
                "rho": config.rho,
                "shift_type": config.shift_type,
                "alpha": config.alpha,
                "replications": config.replications,
                "n_permutations": config.n_permutations,
                "seed": config.seed,
                "n_reject": k,
                "power": k / config.replications,
                "mean_tpr": float(np.mean([mt.tpr for mt in rejecting])) if k else float("nan"),
                "mean_fpr": float(np.mean([mt.fpr for mt in rejecting])) if k else float("nan"),
                "mean_f": float(np.mean([mt.f_measure for mt in rejecting])) if k else float("nan"),
            })
        if keep_detail:
            for rep, res in enumerate(results):
                for method in methods:
                    report, mt = res[method]
                    detail.append({
                        "cell": cell_index,
                        "replication": rep,
                        "method": method,
                        "distribution": config.distribution,
                        "rho": config.rho,
                        "shift_type": config.shift_type,
                        "alpha": config.alpha,
                        "p_value": report.p_value,
                        "scan_statistic": report.scan_statistic,
                        "rejected": mt.rejected,
                        "tpr": mt.tpr,
                        "fpr": mt.fpr,
                        "ppv": mt.ppv,
                        "f_measure": mt.f_measure,
                        "mlc_size": report.mlc.size,
                    })
    return SimulationReport(summary=summary, detail=detail)
