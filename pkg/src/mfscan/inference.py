"""Permutation inference for the most likely cluster.

Null replicates relabel whole observations across sites ("random
labelling").  Replicate RNG streams are derived from a master seed and
the replicate index with a counter-based scheme, so replicates can run
in any order on any number of workers and still produce bit-identical
results.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fdata import FunctionalDataset
from .geometry import ScanWindow, WindowSet
from .stats import ScanContext, StatisticValue, select_mlc


@dataclass(frozen=True)
class PermutationPlan:
    """Number of permutations and the seed they all derive from."""

    n_permutations: int = 999
    master_seed: int = 0

    def __post_init__(self):
        if self.n_permutations < 1:
            raise ValueError("need at least 1 permutation")

    def replicate_rng(self, index: int) -> np.random.Generator:
        """Independent stream for replicate ``index`` (1-based)."""
        if not 1 <= index <= self.n_permutations:
            raise ValueError("replicate index out of range")
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.master_seed, spawn_key=(index,))
        )

    def replicate_state(self, index: int) -> tuple:
        """Digest of the derived stream, used to check pairwise distinctness."""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(index,))
        return tuple(int(v) for v in seq.generate_state(4))


def permutation_pvalue(observed: float, replicate_values) -> float:
    """Monte-Carlo p-value: (1 + #{replicates >= observed}) / (M + 1).

    Replicates tied with the observed value count against the null.
    """
    reps = np.asarray(replicate_values, dtype=np.float64)
    if reps.size < 1:
        raise ValueError("need at least 1 replicate value")
    return float((1 + int(np.sum(reps >= observed))) / (reps.size + 1))


@dataclass(frozen=True)
class SecondaryCluster:
    window: ScanWindow
    value: float
    p_value: float


@dataclass(frozen=True)
class ScanReport:
    method: str
    mlc: ScanWindow
    scan_statistic: float
    p_value: float
    permutation_values: np.ndarray
    secondary_clusters: tuple
    statistic_values: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_permutations(self) -> int:
        return int(self.permutation_values.size)


def _replicate_order(values, deg):
    usable = ~np.asarray(deg, dtype=bool) & np.isfinite(values)
    if not usable.any():
        return -np.inf
    return float(values[usable].max())


def permutation_test(data: FunctionalDataset, windows: WindowSet, method: str,
                     plan: PermutationPlan, alpha: float = 0.05, workers: int = 1,
                     context: ScanContext = None) -> ScanReport:
    """Scan the observed data, then M relabeled replicates, and report the
    most likely cluster with its Monte-Carlo p-value and any secondary
    clusters significant at ``alpha``.

    Rank- and sign-based methods compute their pairwise fields once on
    the pooled data; replicates only index-permute them.
    """
    if data.n_sites < 4:
        raise ValueError("need at least 4 sites for permutation inference")
    start = time.perf_counter()
    if context is None:
        context = ScanContext(method, data, windows)
    vals, deg = context.values()
    k, lam = select_mlc(windows, vals, deg)
    mlc = windows[k]
    n = data.n_sites

    def one_replicate(index):
        rng = plan.replicate_rng(index)
        perm = rng.permutation(n).astype(np.int64)
        rvals, rdeg = context.values(perm)
        return _replicate_order(rvals, rdeg)

    m = plan.n_permutations
    replicate_values = np.empty(m)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, v in enumerate(pool.map(one_replicate, range(1, m + 1))):
                replicate_values[i] = v
    else:
        for i in range(m):
            replicate_values[i] = one_replicate(i + 1)

    p_hat = permutation_pvalue(lam, replicate_values)
    stat_values = [
        StatisticValue(win, method, float(vals[i]), bool(deg[i]))
        for i, win in enumerate(windows)
    ]
    secondaries = secondary_clusters(stat_values, mlc, replicate_values, alpha=alpha)
    elapsed = time.perf_counter() - start
    return ScanReport(
        method=method,
        mlc=mlc,
        scan_statistic=lam,
        p_value=p_hat,
        permutation_values=replicate_values,
        secondary_clusters=tuple(secondaries),
        statistic_values=stat_values,
        metadata={
            "n_sites": data.n_sites,
            "n_windows": len(windows),
            "n_permutations": m,
            "master_seed": plan.master_seed,
            "alpha": alpha,
            "elapsed_seconds": elapsed,
        },
    )


def secondary_clusters(statistic_values, mlc: ScanWindow, permutation_values,
                       alpha: float = 0.05):
    """Windows with a high index that do not overlap the MLC.

    Candidates are taken in descending statistic order, kept only if
    site-disjoint from the MLC and from every cluster already selected,
    and assigned p-values against the same permutation distribution of
    the maximum; selection stops at the first candidate above ``alpha``.
    """
    taken = [set(mlc.members)]
    ordered = sorted(
        (sv for sv in statistic_values if not sv.degenerate and np.isfinite(sv.value)),
        key=lambda sv: (-sv.value, sv.window.size, sv.window.center_index),
    )
    out = []
    for sv in ordered:
        members = set(sv.window.members)
        if any(members & prev for prev in taken):
            continue
        p_hat = permutation_pvalue(sv.value, permutation_values)
        if p_hat > alpha:
            break
        out.append(SecondaryCluster(window=sv.window, value=sv.value, p_value=p_hat))
        taken.append(members)
    return out
