import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfscan import FunctionalDataset, SiteMap, TimeGrid, build_distance_matrix, enumerate_windows


def random_dataset(rng, n, p, T, scale=1.0):
    grid = TimeGrid.uniform(T)
    values = rng.normal(scale=scale, size=(n, p, T))
    return FunctionalDataset(values, grid)


def random_geometry(rng, n, max_fraction=0.5):
    sites = SiteMap(
        site_ids=tuple(f"s{i}" for i in range(n)),
        coords=rng.uniform(0, 100, size=(n, 2)),
    )
    dist = build_distance_matrix(sites)
    return sites, dist, enumerate_windows(dist, max_fraction=max_fraction)


def random_instance(seed, n=None, p=None, T=None):
    """One (dataset, windows) pair for oracle comparisons."""
    rng = np.random.default_rng(seed)
    n = n if n is not None else int(rng.integers(8, 21))
    p = p if p is not None else int(rng.choice([2, 3]))
    T = T if T is not None else int(rng.integers(3, 12))
    data = random_dataset(rng, n, p, T)
    _, _, windows = random_geometry(rng, n)
    return data, windows


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
