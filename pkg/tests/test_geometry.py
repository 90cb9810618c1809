import math

import numpy as np
import pytest

from mfscan import SiteMap, build_distance_matrix, enumerate_windows
from oracles import windows_naive


def make_sites(coords, mode="planar"):
    return SiteMap(
        site_ids=tuple(f"s{i}" for i in range(len(coords))),
        coords=np.asarray(coords, dtype=float),
        coordinate_mode=mode,
    )


class TestDistances:
    def test_three_four_five(self):
        d = build_distance_matrix(make_sites([(0, 0), (3, 4)]))
        assert d[0, 1] == 5.0

    def test_metric_axioms(self, rng):
        d = build_distance_matrix(make_sites(rng.normal(size=(12, 2))))
        assert np.all(np.diag(d) == 0)
        assert np.array_equal(d, d.T)
        assert np.all(d >= 0)

    def test_triangle_inequality_planar(self, rng):
        d = build_distance_matrix(make_sites(rng.uniform(-5, 5, size=(15, 2))))
        for _ in range(200):
            i, j, k = rng.integers(0, 15, size=3)
            assert d[i, j] <= d[i, k] + d[k, j] + 1e-12

    def test_geodetic_quarter_meridian(self):
        d = build_distance_matrix(make_sites([(0.0, 0.0), (0.0, 90.0)], mode="geodetic"))
        assert d[0, 1] == pytest.approx(math.pi / 2 * 6371.0, abs=1e-6)

    def test_geodetic_equator_degree(self):
        d = build_distance_matrix(make_sites([(0.0, 0.0), (1.0, 0.0)], mode="geodetic"))
        assert d[0, 1] == pytest.approx(2 * math.pi * 6371.0 / 360.0, rel=1e-12)


class TestSiteMapValidation:
    def test_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate site_id"):
            SiteMap(site_ids=("a", "a"), coords=[(0, 0), (1, 1)])

    def test_duplicate_coordinates(self):
        with pytest.raises(ValueError, match="identical coordinates"):
            make_sites([(1, 2), (1, 2)])

    def test_too_few_sites(self):
        with pytest.raises(ValueError, match="at least 2"):
            SiteMap(site_ids=("a",), coords=[(0, 0)])


class TestEnumerateWindows:
    def test_four_collinear_sites(self):
        d = build_distance_matrix(make_sites([(0, 0), (1, 0), (2, 0), (3, 0)]))
        ws = enumerate_windows(d, max_fraction=0.5)
        got = {w.member_set() for w in ws}
        expected = {
            frozenset({0}), frozenset({1}), frozenset({2}), frozenset({3}),
            frozenset({0, 1}), frozenset({2, 3}),
        }
        assert got == expected

    def test_two_sites_only_singletons(self):
        d = build_distance_matrix(make_sites([(0, 0), (1, 0)]))
        ws = enumerate_windows(d)
        assert {w.member_set() for w in ws} == {frozenset({0}), frozenset({1})}

    def test_determinism(self, rng):
        d = build_distance_matrix(make_sites(rng.uniform(0, 10, size=(20, 2))))
        a = enumerate_windows(d)
        b = enumerate_windows(d)
        assert [w.members for w in a] == [w.members for w in b]
        assert [w.center_index for w in a] == [w.center_index for w in b]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 30))
        d = build_distance_matrix(make_sites(rng.uniform(0, 50, size=(n, 2))))
        ws = enumerate_windows(d)
        assert {w.member_set() for w in ws} == windows_naive(d)

    def test_members_match_disc_definition(self, rng):
        n = 25
        d = build_distance_matrix(make_sites(rng.uniform(0, 50, size=(n, 2))))
        for w in enumerate_windows(d):
            disc = {k for k in range(n) if d[w.center_index, k] <= w.radius}
            assert set(w.members) == disc
            assert 1 <= w.size <= n // 2

    def test_dedup(self, rng):
        d = build_distance_matrix(make_sites(rng.uniform(0, 10, size=(15, 2))))
        ws = enumerate_windows(d)
        sets = [w.member_set() for w in ws]
        assert len(sets) == len(set(sets))

    def test_max_radius(self, rng):
        coords = rng.uniform(0, 10, size=(12, 2))
        d = build_distance_matrix(make_sites(coords))
        ws = enumerate_windows(d, max_radius=3.0)
        assert all(w.radius <= 3.0 for w in ws)
        assert {w.member_set() for w in ws} == windows_naive(d, max_radius=3.0)

    def test_max_radius_zero_keeps_singletons(self, rng):
        d = build_distance_matrix(make_sites(rng.uniform(0, 10, size=(6, 2))))
        ws = enumerate_windows(d, max_radius=0.0)
        assert {w.member_set() for w in ws} == {frozenset({i}) for i in range(6)}

    def test_relabeling_equivariance(self, rng):
        coords = rng.uniform(0, 10, size=(14, 2))
        perm = rng.permutation(14)
        a = enumerate_windows(build_distance_matrix(make_sites(coords)))
        b = enumerate_windows(build_distance_matrix(make_sites(coords[perm])))
        # site k of the permuted map is site perm[k] of the original
        relabeled = {frozenset(int(perm[i]) for i in w.members) for w in b}
        assert {w.member_set() for w in a} == relabeled

    def test_distance_ties_all_included(self):
        # center 0 is equidistant from 1 and 2; the disc through either
        # contains both, pushing it to 3 sites (allowed: floor(6*0.5)=3)
        coords = [(0, 0), (1, 0), (-1, 0), (10, 0), (11, 0), (12, 0)]
        d = build_distance_matrix(make_sites(coords))
        ws = enumerate_windows(d)
        assert frozenset({0, 1, 2}) in {w.member_set() for w in ws}
        # no disc centered at 0 can split the tied pair {1, 2}
        centered_at_zero = {w.member_set() for w in ws if w.center_index == 0}
        assert centered_at_zero == {frozenset({0}), frozenset({0, 1, 2})}

    def test_invalid_inputs(self):
        d = build_distance_matrix(make_sites([(0, 0), (1, 0), (2, 0)]))
        with pytest.raises(ValueError, match="max_fraction"):
            enumerate_windows(d, max_fraction=0.0)
        with pytest.raises(ValueError, match="max_radius"):
            enumerate_windows(d, max_radius=-1.0)
        with pytest.raises(ValueError, match="at least 2"):
            enumerate_windows(np.zeros((1, 1)))

    def test_windows_sorted_by_center_then_size(self, rng):
        d = build_distance_matrix(make_sites(rng.uniform(0, 10, size=(18, 2))))
        ws = enumerate_windows(d)
        keys = [(w.center_index, w.size) for w in ws]
        assert keys == sorted(keys)
