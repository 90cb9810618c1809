"""Site geometry: distance matrices and circular scan-window enumeration.

Candidate clusters are variable-size discs: for every pair of sites
(center, through-site) the window collects all sites whose distance to
the center does not exceed the center/through-site distance.  Windows
larger than a fixed fraction of the region (default one half) are
dropped, and duplicate member sets are emitted only once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class SiteMap:
    """Indexed spatial locations.

    Parameters
    ----------
    site_ids : tuple of str
        Unique label per site.
    coords : ndarray, shape (n, 2)
        Either planar coordinates in km (``coordinate_mode="planar"``)
        or longitude/latitude in degrees (``coordinate_mode="geodetic"``).
    coordinate_mode : {"planar", "geodetic"}
    """

    site_ids: tuple
    coords: np.ndarray
    coordinate_mode: str = "planar"

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "site_ids", tuple(str(s) for s in self.site_ids))
        n = coords.shape[0]
        if len(self.site_ids) != n:
            raise ValueError("site_ids and coords disagree on the number of sites")
        if n < 2:
            raise ValueError("need at least 2 sites")
        if self.coordinate_mode not in ("planar", "geodetic"):
            raise ValueError(f"unknown coordinate_mode {self.coordinate_mode!r}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        seen = {}
        for i, sid in enumerate(self.site_ids):
            if sid in seen:
                raise ValueError(f"duplicate site_id {sid!r}")
            seen[sid] = i
        pos = {}
        for i in range(n):
            key = (coords[i, 0], coords[i, 1])
            if key in pos:
                raise ValueError(
                    "sites %r and %r share identical coordinates"
                    % (self.site_ids[pos[key]], self.site_ids[i])
                )
            pos[key] = i

    @property
    def n_sites(self) -> int:
        return len(self.site_ids)

    def index_of(self, site_id: str) -> int:
        return self.site_ids.index(site_id)


def build_distance_matrix(sites: SiteMap) -> np.ndarray:
    """Pairwise site distances: Euclidean (planar) or haversine km (geodetic)."""
    xy = sites.coords
    if sites.coordinate_mode == "planar":
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
    else:
        lon = np.radians(xy[:, 0])
        lat = np.radians(xy[:, 1])
        dlat = lat[:, None] - lat[None, :]
        dlon = lon[:, None] - lon[None, :]
        h = np.sin(dlat / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2
        dist = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    np.fill_diagonal(dist, 0.0)
    # exact symmetry so window membership never depends on index order
    dist = np.minimum(dist, dist.T)
    return np.ascontiguousarray(dist)


@dataclass(frozen=True)
class ScanWindow:
    """One circular candidate cluster: a center site, a radius and the
    (ascending) indices of every site within that radius, boundary included."""

    center_index: int
    radius: float
    members: tuple

    @property
    def size(self) -> int:
        return len(self.members)

    def member_set(self) -> frozenset:
        return frozenset(self.members)


@dataclass
class WindowSet:
    """Deduplicated scan windows plus the per-center distance-sorted site
    orders that make incremental prefix evaluation possible.

    ``windows[k]`` has members ``order[win_center[k], :win_len[k]]``
    (as a set; the public ``members`` tuple is sorted ascending).
    """

    n_sites: int
    windows: list
    order: np.ndarray  # (n, n) int64, ties broken by ascending site index
    win_center: np.ndarray = field(repr=False, default=None)
    win_len: np.ndarray = field(repr=False, default=None)
    win_radius: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def __getitem__(self, k) -> ScanWindow:
        return self.windows[k]


def enumerate_windows(dist: np.ndarray, max_radius=None, max_fraction: float = 0.5) -> WindowSet:
    """Enumerate all distinct circular windows over a distance matrix.

    Every disc centered on a site and passing through a site (possibly
    itself, giving singletons) is considered; discs keeping more than
    ``floor(n * max_fraction)`` sites are discarded, as are discs whose
    radius exceeds ``max_radius`` when given.  Distance ties at the
    boundary are all included, which can push a disc over the size bound.

    The result is deterministic: centers ascending, radii ascending
    within a center, first occurrence kept on duplicate member sets.
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if n < 2:
        raise ValueError("need at least 2 sites")
    if not (0.0 < max_fraction <= 1.0):
        raise ValueError("max_fraction must be in (0, 1]")
    if max_radius is not None and max_radius < 0:
        raise ValueError("max_radius must be nonnegative")
    size_cap = int(np.floor(n * max_fraction))

    # ties broken by ascending site index -> deterministic prefix orders
    order = np.lexsort((np.broadcast_to(np.arange(n), (n, n)), dist), axis=1)
    order = np.ascontiguousarray(order.astype(np.int64))

    windows = []
    centers = []
    lens = []
    radii = []
    seen = {}
    for i in range(n):
        row = dist[i, order[i]]
        k = 0
        while k < n:
            radius = row[k]
            # advance over the whole tie block: boundary sites all belong
            end = k + 1
            while end < n and row[end] == radius:
                end += 1
            size = end
            if size > size_cap:
                break  # prefixes only grow
            if max_radius is not None and radius > max_radius:
                break  # radii only grow
            members = frozenset(order[i, :size].tolist())
            if members not in seen:
                seen[members] = True
                windows.append(
                    ScanWindow(
                        center_index=i,
                        radius=float(radius),
                        members=tuple(sorted(members)),
                    )
                )
                centers.append(i)
                lens.append(size)
                radii.append(float(radius))
            k = end

    return WindowSet(
        n_sites=n,
        windows=windows,
        order=order,
        win_center=np.asarray(centers, dtype=np.int64),
        win_len=np.asarray(lens, dtype=np.int64),
        win_radius=np.asarray(radii, dtype=np.float64),
    )
