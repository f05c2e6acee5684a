"""Exact k-nearest-neighbor and radius search over a built hash index.

Both searches expand a frontier of bins outward from the query's home bin.
A neighbor bin is scanned only when the minimum distance from the query to
the bin's bounding planes could still beat the current result set; that
plane distance never exceeds the true distance to any point of the bin's
region, so pruning cannot drop a qualifying point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyIndexError
from .geometry import squared_distances
from .index import HashIndex, hash_point
from .validation import check_k, check_query_point, check_radius


@dataclass(frozen=True)
class QueryResult:
    """Hits ordered by ascending squared distance, ids breaking ties."""

    ids: np.ndarray
    sq_distances: np.ndarray
    visited: int = 0  # bins (or tree nodes) scanned to produce the result

    def __post_init__(self):
        self.ids.setflags(write=False)
        self.sq_distances.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def hits(self) -> list[tuple[int, float]]:
        """(point id, squared distance) pairs."""
        return list(zip(self.ids.tolist(), self.sq_distances.tolist()))

    @property
    def distances(self) -> np.ndarray:
        return np.sqrt(self.sq_distances)


def make_result(ids, sq_distances, visited=0) -> QueryResult:
    """Sort hits by (squared distance, id) and freeze them into a result."""
    ids = np.asarray(ids, dtype=np.int64)
    sq = np.asarray(sq_distances, dtype=np.float64)
    order = np.lexsort((ids, sq))
    return QueryResult(ids[order], sq[order], visited)


def min_dist_boun(q, bin_index, index: HashIndex) -> float:
    """Minimum distance from ``q`` to the bounding planes of a bin.

    For a query outside the bin this is a lower bound on the distance to
    any point of the bin's region (the closest region point lies on some
    facet plane, and point-to-plane distance cannot exceed point-to-point).
    Inside the bin it degrades to the distance to the nearest wall.
    """
    flat = index.flat_of(bin_index)
    q_local = index.frame.to_lrf(check_query_point(q))
    sd = index._plane_normals[flat] @ q_local - index._plane_offsets[flat]
    return float(np.min(np.abs(sd)))  # padded planes sit at +inf, never the min


def _seed_bins(index: HashIndex, q: np.ndarray) -> list[int]:
    """Home bin of the query, plus the bin of its box-clamp when outside.

    For an exterior query the clamped seed is the bin containing the
    box point nearest to the query, which anchors the expansion to the
    region any qualifying point must be reached through.
    """
    seeds = [index.flat_of(hash_point(index.frame, index.div, q))]
    local = index.frame.to_lrf(q)
    he = np.asarray(index.frame.half_extents)
    clamped = np.clip(local, -he, he)
    if not np.array_equal(clamped, local):
        entry = index.frame.from_lrf(clamped)
        flat = index.flat_of(hash_point(index.frame, index.div, entry))
        if flat != seeds[0]:
            seeds.append(flat)
    return seeds


def _all_bounds_sq(index: HashIndex, q_local: np.ndarray) -> np.ndarray:
    """Squared admission bound for every bin: the plane-distance minimum,
    clamped to zero for bins whose polytope contains the query.

    The mixed-quadrant hull bins overlap their neighbors, so a query can
    sit inside a polytope it did not hash to; there the nearest-wall
    distance is not a lower bound on the distance to the bin's points and
    the only safe bound is the distance to the polytope itself, zero.
    """
    sd = (index._normals_2d @ q_local).reshape(index.n_bins, -1) - index._plane_offsets
    bounds = np.min(np.abs(sd), axis=1)  # padded planes sit at +inf, never the min
    bounds[~(sd > 0.0).any(axis=1)] = 0.0
    return bounds * bounds


def _gather_rows(starts: np.ndarray, flats: np.ndarray) -> np.ndarray:
    """Row indices into the bin-sorted point arrays for a set of bins."""
    lens = starts[flats + 1] - starts[flats]
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    base = np.repeat(starts[flats], lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
    return base + within


def _fresh_neighbors(index: HashIndex, frontier: np.ndarray, visited: np.ndarray) -> np.ndarray:
    nbrs = index._adj_flat[_gather_rows(index._adj_starts, frontier)]
    fresh = np.unique(nbrs[~visited[nbrs]])
    visited[fresh] = True
    return fresh


def knn(index: HashIndex, q, k: int, prune: bool = True) -> QueryResult:
    """The ``k`` nearest cloud points to ``q``, ids breaking distance ties.

    The frontier expands one adjacency layer at a time; a layer's bins are
    admitted against the k-th distance as of the previous layer and scanned
    in one vectorized pass.  ``prune=False`` forces the admission bound to
    zero; the result is unchanged and only the number of scanned bins grows.
    """
    if index is None or index.m == 0:
        raise EmptyIndexError("knn requires a built, non-empty index")
    k = check_k(k)
    q = check_query_point(q)
    q_local = index.frame.to_lrf(q)

    starts = index._bin_starts
    coords = index._sorted_coords
    ids_sorted = index._sorted_ids
    best_d2 = np.empty(0)
    best_ids = np.empty(0, dtype=np.int64)
    scanned = 0

    def scan(flats: np.ndarray) -> None:
        nonlocal best_d2, best_ids, scanned
        scanned += len(flats)
        rows = _gather_rows(starts, flats)
        if rows.size == 0:
            return
        d2 = squared_distances(coords[rows], q)
        ids = ids_sorted[rows]
        if best_ids.size >= k:
            keep = d2 <= best_d2[-1]  # ties kept so the lower id can win
            if not keep.any():
                return
            d2 = d2[keep]
            ids = ids[keep]
        all_d2 = np.concatenate((best_d2, d2))
        all_ids = np.concatenate((best_ids, ids))
        order = np.lexsort((all_ids, all_d2))[:k]
        best_d2 = all_d2[order]
        best_ids = all_ids[order]

    bounds_sq = _all_bounds_sq(index, q_local) if prune else None
    visited = np.zeros(index.n_bins, dtype=bool)
    frontier = np.unique(_seed_bins(index, q))
    visited[frontier] = True
    scan(frontier)

    while frontier.size:
        fresh = _fresh_neighbors(index, frontier, visited)
        if fresh.size == 0:
            break
        if prune and best_ids.size >= k:
            # non-strict so a bin whose wall sits exactly at the k-th
            # distance is still scanned and ties resolve by id globally
            admitted = fresh[bounds_sq[fresh] <= best_d2[-1]]
        else:
            admitted = fresh
        scan(admitted)
        frontier = admitted

    return make_result(best_ids, best_d2, scanned)


def radius(index: HashIndex, q, r: float, prune: bool = True) -> QueryResult:
    """All cloud points strictly within distance ``r`` of ``q``, sorted."""
    if index is None or index.m == 0:
        raise EmptyIndexError("radius search requires a built, non-empty index")
    r = check_radius(r)
    q = check_query_point(q)
    q_local = index.frame.to_lrf(q)
    r2 = r * r

    starts = index._bin_starts
    coords = index._sorted_coords
    ids_sorted = index._sorted_ids
    found_ids: list[np.ndarray] = []
    found_d2: list[np.ndarray] = []
    scanned = 0

    def scan(flats: np.ndarray) -> None:
        nonlocal scanned
        scanned += len(flats)
        rows = _gather_rows(starts, flats)
        if rows.size == 0:
            return
        d2 = squared_distances(coords[rows], q)
        keep = d2 < r2
        if keep.any():
            found_ids.append(ids_sorted[rows[keep]])
            found_d2.append(d2[keep])

    bounds_sq = _all_bounds_sq(index, q_local) if prune else None
    visited = np.zeros(index.n_bins, dtype=bool)
    frontier = np.unique(_seed_bins(index, q))
    visited[frontier] = True
    scan(frontier)

    while frontier.size:
        fresh = _fresh_neighbors(index, frontier, visited)
        if fresh.size == 0:
            break
        if prune:
            admitted = fresh[bounds_sq[fresh] < r2]  # strict: hits must beat r
        else:
            admitted = fresh
        scan(admitted)
        frontier = admitted

    if found_ids:
        ids = np.concatenate(found_ids)
        d2 = np.concatenate(found_d2)
    else:
        ids = np.empty(0, dtype=np.int64)
        d2 = np.empty(0)
    return make_result(ids, d2, scanned)
