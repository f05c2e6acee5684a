"""Reference search structures: linear scan, Kd-tree, and fixed-depth octree.

All three are exact; the linear scan is the ground truth every other
structure in the package is checked against.  Pointer counts follow the
4-bytes-per-pointer accounting used by the benchmark's memory report.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from .exceptions import LayerTooLargeError
from .geometry import squared_distances
from .query import QueryResult, make_result
from .validation import check_k, check_points, check_query_point, check_radius

# Octree depths by cloud size, same size buckets as the hash parameter table.
LAYER_TABLE = (
    (5_000, 4),
    (10_000, 4),
    (100_000, 6),
    (200_000, 7),
    (None, 8),
)

_MAX_INTERNAL_NODES = 8**9


def default_layer(m: int) -> int:
    for bound, value in LAYER_TABLE:
        if bound is None or m < bound:
            return value
    raise AssertionError("unreachable")


def kd_pointer_count(m: int) -> int:
    """sum_{i=1}^{ceil(log2(m+1))} 2^(i-1), capped at the point count."""
    depth = math.ceil(math.log2(m + 1))
    return min(2**depth - 1, m)


def octree_pointer_count(m: int, layer: int) -> int:
    """All interior nodes of a complete tree of the given depth, plus one
    pointer per point."""
    return (8**layer - 1) // 7 + m


def lsh_pointer_count(m: int, div: int) -> int:
    return 24 * div + m


# ---------------------------------------------------------------------------
# Linear scan (the oracle)
# ---------------------------------------------------------------------------

def bruteforce_knn(cloud, q, k: int) -> QueryResult:
    """Exhaustive scan: the ground truth for every exactness check."""
    pts = check_points(cloud)
    q = check_query_point(q)
    k = check_k(k)
    d2 = squared_distances(pts, q)
    m = len(pts)
    kk = min(k, m)
    if kk < m:
        part = np.argpartition(d2, kk - 1)[:kk]
        # widen by ties at the cut so id ordering stays global
        thr = d2[part].max()
        cand = np.nonzero(d2 <= thr)[0]
    else:
        cand = np.arange(m)
    order = np.lexsort((cand, d2[cand]))[:kk]
    sel = cand[order]
    return QueryResult(sel.astype(np.int64), d2[sel], visited=m)


def bruteforce_radius(cloud, q, r: float) -> QueryResult:
    pts = check_points(cloud)
    q = check_query_point(q)
    r = check_radius(r)
    d2 = squared_distances(pts, q)
    ids = np.nonzero(d2 < r * r)[0]
    return make_result(ids, d2[ids], visited=len(pts))


class BruteForce:
    """Linear scan behind the shared structure interface."""

    name = "bruteforce"

    def __init__(self, cloud):
        self.points = check_points(cloud)

    def knn(self, q, k: int) -> QueryResult:
        return bruteforce_knn(self.points, q, k)

    def radius(self, q, r: float) -> QueryResult:
        return bruteforce_radius(self.points, q, r)

    @property
    def pointer_count(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# Kd-tree
# ---------------------------------------------------------------------------

class KdTree:
    """Median-split 3-d tree, axes cycling x -> y -> z, one point per node.

    Queries descend to the nearest region first and backtrack across the
    splitting plane whenever the current worst distance still reaches it.
    """

    name = "kdtree"

    def __init__(self, cloud):
        self.points = check_points(cloud)
        m = len(self.points)
        self._point = np.empty(m, dtype=np.int64)
        self._left = np.full(m, -1, dtype=np.int64)
        self._right = np.full(m, -1, dtype=np.int64)
        self._n_nodes = 0
        if m > 200:
            sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * int(math.log2(m + 1)) + 200))
        self._root = self._build(np.arange(m), 0)

    def _build(self, ids: np.ndarray, depth: int) -> int:
        if ids.size == 0:
            return -1
        axis = depth % 3
        mid = ids.size // 2
        ids = ids[np.argpartition(self.points[ids, axis], mid)]
        node = self._n_nodes
        self._n_nodes += 1
        self._point[node] = ids[mid]
        self._left[node] = self._build(ids[:mid], depth + 1)
        self._right[node] = self._build(ids[mid + 1 :], depth + 1)
        return node

    @property
    def depth(self) -> int:
        def walk(node):
            if node < 0:
                return 0
            return 1 + max(walk(self._left[node]), walk(self._right[node]))

        return walk(self._root)

    @property
    def pointer_count(self) -> int:
        return kd_pointer_count(len(self.points))

    def knn(self, q, k: int) -> QueryResult:
        q = check_query_point(q)
        k = check_k(k)
        pts = self.points
        best_d2: list[float] = []
        best_ids: list[int] = []
        visited = 0

        def worse(d2, pid):
            # lexicographic (distance, id): True when candidate loses
            last_d, last_i = best_d2[-1], best_ids[-1]
            return d2 > last_d or (d2 == last_d and pid > last_i)

        def insert(d2, pid):
            lo = 0
            for lo in range(len(best_d2) + 1):
                if lo == len(best_d2):
                    break
                if d2 < best_d2[lo] or (d2 == best_d2[lo] and pid < best_ids[lo]):
                    break
            best_d2.insert(lo, d2)
            best_ids.insert(lo, pid)
            if len(best_d2) > k:
                best_d2.pop()
                best_ids.pop()

        def search(node, depth):
            nonlocal visited
            if node < 0:
                return
            visited += 1
            pid = int(self._point[node])
            p = pts[pid]
            dx = p[0] - q[0]
            dy = p[1] - q[1]
            dz = p[2] - q[2]
            d2 = dx * dx + dy * dy + dz * dz
            if len(best_d2) < k or not worse(d2, pid):
                insert(d2, pid)
            axis = depth % 3
            diff = q[axis] - p[axis]
            near, far = (self._left[node], self._right[node]) if diff < 0 else (
                self._right[node],
                self._left[node],
            )
            search(near, depth + 1)
            if len(best_d2) < k or diff * diff <= best_d2[-1]:
                search(far, depth + 1)

        search(self._root, 0)
        return make_result(
            np.asarray(best_ids, dtype=np.int64), np.asarray(best_d2), visited
        )

    def radius(self, q, r: float) -> QueryResult:
        q = check_query_point(q)
        r = check_radius(r)
        r2 = r * r
        pts = self.points
        ids: list[int] = []
        d2s: list[float] = []
        visited = 0

        def search(node, depth):
            nonlocal visited
            if node < 0:
                return
            visited += 1
            pid = int(self._point[node])
            p = pts[pid]
            dx = p[0] - q[0]
            dy = p[1] - q[1]
            dz = p[2] - q[2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < r2:
                ids.append(pid)
                d2s.append(d2)
            axis = depth % 3
            diff = q[axis] - p[axis]
            near, far = (self._left[node], self._right[node]) if diff < 0 else (
                self._right[node],
                self._left[node],
            )
            search(near, depth + 1)
            if diff * diff < r2:
                search(far, depth + 1)

        search(self._root, 0)
        return make_result(np.asarray(ids, dtype=np.int64), np.asarray(d2s), visited)


def kdtree_build(cloud) -> KdTree:
    return KdTree(cloud)


# ---------------------------------------------------------------------------
# Octree
# ---------------------------------------------------------------------------

def _interleave_bits(ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, bits: int) -> np.ndarray:
    code = np.zeros_like(ix, dtype=np.int64)
    for b in range(bits):
        code |= ((ix >> b) & 1) << (3 * b)
        code |= ((iy >> b) & 1) << (3 * b + 1)
        code |= ((iz >> b) & 1) << (3 * b + 2)
    return code


class Octree:
    """Fixed-depth octree over the cloud's axis-aligned box.

    Every interior level down to ``layer`` exists (the memory model counts
    the complete tree); points live in the leaf cells.  Node occupancy is
    resolved through a z-order sort, so empty subtrees cost nothing to
    skip, and searches stop early once the current worst-distance sphere
    fits inside an already-finished node.
    """

    name = "octree"

    def __init__(self, cloud, layer: int | None = None):
        self.points = check_points(cloud)
        m = len(self.points)
        if layer is None:
            layer = default_layer(m)
        layer = int(layer)
        if layer < 1:
            raise ValueError(f"layer must be >= 1, got {layer}")
        if (8**layer - 1) // 7 > _MAX_INTERNAL_NODES:
            raise LayerTooLargeError(
                f"layer {layer} exceeds the interior-node guard of 8^9"
            )
        self.layer = layer
        self._leaf_depth = layer - 1
        self._grid = 2**self._leaf_depth

        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        self._lo = lo
        self._hi = hi
        cell = span / self._grid
        idx = np.clip(((self.points - lo) / cell).astype(np.int64), 0, self._grid - 1)
        codes = _interleave_bits(idx[:, 0], idx[:, 1], idx[:, 2], self._leaf_depth)
        self._order = np.argsort(codes, kind="stable").astype(np.int64)
        self._codes = codes[self._order]

    @property
    def pointer_count(self) -> int:
        return octree_pointer_count(len(self.points), self.layer)

    def _slice_for(self, prefix: int, depth: int) -> tuple[int, int]:
        shift = 3 * (self._leaf_depth - depth)
        lo = np.searchsorted(self._codes, prefix << shift, side="left")
        hi = np.searchsorted(self._codes, (prefix + 1) << shift, side="left")
        return int(lo), int(hi)

    @staticmethod
    def _box_min_d2(q, lo, hi) -> float:
        d = np.maximum(np.maximum(lo - q, 0.0), q - hi)
        return float(d @ d)

    def _children(self, prefix, depth, lo, hi):
        mid = 0.5 * (lo + hi)
        out = []
        for child in range(8):
            clo = np.where(
                [child & 1, child & 2, child & 4], mid, lo
            )
            chi = np.where(
                [child & 1, child & 2, child & 4], hi, mid
            )
            out.append(((prefix << 3) | child, clo, chi))
        return out

    def _sphere_inside(self, q, lo, hi, r2) -> bool:
        if np.any(q < lo) or np.any(q > hi):
            return False
        wall = min(float(np.min(q - lo)), float(np.min(hi - q)))
        return wall * wall >= r2

    def knn(self, q, k: int) -> QueryResult:
        q = check_query_point(q)
        k = check_k(k)
        pts = self.points
        best_d2: list[float] = []
        best_ids: list[int] = []
        visited = 0

        def merge(ids_chunk):
            nonlocal best_d2, best_ids
            d2 = squared_distances(pts[ids_chunk], q)
            all_d2 = np.concatenate((best_d2, d2))
            all_ids = np.concatenate((best_ids, ids_chunk))
            order = np.lexsort((all_ids, all_d2))[:k]
            best_d2 = list(all_d2[order])
            best_ids = list(all_ids[order])

        def search(prefix, depth, lo, hi) -> bool:
            # True once the result sphere is fully inside an explored node
            nonlocal visited
            s, e = self._slice_for(prefix, depth)
            if s == e:
                return False
            visited += 1
            if len(best_d2) >= k and self._box_min_d2(q, lo, hi) > best_d2[-1]:
                return False
            if depth == self._leaf_depth:
                merge(self._order[s:e])
            else:
                children = self._children(prefix, depth, lo, hi)
                children.sort(key=lambda c: self._box_min_d2(q, c[1], c[2]))
                for cp, clo, chi in children:
                    if search(cp, depth + 1, clo, chi):
                        return True
            if len(best_d2) >= k and self._sphere_inside(q, lo, hi, best_d2[-1]):
                return True
            return False

        search(0, 0, self._lo, self._hi)
        return make_result(
            np.asarray(best_ids, dtype=np.int64), np.asarray(best_d2), visited
        )

    def radius(self, q, r: float) -> QueryResult:
        q = check_query_point(q)
        r = check_radius(r)
        r2 = r * r
        pts = self.points
        ids: list[np.ndarray] = []
        d2s: list[np.ndarray] = []
        visited = 0

        def search(prefix, depth, lo, hi):
            nonlocal visited
            s, e = self._slice_for(prefix, depth)
            if s == e:
                return
            if self._box_min_d2(q, lo, hi) >= r2:
                return
            visited += 1
            if depth == self._leaf_depth:
                chunk = self._order[s:e]
                d2 = squared_distances(pts[chunk], q)
                keep = d2 < r2
                if keep.any():
                    ids.append(chunk[keep])
                    d2s.append(d2[keep])
                return
            for cp, clo, chi in self._children(prefix, depth, lo, hi):
                search(cp, depth + 1, clo, chi)

        search(0, 0, self._lo, self._hi)
        if ids:
            flat_ids = np.concatenate(ids)
            flat_d2 = np.concatenate(d2s)
        else:
            flat_ids = np.empty(0, dtype=np.int64)
            flat_d2 = np.empty(0)
        return make_result(flat_ids, flat_d2, visited)


def octree_build(cloud, layer: int | None = None) -> Octree:
    return Octree(cloud, layer=layer)
