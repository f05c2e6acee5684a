"""Two-level spatial hash over an oriented-bounding-box frame.

Level one splits the box into 24 blocks (three per coordinate octant,
separated by diagonal planes through the center); level two slices each
block into ``div`` bins along the block's slicing axis.  Every bin carries
its bounding planes and polytope vertices, and bins that touch are linked
in an adjacency graph that query expansion walks.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .exceptions import BinOutOfRangeError, EmptyCloudError
from .geometry import ObbFrame, compute_obb
from .validation import check_points, check_query_point

N_BLOCKS = 24

# Average-points-per-bin defaults by cloud size: (upper-exclusive bound, value).
P_AVG_TABLE = (
    (5_000, 15),
    (10_000, 39),
    (100_000, 48),
    (200_000, 95),
    (None, 381),
)

_FEAS_TOL = 1e-9
_PAD_VERTEX = np.array([7.0, 11.0, 13.0])  # outside every bin of the unit frame


class BinIndex(NamedTuple):
    """Two-level hash address of a bin."""

    block: int  # 1..24
    proj: int  # 1..div


def select_div(m: int, p_avg_override: int | None = None) -> tuple[int, int]:
    """Pick the slice count for a cloud of ``m`` points.

    Returns ``(div, p_avg)`` where ``div = ceil(m / (24 * p_avg))``,
    floored at 1, and ``p_avg`` comes from the size table unless
    overridden.
    """
    m = int(m)
    if m < 1:
        raise EmptyCloudError("cannot size an index for an empty cloud")
    if p_avg_override is not None:
        p_avg = int(p_avg_override)
        if p_avg < 1:
            raise ValueError(f"p_avg must be >= 1, got {p_avg}")
    else:
        for bound, value in P_AVG_TABLE:
            if bound is None or m < bound:
                p_avg = value
                break
    div = max(1, -(-m // (N_BLOCKS * p_avg)))
    return div, p_avg


# ---------------------------------------------------------------------------
# Point hashing
# ---------------------------------------------------------------------------

def quadrant_of(p_prime, half_extents) -> tuple[int, np.ndarray]:
    """Octant index (0..7) of a frame-local point and the matching box corner.

    A coordinate that is exactly zero counts as non-negative.
    """
    p = check_query_point(p_prime)
    he = np.asarray(half_extents, dtype=np.float64)
    neg = p < 0.0
    p_qua = int(neg[0]) + 2 * int(neg[1]) + 4 * int(neg[2])
    v_qua = np.where(neg, -he, he)
    return p_qua, v_qua


def block_of(p_prime, p_qua: int, v_qua) -> int:
    """Block index (1..24) from the quadrant-corner comparison cascade.

    Comparisons are evaluated in product form (cross-multiplied by the
    corner coordinate) so points exactly on a separating plane fall on the
    non-strict branch; the sign factor undoes the flip a negative corner
    coordinate would introduce.
    """
    p = check_query_point(p_prime)
    vq = np.asarray(v_qua, dtype=np.float64)
    x, y, z = p
    xq, yq, zq = vq
    t1 = y * xq - x * yq
    t2 = z * xq - x * zq
    t3 = z * yq - y * zq
    c1 = (t1 > 0.0) if xq > 0.0 else (t1 < 0.0)
    c2 = (t2 > 0.0) if xq > 0.0 else (t2 < 0.0)
    c3 = (t3 > 0.0) if yq > 0.0 else (t3 < 0.0)
    if c1 and c2:
        b = 1
    elif (not c1) and c3:
        b = 2
    else:
        b = 3
    return 3 * p_qua + b


def proj_of(p_prime, b: int, frame: ObbFrame, div: int) -> int:
    """Slice index (1..div) along block ``b``'s axis; axis coordinate at the
    box face yields 0 and is clamped into range."""
    p = check_query_point(p_prime)
    axis = b - 1
    c = abs(float(p[axis]))
    length = float(frame.half_extents[axis])
    raw = div - math.floor(c * div / length)
    return min(max(raw, 1), div)


def hash_point(frame: ObbFrame, div: int, p) -> BinIndex:
    """Map an original-coordinates point to its bin."""
    local = frame.to_lrf(check_query_point(p))
    p_qua, v_qua = quadrant_of(local, frame.half_extents)
    block = block_of(local, p_qua, v_qua)
    b = block - 3 * p_qua
    proj = proj_of(local, b, frame, div)
    return BinIndex(block, proj)


def _hash_points_lrf(local: np.ndarray, half_extents: np.ndarray, div: int):
    """Vectorized bin assignment; same arithmetic as the scalar path."""
    neg = local < 0.0
    p_qua = neg[:, 0] * 1 + neg[:, 1] * 2 + neg[:, 2] * 4
    sgn = np.where(neg, -1.0, 1.0)
    vq = sgn * half_extents
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    t1 = y * vq[:, 0] - x * vq[:, 1]
    t2 = z * vq[:, 0] - x * vq[:, 2]
    t3 = z * vq[:, 1] - y * vq[:, 2]
    pos_x = vq[:, 0] > 0.0
    pos_y = vq[:, 1] > 0.0
    c1 = np.where(pos_x, t1 > 0.0, t1 < 0.0)
    c2 = np.where(pos_x, t2 > 0.0, t2 < 0.0)
    c3 = np.where(pos_y, t3 > 0.0, t3 < 0.0)
    b = np.where(c1 & c2, 1, np.where(~c1 & c3, 2, 3))
    blocks = 3 * p_qua + b
    axis = b - 1
    rows = np.arange(local.shape[0])
    c = np.abs(local[rows, axis])
    length = half_extents[axis]
    raw = div - np.floor(c * div / length)
    projs = np.clip(raw, 1, div).astype(np.int64)
    return blocks.astype(np.int64), projs


# ---------------------------------------------------------------------------
# Bin geometry
#
# In per-quadrant normalized coordinates (u, v, w) = |p'| / half_extents the
# comparison cascade reduces to orderings of (u, v, w); which orderings make
# up each block depends on the sign pattern of the quadrant's y and z
# coordinates, because the cascade's expressions scale with those signs.
# The third block of mixed-sign quadrants is a non-convex union of
# orderings, so its stored planes are the facets of its convex hull; all
# invariants (own-bin containment, lower-bound validity) hold for hulls.
# ---------------------------------------------------------------------------

# (sy>=0, sz>=0, b) -> pairwise "coord_i <= coord_j" rows defining the region.
_ORDER_RULES = {
    (True, True, 1): ((0, 1), (0, 2)),
    (True, True, 2): ((1, 0), (1, 2)),
    (True, True, 3): ((2, 0), (2, 1)),
    (False, False, 1): ((1, 0), (2, 0)),
    (False, False, 2): ((0, 1), (2, 1)),
    (False, False, 3): ((0, 2), (1, 2)),
    (True, False, 1): ((2, 0), (0, 1)),
    (True, False, 2): ((2, 1), (1, 0)),
    (False, True, 1): ((1, 0), (0, 2)),
    (False, True, 2): ((0, 1), (1, 2)),
}
# Hull cuts replacing the non-convex rule of the mixed-sign third block.
_HULL_CUTS = {
    (True, False): (1.0, 1.0, -1.0, 1.0),  # u + v - w <= 1   (w >= min(u, v))
    (False, True): (-1.0, -1.0, 1.0, 0.0),  # w - u - v <= 0  (w <= max(u, v))
}


def _normalized_constraints(sy_pos: bool, sz_pos: bool, b: int, j: int, div: int) -> np.ndarray:
    rows = []
    rule = _ORDER_RULES.get((sy_pos, sz_pos, b))
    if rule is not None:
        for i, k in rule:
            r = [0.0, 0.0, 0.0, 0.0]
            r[i] = 1.0
            r[k] = -1.0
            rows.append(r)
    else:
        rows.append(list(_HULL_CUTS[(sy_pos, sz_pos)]))
    axis = b - 1
    t0 = (div - j) / div
    t1 = (div - j + 1) / div
    lo = [0.0, 0.0, 0.0, -t0]
    lo[axis] = -1.0
    hi = [0.0, 0.0, 0.0, t1]
    hi[axis] = 1.0
    rows.append(lo)
    rows.append(hi)
    for i in range(3):
        r = [0.0, 0.0, 0.0, 0.0]
        r[i] = -1.0
        rows.append(list(r))
        r = [0.0, 0.0, 0.0, 1.0]
        r[i] = 1.0
        rows.append(r)
    arr = np.array(rows, dtype=np.float64)
    # drop duplicate constraints (slab bounds can coincide with cube faces)
    _, keep = np.unique(np.round(arr, 12), axis=0, return_index=True)
    return arr[np.sort(keep)]


def _polytope(constraints: np.ndarray):
    """Vertices and facet subset of ``a . x <= d`` rows.

    A row is a facet when at least three enumerated vertices span a 2D
    patch of its plane; tangent and redundant rows are discarded.
    """
    A = constraints[:, :3]
    d = constraints[:, 3]
    n = len(A)
    triples = np.array(list(combinations(range(n), 3)))
    M = A[triples]
    rhs = d[triples]
    dets = np.linalg.det(M)
    ok = np.abs(dets) > 1e-12
    pts = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feasible = (pts @ A.T - d <= _FEAS_TOL).all(axis=1)
    verts = pts[feasible]
    if verts.shape[0] == 0:
        raise AssertionError("bin region unexpectedly empty")
    _, first = np.unique(np.round(verts, 9), axis=0, return_index=True)
    verts = verts[np.sort(first)]
    keep = []
    for ci in range(n):
        on = np.abs(verts @ A[ci] - d[ci]) <= _FEAS_TOL
        if int(on.sum()) >= 3:
            patch = verts[on]
            if np.linalg.matrix_rank(patch - patch[0], tol=1e-7) == 2:
                keep.append(ci)
    return A[keep], d[keep], verts


@lru_cache(maxsize=None)
def _normalized_bin(sy_pos: bool, sz_pos: bool, b: int, j: int, div: int):
    A, d, verts = _polytope(_normalized_constraints(sy_pos, sz_pos, b, j, div))
    for arr in (A, d, verts):
        arr.setflags(write=False)
    return A, d, verts


def _quadrant_signs(p_qua: int) -> np.ndarray:
    return np.array(
        [
            -1.0 if (p_qua & 1) else 1.0,
            -1.0 if (p_qua & 2) else 1.0,
            -1.0 if (p_qua & 4) else 1.0,
        ]
    )


def _split_block(block: int) -> tuple[int, int]:
    p_qua, b = divmod(block - 1, 3)
    return p_qua, b + 1


class BinGeometry:
    """Bounding planes and polytope corners of one bin, in frame-local coordinates.

    Normals are unit length and point outward: a point ``p`` is inside when
    ``normals @ p - offsets <= 0`` for every plane.
    """

    __slots__ = ("normals", "offsets", "plane_points", "vertices")

    def __init__(self, normals, offsets, plane_points, vertices):
        self.normals = normals
        self.offsets = offsets
        self.plane_points = plane_points
        self.vertices = vertices
        for arr in (normals, offsets, plane_points, vertices):
            arr.setflags(write=False)

    @property
    def planes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(point-on-plane, outward normal) pairs."""
        return [(self.plane_points[i], self.normals[i]) for i in range(len(self.offsets))]

    def signed_distances(self, p_lrf) -> np.ndarray:
        return np.asarray(p_lrf, dtype=np.float64) @ self.normals.T - self.offsets

    def contains(self, p_lrf, tol: float) -> np.ndarray:
        return np.max(self.signed_distances(p_lrf), axis=-1) <= tol

    def min_plane_distance(self, p_lrf) -> float:
        return float(np.min(np.abs(self.signed_distances(p_lrf))))


def _geometry_for(frame_extents: np.ndarray, block: int, proj: int, div: int) -> BinGeometry:
    p_qua, b = _split_block(block)
    signs = _quadrant_signs(p_qua)
    A, d, verts = _normalized_bin(signs[1] > 0, signs[2] > 0, b, proj, div)
    raw = A * (signs / frame_extents)
    norms = np.linalg.norm(raw, axis=1)
    normals = raw / norms[:, None]
    offsets = d / norms
    vertices = verts * (signs * frame_extents)
    plane_points = np.empty((len(offsets), 3))
    for i in range(len(offsets)):
        idx = int(np.argmin(np.abs(vertices @ normals[i] - offsets[i])))
        plane_points[i] = vertices[idx]
    return BinGeometry(normals, offsets, plane_points, vertices)


def _check_bin_range(bin_index, div: int) -> tuple[int, int]:
    block, proj = int(bin_index[0]), int(bin_index[1])
    if not (1 <= block <= N_BLOCKS) or not (1 <= proj <= div):
        raise BinOutOfRangeError(
            f"bin ({block}, {proj}) outside block 1..{N_BLOCKS}, proj 1..{div}"
        )
    return block, proj


def bin_geometry(frame: ObbFrame, div: int, bin_index) -> BinGeometry:
    """Bounding planes and vertices of one bin of the given frame."""
    block, proj = _check_bin_range(bin_index, div)
    return _geometry_for(np.asarray(frame.half_extents), block, proj, div)


# ---------------------------------------------------------------------------
# Adjacency
# ---------------------------------------------------------------------------

def _stack_geometries(geoms):
    n = len(geoms)
    pmax = max(len(g.offsets) for g in geoms)
    vmax = max(len(g.vertices) for g in geoms)
    normals = np.zeros((n, pmax, 3))
    offsets = np.full((n, pmax), np.inf)  # padded planes auto-pass
    verts = np.tile(_PAD_VERTEX, (n, vmax, 1))  # padded vertices auto-fail
    for i, g in enumerate(geoms):
        normals[i, : len(g.offsets)] = g.normals
        offsets[i, : len(g.offsets)] = g.offsets
        verts[i, : len(g.vertices)] = g.vertices
    return normals, offsets, verts


def _touch_matrix(geoms, eps: float) -> np.ndarray:
    """Symmetric bin-contact matrix: a vertex of one polytope lies inside
    the other's plane set (within ``eps``).

    Candidate pairs are prefiltered by vertex-bounding-box overlap, then
    tested in both directions in one vectorized pass.
    """
    normals, offsets, verts = _stack_geometries(geoms)
    n = len(geoms)
    lo = np.stack([g.vertices.min(axis=0) for g in geoms]) - eps
    hi = np.stack([g.vertices.max(axis=0) for g in geoms]) + eps
    overlap = np.logical_and(
        (lo[:, None, :] <= hi[None, :, :]).all(axis=2),
        (lo[None, :, :] <= hi[:, None, :]).all(axis=2),
    )
    pi, pj = np.nonzero(np.triu(overlap, k=1))
    adj = np.zeros((n, n), dtype=bool)
    chunk = 65536
    for start in range(0, len(pi), chunk):
        a = pi[start : start + chunk]
        b = pj[start : start + chunk]
        sd = np.einsum("kvc,kpc->kvp", verts[a], normals[b]) - offsets[b][:, None, :]
        hit = (sd <= eps).all(axis=2).any(axis=1)
        sd = np.einsum("kvc,kpc->kvp", verts[b], normals[a]) - offsets[a][:, None, :]
        hit |= (sd <= eps).all(axis=2).any(axis=1)
        adj[a[hit], b[hit]] = True
    adj |= adj.T
    return adj


def compute_adjacency(geometries, diagonal: float) -> dict[BinIndex, list[BinIndex]]:
    """Touch relation over bins: A and B are adjacent when a vertex of one
    lies inside (within tolerance) the other's plane set.

    ``geometries`` maps :class:`BinIndex` to :class:`BinGeometry`;
    ``diagonal`` sets the contact tolerance scale.
    """
    keys = list(geometries.keys())
    geoms = [geometries[k] for k in keys]
    adj = _touch_matrix(geoms, 1e-9 * diagonal)
    return {
        keys[i]: [keys[j] for j in np.nonzero(adj[i])[0]] for i in range(len(keys))
    }


@lru_cache(maxsize=64)
def _canonical_layout(div: int):
    """Per-bin geometry for the unit frame (all half-extents 1), flat order."""
    extents = np.ones(3)
    geoms = []
    for block in range(1, N_BLOCKS + 1):
        for proj in range(1, div + 1):
            geoms.append(_geometry_for(extents, block, proj, div))
    return tuple(geoms)


@lru_cache(maxsize=64)
def _canonical_adjacency(div: int):
    """Adjacency lists (flat bin ids) for a given ``div``.

    Bin contact is invariant under the per-axis scaling that maps the unit
    frame onto any real frame, so the relation is computed once per ``div``
    and reused across builds.
    """
    geoms = _canonical_layout(div)
    adj = _touch_matrix(geoms, 1e-9 * 2.0 * math.sqrt(3.0))
    lists = []
    for i in range(len(geoms)):
        nbrs = np.nonzero(adj[i])[0].astype(np.int64)
        nbrs.setflags(write=False)
        lists.append(nbrs)
    return tuple(lists)


@lru_cache(maxsize=64)
def _canonical_adjacency_csr(div: int):
    """Adjacency in compressed form: (starts, flat neighbor array)."""
    lists = _canonical_adjacency(div)
    starts = np.zeros(len(lists) + 1, dtype=np.int64)
    np.cumsum([len(x) for x in lists], out=starts[1:])
    flat = np.concatenate(lists) if lists else np.empty(0, dtype=np.int64)
    starts.setflags(write=False)
    flat.setflags(write=False)
    return starts, flat


# ---------------------------------------------------------------------------
# The built index
# ---------------------------------------------------------------------------

class HashIndex:
    """Immutable two-level hash structure over one point cloud.

    Safe for any number of concurrent readers once built.
    """

    def __init__(self, points, frame, div, p_avg, mode):
        self.points = points
        self.frame = frame
        self.div = int(div)
        self.p_avg = int(p_avg)
        self.mode = mode
        self.n_bins = N_BLOCKS * self.div

        local = frame.to_lrf(points)
        blocks, projs = _hash_points_lrf(local, np.asarray(frame.half_extents), self.div)
        flat = (blocks - 1) * self.div + (projs - 1)
        order = np.argsort(flat, kind="stable")
        sorted_flat = flat[order]
        bounds = np.searchsorted(sorted_flat, np.arange(self.n_bins + 1))
        self.bin_point_ids = tuple(
            order[bounds[i] : bounds[i + 1]] for i in range(self.n_bins)
        )
        self._flat_of_point = flat
        # bin-sorted layout for vectorized multi-bin scans
        self._bin_starts = bounds.astype(np.int64)
        self._sorted_ids = order
        self._sorted_coords = points[order]

        extents = np.asarray(frame.half_extents)
        self.geometries = tuple(
            _geometry_for(extents, *self.bin_of_flat(i), self.div)
            for i in range(self.n_bins)
        )
        self.adjacency = _canonical_adjacency(self.div)
        self._adj_starts, self._adj_flat = _canonical_adjacency_csr(self.div)

        normals, offsets, _ = _stack_geometries(self.geometries)
        self._plane_normals = normals
        self._plane_offsets = offsets
        self._normals_2d = np.ascontiguousarray(normals.reshape(-1, 3))

    # -- addressing ---------------------------------------------------------

    def flat_of(self, bin_index) -> int:
        block, proj = _check_bin_range(bin_index, self.div)
        return (block - 1) * self.div + (proj - 1)

    def bin_of_flat(self, flat: int) -> BinIndex:
        block, proj = divmod(int(flat), self.div)
        return BinIndex(block + 1, proj + 1)

    def hash_point(self, p) -> BinIndex:
        return hash_point(self.frame, self.div, p)

    # -- spec-level views ---------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def bins(self) -> dict[BinIndex, np.ndarray]:
        """Bin address -> ids of the points hashed there."""
        return {
            self.bin_of_flat(i): self.bin_point_ids[i] for i in range(self.n_bins)
        }

    @property
    def blocks(self) -> list[list[BinIndex]]:
        """First-level table: the 24 blocks, each listing its bins."""
        return [
            [BinIndex(block, proj) for proj in range(1, self.div + 1)]
            for block in range(1, N_BLOCKS + 1)
        ]

    @property
    def geometry(self) -> dict[BinIndex, BinGeometry]:
        """Bin address -> bounding planes and vertices."""
        return {
            self.bin_of_flat(i): self.geometries[i] for i in range(self.n_bins)
        }

    def bin_points(self, bin_index) -> np.ndarray:
        return self.bin_point_ids[self.flat_of(bin_index)]

    def geometry_of(self, bin_index) -> BinGeometry:
        return self.geometries[self.flat_of(bin_index)]

    def adjacency_of(self, bin_index) -> list[BinIndex]:
        flat = self.flat_of(bin_index)
        return [self.bin_of_flat(j) for j in self.adjacency[flat]]

    @property
    def pointer_count(self) -> int:
        return N_BLOCKS * self.div + self.m

    # -- diagnostics --------------------------------------------------------

    def max_containment_violation(self) -> float:
        """Largest signed distance of any point to its own bin's planes.

        Should not exceed ~1e-9 of the frame diagonal on a healthy build.
        """
        worst = -np.inf
        local = self.frame.to_lrf(self.points)
        for i in range(self.n_bins):
            ids = self.bin_point_ids[i]
            if ids.size == 0:
                continue
            sd = self.geometries[i].signed_distances(local[ids])
            worst = max(worst, float(sd.max()))
        return worst


def build(cloud, mode: str = "obb", p_avg_override: int | None = None) -> HashIndex:
    """Compute the frame, pick ``div``, hash every point, and materialize
    bin geometry plus the bin adjacency graph."""
    pts = check_points(cloud)
    frame = compute_obb(pts, mode=mode)
    div, p_avg = select_div(len(pts), p_avg_override)
    return HashIndex(pts, frame, div, p_avg, mode=mode.lower())
