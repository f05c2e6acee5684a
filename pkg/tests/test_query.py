import numpy as np
import pytest

from obbhash.baselines import bruteforce_knn, bruteforce_radius
from obbhash.exceptions import EmptyIndexError, KZeroError, RNonPositiveError
from obbhash.index import BinIndex, build
from obbhash.query import knn, make_result, min_dist_boun, radius
from obbhash.synthetic import generate_cloud

from conftest import campaign_clouds, mixed_queries, radii_from_quantiles


def unit_box_index(div_target=1):
    """Index whose frame is exactly the [-1, 1]^3 box (identity rotation)."""
    corners = np.array(
        [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
    )
    idx = build(corners, mode="aabb")
    assert idx.div == div_target
    np.testing.assert_array_equal(idx.frame.rotation, np.eye(3))
    np.testing.assert_allclose(idx.frame.center, np.zeros(3), atol=0)
    return idx


class TestMinDistBoun:
    def test_origin_touches_every_innermost_bin(self, rng):
        pts = generate_cloud("uniform", 3000, seed=21)
        idx = build(pts)
        origin = idx.frame.center
        eps = 1e-9 * idx.frame.diagonal
        for block in range(1, 25):
            assert min_dist_boun(origin, BinIndex(block, idx.div), idx) <= eps

    def test_hand_evaluated_plane_distances(self):
        # unit box, div 1, block 1; query fixed in frame coordinates
        idx = unit_box_index()
        q = np.array([2.0, 0.5, 0.5])  # frame == original coordinates here
        geom = idx.geometry_of(BinIndex(1, 1))
        # independent evaluation: |(q - point_on_plane) . n| / ||n|| per plane
        dists = sorted(
            abs(float((q - point) @ normal)) / float(np.linalg.norm(normal))
            for point, normal in geom.planes
        )
        # the two box faces y=1 and z=1 sit at 0.5; the base plane x=0 at 2;
        # the two diagonals at |2 - 0.5| / sqrt(2)
        d_diag = 1.5 / np.sqrt(2.0)
        np.testing.assert_allclose(dists, [0.5, 0.5, d_diag, d_diag, 2.0], atol=1e-12)
        bound = min_dist_boun(q, BinIndex(1, 1), idx)
        assert abs(bound - 0.5) < 1e-12
        # underestimates the true distance to the bin's region
        samples = np.random.default_rng(0).dirichlet(
            np.ones(len(geom.vertices)), size=4000
        ) @ geom.vertices
        true_dist = np.sqrt(np.min(np.sum((samples - q) ** 2, axis=1)))
        assert bound <= true_dist + 1e-9

    def test_scale_homogeneity(self, rng):
        pts = generate_cloud("gmm", 1200, seed=22)
        q = pts[37] + np.array([40.0, -25.0, 10.0])
        idx1 = build(pts)
        for s in (0.25, 3.0, 117.0):
            idx2 = build(pts * s)
            for block in (2, 11, 19):
                b1 = min_dist_boun(q, BinIndex(block, 1), idx1)
                b2 = min_dist_boun(q * s, BinIndex(block, 1), idx2)
                assert abs(b2 - s * b1) <= 1e-9 * max(1.0, s * b1)

    def test_bound_validity_sampled_regions(self, rng):
        # for queries outside a bin's polytope the plane bound must not
        # exceed the distance to any point of the region
        violations = 0
        checked = 0
        for family, pts in campaign_clouds(6, 200, 2000, seed=23):
            idx = build(pts)
            diag = idx.frame.diagonal
            span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
            for _ in range(120):
                flat = int(rng.integers(idx.n_bins))
                geom = idx.geometries[flat]
                q = pts[int(rng.integers(len(pts)))] + rng.normal(scale=0.4 * span, size=3)
                q_local = idx.frame.to_lrf(q)
                if geom.contains(q_local, tol=0.0):
                    continue
                checked += 1
                bound = min_dist_boun(q, idx.bin_of_flat(flat), idx)
                weights = rng.dirichlet(np.ones(len(geom.vertices)), size=800)
                samples = weights @ geom.vertices
                nearest = np.sqrt(np.min(np.sum((samples - q_local) ** 2, axis=1)))
                if bound > nearest + 1e-6 * diag:
                    violations += 1
        assert checked > 300
        assert violations == 0


class TestKnn:
    def test_k_equals_m_returns_all_sorted(self, rng):
        pts = generate_cloud("sphere", 400, seed=24)
        idx = build(pts)
        q = rng.normal(size=3) * 30 + 50
        res = knn(idx, q, 400)
        ref = bruteforce_knn(pts, q, 400)
        np.testing.assert_array_equal(res.ids, ref.ids)
        assert (np.diff(res.sq_distances) >= 0).all()

    def test_query_on_cloud_point(self):
        pts = generate_cloud("uniform", 900, seed=25)
        idx = build(pts)
        res = knn(idx, pts[123], 1)
        assert list(res.ids) == [123]
        assert res.sq_distances[0] == 0.0

    def test_k_larger_than_m(self):
        pts = generate_cloud("uniform", 50, seed=26)
        idx = build(pts)
        assert len(knn(idx, pts[0], 200)) == 50

    def test_k_zero_rejected(self):
        idx = build(generate_cloud("uniform", 40, seed=27))
        with pytest.raises(KZeroError):
            knn(idx, [0.0, 0.0, 0.0], 0)

    def test_unbuilt_index_rejected(self):
        with pytest.raises(EmptyIndexError):
            knn(None, [0.0, 0.0, 0.0], 1)

    def test_equidistant_ties_take_lower_ids(self):
        corners = np.array(
            [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
        )
        idx = build(corners, mode="aabb")
        res = knn(idx, [0.5, 0.5, 0.5], 3)
        assert list(res.ids) == [0, 1, 2]
        ref = bruteforce_knn(corners, [0.5, 0.5, 0.5], 3)
        np.testing.assert_array_equal(res.ids, ref.ids)

    def test_oracle_campaign(self, rng):
        for family, pts in campaign_clouds(15, 100, 3000, seed=28):
            idx = build(pts, mode="aabb" if family == "slab" else "obb")
            for q in mixed_queries(pts, 6, 3, rng):
                for k in (1, 2, 3, 4, 5, 20, 50):
                    res = knn(idx, q, k)
                    ref = bruteforce_knn(pts, q, k)
                    np.testing.assert_array_equal(res.ids, ref.ids)
                    np.testing.assert_array_equal(res.sq_distances, ref.sq_distances)

    def test_pruning_disabled_same_result_more_scans(self, rng):
        pts = generate_cloud("gmm", 1800, seed=29)
        idx = build(pts)
        for q in mixed_queries(pts, 5, 2, rng):
            fast = knn(idx, q, 5, prune=True)
            full = knn(idx, q, 5, prune=False)
            np.testing.assert_array_equal(fast.ids, full.ids)
            assert fast.visited <= full.visited
            assert full.visited <= idx.n_bins


class TestRadius:
    def test_radius_covering_everything(self, rng):
        pts = generate_cloud("ellipsoid", 500, seed=30)
        idx = build(pts)
        q = pts[7] + np.array([5.0, 5.0, 5.0])
        diameter = float(np.max(pts.max(axis=0) - pts.min(axis=0))) * np.sqrt(3)
        r = diameter + 20.0
        assert len(radius(idx, q, r)) == 500

    def test_tiny_radius_self_hit(self):
        pts = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]])
        idx = build(pts)
        res = radius(idx, pts[1], 0.05)
        assert list(res.ids) == [1]
        assert res.sq_distances[0] == 0.0

    def test_strict_inequality_at_boundary(self):
        pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        idx = build(pts)
        assert list(radius(idx, [0.0, 0.0, 0.0], 1.0).ids) == [0]
        assert list(radius(idx, [0.0, 0.0, 0.0], 1.0 + 1e-9).ids) == [0, 1]

    def test_r_nonpositive_rejected(self):
        idx = build(generate_cloud("uniform", 40, seed=31))
        with pytest.raises(RNonPositiveError):
            radius(idx, [0.0, 0.0, 0.0], 0.0)
        with pytest.raises(RNonPositiveError):
            radius(idx, [0.0, 0.0, 0.0], -2.0)

    def test_oracle_campaign(self, rng):
        for family, pts in campaign_clouds(15, 100, 3000, seed=32):
            idx = build(pts)
            for q in mixed_queries(pts, 5, 3, rng):
                m = len(pts)
                for r in radii_from_quantiles(pts, q, [2, 15, max(2, m // 6)]):
                    res = radius(idx, q, r)
                    ref = bruteforce_radius(pts, q, r)
                    np.testing.assert_array_equal(res.ids, ref.ids)
                    np.testing.assert_array_equal(res.sq_distances, ref.sq_distances)

    def test_pruning_disabled_same_result_more_scans(self, rng):
        pts = generate_cloud("uniform", 1500, seed=33)
        idx = build(pts)
        for q in mixed_queries(pts, 4, 2, rng):
            fast = radius(idx, q, 8.0, prune=True)
            full = radius(idx, q, 8.0, prune=False)
            np.testing.assert_array_equal(fast.ids, full.ids)
            assert fast.visited <= full.visited
            assert full.visited <= idx.n_bins


class TestBoundaryStress:
    @pytest.mark.parametrize("mode", ["obb", "aabb"])
    def test_exact_duplicates(self, rng, mode):
        # repeated coordinates force heavy id tie-breaking everywhere
        base = rng.uniform(0, 50, (40, 3))
        pts = base[rng.integers(0, 40, 300)]
        idx = build(pts, mode=mode)
        for qi in range(0, 300, 29):
            q = pts[qi]
            for k in (1, 3, 10, 60):
                np.testing.assert_array_equal(
                    knn(idx, q, k).ids, bruteforce_knn(pts, q, k).ids
                )
            for r in (0.5, 5.0, 30.0):
                np.testing.assert_array_equal(
                    radius(idx, q, r).ids, bruteforce_radius(pts, q, r).ids
                )

    @pytest.mark.parametrize("mode", ["obb", "aabb"])
    def test_integer_lattice_on_separating_planes(self, mode):
        # lattice points land exactly on diagonal planes and slab borders
        g = np.arange(-3, 4, dtype=float)
        pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        idx = build(pts, mode=mode)
        assert idx.max_containment_violation() <= 1e-9 * idx.frame.diagonal
        queries = list(pts[::23]) + [
            np.zeros(3), np.array([3.0, 3.0, 3.0]), np.array([9.0, -9.0, 2.5]),
        ]
        for q in queries:
            for k in (1, 4, 27):
                np.testing.assert_array_equal(
                    knn(idx, q, k).ids, bruteforce_knn(pts, q, k).ids
                )
            for r in (1.0, 1.5, 2.0 + 1e-12):
                np.testing.assert_array_equal(
                    radius(idx, q, r).ids, bruteforce_radius(pts, q, r).ids
                )


class TestQueryResult:
    def test_hits_pairs_and_ordering(self):
        res = make_result([5, 2, 9], [4.0, 1.0, 1.0], visited=3)
        assert res.hits == [(2, 1.0), (9, 1.0), (5, 4.0)]
        assert len(res) == 3
        assert res.visited == 3
        np.testing.assert_allclose(res.distances, np.sqrt(res.sq_distances))

    def test_no_duplicate_ids_in_searches(self, rng):
        pts = generate_cloud("gmm", 1000, seed=34)
        idx = build(pts)
        q = pts[11]
        res = radius(idx, q, 12.0)
        assert len(np.unique(res.ids)) == len(res.ids)
