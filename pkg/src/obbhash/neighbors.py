"""Estimator-style front end: fit a structure, then query neighbors.

Every structure (the two-level hash and the reference baselines) exposes
the same surface: ``fit(X)``, single-query ``knn``/``radius`` returning a
:class:`~obbhash.query.QueryResult`, and sklearn-compatible batch methods
``kneighbors``/``radius_neighbors`` so the index drops into pipelines that
expect a ``NearestNeighbors``-like object.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines
from . import index as hashing
from . import query as searches
from .exceptions import EmptyIndexError
from .validation import check_points


class NeighborIndex(BaseEstimator):
    """Shared fit/query surface for all exact structures."""

    structure_name = "base"

    def fit(self, X, y=None):
        pts = check_points(X)
        self._fit(pts)
        self.points_ = pts
        self.n_points_ = len(pts)
        return self

    def _fit(self, points):
        raise NotImplementedError

    def _structure(self):
        raise NotImplementedError

    def _check_fitted(self):
        if not hasattr(self, "n_points_"):
            raise EmptyIndexError(
                f"{type(self).__name__} is not fitted; call fit(X) first"
            )

    # -- single-query interface ---------------------------------------------

    def knn(self, q, k):
        self._check_fitted()
        return self._structure().knn(q, k)

    def radius(self, q, r):
        self._check_fitted()
        return self._structure().radius(q, r)

    @property
    def pointer_count(self):
        self._check_fitted()
        return self._structure().pointer_count

    # -- sklearn-compatible batch interface ----------------------------------

    def kneighbors(self, X=None, n_neighbors=5, return_distance=True):
        """Distances and indices of the nearest points, sklearn-style.

        With ``X=None`` each fitted point is queried against the others
        and excluded from its own neighbor list.
        """
        self._check_fitted()
        exclude_self = X is None
        queries = self.points_ if exclude_self else check_points(X)
        k = n_neighbors + 1 if exclude_self else n_neighbors
        dist = np.empty((len(queries), n_neighbors))
        ind = np.empty((len(queries), n_neighbors), dtype=np.int64)
        for i, q in enumerate(queries):
            res = self.knn(q, k)
            ids, d2 = res.ids, res.sq_distances
            if exclude_self:
                keep = ids != i
                ids, d2 = ids[keep][:n_neighbors], d2[keep][:n_neighbors]
            if len(ids) < n_neighbors:
                raise ValueError(
                    f"n_neighbors={n_neighbors} exceeds the available points"
                )
            dist[i] = np.sqrt(d2)
            ind[i] = ids
        return (dist, ind) if return_distance else ind

    def radius_neighbors(self, X=None, radius=1.0, return_distance=True):
        self._check_fitted()
        exclude_self = X is None
        queries = self.points_ if exclude_self else check_points(X)
        dists = np.empty(len(queries), dtype=object)
        inds = np.empty(len(queries), dtype=object)
        for i, q in enumerate(queries):
            res = self.radius(q, radius)
            ids, d2 = res.ids, res.sq_distances
            if exclude_self:
                keep = ids != i
                ids, d2 = ids[keep], d2[keep]
            inds[i] = ids
            dists[i] = np.sqrt(d2)
        return (dists, inds) if return_distance else inds


class TwoLevelLshNeighbors(NeighborIndex):
    """The two-level hash index behind the shared estimator surface.

    Parameters
    ----------
    p_avg : int or None
        Target average points per bin; ``None`` picks it from the size table.
    box_mode : str
        ``"obb"`` orients the frame by principal directions, ``"aabb"``
        keeps it axis-aligned.
    """

    structure_name = "2llsh"

    def __init__(self, p_avg=None, box_mode="obb"):
        self.p_avg = p_avg
        self.box_mode = box_mode

    def _fit(self, points):
        self.index_ = hashing.build(points, mode=self.box_mode, p_avg_override=self.p_avg)

    def _structure(self):
        return self.index_

    def knn(self, q, k, prune=True):
        self._check_fitted()
        return searches.knn(self.index_, q, k, prune=prune)

    def radius(self, q, r, prune=True):
        self._check_fitted()
        return searches.radius(self.index_, q, r, prune=prune)

    @property
    def pointer_count(self):
        self._check_fitted()
        return self.index_.pointer_count


class KdTreeNeighbors(NeighborIndex):
    structure_name = "kdtree"

    def _fit(self, points):
        self.tree_ = baselines.KdTree(points)

    def _structure(self):
        return self.tree_


class OctreeNeighbors(NeighborIndex):
    structure_name = "octree"

    def __init__(self, layer=None):
        self.layer = layer

    def _fit(self, points):
        self.tree_ = baselines.Octree(points, layer=self.layer)

    def _structure(self):
        return self.tree_


class BruteForceNeighbors(NeighborIndex):
    structure_name = "bruteforce"

    def _fit(self, points):
        self.scan_ = baselines.BruteForce(points)

    def _structure(self):
        return self.scan_
