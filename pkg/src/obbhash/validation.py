"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import EmptyCloudError, KZeroError, NonFiniteInputError, RNonPositiveError


def check_points(X) -> np.ndarray:
    """Validate a point cloud and return it as a float64 (m, 3) array."""
    pts = np.asarray(X, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (m, 3) array of 3D points, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise EmptyCloudError("point cloud is empty")
    if not np.isfinite(pts).all():
        raise NonFiniteInputError("point coordinates must be finite")
    out = np.array(pts, dtype=np.float64, copy=True, order="C")
    out.setflags(write=False)
    return out


def check_query_point(q) -> np.ndarray:
    """Validate a single query point and return it as a float64 (3,) vector."""
    v = np.asarray(q, dtype=np.float64).reshape(-1)
    if v.shape != (3,):
        raise ValueError(f"expected a 3D point, got shape {np.asarray(q).shape}")
    if not np.isfinite(v).all():
        raise NonFiniteInputError("query coordinates must be finite")
    return v


def check_k(k) -> int:
    k = int(k)
    if k < 1:
        raise KZeroError(f"k must be >= 1, got {k}")
    return k


def check_radius(r) -> float:
    r = float(r)
    if not np.isfinite(r) or r <= 0.0:
        raise RNonPositiveError(f"radius must be a positive finite number, got {r}")
    return r
