"""Oriented bounding boxes and local-reference-frame transforms.

The box frame is the coordinate system every hashing step works in: its
origin is the box center and its axes are the box edge directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_points

# Half-extents below this fraction of the dominant one are padded up so that
# later per-axis divisions stay well defined on degenerate clouds.
EXTENT_FLOOR_FRACTION = 1e-9


def squared_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from each row of ``points`` to ``q``.

    Every distance comparison in the package goes through this single
    kernel so that exact structures and the linear-scan oracle agree
    bit-for-bit on boundary cases.
    """
    d = points - q
    return np.einsum("ij,ij->i", d, d)


@dataclass(frozen=True)
class ObbFrame:
    """A bounding box: center, orthonormal rotation (columns = axes), half-extents.

    ``rotation`` has determinant +1 and the half-extents are strictly
    positive.  Instances are immutable and safe to share across threads.
    """

    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        for name in ("center", "rotation", "half_extents"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def diagonal(self) -> float:
        """Full diagonal length of the box (2 * norm of half-extents)."""
        return 2.0 * float(np.linalg.norm(self.half_extents))

    @property
    def volume(self) -> float:
        return float(np.prod(2.0 * self.half_extents))

    @property
    def corners(self) -> np.ndarray:
        """The 8 box corners in original coordinates, (8, 3)."""
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return self.center + (signs * self.half_extents) @ self.rotation.T

    def to_lrf(self, p) -> np.ndarray:
        """Map original coordinates into the box frame (works on (..., 3))."""
        return (np.asarray(p, dtype=np.float64) - self.center) @ self.rotation

    def from_lrf(self, p_prime) -> np.ndarray:
        """Inverse of :meth:`to_lrf`."""
        return np.asarray(p_prime, dtype=np.float64) @ self.rotation.T + self.center

    def contains(self, p, tol: float | None = None) -> np.ndarray:
        """True where ``p`` (in original coordinates) lies inside the box."""
        if tol is None:
            tol = 1e-9 * self.diagonal
        local = np.abs(self.to_lrf(p))
        return np.all(local <= self.half_extents + tol, axis=-1)


def to_lrf(frame: ObbFrame, p) -> np.ndarray:
    return frame.to_lrf(p)


def from_lrf(frame: ObbFrame, p_prime) -> np.ndarray:
    return frame.from_lrf(p_prime)


def _pad_extents(half_extents: np.ndarray) -> np.ndarray:
    largest = float(np.max(half_extents))
    floor = EXTENT_FLOOR_FRACTION * (largest if largest > 0.0 else 1.0)
    return np.maximum(half_extents, floor)


def _fix_singular_vector_signs(V: np.ndarray) -> np.ndarray:
    # Deterministic orientation: largest-magnitude component of each axis
    # positive, then determinant forced to +1 by flipping the third axis.
    V = V.copy()
    for j in range(3):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0.0:
            V[:, j] = -V[:, j]
    if np.linalg.det(V) < 0.0:
        V[:, 2] = -V[:, 2]
    return V


def compute_obb(cloud, mode: str = "obb") -> ObbFrame:
    """Build the bounding box of a cloud.

    ``mode="obb"`` orients the box along the principal directions obtained
    from an SVD of the mean-centered cloud; ``mode="aabb"`` keeps the box
    axis-aligned.  Either way the extents come from exact per-axis min/max
    of the (rotated) points, so every input point is inside the returned
    box, and the center is the midpoint of those extremes.
    """
    pts = check_points(cloud)
    mode = mode.lower()
    if mode not in ("obb", "aabb"):
        raise ValueError(f"mode must be 'obb' or 'aabb', got {mode!r}")

    if mode == "aabb":
        rotation = np.eye(3)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        center = 0.5 * (lo + hi)
        half_extents = _pad_extents(0.5 * (hi - lo))
        return ObbFrame(center=center, rotation=rotation, half_extents=half_extents)

    mean = pts.mean(axis=0)
    centered = pts - mean
    # zero-row padding keeps the right singular vectors and gives clouds of
    # fewer than 3 points a full 3x3 basis under the economy SVD
    work = centered
    if len(work) < 3:
        work = np.vstack([work, np.zeros((3 - len(work), 3))])
    _, _, vt = np.linalg.svd(work, full_matrices=False)
    rotation = _fix_singular_vector_signs(vt.T)

    rotated = centered @ rotation
    lo = rotated.min(axis=0)
    hi = rotated.max(axis=0)
    mid = 0.5 * (lo + hi)
    center = mean + rotation @ mid
    half_extents = _pad_extents(0.5 * (hi - lo))
    return ObbFrame(center=center, rotation=rotation, half_extents=half_extents)
