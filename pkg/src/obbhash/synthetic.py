"""Seeded synthetic point clouds at desk scale (~100 model units).

Five shape families stand in for scanned models: a uniform box, a sphere
shell, a solid anisotropic ellipsoid, clustered Gaussian mixtures, and a
thin planar slab.  The same generators back the benchmark CLI's
``synthetic:<family>:<m>[:scale]`` inputs and the committed sample files.
"""

from __future__ import annotations

import numpy as np

FAMILIES = ("uniform", "sphere", "ellipsoid", "gmm", "slab")


def _rotation_from(rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def generate_cloud(family: str, m: int, seed: int, scale: float = 100.0) -> np.ndarray:
    """A seeded (m, 3) cloud of the requested family."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    if family == "uniform":
        pts = rng.uniform(0.0, scale, size=(m, 3))
    elif family == "sphere":
        dirs = rng.normal(size=(m, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = 0.5 * scale + rng.normal(scale=0.01 * scale, size=(m, 1))
        pts = 0.5 * scale + dirs * radii
    elif family == "ellipsoid":
        ball = rng.normal(size=(m, 3))
        ball /= np.linalg.norm(ball, axis=1, keepdims=True)
        ball *= rng.uniform(0.0, 1.0, size=(m, 1)) ** (1.0 / 3.0)
        axes = np.array([0.6, 0.3, 0.12]) * scale
        pts = (ball * axes) @ _rotation_from(rng).T + 0.5 * scale
    elif family == "gmm":
        n_clusters = 5
        centers = rng.uniform(0.15 * scale, 0.85 * scale, size=(n_clusters, 3))
        sigmas = rng.uniform(0.01 * scale, 0.06 * scale, size=n_clusters)
        labels = rng.integers(0, n_clusters, size=m)
        pts = centers[labels] + rng.normal(size=(m, 3)) * sigmas[labels, None]
    else:  # slab
        pts = np.empty((m, 3))
        pts[:, 0] = rng.uniform(0.0, scale, size=m)
        pts[:, 1] = rng.uniform(0.0, scale, size=m)
        pts[:, 2] = 0.5 * scale + rng.normal(scale=0.008 * scale, size=m)
    return pts


def parse_synthetic_spec(spec: str) -> tuple[str, np.ndarray]:
    """Parse ``synthetic:<family>:<m>[:scale][:seed]`` into (name, cloud)."""
    parts = spec.split(":")
    if parts[0] != "synthetic" or len(parts) < 3:
        raise ValueError(f"bad synthetic spec {spec!r}")
    family = parts[1]
    try:
        m = int(parts[2])
        scale = float(parts[3]) if len(parts) > 3 else 100.0
        seed = int(parts[4]) if len(parts) > 4 else 0
    except ValueError:
        raise ValueError(f"bad synthetic spec {spec!r}") from None
    name = f"{family}-{m}"
    return name, generate_cloud(family, m, seed=seed, scale=scale)
