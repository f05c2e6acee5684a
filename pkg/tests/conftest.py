import numpy as np
import pytest

from obbhash.synthetic import FAMILIES, generate_cloud


def campaign_clouds(n_clouds, m_lo, m_hi, seed, families=FAMILIES):
    """Seeded clouds cycling through the shape families, sizes log-uniform."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_clouds):
        family = families[i % len(families)]
        m = int(np.exp(rng.uniform(np.log(m_lo), np.log(m_hi))))
        out.append((family, generate_cloud(family, m, seed=seed + i)))
    return out


def radii_from_quantiles(pts, q, count_targets):
    """Radii that return roughly the requested numbers of hits around q."""
    d = np.sort(np.sqrt(np.sum((pts - q) ** 2, axis=1)))
    m = len(pts)
    radii = []
    for target in count_targets:
        idx = min(max(int(target), 1), m - 1)
        radii.append(float(d[idx]) + 1e-9)
    return radii


def mixed_queries(pts, n_inside, n_outside, rng):
    """Cloud points plus jittered exterior points."""
    m = len(pts)
    queries = list(pts[rng.choice(m, size=min(n_inside, m), replace=False)])
    span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    for _ in range(n_outside):
        base = pts[int(rng.integers(m))]
        queries.append(base + rng.normal(scale=0.6 * span, size=3))
    return queries


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_cube_corners():
    return np.array(
        [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
    )
