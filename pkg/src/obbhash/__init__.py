"""obbhash: exact neighbor search over a two-level spatial hash.

The index orients a bounding box to the cloud, splits it into 24 pyramidal
blocks and ``div`` slices per block, and answers exact k-nearest-neighbor
and radius queries by expanding over adjacent bins with a plane-distance
pruning bound.  Reference Kd-tree, octree, and linear-scan structures sit
behind the same estimator interface, and a benchmark CLI reproduces the
timing protocol and pointer-memory model they are compared under.
"""

from .baselines import (
    BruteForce,
    KdTree,
    Octree,
    bruteforce_knn,
    bruteforce_radius,
    kdtree_build,
    octree_build,
)
from .geometry import ObbFrame, compute_obb, from_lrf, to_lrf
from .index import (
    BinGeometry,
    BinIndex,
    HashIndex,
    bin_geometry,
    block_of,
    build,
    compute_adjacency,
    hash_point,
    proj_of,
    quadrant_of,
    select_div,
)
from .io import CloudFile, export_highlight, load_cloud, load_cloud_file, save_ply, save_xyz
from .neighbors import (
    BruteForceNeighbors,
    KdTreeNeighbors,
    NeighborIndex,
    OctreeNeighbors,
    TwoLevelLshNeighbors,
)
from .query import QueryResult, knn, min_dist_boun, radius
from .synthetic import FAMILIES, generate_cloud

__version__ = "0.1.0"

__all__ = [
    "BinGeometry",
    "BinIndex",
    "BruteForce",
    "BruteForceNeighbors",
    "CloudFile",
    "FAMILIES",
    "HashIndex",
    "KdTree",
    "KdTreeNeighbors",
    "NeighborIndex",
    "ObbFrame",
    "Octree",
    "OctreeNeighbors",
    "QueryResult",
    "TwoLevelLshNeighbors",
    "bin_geometry",
    "block_of",
    "bruteforce_knn",
    "bruteforce_radius",
    "build",
    "compute_adjacency",
    "compute_obb",
    "export_highlight",
    "from_lrf",
    "generate_cloud",
    "hash_point",
    "kdtree_build",
    "knn",
    "load_cloud",
    "load_cloud_file",
    "min_dist_boun",
    "octree_build",
    "proj_of",
    "quadrant_of",
    "radius",
    "save_ply",
    "save_xyz",
    "select_div",
    "to_lrf",
]
