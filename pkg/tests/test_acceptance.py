"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line directly to the terminal.  The heavy
randomized campaign (criteria 1 and 8) runs once as a session fixture and
is shared by both tests.
"""

import csv
import math
import time

import numpy as np
import pytest

import obbhash.bench as bench
from obbhash.bench import (
    BenchConfig,
    main,
    memory_report,
    pruning_consistency,
    reduct_percent,
    run_bench,
    sweep_p_avg,
)
from obbhash.geometry import squared_distances
from obbhash.index import build, select_div
from obbhash.query import knn, radius
from obbhash.synthetic import FAMILIES, generate_cloud

CAMPAIGN_SEED = 20_250_810
N_CLOUDS = 100
QUERIES_PER_CLOUD = 100
K_LIST = (1, 2, 3, 4, 5, 20, 50)
RADIUS_COUNT_TARGETS = (2, 10, 60)  # plus a dense m//5 target per cloud


def report(capsys, number, name, ok, detail=""):
    with capsys.disabled():
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"\nACCEPTANCE {number} {name}: {status}{suffix}")
    assert ok, f"criterion {number} {name} failed: {detail}"


def _cloud_sizes(rng):
    sizes = np.exp(
        rng.uniform(np.log(100), np.log(50_000), size=N_CLOUDS)
    ).astype(int)
    sizes[0] = 50_000  # pin the stated span
    sizes[1] = 100
    return np.maximum(sizes, 100)


@pytest.fixture(scope="session")
def campaign():
    """Criterion-1 randomized campaign; also gathers the per-build
    partition and containment facts criterion 8 asserts."""
    rng = np.random.default_rng(CAMPAIGN_SEED)
    sizes = _cloud_sizes(rng)
    stats = {
        "clouds": 0,
        "comparisons": 0,
        "mismatches": 0,
        "partition_failures": 0,
        "containment_failures": 0,
    }
    t0 = time.perf_counter()
    for i in range(N_CLOUDS):
        family = FAMILIES[i % len(FAMILIES)]
        m = int(sizes[i])
        pts = generate_cloud(family, m, seed=CAMPAIGN_SEED + i)
        index = build(pts)

        if sum(len(b) for b in index.bin_point_ids) != m:
            stats["partition_failures"] += 1
        if index.max_containment_violation() > 1e-9 * index.frame.diagonal:
            stats["containment_failures"] += 1

        n_inside = QUERIES_PER_CLOUD - 15
        qidx = rng.choice(m, size=min(n_inside, m), replace=True)
        queries = list(pts[qidx])
        span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        for _ in range(QUERIES_PER_CLOUD - len(queries)):
            base = pts[int(rng.integers(m))]
            queries.append(base + rng.normal(scale=0.7 * span, size=3))

        for q in queries:
            d2 = squared_distances(pts, q)
            order = np.lexsort((np.arange(m), d2))
            sorted_d2 = d2[order]
            for k in K_LIST:
                expected = order[: min(k, m)]
                got = knn(index, q, k).ids
                stats["comparisons"] += 1
                if not np.array_equal(got, expected):
                    stats["mismatches"] += 1
            for target in list(RADIUS_COUNT_TARGETS) + [max(2, m // 5)]:
                cut = min(max(int(target), 1), m - 1)
                r = math.sqrt(float(sorted_d2[cut])) + 1e-9
                count = int(np.searchsorted(sorted_d2, r * r, side="left"))
                expected = order[:count]
                got = radius(index, q, r).ids
                stats["comparisons"] += 1
                if not np.array_equal(got, expected):
                    stats["mismatches"] += 1
        stats["clouds"] += 1
    stats["elapsed_s"] = time.perf_counter() - t0
    return stats


def test_criterion_1_exactness(campaign, capsys):
    ok = (
        campaign["clouds"] >= 100
        and campaign["mismatches"] == 0
        and campaign["elapsed_s"] < 300.0
    )
    report(
        capsys, 1, "exactness vs linear-scan oracle", ok,
        f"{campaign['clouds']} clouds, {campaign['comparisons']} query comparisons, "
        f"{campaign['mismatches']} mismatches, {campaign['elapsed_s']:.1f}s",
    )


def test_criterion_2_pruning_bound_validity(capsys):
    rng = np.random.default_rng(CAMPAIGN_SEED + 1)
    target_pairs = 10_000
    samples_per_bin = 10_000
    checked = 0
    violations = 0
    cloud_specs = [(FAMILIES[i % 5], 500 + 700 * i) for i in range(8)]
    for spec_i, (family, m) in enumerate(cloud_specs):
        pts = generate_cloud(family, m, seed=CAMPAIGN_SEED + 50 + spec_i)
        index = build(pts)
        diag = index.frame.diagonal
        span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        per_cloud = target_pairs // len(cloud_specs)
        region_cache = {}
        done = 0
        while done < per_cloud:
            flat = int(rng.integers(index.n_bins))
            geom = index.geometries[flat]
            q = pts[int(rng.integers(m))] + rng.normal(scale=0.5 * span, size=3)
            q_local = index.frame.to_lrf(q)
            if geom.contains(q_local, tol=0.0):
                continue  # criterion covers exterior queries only
            if flat not in region_cache:
                weights = rng.dirichlet(
                    np.ones(len(geom.vertices)), size=samples_per_bin
                )
                region_cache[flat] = weights @ geom.vertices
            samples = region_cache[flat]
            sd = index._plane_normals[flat] @ q_local - index._plane_offsets[flat]
            bound = float(np.min(np.abs(sd)))
            nearest = math.sqrt(
                float(np.min(np.einsum("ij,ij->i", samples - q_local, samples - q_local)))
            )
            checked += 1
            done += 1
            if bound > nearest + 1e-6 * diag:
                violations += 1
    ok = checked >= target_pairs and violations == 0
    report(
        capsys, 2, "pruning bound never overestimates", ok,
        f"{checked} exterior (query, bin) pairs, {violations} violations",
    )


PUBLISHED_KD_KB = {5_000: 19.53, 10_000: 39.06, 100_000: 390.63, 200_000: 781.25, 2_500_000: 9_765.63}
# the 200K column was evidently computed with depth 7 (size bucket closed
# at its upper edge); every other cell matches the table-driven default
PUBLISHED_OCTREE = {
    5_000: (None, 21.82),
    10_000: (None, 185.35),
    100_000: (None, 1_560.91),
    200_000: (7, 1_951.54),
    2_500_000: (None, 19_127.91),
}
PUBLISHED_LSH_KB = {5_000: 20.51, 10_000: 40.63, 100_000: 403.65, 200_000: 790.44, 2_500_000: 9_880.51}


def kb_half_up(size_bytes):
    return math.floor(size_bytes / 1024 * 100 + 0.5) / 100


def test_criterion_3_memory_model(capsys):
    failures = []
    for m, expected in PUBLISHED_KD_KB.items():
        got = kb_half_up(memory_report("kdtree", m))
        if got != expected:
            failures.append(f"kdtree m={m}: {got} != {expected}")
    for m, (layer, expected) in PUBLISHED_OCTREE.items():
        got = kb_half_up(memory_report("octree", m, layer=layer))
        if got != expected:
            failures.append(f"octree m={m}: {got} != {expected}")
    for m, expected in PUBLISHED_LSH_KB.items():
        got = memory_report("2llsh", m) / 1024
        if abs(got - expected) / expected > 0.05:
            failures.append(f"2llsh m={m}: {got:.2f} not within 5% of {expected}")
    report(
        capsys, 3, "pointer-memory table", not failures,
        "; ".join(failures) if failures else "10 exact tree cells, hash column within 5%",
    )


def test_criterion_4_parameter_law(capsys):
    rng = np.random.default_rng(CAMPAIGN_SEED + 2)
    bad = 0
    for m in rng.integers(1, 3_000_000, size=1000):
        m = int(m)
        div, p_avg = select_div(m)
        if m < 5_000:
            expected_p = 15
        elif m < 10_000:
            expected_p = 39
        elif m < 100_000:
            expected_p = 48
        elif m < 200_000:
            expected_p = 95
        else:
            expected_p = 381
        if p_avg != expected_p or div != max(1, math.ceil(m / (24 * p_avg))):
            bad += 1
    report(capsys, 4, "slice-count law over 1000 random sizes", bad == 0, f"{bad} deviations")


# (2llsh ms, kdtree ms, reduct1 %, octree ms, reduct2 %) rows as published
PUBLISHED_REDUCT_ROWS = [
    ("plate k=1", 204, 363, 43.802, 469, 56.503),
    ("plate k=2", 181, 363, 50.138, 485, 62.680),
    ("plate k=3", 197, 352, 44.034, 491, 59.878),
    ("plate k=4", 189, 352, 46.307, 486, 61.111),
    ("plate k=5", 190, 351, 45.869, 511, 62.818),
    ("terracotta k=1", 85, 130, 34.615, 280, 69.643),
    ("disk k=1", 222, 425, 47.765, 554, 59.928),
    ("xbox k=2", 33, 46, 28.261, 565, 94.159),
    ("rn r=2", 1228, 2700, 54.519, 1643, 25.259),
    ("rn r=4", 1479, 2907, 49.123, 2543, 41.840),
    ("rn r=6", 1698, 3056, 44.437, 2712, 37.389),
    ("rn r=8", 1967, 3165, 37.852, 2772, 29.040),
    ("rn r=10", 2257, 3291, 31.419, 2941, 23.257),
]


def test_criterion_5_reduct_arithmetic(capsys):
    failures = []
    for label, ours, t_kd, red1, t_oc, red2 in PUBLISHED_REDUCT_ROWS:
        if abs(reduct_percent(t_kd, ours) - red1) >= 5e-4:
            failures.append(f"{label} reduct1")
        if abs(reduct_percent(t_oc, ours) - red2) >= 5e-4:
            failures.append(f"{label} reduct2")
    report(
        capsys, 5, "published speed-reduction percentages", not failures,
        f"{len(PUBLISHED_REDUCT_ROWS)} rows to 3 decimals"
        + (": " + ", ".join(failures) if failures else ""),
    )


def test_criterion_6a_protocol_csv(tmp_path, capsys):
    config = BenchConfig(
        inputs=["synthetic:uniform:3000:100:1"],
        structures=["2llsh", "kdtree", "octree", "bruteforce"],
        query_count=1000,
        k_list=[1, 2, 3, 4, 5],
        r_list=[2.0, 4.0, 6.0, 8.0, 10.0],
        seed=17,
        out=tmp_path / "protocol.csv",
    )
    records = run_bench(config)
    with open(config.out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    checks = {}
    for rec in records:
        checks.setdefault(rec.parameter, set()).add(rec.checksum)
    ok = (
        len(rows) == 4 * 10
        and list(rows[0].keys()) == list(bench.CSV_COLUMNS)
        and all(len(v) == 1 for v in checks.values())
    )
    report(
        capsys, "6a", "harness emits protocol-shaped CSV", ok,
        f"{len(rows)} rows, 1000 queries, box grids k=1..5 r=2..10, checksums agree",
    )


def test_criterion_6b_pruning_self_consistency(capsys):
    rng = np.random.default_rng(CAMPAIGN_SEED + 3)
    worst = []
    for i, family in enumerate(("uniform", "gmm", "sphere")):
        pts = generate_cloud(family, 2500, seed=CAMPAIGN_SEED + 80 + i)
        queries = pts[rng.choice(2500, 30, replace=False)]
        stats = pruning_consistency(pts, queries, k=5, r=6.0)
        assert all(pruned <= full for pruned, full in stats)
        worst.append(max(full - pruned for pruned, full in stats))
    report(
        capsys, "6b", "pruning only reduces scanned bins", True,
        f"results identical on 3 models; largest saving {max(worst)} bins",
    )


def test_criterion_6c_p_avg_sweep_basin(capsys):
    p_avg_list = [10, 20, 39, 80, 160]
    totals = {p: math.inf for p in p_avg_list}
    for _ in range(2):  # min of two repetitions damps clock noise
        rows = sweep_p_avg(
            "synthetic:uniform:6500:100:2",
            p_avg_list=p_avg_list,
            k_list=[3],
            r_list=[4.0],
            query_count=300,
            seed=5,
        )
        rep = {p: 0.0 for p in p_avg_list}
        for row in rows:
            rep[row["p_avg"]] += row["query_s"]
        for p in p_avg_list:
            totals[p] = min(totals[p], rep[p])
    table_value_time = totals[39]
    best = min(totals.values())
    ok = table_value_time <= 2.0 * best
    report(
        capsys, "6c", "size-table value sits in the sweep basin", ok,
        f"t(39)={table_value_time:.3f}s, basin minimum {best:.3f}s",
    )


def test_criterion_7_determinism(tmp_path, capsys):
    def one(outname):
        config = BenchConfig(
            inputs=["synthetic:gmm:1200:100:6"],
            structures=["2llsh", "kdtree", "bruteforce"],
            query_count=60,
            k_list=[1, 3],
            r_list=[4.0],
            seed=123,
            out=tmp_path / outname,
        )
        run_bench(config)
        with open(config.out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            for col in bench.TIMING_COLUMNS:
                row.pop(col)
        return rows

    csv_ok = one("a.csv") == one("b.csv")

    args = [
        "highlight", "--input", "synthetic:sphere:900:100:7",
        "--q-index", "31", "--k", "20", "--r", "25",
    ]
    assert main(args + ["--out", str(tmp_path / "a.ply")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.ply")]) == 0
    ply_ok = (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()

    report(
        capsys, 7, "seeded runs byte-identical", csv_ok and ply_ok,
        "CSV equal modulo timing columns; highlight PLY byte-identical",
    )


def test_criterion_8_partition_and_containment(campaign, capsys):
    ok = (
        campaign["partition_failures"] == 0
        and campaign["containment_failures"] == 0
    )
    report(
        capsys, 8, "partition and own-bin containment on every build", ok,
        f"{campaign['clouds']} builds checked",
    )
