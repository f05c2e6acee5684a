"""Benchmark harness: timed query campaigns, memory accounting, CSV output.

The protocol per model and structure: build once, sample a seeded set of
query points from the cloud, run every k and r over all of them on a
monotonic clock with an untimed warm-up pass, and record one CSV row per
(model, structure, parameter).  When the linear scan is among the enabled
structures every other structure's per-query results are checked against
it and any disagreement aborts the run.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (
    default_layer,
    kd_pointer_count,
    lsh_pointer_count,
    octree_pointer_count,
)
from .exceptions import ChecksumMismatchError, LayerTooLargeError, ObbHashError
from .index import select_div
from .io import export_highlight, load_cloud
from .neighbors import (
    BruteForceNeighbors,
    KdTreeNeighbors,
    OctreeNeighbors,
    TwoLevelLshNeighbors,
)
from .synthetic import generate_cloud, parse_synthetic_spec

STRUCTURES = ("2llsh", "2llsh-aabb", "kdtree", "octree", "bruteforce")

BYTES_PER_POINTER = 4

CSV_COLUMNS = (
    "model",
    "m",
    "structure",
    "parameter",
    "build_s",
    "query_s",
    "mean_visited",
    "pointer_bytes",
    "checksum",
)

# Columns whose values depend on wall-clock measurements.
TIMING_COLUMNS = ("build_s", "query_s")


@dataclass
class BenchConfig:
    inputs: list
    structures: list = field(default_factory=lambda: ["2llsh", "kdtree", "octree", "bruteforce"])
    query_count: int = 1000
    k_list: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    r_list: list = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0, 10.0])
    p_avg_override: int | None = None
    layer_override: int | None = None
    seed: int = 0
    out: str | Path | None = None
    exterior_queries: bool = False
    warmup: int = 5

    def __post_init__(self):
        unknown = [s for s in self.structures if s not in STRUCTURES]
        if unknown:
            raise ValueError(f"unknown structures {unknown}; choose from {STRUCTURES}")


@dataclass
class BenchRecord:
    model: str
    m: int
    structure: str
    parameter: str
    build_s: float
    query_s: float
    mean_visited: float
    pointer_bytes: int
    checksum: str

    def row(self) -> list:
        return [
            self.model,
            self.m,
            self.structure,
            self.parameter,
            f"{self.build_s:.6f}",
            f"{self.query_s:.6f}",
            f"{self.mean_visited:.3f}",
            self.pointer_bytes,
            self.checksum,
        ]


def reduct_percent(t_baseline: float, t_ours: float) -> float:
    """Relative time saving of ours against a baseline, in percent."""
    return (t_baseline - t_ours) / t_baseline * 100.0


def make_structure(name: str, config: BenchConfig):
    if name == "2llsh":
        return TwoLevelLshNeighbors(p_avg=config.p_avg_override, box_mode="obb")
    if name == "2llsh-aabb":
        return TwoLevelLshNeighbors(p_avg=config.p_avg_override, box_mode="aabb")
    if name == "kdtree":
        return KdTreeNeighbors()
    if name == "octree":
        return OctreeNeighbors(layer=config.layer_override)
    if name == "bruteforce":
        return BruteForceNeighbors()
    raise ValueError(f"unknown structure {name!r}")


def load_input(item) -> tuple[str, np.ndarray]:
    """One benchmark input: either a cloud file path or a synthetic spec."""
    text = str(item)
    if text.startswith("synthetic:"):
        return parse_synthetic_spec(text)
    path = Path(text)
    return path.stem, load_cloud(path)


def sample_queries(points: np.ndarray, config: BenchConfig) -> np.ndarray:
    """Seeded query points drawn from the cloud without replacement; the
    exterior flag trades a tenth of them for jittered off-surface points."""
    rng = np.random.default_rng(config.seed)
    m = len(points)
    count = min(config.query_count, m)
    idx = rng.choice(m, size=count, replace=False)
    queries = points[idx].copy()
    if config.exterior_queries:
        n_ext = max(1, count // 10)
        span = points.max(axis=0) - points.min(axis=0)
        jitter = rng.normal(scale=0.25 * float(np.max(span)), size=(n_ext, 3))
        queries[-n_ext:] = queries[-n_ext:] + jitter
    return queries


def _checksum(results) -> str:
    digest = hashlib.sha256()
    for res in results:
        digest.update(np.asarray(res.ids, dtype=np.int64).tobytes())
        digest.update(b";")
    return digest.hexdigest()[:16]


def _first_mismatch(reference, results) -> int:
    for i, (a, b) in enumerate(zip(reference, results)):
        if not np.array_equal(a.ids, b.ids):
            return i
    return -1


def run_bench(config: BenchConfig) -> list[BenchRecord]:
    """Run the full campaign and return one record per (model, structure,
    parameter); writes CSV (plus a reduct summary) when ``config.out`` is set."""
    order = sorted(config.structures, key=lambda s: s != "bruteforce")
    records: list[BenchRecord] = []
    for item in config.inputs:
        model, points = load_input(item)
        queries = sample_queries(points, config)
        warm = queries[: min(config.warmup, len(queries))]
        reference: dict[str, list] = {}
        for name in order:
            est = make_structure(name, config)
            t0 = time.perf_counter()
            est.fit(points)
            build_s = time.perf_counter() - t0

            jobs = [("k=%d" % k, "knn", k) for k in config.k_list]
            jobs += [("r=%g" % r, "radius", r) for r in config.r_list]
            for parameter, kind, value in jobs:
                fn = est.knn if kind == "knn" else est.radius
                for q in warm:
                    fn(q, value)
                t0 = time.perf_counter()
                results = [fn(q, value) for q in queries]
                query_s = time.perf_counter() - t0

                if name == "bruteforce":
                    reference[parameter] = results
                elif parameter in reference:
                    bad = _first_mismatch(reference[parameter], results)
                    if bad >= 0:
                        raise ChecksumMismatchError(model, name, parameter, bad)
                records.append(
                    BenchRecord(
                        model=model,
                        m=len(points),
                        structure=name,
                        parameter=parameter,
                        build_s=build_s,
                        query_s=query_s,
                        mean_visited=float(np.mean([r.visited for r in results])),
                        pointer_bytes=BYTES_PER_POINTER * est.pointer_count,
                        checksum=_checksum(results),
                    )
                )
    if config.out is not None:
        write_records_csv(records, config.out)
        write_reduct_csv(records, Path(config.out).with_suffix(".reduct.csv"))
    return records


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())


def write_reduct_csv(records, path) -> None:
    """Relative savings of the hash structure against each tree baseline,
    recomputed from the recorded query times."""
    times: dict[tuple, float] = {}
    for rec in records:
        times[(rec.model, rec.parameter, rec.structure)] = rec.query_s
    rows = []
    for rec in records:
        if rec.structure != "2llsh":
            continue
        key = (rec.model, rec.parameter)
        t_kd = times.get(key + ("kdtree",))
        t_oc = times.get(key + ("octree",))
        rows.append(
            [
                rec.model,
                rec.parameter,
                f"{reduct_percent(t_kd, rec.query_s):.3f}" if t_kd else "",
                f"{reduct_percent(t_oc, rec.query_s):.3f}" if t_oc else "",
            ]
        )
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "parameter", "reduct1_pct", "reduct2_pct"])
        writer.writerows(rows)


def memory_report(structure: str, m: int, p_avg=None, layer=None, div=None) -> int:
    """Pointer memory in bytes under the 4-bytes-per-pointer model."""
    if structure in ("2llsh", "2llsh-aabb"):
        if div is None:
            div, _ = select_div(m, p_avg)
        return BYTES_PER_POINTER * lsh_pointer_count(m, div)
    if structure == "kdtree":
        return BYTES_PER_POINTER * kd_pointer_count(m)
    if structure == "octree":
        layer = default_layer(m) if layer is None else int(layer)
        if (8**layer - 1) // 7 > 8**9:
            raise LayerTooLargeError(f"layer {layer} exceeds the interior-node guard")
        return BYTES_PER_POINTER * octree_pointer_count(m, layer)
    if structure == "bruteforce":
        return BYTES_PER_POINTER * m
    raise ValueError(f"unknown structure {structure!r}")


def sweep_p_avg(
    input_item,
    p_avg_list,
    k_list=(1, 2, 3, 4, 5),
    r_list=(2.0, 4.0, 6.0, 8.0, 10.0),
    query_count=1000,
    seed=0,
    out=None,
) -> list[dict]:
    """Query-time curve over bin-occupancy targets; one row per
    (p_avg, parameter), all parameters sharing one seeded query set."""
    model, points = load_input(input_item)
    config = BenchConfig(inputs=[], query_count=query_count, seed=seed)
    queries = sample_queries(points, config)
    warm = queries[: min(5, len(queries))]
    rows = []
    for p_avg in p_avg_list:
        est = TwoLevelLshNeighbors(p_avg=int(p_avg)).fit(points)
        jobs = [("k=%d" % k, est.knn, k) for k in k_list]
        jobs += [("r=%g" % r, est.radius, r) for r in r_list]
        for parameter, fn, value in jobs:
            for q in warm:
                fn(q, value)
            t0 = time.perf_counter()
            for q in queries:
                fn(q, value)
            rows.append(
                {
                    "model": model,
                    "p_avg": int(p_avg),
                    "div": est.index_.div,
                    "parameter": parameter,
                    "query_s": time.perf_counter() - t0,
                }
            )
    if out is not None:
        _write_dict_csv(rows, out, ["model", "p_avg", "div", "parameter", "query_s"])
    return rows


def scale_study(
    m_list,
    k=5,
    r=4.0,
    family="uniform",
    query_count=1000,
    seed=0,
    out=None,
) -> list[dict]:
    """Mean query time against cloud size for one k and one r."""
    rows = []
    for m in m_list:
        points = generate_cloud(family, int(m), seed=seed)
        config = BenchConfig(inputs=[], query_count=query_count, seed=seed)
        queries = sample_queries(points, config)
        warm = queries[: min(5, len(queries))]
        est = TwoLevelLshNeighbors().fit(points)
        for parameter, fn, value in (
            ("k=%d" % k, est.knn, k),
            ("r=%g" % r, est.radius, r),
        ):
            for q in warm:
                fn(q, value)
            t0 = time.perf_counter()
            for q in queries:
                fn(q, value)
            elapsed = time.perf_counter() - t0
            rows.append(
                {
                    "family": family,
                    "m": int(m),
                    "parameter": parameter,
                    "mean_query_s": elapsed / max(len(queries), 1),
                }
            )
    if out is not None:
        _write_dict_csv(rows, out, ["family", "m", "parameter", "mean_query_s"])
    return rows


def pruning_consistency(points, queries, k, r, p_avg=None, box_mode="obb"):
    """Bins scanned with and without the plane-distance bound; results must
    agree, scans without pruning must dominate."""
    est = TwoLevelLshNeighbors(p_avg=p_avg, box_mode=box_mode).fit(points)
    stats = []
    for q in queries:
        for kind, value in (("knn", k), ("radius", r)):
            fn = est.knn if kind == "knn" else est.radius
            pruned = fn(q, value, prune=True)
            full = fn(q, value, prune=False)
            if not np.array_equal(pruned.ids, full.ids):
                raise AssertionError("pruning changed a result set")
        stats.append((pruned.visited, full.visited))
    return stats


def _write_dict_csv(rows, path, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key, value in out.items():
                if isinstance(value, float):
                    out[key] = f"{value:.6f}"
            writer.writerow(out)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

EXIT_OK = 0
EXIT_CHECKSUM = 2
EXIT_INPUT = 3


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors: exit 3, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def parse_int_list(text: str) -> list[int]:
    """Accepts ``1..5`` ranges and comma lists, mixed: ``1..5,20,50``."""
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if ".." in chunk:
            lo, hi = chunk.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            out.append(int(chunk))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(c) for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obbhash-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="timed campaign over models and structures")
    run.add_argument("--input", nargs="+", required=True,
                     help="cloud files or synthetic:<family>:<m>[:scale][:seed]")
    run.add_argument("--structures", default="2llsh,kdtree,octree,bruteforce")
    run.add_argument("--k", default="1..5", help="kNN sizes, e.g. 1..5,20")
    run.add_argument("--r", default="2,4,6,8,10", help="radii, comma separated")
    run.add_argument("--queries", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--p-avg", type=int, default=None)
    run.add_argument("--layer", type=int, default=None)
    run.add_argument("--exterior-queries", action="store_true")
    run.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep-pavg", help="query time vs bin occupancy target")
    sweep.add_argument("--input", required=True)
    sweep.add_argument("--p-avg", required=True, help="comma list of targets")
    sweep.add_argument("--k", default="1..5")
    sweep.add_argument("--r", default="2,4,6,8,10")
    sweep.add_argument("--queries", type=int, default=1000)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", required=True)

    scale = sub.add_parser("scale", help="query time vs cloud size")
    scale.add_argument("--m-list", required=True)
    scale.add_argument("--k", type=int, default=5)
    scale.add_argument("--r", type=float, default=4.0)
    scale.add_argument("--family", default="uniform")
    scale.add_argument("--queries", type=int, default=1000)
    scale.add_argument("--seed", type=int, default=0)
    scale.add_argument("--out", required=True)

    memory = sub.add_parser("memory", help="pointer-memory model per structure")
    memory.add_argument("--m", required=True, help="comma list of point counts")
    memory.add_argument("--structures", default="2llsh,kdtree,octree")
    memory.add_argument("--p-avg", type=int, default=None)
    memory.add_argument("--layer", type=int, default=None)
    memory.add_argument("--out", default=None)

    highlight = sub.add_parser("highlight", help="colored PLY of one query's neighbors")
    highlight.add_argument("--input", required=True)
    highlight.add_argument("--q-index", type=int, required=True)
    highlight.add_argument("--k", type=int, default=20)
    highlight.add_argument("--r", type=float, default=3.0)
    highlight.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            config = BenchConfig(
                inputs=list(args.input),
                structures=[s.strip() for s in args.structures.split(",") if s.strip()],
                query_count=args.queries,
                k_list=parse_int_list(args.k),
                r_list=parse_float_list(args.r),
                p_avg_override=args.p_avg,
                layer_override=args.layer,
                seed=args.seed,
                out=args.out,
                exterior_queries=args.exterior_queries,
            )
            records = run_bench(config)
            print(f"wrote {len(records)} records to {args.out}")
        elif args.command == "sweep-pavg":
            rows = sweep_p_avg(
                args.input,
                parse_int_list(args.p_avg),
                k_list=parse_int_list(args.k),
                r_list=parse_float_list(args.r),
                query_count=args.queries,
                seed=args.seed,
                out=args.out,
            )
            print(f"wrote {len(rows)} rows to {args.out}")
        elif args.command == "scale":
            rows = scale_study(
                parse_int_list(args.m_list),
                k=args.k,
                r=args.r,
                family=args.family,
                query_count=args.queries,
                seed=args.seed,
                out=args.out,
            )
            print(f"wrote {len(rows)} rows to {args.out}")
        elif args.command == "memory":
            columns = ["structure", "m", "pointer_bytes", "pointer_kb"]
            rows = []
            for m in parse_int_list(args.m):
                for name in [s.strip() for s in args.structures.split(",") if s.strip()]:
                    size = memory_report(name, m, p_avg=args.p_avg, layer=args.layer)
                    rows.append(
                        {
                            "structure": name,
                            "m": m,
                            "pointer_bytes": size,
                            "pointer_kb": f"{size / 1024:.2f}",
                        }
                    )
            if args.out:
                _write_dict_csv(rows, args.out, columns)
            else:
                print(",".join(columns))
                for row in rows:
                    print(",".join(str(row[c]) for c in columns))
        elif args.command == "highlight":
            model, points = load_input(args.input)
            if not (0 <= args.q_index < len(points)):
                raise ValueError(
                    f"--q-index {args.q_index} outside cloud of {len(points)} points"
                )
            est = TwoLevelLshNeighbors().fit(points)
            q = points[args.q_index]
            knn_res = est.knn(q, args.k)
            rn_res = est.radius(q, args.r)
            export_highlight(points, args.q_index, knn_res, rn_res, args.out)
            print(f"wrote {args.out}")
    except ChecksumMismatchError as exc:
        print(f"checksum mismatch: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except (OSError, ObbHashError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cli_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
