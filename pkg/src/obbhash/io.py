"""Point-cloud file ingestion and export.

Formats: XYZ (whitespace-delimited reals, ``#`` comments), PLY ascii,
PLY binary little-endian, and OFF (vertices only).  Coordinates must be
finite; the declared element count must match the records present.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    CountMismatchError,
    ParseError,
    UnsupportedFormatError,
    WriteError,
)
from .validation import check_points

XYZ = "xyz"
PLY_ASCII = "ply-ascii"
PLY_BINARY_LE = "ply-binary-le"
OFF = "off"

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class CloudFile:
    """A parsed cloud file: where it came from, what it held."""

    path: Path
    format: str
    points: np.ndarray
    colors: np.ndarray | None = None


def detect_format(path) -> str:
    """Decide the format from the file's magic bytes, then its extension."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(512)
    if head.startswith(b"ply"):
        if b"format ascii" in head:
            return PLY_ASCII
        if b"format binary_little_endian" in head:
            return PLY_BINARY_LE
        raise UnsupportedFormatError(f"{path}: unsupported PLY encoding")
    if head.startswith(b"OFF"):
        return OFF
    ext = path.suffix.lower()
    if ext in (".xyz", ".txt", ".pts"):
        return XYZ
    if ext == ".off":
        return OFF
    if ext == ".ply":
        raise UnsupportedFormatError(f"{path}: missing PLY magic")
    raise UnsupportedFormatError(f"{path}: unrecognized cloud format")


def load_cloud(path, format: str | None = None) -> np.ndarray:
    """Points of a cloud file, ids given by record order."""
    return load_cloud_file(path, format=format).points


def load_cloud_file(path, format: str | None = None) -> CloudFile:
    path = Path(path)
    fmt = format or detect_format(path)
    colors = None
    if fmt == XYZ:
        points = _load_xyz(path)
    elif fmt in (PLY_ASCII, PLY_BINARY_LE):
        points, colors = _load_ply(path, fmt)
    elif fmt == OFF:
        points = _load_off(path)
    else:
        raise UnsupportedFormatError(f"unknown format {fmt!r}")
    return CloudFile(path=path, format=fmt, points=points, colors=colors)


def _finite_or_raise(values, path, line=None):
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite coordinate", path=path, line=line)


def _load_xyz(path: Path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8", errors="strict") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) < 3:
                raise ParseError("expected 3 coordinates", path=path, line=lineno)
            try:
                xyz = [float(parts[0]), float(parts[1]), float(parts[2])]
            except ValueError:
                raise ParseError("malformed real number", path=path, line=lineno) from None
            _finite_or_raise(xyz, path, line=lineno)
            rows.append(xyz)
    if not rows:
        raise ParseError("no points in file", path=path)
    return np.asarray(rows, dtype=np.float64)


def _parse_ply_header(lines, path):
    """Returns (elements, header_line_count); elements are
    (name, count, [(prop_name, prop_type)])."""
    if lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", path=path, line=1)
    elements = []
    current = None
    for i, line in enumerate(lines[1:], start=2):
        tokens = line.strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            continue
        if tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", path=path, line=i)
            current = (tokens[1], int(tokens[2]), [])
            elements.append(current)
        elif tokens[0] == "property":
            if current is None:
                raise ParseError("property before element", path=path, line=i)
            if tokens[1] == "list":
                current[2].append((tokens[-1], "list"))
            else:
                current[2].append((tokens[-1], tokens[1]))
        elif tokens[0] == "end_header":
            return elements, i
    raise ParseError("missing end_header", path=path)


def _vertex_element(elements, path):
    for name, count, props in elements:
        if name == "vertex":
            return count, props
    raise ParseError("no vertex element", path=path)


def _load_ply(path: Path, fmt: str) -> tuple[np.ndarray, np.ndarray | None]:
    data = path.read_bytes()
    header_end = data.find(b"end_header")
    if header_end < 0:
        raise ParseError("missing end_header", path=path)
    newline = data.find(b"\n", header_end)
    body_start = newline + 1
    header_text = data[:body_start].decode("ascii", errors="replace")
    lines = header_text.splitlines()
    elements, header_lines = _parse_ply_header(lines, path)
    count, props = _vertex_element(elements, path)
    names = [p[0] for p in props]
    for needed in ("x", "y", "z"):
        if needed not in names:
            raise ParseError(f"vertex element lacks property {needed!r}", path=path)

    if fmt == PLY_ASCII:
        body = data[body_start:].decode("ascii", errors="replace").splitlines()
        records = [ln for ln in body if ln.strip()]
        if elements[0][0] != "vertex":
            raise UnsupportedFormatError(f"{path}: vertex must be the first element")
        if len(records) < count:
            raise CountMismatchError(
                f"declared {count} vertices, found {len(records)}", path=path
            )
        cols = {n: names.index(n) for n in ("x", "y", "z")}
        has_rgb = all(n in names for n in ("red", "green", "blue"))
        rgb = {n: names.index(n) for n in ("red", "green", "blue")} if has_rgb else None
        pts = np.empty((count, 3))
        colors = np.empty((count, 3), dtype=np.uint8) if has_rgb else None
        for i in range(count):
            parts = records[i].split()
            if len(parts) < len(names):
                raise ParseError(
                    "vertex row has too few values", path=path, line=header_lines + 1 + i
                )
            try:
                pts[i] = [float(parts[cols["x"]]), float(parts[cols["y"]]), float(parts[cols["z"]])]
                if has_rgb:
                    colors[i] = [int(parts[rgb[n]]) for n in ("red", "green", "blue")]
            except ValueError:
                raise ParseError(
                    "malformed vertex value", path=path, line=header_lines + 1 + i
                ) from None
        _finite_or_raise(pts, path)
        return pts, colors

    # binary little-endian: build the record dtype; elements before vertex
    # must be fixed-size to be skipped
    offset = body_start
    for name, ecount, eprops in elements:
        fields = []
        has_list = False
        for pname, ptype in eprops:
            if ptype == "list":
                has_list = True
                break
            if ptype not in _PLY_DTYPES:
                raise UnsupportedFormatError(f"{path}: property type {ptype!r}")
            fields.append((pname, "<" + _PLY_DTYPES[ptype]))
        if name == "vertex":
            if has_list:
                raise UnsupportedFormatError(f"{path}: list property on vertices")
            dt = np.dtype(fields)
            end = offset + dt.itemsize * ecount
            if end > len(data):
                raise CountMismatchError(
                    f"declared {ecount} vertices, file truncated", path=path,
                    offset=len(data),
                )
            rec = np.frombuffer(data, dtype=dt, count=ecount, offset=offset)
            pts = np.stack(
                [rec["x"].astype(np.float64), rec["y"].astype(np.float64), rec["z"].astype(np.float64)],
                axis=1,
            )
            _finite_or_raise(pts, path)
            colors = None
            if all(n in dt.names for n in ("red", "green", "blue")):
                colors = np.stack(
                    [rec["red"], rec["green"], rec["blue"]], axis=1
                ).astype(np.uint8)
            return pts, colors
        if has_list:
            raise UnsupportedFormatError(
                f"{path}: variable-size element {name!r} precedes vertex data"
            )
        offset += np.dtype(fields).itemsize * ecount
    raise ParseError("no vertex element", path=path)


def _load_off(path: Path) -> np.ndarray:
    text = path.read_text(encoding="utf-8", errors="replace")
    lines = text.splitlines()
    if not lines or not lines[0].strip().startswith("OFF"):
        raise ParseError("missing OFF magic", path=path, line=1)
    first = lines[0].strip()[3:].strip()
    cursor = 1
    counts = first.split() if first else None
    while counts is None and cursor < len(lines):
        stripped = lines[cursor].split("#", 1)[0].strip()
        cursor += 1
        if stripped:
            counts = stripped.split()
    if not counts or len(counts) < 3:
        raise ParseError("missing vertex/face/edge counts", path=path, line=cursor)
    try:
        n_vertices = int(counts[0])
    except ValueError:
        raise ParseError("malformed counts line", path=path, line=cursor) from None
    pts = []
    lineno = cursor
    while len(pts) < n_vertices and lineno < len(lines):
        stripped = lines[lineno].split("#", 1)[0].strip()
        lineno += 1
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) < 3:
            raise ParseError("expected 3 coordinates", path=path, line=lineno)
        try:
            pts.append([float(parts[0]), float(parts[1]), float(parts[2])])
        except ValueError:
            raise ParseError("malformed real number", path=path, line=lineno) from None
    if len(pts) < n_vertices:
        raise CountMismatchError(
            f"declared {n_vertices} vertices, found {len(pts)}", path=path
        )
    arr = np.asarray(pts, dtype=np.float64)
    _finite_or_raise(arr, path)
    return arr


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def save_xyz(points, path) -> None:
    pts = check_points(points)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for x, y, z in pts:
                fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def save_ply(points, path, binary: bool = False, colors=None) -> None:
    """Write a PLY file; ``binary`` selects little-endian float64 storage,
    which round-trips coordinates bit-exactly."""
    pts = check_points(points)
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {len(pts)}")
    header += ["property double x", "property double y", "property double z"]
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8)
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            if binary:
                if colors is None:
                    fh.write(pts.astype("<f8").tobytes())
                else:
                    dt = np.dtype(
                        [("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                         ("red", "u1"), ("green", "u1"), ("blue", "u1")]
                    )
                    rec = np.empty(len(pts), dtype=dt)
                    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
                    rec["red"], rec["green"], rec["blue"] = colors.T
                    fh.write(rec.tobytes())
            else:
                for i, (x, y, z) in enumerate(pts):
                    row = f"{float(x)!r} {float(y)!r} {float(z)!r}"
                    if colors is not None:
                        row += f" {colors[i, 0]} {colors[i, 1]} {colors[i, 2]}"
                    fh.write((row + "\n").encode("ascii"))
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


# Highlight palette: search point, 3 nearest, ranks 4-6, other hits, rest.
RED = (255, 0, 0)
BLUE = (0, 0, 255)
GREEN = (0, 255, 0)
ORANGE = (255, 165, 0)
GRAY = (180, 180, 180)


def export_highlight(cloud, q, knn_result, rn_result, path) -> None:
    """Write an ascii PLY coloring a query and its neighbors.

    ``q`` is either the id of a cloud point (colored red in place) or a
    free 3D point (appended as an extra red vertex).  The union of the two
    result lists, minus the query itself, is banded by rank: the 3 nearest
    blue, ranks 4-6 green, every other hit orange; all remaining cloud
    points are gray.
    """
    pts = check_points(cloud)
    m = len(pts)
    colors = np.tile(np.asarray(GRAY, dtype=np.uint8), (m, 1))

    q_id = None
    extra = None
    if np.isscalar(q) or isinstance(q, (int, np.integer)):
        q_id = int(q)
        if not (0 <= q_id < m):
            raise ValueError(f"query id {q_id} outside cloud of {m} points")
    else:
        extra = np.asarray(q, dtype=np.float64).reshape(1, 3)

    merged: dict[int, float] = {}
    for res in (knn_result, rn_result):
        if res is None:
            continue
        for pid, d2 in zip(res.ids.tolist(), res.sq_distances.tolist()):
            if pid != q_id:
                merged[pid] = d2
    ranked = sorted(merged.items(), key=lambda item: (item[1], item[0]))
    for rank, (pid, _) in enumerate(ranked, start=1):
        if rank <= 3:
            colors[pid] = BLUE
        elif rank <= 6:
            colors[pid] = GREEN
        else:
            colors[pid] = ORANGE

    if q_id is not None:
        colors[q_id] = RED
        out_pts, out_colors = pts, colors
    else:
        out_pts = np.vstack([pts, extra])
        out_colors = np.vstack([colors, np.asarray([RED], dtype=np.uint8)])
    save_ply(out_pts, path, binary=False, colors=out_colors)
