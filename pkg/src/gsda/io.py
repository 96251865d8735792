"""Reading and writing point clouds as .xyz, .off, or ascii .ply files.

All three formats store coordinates only; labels travel in dataset
manifests, not in geometry files.  Writers emit 12 significant digits,
enough to round-trip float64 for every value this package produces.
"""

from __future__ import annotations

import os

import numpy as np

from .cloud import PointCloud
from .errors import EmptyCloudError, ParseError, ValidationError

_SUFFIX_FORMATS = {".xyz": "xyz", ".off": "off", ".ply": "ply"}


def _format_for(path: str, fmt: str | None) -> str:
    if fmt is None:
        fmt = _SUFFIX_FORMATS.get(os.path.splitext(path)[1].lower())
        if fmt is None:
            raise ValidationError(
                "cannot infer format from %r; pass fmt explicitly" % path
            )
    fmt = fmt.lower()
    if fmt not in ("xyz", "off", "ply"):
        raise ValidationError("unknown point cloud format %r" % fmt)
    return fmt


def _parse_floats(line: str, path: str, lineno: int) -> list[float]:
    parts = line.split()
    if len(parts) < 3:
        raise ParseError(
            "%s:%d: expected 3 coordinates, got %d" % (path, lineno, len(parts))
        )
    try:
        vals = [float(p) for p in parts[:3]]
    except ValueError as exc:
        raise ParseError("%s:%d: %s" % (path, lineno, exc)) from None
    if not all(np.isfinite(vals)):
        raise ParseError("%s:%d: non-finite coordinate" % (path, lineno))
    return vals


def _load_xyz(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            rows.append(_parse_floats(stripped, path, lineno))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _load_off(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    # strip comments / blanks, keep line numbers for messages
    body = [
        (i + 1, ln.strip())
        for i, ln in enumerate(lines)
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not body:
        raise ParseError("%s: empty OFF file" % path)
    pos = 0
    lineno, first = body[pos]
    if first.upper().startswith("OFF"):
        rest = first[3:].strip()
        pos += 1
        if not rest:
            if pos >= len(body):
                raise ParseError("%s: missing OFF counts line" % path)
            lineno, rest = body[pos]
            pos += 1
        counts = rest.split()
    else:
        raise ParseError("%s:%d: missing OFF header" % (path, lineno))
    try:
        n_vertices = int(counts[0])
    except (IndexError, ValueError):
        raise ParseError("%s:%d: bad OFF counts line" % (path, lineno)) from None
    if n_vertices < 0:
        raise ParseError("%s: negative vertex count" % path)
    if len(body) - pos < n_vertices:
        raise ParseError(
            "%s: header announces %d vertices but only %d data lines follow"
            % (path, n_vertices, len(body) - pos)
        )
    rows = []
    for lineno, line in body[pos : pos + n_vertices]:
        rows.append(_parse_floats(line, path, lineno))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _load_ply(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("%s: not a PLY file" % path)
    n_vertices = None
    props: list[str] = []
    in_vertex = False
    data_start = None
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("comment"):
            continue
        if line.startswith("format"):
            if "ascii" not in line:
                raise ParseError("%s: only ascii PLY is supported" % path)
        elif line.startswith("element"):
            parts = line.split()
            in_vertex = len(parts) >= 3 and parts[1] == "vertex"
            if in_vertex:
                try:
                    n_vertices = int(parts[2])
                except ValueError:
                    raise ParseError(
                        "%s:%d: bad vertex count" % (path, i)
                    ) from None
            elif n_vertices is not None and parts[1] != "vertex":
                # a later element (faces etc.) ends the vertex property list
                in_vertex = False
        elif line.startswith("property") and in_vertex:
            props.append(line.split()[-1])
        elif line == "end_header":
            data_start = i
            break
    if data_start is None or n_vertices is None:
        raise ParseError("%s: malformed PLY header" % path)
    try:
        ix, iy, iz = props.index("x"), props.index("y"), props.index("z")
    except ValueError:
        raise ParseError("%s: vertex element lacks x/y/z properties" % path) from None
    data = [
        (j, ln.strip())
        for j, ln in enumerate(lines[data_start:], start=data_start + 1)
        if ln.strip()
    ]
    if len(data) < n_vertices:
        raise ParseError(
            "%s: header announces %d vertices but only %d data lines follow"
            % (path, n_vertices, len(data))
        )
    rows = []
    for lineno, line in data[:n_vertices]:
        parts = line.split()
        if len(parts) < len(props):
            raise ParseError(
                "%s:%d: expected %d fields, got %d"
                % (path, lineno, len(props), len(parts))
            )
        try:
            vals = [float(parts[ix]), float(parts[iy]), float(parts[iz])]
        except ValueError as exc:
            raise ParseError("%s:%d: %s" % (path, lineno, exc)) from None
        if not all(np.isfinite(vals)):
            raise ParseError("%s:%d: non-finite coordinate" % (path, lineno))
        rows.append(vals)
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def load_point_cloud(path: str, fmt: str | None = None) -> PointCloud:
    """Load a cloud; the format is inferred from the suffix unless given."""
    fmt = _format_for(path, fmt)
    pts = {"xyz": _load_xyz, "off": _load_off, "ply": _load_ply}[fmt](path)
    if pts.shape[0] == 0:
        raise EmptyCloudError("%s: file contains no points" % path)
    name = os.path.splitext(os.path.basename(path))[0]
    return PointCloud(points=pts, name=name)


def _coord_lines(pts: np.ndarray) -> list[str]:
    return ["%.12g %.12g %.12g" % (x, y, z) for x, y, z in pts]


def save_point_cloud(cloud: PointCloud, path: str, fmt: str | None = None) -> None:
    """Write a cloud; the format is inferred from the suffix unless given."""
    fmt = _format_for(path, fmt)
    pts = cloud.points
    lines = _coord_lines(pts)
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "xyz":
            fh.write("\n".join(lines) + "\n")
        elif fmt == "off":
            fh.write("OFF\n%d 0 0\n" % len(pts))
            fh.write("\n".join(lines) + "\n")
        else:
            fh.write(
                "ply\nformat ascii 1.0\nelement vertex %d\n"
                "property float64 x\nproperty float64 y\nproperty float64 z\n"
                "end_header\n" % len(pts)
            )
            fh.write("\n".join(lines) + "\n")
