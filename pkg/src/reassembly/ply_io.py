"""Point-cloud file I/O.

PLY 1.0 is the canonical format: the reader accepts ASCII and
binary_little_endian files with float or double x, y, z properties on a
vertex element, skipping any other per-vertex properties. OBJ meshes are
supported read-only (vertex lines only, faces ignored). Writers emit valid
PLY; binary output is float32 by default and float64 on request, which
round-trips bit-exact. Point order is preserved exactly and nothing is
deduplicated here; stable indices are a pipeline-wide contract.

Rigid transforms are exchanged as a small JSON schema: a row-major
9-element rotation, a 3-element translation and an integer schema_version.
Values are written with shortest round-trip float formatting, so a
write/read cycle is exact.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .constants import ROTATION_ORTHONORMALITY_TOL, TRANSFORM_READ_ROTATION_TOL
from .errors import PlyError, TransformIOError
from .transforms import RigidTransform, _project_to_rotation

# Label value marking breaking-curve points in a labeled export.
CURVE_LABEL = -1

TRANSFORM_SCHEMA_VERSION = 1

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


@dataclass(frozen=True)
class LabeledCloudExport:
    """A cloud plus one integer label per point.

    Labels are region ids (>= 0) or CURVE_LABEL for breaking-curve points.
    """

    cloud: PointCloud
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64).reshape(-1).copy()
        if lab.shape[0] != len(self.cloud):
            raise ValueError(
                f"labels length {lab.shape[0]} does not match point count {len(self.cloud)}"
            )
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)


class _HeaderElement:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        self.properties: list[tuple[str, str]] = []  # (dtype code, name)
        self.has_list = False


def _parse_header(fh, path: str):
    """Parse the PLY header, returning (format, elements, header_end_offset, line_no)."""
    line_no = 0

    def next_line() -> str:
        nonlocal line_no
        raw = fh.readline()
        if not raw:
            raise PlyError(f"{path}: unexpected end of header at line {line_no}")
        line_no += 1
        return raw.decode("ascii", errors="replace").strip()

    magic = next_line()
    if magic != "ply":
        raise PlyError(f"{path}: line 1: not a PLY file (expected 'ply', got {magic!r})")

    fmt = None
    elements: list[_HeaderElement] = []
    while True:
        line = next_line()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment" or parts[0] == "obj_info":
            continue
        if parts[0] == "format":
            if len(parts) != 3:
                raise PlyError(f"{path}: line {line_no}: malformed format line {line!r}")
            if parts[2] != "1.0":
                raise PlyError(f"{path}: line {line_no}: unsupported PLY version {parts[2]}")
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise PlyError(f"{path}: line {line_no}: unsupported format {parts[1]!r}")
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PlyError(f"{path}: line {line_no}: malformed element line {line!r}")
            try:
                count = int(parts[2])
            except ValueError:
                raise PlyError(f"{path}: line {line_no}: bad element count {parts[2]!r}") from None
            elements.append(_HeaderElement(parts[1], count))
        elif parts[0] == "property":
            if not elements:
                raise PlyError(f"{path}: line {line_no}: property before any element")
            if parts[1] == "list":
                elements[-1].has_list = True
                continue
            if len(parts) != 3 or parts[1] not in _PLY_DTYPES:
                raise PlyError(f"{path}: line {line_no}: unsupported property {line!r}")
            elements[-1].properties.append((_PLY_DTYPES[parts[1]], parts[2]))
        else:
            raise PlyError(f"{path}: line {line_no}: unrecognized header line {line!r}")

    if fmt is None:
        raise PlyError(f"{path}: missing 'format' line in header")
    return fmt, elements, fh.tell(), line_no


def read_point_cloud(path) -> PointCloud:
    """Read a PLY (or OBJ) file into a PointCloud.

    Non-positional vertex properties are ignored. Errors report the file
    line (ASCII) or byte offset (binary) where parsing failed.
    """
    p = Path(path)
    if not p.exists():
        raise PlyError(f"{p}: file not found")
    if p.suffix.lower() == ".obj":
        return _read_obj(p)

    with open(p, "rb") as fh:
        fmt, elements, body_start, header_lines = _parse_header(fh, str(p))

        vertex = next((e for e in elements if e.name == "vertex"), None)
        if vertex is None:
            raise PlyError(f"{p}: no vertex element in header")
        if vertex.count == 0:
            raise PlyError(f"{p}: empty cloud (element vertex 0)")
        names = [name for _, name in vertex.properties]
        if not {"x", "y", "z"} <= set(names):
            raise PlyError(f"{p}: vertex element lacks x, y, z properties")

        if fmt == "ascii":
            return _read_ascii_body(fh, p, elements, vertex, header_lines)
        return _read_binary_body(fh, p, elements, vertex, body_start)


def _read_ascii_body(fh, path: Path, elements, vertex, header_lines: int) -> PointCloud:
    line_no = header_lines
    cols = {name: i for i, (_, name) in enumerate(vertex.properties)}
    pts = np.empty((vertex.count, 3), dtype=np.float64)
    for element in elements:
        if element.name != "vertex":
            for _ in range(element.count):  # one line per instance
                fh.readline()
                line_no += 1
            continue
        for i in range(vertex.count):
            raw = fh.readline()
            line_no += 1
            if not raw:
                raise PlyError(
                    f"{path}: line {line_no}: vertex count mismatch "
                    f"(expected {vertex.count} vertices, file ended at {i})"
                )
            fields = raw.split()
            try:
                pts[i, 0] = float(fields[cols["x"]])
                pts[i, 1] = float(fields[cols["y"]])
                pts[i, 2] = float(fields[cols["z"]])
            except (IndexError, ValueError):
                raise PlyError(
                    f"{path}: line {line_no}: malformed vertex line {raw!r}"
                ) from None
        break  # positions read; trailing elements are irrelevant
    return PointCloud(pts, source_id=path.stem)


def _read_binary_body(fh, path: Path, elements, vertex, body_start: int) -> PointCloud:
    offset = body_start
    for element in elements:
        if element.name == "vertex":
            break
        if element.has_list:
            raise PlyError(
                f"{path}: byte {offset}: element {element.name!r} with list "
                f"properties precedes the vertex element; cannot skip it in binary"
            )
        itemsize = np.dtype([(f"f{i}", "<" + c) for i, (c, _) in enumerate(element.properties)]).itemsize
        fh.seek(element.count * itemsize, 1)
        offset += element.count * itemsize

    dtype = np.dtype([(name, "<" + code) for code, name in vertex.properties])
    need = dtype.itemsize * vertex.count
    blob = fh.read(need)
    if len(blob) < need:
        raise PlyError(
            f"{path}: byte {offset + len(blob)}: vertex count mismatch "
            f"(expected {need} bytes of vertex data, got {len(blob)})"
        )
    rec = np.frombuffer(blob, dtype=dtype, count=vertex.count)
    pts = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    return PointCloud(pts, source_id=path.stem)


def _read_obj(path: Path) -> PointCloud:
    pts = []
    with open(path, "r", errors="replace") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0] != "v":
                continue
            try:
                pts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except (IndexError, ValueError):
                raise PlyError(f"{path}: line {line_no}: malformed vertex line {line!r}") from None
    if not pts:
        raise PlyError(f"{path}: empty cloud (no vertex lines)")
    return PointCloud(np.asarray(pts), source_id=path.stem)


def _fmt_float(v: float) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(v))


def write_point_cloud(c: PointCloud, path, format: str = "binary", double_precision: bool = False) -> None:
    """Write a cloud as PLY. Binary is little-endian float32, or float64
    with double_precision=True (bit-exact round trip)."""
    if format not in ("ascii", "binary"):
        raise ValueError(f"format must be 'ascii' or 'binary', got {format!r}")
    if len(c) == 0:  # unreachable through PointCloud, kept for raw callers
        raise PlyError("refusing to write an empty cloud")
    p = Path(path)
    scalar = "double" if (double_precision or format == "ascii") else "float"
    header = [
        "ply",
        "format ascii 1.0" if format == "ascii" else "format binary_little_endian 1.0",
        f"element vertex {len(c)}",
        f"property {scalar} x",
        f"property {scalar} y",
        f"property {scalar} z",
        "end_header",
    ]
    with open(p, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if format == "ascii":
            lines = [
                f"{_fmt_float(x)} {_fmt_float(y)} {_fmt_float(z)}"
                for x, y, z in c.points
            ]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
        else:
            dt = "<f8" if double_precision else "<f4"
            fh.write(np.ascontiguousarray(c.points, dtype=dt).tobytes())


def region_color(label: int) -> tuple[int, int, int]:
    """Deterministic palette color for a region id; never pure red.

    Hues step around the wheel by the golden ratio; saturation below 1
    guarantees the (255, 0, 0) curve color cannot be produced.
    """
    hue = (0.61803398874989485 * (label + 1)) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.72, 0.95)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def write_labeled_cloud(e: LabeledCloudExport, path) -> None:
    """Write an ASCII PLY with per-vertex colors encoding point labels.

    Breaking-curve points (CURVE_LABEL) are pure red; region ids map
    through the deterministic palette.
    """
    p = Path(path)
    n = len(e.cloud)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    lines = []
    for (x, y, z), label in zip(e.cloud.points, e.labels):
        if label == CURVE_LABEL:
            r, g, b = 255, 0, 0
        else:
            r, g, b = region_color(int(label))
        lines.append(f"{_fmt_float(x)} {_fmt_float(y)} {_fmt_float(z)} {r} {g} {b}")
    with open(p, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(("\n".join(lines) + "\n").encode("ascii"))


def write_transform(t: RigidTransform, path) -> None:
    payload = {
        "schema_version": TRANSFORM_SCHEMA_VERSION,
        "rotation": [float(v) for v in t.rotation.reshape(9)],
        "translation": [float(v) for v in t.translation],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_transform(path) -> RigidTransform:
    p = Path(path)
    if not p.exists():
        raise TransformIOError(f"{p}: file not found")
    try:
        with open(p) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TransformIOError(f"{p}: malformed JSON: {exc}") from None
    try:
        rotation = np.asarray(payload["rotation"], dtype=np.float64).reshape(3, 3)
        translation = np.asarray(payload["translation"], dtype=np.float64).reshape(3)
    except (KeyError, TypeError, ValueError) as exc:
        raise TransformIOError(f"{p}: bad transform fields: {exc}") from None

    det = float(np.linalg.det(rotation))
    if det < 0.0:
        raise TransformIOError(f"{p}: improper rotation (det = {det:.6g})")
    defect = float(np.abs(rotation.T @ rotation - np.eye(3)).max())
    if defect > TRANSFORM_READ_ROTATION_TOL or abs(det - 1.0) > TRANSFORM_READ_ROTATION_TOL:
        raise TransformIOError(
            f"{p}: rotation is not orthonormal (defect {defect:.3e}, det {det:.6g})"
        )
    if defect > ROTATION_ORTHONORMALITY_TOL or abs(det - 1.0) > ROTATION_ORTHONORMALITY_TOL:
        rotation = _project_to_rotation(rotation)
    return RigidTransform(rotation, translation)
