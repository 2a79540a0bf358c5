"""STL reading and writing.

Binary layout: 80-byte header, little-endian uint32 triangle count, then 50
bytes per triangle (normal and three vertices as little-endian float32, plus a
zero uint16 attribute).
"""

from __future__ import annotations

import io
import os

import numpy as np

from . import __version__
from .errors import StlError
from .mesh import TriMesh

HEADER_SIZE = 80
RECORD = np.dtype([("normal", "<f4", (3,)), ("vertices", "<f4", (3, 3)), ("attr", "<u2")])
assert RECORD.itemsize == 50


def stl_size(triangles: int) -> int:
    return HEADER_SIZE + 4 + RECORD.itemsize * triangles


def _header() -> bytes:
    text = f"fluidcc {__version__} binary STL".encode("ascii")
    return text.ljust(HEADER_SIZE, b" ")


def _soup(meshes) -> np.ndarray:
    parts = [m.vertices[m.triangles] for m in meshes if len(m)]
    return np.concatenate(parts) if parts else np.zeros((0, 3, 3))


def face_normals(tris: np.ndarray) -> np.ndarray:
    """Unit normals from winding (zero for degenerate triangles)."""
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    length = np.linalg.norm(n, axis=1)
    out = np.zeros_like(n)
    ok = length > 0
    out[ok] = n[ok] / length[ok, None]
    return out


def _open(sink, mode):
    if isinstance(sink, (str, os.PathLike)):
        return open(sink, mode), True
    return sink, False


def stl_bytes(meshes) -> bytes:
    tris = _soup(meshes)
    rec = np.zeros(len(tris), dtype=RECORD)
    rec["vertices"] = tris
    rec["normal"] = face_normals(tris)
    return _header() + np.uint32(len(tris)).astype("<u4").tobytes() + rec.tobytes()


def write_stl_binary(meshes, sink) -> int:
    """Write all meshes in order to ``sink`` (path or binary file); returns bytes written."""
    data = stl_bytes(meshes)
    f, owned = _open(sink, "wb")
    try:
        f.write(data)
    finally:
        if owned:
            f.close()
    return len(data)


def read_stl_binary(source) -> TriMesh:
    """Read a binary STL as an unwelded triangle soup (normals kept on ``.normals``)."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        f, owned = _open(source, "rb")
        try:
            data = f.read()
        finally:
            if owned:
                f.close()
    if len(data) < HEADER_SIZE + 4:
        raise StlError(f"truncated STL: {len(data)} bytes, header needs {HEADER_SIZE + 4}")
    count = int(np.frombuffer(data, dtype="<u4", count=1, offset=HEADER_SIZE)[0])
    if len(data) != stl_size(count):
        raise StlError(f"STL declares {count} triangles ({stl_size(count)} bytes) but file has {len(data)} bytes")
    rec = np.frombuffer(data, dtype=RECORD, count=count, offset=HEADER_SIZE + 4)
    verts = rec["vertices"].astype(np.float64).reshape(-1, 3)
    mesh = TriMesh(verts, np.arange(3 * count).reshape(-1, 3), "stl")
    mesh.normals = rec["normal"].astype(np.float64)
    return mesh


def write_stl_ascii(meshes, sink, name: str = "fluidcc") -> None:
    tris = _soup(meshes).astype(np.float32)
    normals = face_normals(tris.astype(np.float64)).astype(np.float32)
    buf = io.StringIO()
    buf.write(f"solid {name}\n")
    for n, t in zip(normals, tris):
        buf.write(f"  facet normal {n[0]:.7e} {n[1]:.7e} {n[2]:.7e}\n    outer loop\n")
        for v in t:
            buf.write(f"      vertex {v[0]:.7e} {v[1]:.7e} {v[2]:.7e}\n")
        buf.write("    endloop\n  endfacet\n")
    buf.write(f"endsolid {name}\n")
    f, owned = _open(sink, "w")
    try:
        f.write(buf.getvalue())
    finally:
        if owned:
            f.close()
