import io
import struct

import numpy as np
import pytest

from fluidcc.errors import StlError
from fluidcc.mesh import SweepProfile, TriMesh, sweep_tube, watertight_check, weld
from fluidcc.stl import (
    face_normals,
    read_stl_binary,
    stl_bytes,
    stl_size,
    write_stl_ascii,
    write_stl_binary,
)

TUBE = sweep_tube([[0, 0, 0], [10, 0, 0]], SweepProfile(16, 0.75, 1.25))


def test_tube_file_size(tmp_path):
    path = tmp_path / "t.stl"
    n = write_stl_binary([TUBE], path)
    assert n == path.stat().st_size == 84 + 128 * 50 == 6484 == stl_size(128)


def test_layout_by_hand():
    data = stl_bytes([TUBE])
    assert data[:80].startswith(b"fluidcc ") and len(data[:80]) == 80
    assert struct.unpack_from("<I", data, 80)[0] == 128
    # first record: normal then three vertices then a zero attribute
    rec = struct.unpack_from("<12fH", data, 84)
    tri = TUBE.vertices[TUBE.triangles[0]].astype(np.float32)
    assert np.array_equal(np.asarray(rec[3:12], np.float32), tri.reshape(-1))
    n = np.cross(tri[1].astype(float) - tri[0], tri[2].astype(float) - tri[0])
    assert np.allclose(rec[:3], n / np.linalg.norm(n), atol=1e-6)
    assert rec[12] == 0


def test_round_trip_bits(tmp_path):
    buf = io.BytesIO()
    write_stl_binary([TUBE], buf)
    back = read_stl_binary(buf.getvalue())
    assert len(back) == len(TUBE)
    expect = TUBE.vertices[TUBE.triangles].astype(np.float32)
    got = back.vertices.reshape(-1, 3, 3).astype(np.float32)
    assert expect.tobytes() == got.tobytes()
    path = tmp_path / "r.stl"
    write_stl_binary([TUBE, TUBE], path)
    assert len(read_stl_binary(path)) == 256


def test_round_trip_keeps_watertightness():
    back = weld(read_stl_binary(stl_bytes([TUBE])))
    assert watertight_check(back).ok


def test_normals_follow_winding():
    back = read_stl_binary(stl_bytes([TUBE]))
    assert np.allclose(back.normals, face_normals(back.vertices.reshape(-1, 3, 3)), atol=1e-6)


def test_empty(tmp_path):
    path = tmp_path / "e.stl"
    assert write_stl_binary([], path) == 84
    back = read_stl_binary(path)
    assert len(back) == 0


def test_truncated():
    data = stl_bytes([TUBE])
    with pytest.raises(StlError, match="truncated"):
        read_stl_binary(data[:50])
    with pytest.raises(StlError, match="declares 128"):
        read_stl_binary(data[:-10])


def test_count_mismatch():
    data = bytearray(stl_bytes([TUBE]))
    data[80:84] = struct.pack("<I", 129)
    with pytest.raises(StlError):
        read_stl_binary(bytes(data))


def test_degenerate_normal_is_zero():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    assert read_stl_binary(stl_bytes([m])).normals.tolist() == [[0.0, 0.0, 0.0]]


def test_ascii(tmp_path):
    path = tmp_path / "a.stl"
    write_stl_ascii([TUBE], path, "tube")
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0] == "solid tube" and lines[-1] == "endsolid tube"
    assert text.count("facet normal") == 128
    assert text.count("vertex") == 384
