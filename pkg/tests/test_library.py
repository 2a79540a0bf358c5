import json

import pytest
from hypothesis import given, strategies as st

from fluidcc.errors import LibraryError
from fluidcc.library import (ARITY, LIBRARY_ENV, default_library, default_library_text, dump_library,
                             load_library)


def _doc():
    return json.loads(default_library_text())


def test_default_library_gate_set():
    assert set(default_library()) == {"NOT", "AND", "OR", "INHIBIT", "SOURCE", "PROBE"}


@pytest.mark.parametrize("name", ["NOT", "AND", "OR", "INHIBIT", "SOURCE", "PROBE"])
def test_arity_matches_boolean_function(name):
    gt, fp = default_library()[name]
    assert (len(gt.inputs), len(gt.outputs)) == ARITY[gt.behavior]
    physical = {p.name for p in fp.ports}
    assert set(gt.inputs + gt.outputs) <= physical


def test_round_trip_identity():
    lib = default_library()
    again = load_library(dump_library(lib))
    assert again == lib
    assert dump_library(again) == dump_library(lib)


def test_and_without_output_is_rejected():
    doc = _doc()
    doc["gates"]["AND"]["ports"] = [["a", "in"], ["b", "in"]]
    with pytest.raises(LibraryError, match="AND needs 2 input"):
        load_library(json.dumps(doc))


def test_port_inside_outline_is_rejected():
    doc = _doc()
    doc["footprints"]["valve30"]["ports"][0]["offset"] = [5, 15, 10]
    with pytest.raises(LibraryError, match="inside the outline"):
        load_library(json.dumps(doc))


def test_logical_port_without_physical_port():
    doc = _doc()
    doc["gates"]["NOT"]["ports"] = [["in", "in"], ["y", "out"]]
    with pytest.raises(LibraryError, match="no physical port"):
        load_library(json.dumps(doc))


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["footprints"]["valve30"]["ports"][0].update(diameter=0), "diameter"),
    (lambda d: d["footprints"]["valve30"]["ports"][0].update(direction=[1, 1, 0]), "unit vector"),
    (lambda d: d["gates"]["OR"].update(behavior="XNOR"), "unknown behavior"),
    (lambda d: d["gates"]["OR"].update(footprint="nope"), "unknown footprint"),
])
def test_malformed_entries(mutate, msg):
    doc = _doc()
    mutate(doc)
    with pytest.raises(LibraryError, match=msg):
        load_library(json.dumps(doc))


def test_not_json():
    with pytest.raises(LibraryError):
        load_library("gates: NOT")


def test_env_override(tmp_path, monkeypatch):
    doc = _doc()
    doc["footprints"]["valve30"]["outline"] = [40, 40, 20]
    for p in doc["footprints"]["valve30"]["ports"]:
        p["offset"] = [c * 40 / 30 if i < 2 else c for i, c in enumerate(p["offset"])]
    f = tmp_path / "lib.json"
    f.write_text(json.dumps(doc))
    monkeypatch.setenv(LIBRARY_ENV, str(f))
    assert default_library().footprint("AND").size == (40.0, 40.0, 20.0)


@given(st.sampled_from(["NOT", "AND", "OR", "INHIBIT", "SOURCE", "PROBE"]),
       st.sampled_from([0, 90, 180, 270]),
       st.floats(0, 200), st.floats(0, 200))
def test_rotated_ports_stay_on_box_surface(gate, rot, x, y):
    fp = default_library().footprint(gate)
    box = fp.placed_box(x, y, rot)
    for port in fp.ports:
        pos, direction, diameter = fp.placed_port(port.name, x, y, rot)
        assert diameter == port.diameter
        assert all(box[a] - 1e-6 <= pos[a] <= box[a + 3] + 1e-6 for a in range(3))
        # stepping outward along the direction leaves the box
        out = [pos[a] + direction[a] for a in range(3)]
        assert not all(box[a] < out[a] < box[a + 3] for a in range(3))
