"""Component library: gate types, their logical ports, and physical footprints.

The library is stored as JSON (see ``docs/library_format.md``).  A gate type
names a footprint; several gate types may share one footprint, as the
AND/OR/INHIBIT configurations of the valve do.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from typing import Iterator, Mapping

from .errors import LibraryError

BEHAVIORS = ("NOT", "AND", "OR", "INHIBIT", "SOURCE", "PROBE")

# (number of inputs, number of outputs)
ARITY = {
    "NOT": (1, 1),
    "AND": (2, 1),
    "OR": (2, 1),
    "INHIBIT": (2, 1),
    "SOURCE": (0, 1),
    "PROBE": (1, 0),
}

LIBRARY_ENV = "FLUIDCC_LIBRARY"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PortSpec:
    name: str
    offset: tuple[float, float, float]
    direction: tuple[float, float, float]
    diameter: float


@dataclass(frozen=True)
class Footprint:
    """Axis-aligned outline (size from the local origin) plus physical ports."""

    size: tuple[float, float, float]
    ports: tuple[PortSpec, ...]

    def port(self, name: str) -> PortSpec:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    def placed_box(self, x: float, y: float, rotation: int = 0):
        """World box ``(xmin, ymin, zmin, xmax, ymax, zmax)`` for a placement.

        ``(x, y)`` is the minimum corner of the rotated outline; the base sits on
        the bed at z = 0.
        """
        sx, sy, sz = self.size
        if rotation % 180:
            sx, sy = sy, sx
        return (x, y, 0.0, x + sx, y + sy, sz)

    def placed_port(self, name: str, x: float, y: float, rotation: int = 0):
        """Return ``(position, direction, diameter)`` of a port in world mm."""
        p = self.port(name)
        sx, sy, _ = self.size
        rx, ry = p.offset[0] - sx / 2, p.offset[1] - sy / 2
        dx, dy = p.direction[0], p.direction[1]
        rx, ry = _rot90(rx, ry, rotation)
        dx, dy = _rot90(dx, dy, rotation)
        bx0, by0, _, bx1, by1, _ = self.placed_box(x, y, rotation)
        cx, cy = (bx0 + bx1) / 2, (by0 + by1) / 2
        pos = (cx + rx, cy + ry, float(p.offset[2]))
        return pos, (dx, dy, float(p.direction[2])), p.diameter


def _rot90(x: float, y: float, rotation: int):
    # exact quarter turns, counter-clockwise seen from above
    r = (rotation // 90) % 4
    for _ in range(r):
        x, y = -y, x
    return float(x), float(y)


@dataclass(frozen=True)
class GateType:
    name: str
    logical_ports: tuple[tuple[str, str], ...]
    behavior: str
    footprint_ref: str

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(n for n, d in self.logical_ports if d == "in")

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(n for n, d in self.logical_ports if d == "out")

    def direction(self, port: str) -> str | None:
        for n, d in self.logical_ports:
            if n == port:
                return d
        return None


class ComponentLibrary(Mapping):
    """Read-only mapping of gate-type name to ``(GateType, Footprint)``."""

    def __init__(self, gates: Mapping[str, GateType], footprints: Mapping[str, Footprint]):
        self._gates = dict(gates)
        self._footprints = dict(footprints)

    def __getitem__(self, name: str):
        g = self._gates[name]
        return g, self._footprints[g.footprint_ref]

    def __iter__(self) -> Iterator[str]:
        return iter(self._gates)

    def __len__(self) -> int:
        return len(self._gates)

    def __eq__(self, other):
        if not isinstance(other, ComponentLibrary):
            return NotImplemented
        return self._gates == other._gates and self._footprints == other._footprints

    def __hash__(self):
        return hash(tuple(sorted(self._gates)))

    def __repr__(self):
        return f"ComponentLibrary({sorted(self._gates)})"

    def gate_type(self, name: str) -> GateType:
        return self._gates[name]

    def footprint(self, name: str) -> Footprint:
        """Footprint of a gate type (by gate-type name)."""
        return self._footprints[self._gates[name].footprint_ref]

    @property
    def footprints(self) -> dict[str, Footprint]:
        return dict(self._footprints)


def _vec3(value, what: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise LibraryError(f"{what}: expected a list of 3 numbers, got {value!r}")
    try:
        return tuple(float(v) for v in value)  # type: ignore[return-value]
    except (TypeError, ValueError):
        raise LibraryError(f"{what}: expected numbers, got {value!r}") from None


def _check_footprint(name: str, fp: Footprint) -> None:
    if any(s <= 0 for s in fp.size):
        raise LibraryError(f"footprint {name}: outline extents must be positive")
    seen = set()
    for p in fp.ports:
        if p.name in seen:
            raise LibraryError(f"footprint {name}: duplicate port {p.name!r}")
        seen.add(p.name)
        if not p.diameter > 0:
            raise LibraryError(f"footprint {name}: port {p.name!r} diameter must be > 0")
        norm = math.sqrt(sum(c * c for c in p.direction))
        if abs(norm - 1.0) > 1e-9:
            raise LibraryError(f"footprint {name}: port {p.name!r} direction is not a unit vector")
        inside = all(0.0 < c < s for c, s in zip(p.offset, fp.size))
        if inside:
            raise LibraryError(f"footprint {name}: port {p.name!r} lies inside the outline")


def _check_gate(g: GateType, footprints: Mapping[str, Footprint]) -> None:
    if g.behavior not in BEHAVIORS:
        raise LibraryError(f"gate {g.name}: unknown behavior {g.behavior!r}")
    names = [n for n, _ in g.logical_ports]
    if len(set(names)) != len(names):
        raise LibraryError(f"gate {g.name}: port names must be unique")
    for n, d in g.logical_ports:
        if d not in ("in", "out"):
            raise LibraryError(f"gate {g.name}: port {n!r} has direction {d!r}, expected in/out")
    n_in, n_out = ARITY[g.behavior]
    if len(g.inputs) != n_in or len(g.outputs) != n_out:
        raise LibraryError(
            f"gate {g.name}: {g.behavior} needs {n_in} input(s) and {n_out} output(s), "
            f"got {len(g.inputs)} and {len(g.outputs)}"
        )
    if g.footprint_ref not in footprints:
        raise LibraryError(f"gate {g.name}: unknown footprint {g.footprint_ref!r}")
    physical = {p.name for p in footprints[g.footprint_ref].ports}
    for n in names:
        if n not in physical:
            raise LibraryError(f"gate {g.name}: logical port {n!r} has no physical port")


def load_library(text: str) -> ComponentLibrary:
    """Parse a library from JSON text, checking every type and footprint invariant."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError(f"malformed library: {exc}") from None
    if not isinstance(doc, dict) or "gates" not in doc or "footprints" not in doc:
        raise LibraryError("malformed library: expected top-level 'gates' and 'footprints'")

    footprints = {}
    for name, entry in doc["footprints"].items():
        try:
            size = _vec3(entry["outline"], f"footprint {name} outline")
            ports = tuple(
                PortSpec(
                    name=str(p["name"]),
                    offset=_vec3(p["offset"], f"footprint {name} port offset"),
                    direction=_vec3(p["direction"], f"footprint {name} port direction"),
                    diameter=float(p["diameter"]),
                )
                for p in entry["ports"]
            )
        except (KeyError, TypeError) as exc:
            raise LibraryError(f"malformed footprint {name}: missing {exc}") from None
        fp = Footprint(size=size, ports=ports)
        _check_footprint(name, fp)
        footprints[name] = fp

    gates = {}
    for name, entry in doc["gates"].items():
        try:
            ports = tuple((str(n), str(d)) for n, d in entry["ports"])
            g = GateType(
                name=name,
                logical_ports=ports,
                behavior=str(entry["behavior"]),
                footprint_ref=str(entry["footprint"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LibraryError(f"malformed gate {name}: {exc}") from None
        _check_gate(g, footprints)
        gates[name] = g
    return ComponentLibrary(gates, footprints)


def dump_library(lib: ComponentLibrary) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "footprints": {
            name: {
                "outline": list(fp.size),
                "ports": [
                    {
                        "name": p.name,
                        "offset": list(p.offset),
                        "direction": list(p.direction),
                        "diameter": p.diameter,
                    }
                    for p in fp.ports
                ],
            }
            for name, fp in lib.footprints.items()
        },
        "gates": {
            name: {
                "behavior": lib.gate_type(name).behavior,
                "footprint": lib.gate_type(name).footprint_ref,
                "ports": [list(p) for p in lib.gate_type(name).logical_ports],
            }
            for name in lib
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def default_library_text() -> str:
    return resources.files("fluidcc").joinpath("data/default_library.json").read_text("utf-8")


def default_library() -> ComponentLibrary:
    """The shipped library, or the file named by ``$FLUIDCC_LIBRARY`` if set."""
    path = os.environ.get(LIBRARY_ENV)
    if path:
        with open(path, encoding="utf-8") as fh:
            return load_library(fh.read())
    return load_library(default_library_text())
