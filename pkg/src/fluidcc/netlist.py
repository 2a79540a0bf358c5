"""Netlist data model and the line-oriented ``.fcc`` circuit language.

A circuit file is a sequence of statements, one per line::

    circuit half_adder
    param alpha 0.5
    gate X1 INHIBIT at 20 40 0
    input A at 3 60 9
    output S at 240 60 9
    connect A -> X1.a
    connect X1.out -> S

``#`` starts a comment.  Connection order is kept exactly as written because
routing is order dependent.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import Diagnostic, NetlistError, PlacementError
from .library import ComponentLibrary, default_library

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class CircuitParams:
    bed: tuple[float, float, float] = (250.0, 210.0, 30.0)
    grid_pitch: float = 3.0
    tube_inner_d: float = 1.5
    tube_outer_d: float = 2.5
    clearance: float = 0.5
    alpha: float = 0.5
    beta: float = 0.5
    gate_delay: float = 0.02
    # per gate type; 0 makes a gate an ideal (zero-delay) switch
    type_delays: tuple[tuple[str, float], ...] = ()

    def delay_for(self, type_name: str) -> float:
        for name, d in self.type_delays:
            if name == type_name:
                return d
        return self.gate_delay


SCALAR_PARAMS = ("grid_pitch", "tube_inner_d", "tube_outer_d", "clearance", "alpha", "beta", "gate_delay")
TUBE_OVERRIDES = ("tube_inner_d", "tube_outer_d")


@dataclass(frozen=True)
class Placement:
    x: float
    y: float
    rotation: int = 0


@dataclass(frozen=True)
class GateInstance:
    name: str
    type_name: str
    placement: Placement | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExternalTerminal:
    name: str
    kind: str  # "input" | "output"
    position: tuple[float, float, float]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, order=True)
class Terminal:
    """``gate.port`` when ``port`` is set, otherwise a named external terminal."""

    name: str
    port: str | None = None

    @property
    def is_external(self) -> bool:
        return self.port is None

    def __str__(self) -> str:
        return self.name if self.port is None else f"{self.name}.{self.port}"


@dataclass(frozen=True)
class Connection:
    start: Terminal
    end: Terminal
    overrides: tuple[tuple[str, float], ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.start} -> {self.end}"


@dataclass(frozen=True)
class Netlist:
    name: str
    params: CircuitParams
    gates: tuple[GateInstance, ...]
    connections: tuple[Connection, ...]
    inputs: tuple[ExternalTerminal, ...] = ()
    outputs: tuple[ExternalTerminal, ...] = ()
    library: ComponentLibrary | None = field(default=None, compare=False, repr=False)

    def gate(self, name: str) -> GateInstance:
        for g in self.gates:
            if g.name == name:
                return g
        raise KeyError(name)

    def external(self, name: str) -> ExternalTerminal:
        for t in self.inputs + self.outputs:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def is_placed(self) -> bool:
        return all(g.placement is not None for g in self.gates)

    def with_placement(self, placement: dict[str, Placement]) -> "Netlist":
        gates = tuple(replace(g, placement=placement.get(g.name, g.placement)) for g in self.gates)
        return replace(self, gates=gates)


# --------------------------------------------------------------------------- parsing


class _Parser:
    def __init__(self, text: str, library: ComponentLibrary):
        self.text = text
        self.lib = library
        self.diags: list[Diagnostic] = []
        self.name: str | None = None
        self.params: dict = {}
        self.param_lines: dict[str, tuple[int, int]] = {}
        self.type_delays: dict[str, float] = {}
        self.gates: list[GateInstance] = []
        self.inputs: list[ExternalTerminal] = []
        self.outputs: list[ExternalTerminal] = []
        self.connections: list[Connection] = []
        self.names: dict[str, str] = {}  # identifier -> "gate" | "input" | "output"
        self.gate_types: dict[str, str] = {}
        self.raw_conns: list[tuple[int, list[tuple[int, str]]]] = []

    def error(self, line: int, col: int, msg: str) -> None:
        self.diags.append(Diagnostic(line, col, "error", msg))

    def number(self, line, tok, what) -> float | None:
        col, s = tok
        try:
            v = float(s)
        except ValueError:
            self.error(line, col, f"expected a number for {what}, got {s!r}")
            return None
        if not math.isfinite(v):
            self.error(line, col, f"{what} must be finite")
            return None
        return v

    def ident(self, line, tok, what) -> str | None:
        col, s = tok
        if not _IDENT.match(s):
            self.error(line, col, f"invalid {what} {s!r}")
            return None
        return s

    def declare(self, line, tok, kind) -> str | None:
        name = self.ident(line, tok, f"{kind} name")
        if name is None:
            return None
        if name in self.names:
            self.error(line, tok[0], f"duplicate identifier {name!r}")
            return None
        self.names[name] = kind
        return name

    def run(self):
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            toks = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(body)]
            if not toks:
                continue
            kw = toks[0][1]
            handler = getattr(self, "stmt_" + kw, None)
            if handler is None:
                self.error(lineno, toks[0][0], f"unknown statement {kw!r}")
                continue
            handler(lineno, toks)
        if self.name is None:
            self.error(1, 1, "missing 'circuit <name>' statement")
        params = self.finish_params()
        # connections are resolved after every declaration has been seen
        for lineno, toks in self.raw_conns:
            self.resolve_connection(lineno, toks)
        self.check_drivers()
        return params

    # statements

    def stmt_circuit(self, line, toks):
        if len(toks) != 2:
            self.error(line, toks[0][0], "syntax: circuit <name>")
            return
        if self.name is not None:
            self.error(line, toks[0][0], "duplicate 'circuit' statement")
            return
        self.name = self.ident(line, toks[1], "circuit name")

    def stmt_param(self, line, toks):
        if len(toks) < 3:
            self.error(line, toks[0][0], "syntax: param <key> <value>")
            return
        key = toks[1][1]
        if key == "bed":
            if len(toks) != 5:
                self.error(line, toks[1][0], "syntax: param bed <x> <y> <z>")
                return
            vals = [self.number(line, t, "bed extent") for t in toks[2:]]
            if None in vals:
                return
            if any(v <= 0 for v in vals):
                self.error(line, toks[2][0], "bed extents must be positive")
                return
            self.params["bed"] = tuple(vals)
            self.param_lines["bed"] = (line, toks[1][0])
            return
        if len(toks) != 3:
            self.error(line, toks[3][0], f"param {key} takes exactly one value")
            return
        if key.startswith("delay."):
            tname = key[len("delay."):]
            if tname not in self.lib:
                self.error(line, toks[1][0], f"unknown gate type {tname!r} in {key}")
                return
            v = self.number(line, toks[2], key)
            if v is None:
                return
            if v < 0:
                self.error(line, toks[2][0], f"{key} must be >= 0 s")
                return
            self.type_delays[tname] = v
            return
        if key not in SCALAR_PARAMS:
            self.error(line, toks[1][0], f"unknown parameter {key!r}")
            return
        v = self.number(line, toks[2], key)
        if v is None:
            return
        col = toks[2][0]
        if key in ("alpha", "beta") and not 0.0 < v < 1.0:
            sym = "α" if key == "alpha" else "β"
            self.error(line, col, f"{key} = {toks[2][1]} out of range: {sym}∈(0,1) requires 0 < {key} < 1")
            return
        if key in ("grid_pitch", "tube_inner_d", "tube_outer_d", "gate_delay") and v <= 0:
            self.error(line, col, f"{key} must be > 0")
            return
        if key == "clearance" and v < 0:
            self.error(line, col, "clearance must be >= 0")
            return
        self.params[key] = v
        self.param_lines[key] = (line, col)

    def stmt_gate(self, line, toks):
        if len(toks) not in (3, 6, 7) or (len(toks) > 3 and toks[3][1] != "at"):
            self.error(line, toks[0][0], "syntax: gate <name> <type> [at <x> <y> [<rot>]]")
            return
        name = self.declare(line, toks[1], "gate")
        tname = toks[2][1]
        if tname not in self.lib:
            self.error(line, toks[2][0], f"unknown gate type {tname!r}")
            return
        placement = None
        if len(toks) > 3:
            x = self.number(line, toks[4], "x")
            y = self.number(line, toks[5], "y")
            rot = 0
            if len(toks) == 7:
                r = self.number(line, toks[6], "rotation")
                if r is None:
                    return
                if r not in (0, 90, 180, 270):
                    self.error(line, toks[6][0], "rotation must be one of 0, 90, 180, 270")
                    return
                rot = int(r)
            if x is None or y is None:
                return
            placement = Placement(x, y, rot)
        if name is not None:
            self.gate_types[name] = tname
            self.gates.append(GateInstance(name, tname, placement, line))

    def _external(self, line, toks, kind):
        if len(toks) != 6 or toks[2][1] != "at":
            self.error(line, toks[0][0], f"syntax: {kind} <name> at <x> <y> <z>")
            return
        name = self.declare(line, toks[1], kind)
        pos = [self.number(line, t, "coordinate") for t in toks[3:6]]
        if name is None or None in pos:
            return
        term = ExternalTerminal(name, kind, tuple(pos), line)
        (self.inputs if kind == "input" else self.outputs).append(term)

    def stmt_input(self, line, toks):
        self._external(line, toks, "input")

    def stmt_output(self, line, toks):
        self._external(line, toks, "output")

    def stmt_connect(self, line, toks):
        if len(toks) < 4 or toks[2][1] != "->":
            self.error(line, toks[0][0], "syntax: connect <terminal> -> <terminal> [key=value ...]")
            return
        self.raw_conns.append((line, toks))

    # resolution

    def terminal(self, line, tok, role) -> Terminal | None:
        col, s = tok
        gate_name, _, port = s.partition(".")
        kind = self.names.get(gate_name)
        if kind is None:
            self.error(line, col, f"unknown terminal {s!r}")
            return None
        if not port:
            if kind == "gate":
                self.error(line, col, f"terminal {s!r} names a gate; use {s}.<port>")
                return None
            if role == "start" and kind == "output":
                self.error(line, col, f"output {s!r} cannot drive a connection")
                return None
            if role == "end" and kind == "input":
                self.error(line, col, f"input {s!r} cannot be driven")
                return None
            return Terminal(gate_name)
        if kind != "gate":
            self.error(line, col, f"{kind} {gate_name!r} has no ports")
            return None
        gtype = self.gate_types.get(gate_name)
        if gtype is None:
            return None  # declaration already reported
        gt, fp = self.lib[gtype]
        physical = {p.name for p in fp.ports}
        if port not in physical:
            self.error(line, col, f"unknown port {port!r} on gate {gate_name} ({gtype})")
            return None
        direction = gt.direction(port)
        if role == "start" and direction == "in":
            self.error(line, col, f"{s} is an input port and cannot drive a connection")
            return None
        if role == "end" and direction == "out":
            self.error(line, col, f"{s} is an output port and cannot be driven")
            return None
        return Terminal(gate_name, port)

    def resolve_connection(self, line, toks):
        start = self.terminal(line, toks[1], "start")
        end = self.terminal(line, toks[3], "end")
        overrides = []
        for col, s in toks[4:]:
            key, eq, val = s.partition("=")
            if not eq or key not in TUBE_OVERRIDES:
                self.error(line, col, f"unknown connection option {s!r} (allowed: {', '.join(TUBE_OVERRIDES)})")
                continue
            v = self.number(line, (col + len(key) + 1, val), key)
            if v is None:
                continue
            if v <= 0:
                self.error(line, col, f"{key} must be > 0")
                continue
            overrides.append((key, v))
        if start is None or end is None:
            return
        if start == end:
            self.error(line, toks[1][0], "connection start and end are the same terminal")
            return
        self.connections.append(Connection(start, end, tuple(overrides), line))

    def check_drivers(self):
        seen: dict[Terminal, int] = {}
        for c in self.connections:
            if c.end.is_external or self._is_logical_input(c.end):
                if c.end in seen:
                    self.error(c.line, 1, f"{c.end} is already driven (line {seen[c.end]})")
                else:
                    seen[c.end] = c.line

    def _is_logical_input(self, t: Terminal) -> bool:
        gtype = self.gate_types[t.name]
        return self.lib.gate_type(gtype).direction(t.port) == "in"

    def finish_params(self) -> CircuitParams:
        p = replace(CircuitParams(), **self.params)
        p = replace(p, type_delays=tuple(sorted(self.type_delays.items())))
        line, col = self.param_lines.get("tube_outer_d", self.param_lines.get("tube_inner_d", (1, 1)))
        if not p.tube_outer_d > p.tube_inner_d:
            self.error(line, col, "tube_outer_d must be greater than tube_inner_d")
        line, col = self.param_lines.get("grid_pitch", (line, col))
        if p.grid_pitch < p.tube_outer_d + p.clearance - 1e-12:
            self.error(line, col, "grid_pitch must be >= tube_outer_d + clearance")
        return p


def parse_netlist(text: str, library: ComponentLibrary | None = None, filename: str = "<input>") -> Netlist:
    """Parse ``.fcc`` source into a resolved :class:`Netlist`.

    Raises :class:`NetlistError` carrying every diagnostic (sorted by position)
    when the source has errors.
    """
    lib = library if library is not None else default_library()
    p = _Parser(text, lib)
    params = p.run()
    if p.diags:
        raise NetlistError(p.diags, filename)
    return Netlist(
        name=p.name,
        params=params,
        gates=tuple(p.gates),
        connections=tuple(p.connections),
        inputs=tuple(p.inputs),
        outputs=tuple(p.outputs),
        library=lib,
    )


def load_netlist(path, library: ComponentLibrary | None = None) -> Netlist:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read(), library, filename=str(path))


def _num(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_netlist(n: Netlist) -> str:
    """Print a netlist back to ``.fcc`` source; ``parse(format(n)) == n``."""
    out = [f"circuit {n.name}"]
    defaults = CircuitParams()
    p = n.params
    if p.bed != defaults.bed:
        out.append("param bed " + " ".join(_num(v) for v in p.bed))
    for key in SCALAR_PARAMS:
        if getattr(p, key) != getattr(defaults, key):
            out.append(f"param {key} {_num(getattr(p, key))}")
    for name, d in p.type_delays:
        out.append(f"param delay.{name} {_num(d)}")
    for g in n.gates:
        line = f"gate {g.name} {g.type_name}"
        if g.placement is not None:
            pl = g.placement
            line += f" at {_num(pl.x)} {_num(pl.y)} {pl.rotation}"
        out.append(line)
    for t in n.inputs + n.outputs:
        out.append(f"{t.kind} {t.name} at " + " ".join(_num(v) for v in t.position))
    for c in n.connections:
        line = f"connect {c.start} -> {c.end}"
        for key, v in c.overrides:
            line += f" {key}={_num(v)}"
        out.append(line)
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- validation


def gate_box(n: Netlist, g: GateInstance):
    fp = n.library.footprint(g.type_name)
    return fp.placed_box(g.placement.x, g.placement.y, g.placement.rotation)


def port_location(n: Netlist, t: Terminal):
    """World ``(position, outward direction or None, port diameter or None)`` of a terminal."""
    if t.is_external:
        ext = n.external(t.name)
        return tuple(float(v) for v in ext.position), None, None
    g = n.gate(t.name)
    fp = n.library.footprint(g.type_name)
    pl = g.placement
    return fp.placed_port(t.port, pl.x, pl.y, pl.rotation)


def boxes_overlap(a, b, gap: float = 0.0) -> bool:
    """True when the boxes come closer than ``gap`` along every axis."""
    return all(a[i] < b[i + 3] + gap and b[i] < a[i + 3] + gap for i in range(3))


def validate_netlist(n: Netlist) -> list[Diagnostic]:
    """Semantic checks on a parsed netlist. Returns diagnostics; empty means valid."""
    diags: list[Diagnostic] = []
    lib = n.library
    driven = {c.end for c in n.connections}
    used = driven | {c.start for c in n.connections}
    for g in n.gates:
        for port in lib.gate_type(g.type_name).inputs:
            if Terminal(g.name, port) not in driven:
                diags.append(Diagnostic(g.line, 1, "error", f"input {g.name}.{port} is not driven"))
    for t in n.outputs:
        if Terminal(t.name) not in used:
            diags.append(Diagnostic(t.line, 1, "error", f"output {t.name} is not connected"))
    for t in n.inputs:
        if Terminal(t.name) not in used:
            diags.append(Diagnostic(t.line, 1, "warning", f"input {t.name} is not connected"))

    bx, by, bz = n.params.bed
    placed = [g for g in n.gates if g.placement is not None]
    for g in placed:
        b = gate_box(n, g)
        if b[0] < 0 or b[1] < 0 or b[3] > bx or b[4] > by or b[5] > bz:
            diags.append(Diagnostic(g.line, 1, "error", f"gate {g.name} extends beyond the bed"))
    for t in n.inputs + n.outputs:
        x, y, z = t.position
        if not (0 <= x <= bx and 0 <= y <= by and 0 <= z <= bz):
            diags.append(Diagnostic(t.line, 1, "error", f"{t.kind} {t.name} lies outside the bed"))
    clearance = n.params.clearance
    for i, a in enumerate(placed):
        for b in placed[i + 1:]:
            if boxes_overlap(gate_box(n, a), gate_box(n, b), clearance):
                diags.append(Diagnostic(b.line, 1, "error", f"gate {b.name} overlaps gate {a.name}"))
    return sorted(diags)


# --------------------------------------------------------------------------- placement


def auto_place(
    n: Netlist,
    bed: tuple[float, float] | None = None,
    margin: float = 10.0,
    gap: float = 30.0,
) -> dict[str, Placement]:
    """Put every unplaced gate on a row-major grid of slots.

    Slots start at the bed corner plus ``margin`` and are separated by ``gap`` mm
    so tubes have room to pass between gates.  Slots that would collide with a
    gate that already has a placement, or with an external terminal, are skipped.
    Returns placements for the gates that had none.
    """
    bx, by = (bed if bed is not None else n.params.bed[:2])
    lib = n.library
    fixed = [gate_box(n, g) for g in n.gates if g.placement is not None]
    keep = [(t.position[0], t.position[1]) for t in n.inputs + n.outputs]
    todo = [g for g in n.gates if g.placement is None]
    if not todo:
        return {}
    sizes = [lib.footprint(g.type_name).size for g in todo]
    pitch_x = max(s[0] for s in sizes) + gap
    pitch_y = max(s[1] for s in sizes) + gap
    cols = int((bx - 2 * margin + gap) // pitch_x)
    rows = int((by - 2 * margin + gap) // pitch_y)
    if cols < 1 or rows < 1 or cols * rows < len(todo):
        raise PlacementError(
            f"bed {bx:g}x{by:g} mm has room for {max(cols, 0) * max(rows, 0)} gate slots, need {len(todo)}"
        )
    out: dict[str, Placement] = {}
    slot = 0
    for g, size in zip(todo, sizes):
        while True:
            if slot >= cols * rows:
                raise PlacementError(f"no free slot left for gate {g.name} on the bed")
            r, c = divmod(slot, cols)
            slot += 1
            x, y = margin + c * pitch_x, margin + r * pitch_y
            box = (x, y, 0.0, x + size[0], y + size[1], size[2])
            if any(boxes_overlap(box, f, gap / 2) for f in fixed):
                continue
            if any(box[0] - gap / 2 <= px <= box[3] + gap / 2 and box[1] - gap / 2 <= py <= box[4] + gap / 2
                   for px, py in keep):
                continue
            out[g.name] = Placement(x, y, 0)
            break
    return out


def placed(n: Netlist, **kwargs) -> Netlist:
    """Return ``n`` with any unplaced gates auto-placed."""
    if n.is_placed:
        return n
    return n.with_placement(auto_place(n, **kwargs))


def iter_terminals(n: Netlist) -> Iterable[Terminal]:
    for c in n.connections:
        yield c.start
        yield c.end
