"""Tube network construction.

Connections are routed one at a time in netlist order.  When an endpoint is
already attached to a tube, that tube is split at a nearby interior node and
the new tube is routed to the split point instead, creating a three-way
junction.  Every routed tube becomes an obstacle for the ones after it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridError, NoPathError, RoutingError
from .netlist import Connection, Netlist, Terminal, gate_box, port_location
from .router import (
    GridIndex,
    GridWorld,
    RoutePath,
    RouterParams,
    build_grid,
    find_path,
    path_length,
    rasterize_path,
)

log = logging.getLogger(__name__)

SOCKET_LENGTH = 4.0  # mm of bore widened for the press fit at a port


@dataclass
class PathRegistry:
    paths: dict[int, RoutePath] = field(default_factory=dict)
    next_id: int = 0

    def add(self, path: RoutePath) -> int:
        pid = self.next_id
        self.paths[pid] = path
        self.next_id += 1
        return pid

    def __getitem__(self, pid: int) -> RoutePath:
        return self.paths[pid]

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class Junction:
    """Three tube ends meeting at ``point``.  Each incident entry is
    ``(path id, at_end)``: ``at_end`` is True when the path's last node touches
    the junction, False when its first node does."""

    point: GridIndex
    incident: tuple[tuple[int, bool], ...]


@dataclass(frozen=True)
class TerminalSite:
    """Where a terminal meets the grid: the reserved port cell plus the
    physical port geometry the tube tip must reach."""

    terminal: Terminal
    cell: GridIndex
    position: tuple[float, float, float]
    direction: tuple[float, float, float] | None
    port_diameter: float | None


@dataclass(frozen=True)
class ConnectionRoute:
    connection: Connection
    path_id: int
    explored: int
    frontier_peak: int
    turns: int
    length_mm: float
    splits: int
    nodes: tuple = ()  # the path as searched, before any later split


@dataclass
class RoutedNetwork:
    registry: PathRegistry
    junctions: list[Junction]
    terminal_map: dict[Terminal, tuple[int, int]]  # terminal -> (path id, node index)
    sites: dict[Terminal, TerminalSite]
    routes: list[ConnectionRoute]
    world: GridWorld
    overrides: dict[int, tuple[tuple[str, float], ...]] = field(default_factory=dict)

    @property
    def paths(self) -> dict[int, RoutePath]:
        return self.registry.paths

    @property
    def total_length_mm(self) -> float:
        return sum(p.metrics.length_mm for p in self.paths.values())

    def path_ends(self, pid: int):
        p = self.paths[pid]
        return p.nodes[0], p.nodes[-1]

    def components(self) -> list[set[int]]:
        """Groups of path ids physically connected through shared junctions."""
        parent = {pid: pid for pid in self.paths}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for j in self.junctions:
            ids = [pid for pid, _ in j.incident]
            for other in ids[1:]:
                parent[find(other)] = find(ids[0])
        groups: dict[int, set[int]] = {}
        for pid in self.paths:
            groups.setdefault(find(pid), set()).add(pid)
        return sorted(groups.values(), key=min)


# --------------------------------------------------------------------------- split helpers


def _near_junction(node, junctions, exclusion: int) -> bool:
    return any(max(abs(node[a] - jp[a]) for a in range(3)) <= exclusion for jp in junctions)


def _kink_deg(path: RoutePath, i: int) -> float:
    a = np.subtract(path.nodes[i - 1], path.nodes[i])
    b = np.subtract(path.nodes[i + 1], path.nodes[i])
    c = float(a @ b) / float(np.linalg.norm(a) * np.linalg.norm(b))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def split_candidates(path: RoutePath, target, junctions=(), exclusion: int = 2, rule: str = "nearest") -> list[int]:
    """Eligible interior node indices of ``path``, best first under ``rule``.

    ``nearest`` ranks by Euclidean distance to ``target``; ``midpoint`` by
    distance from the middle of the path.  Ties go to the lower index.  First
    and last nodes are never eligible, nor any node within ``exclusion`` cells
    (Chebyshev) of an existing junction point, nor a node where the path folds
    back so sharply that the two halves would leave a junction too close together.
    """
    eligible = [i for i in range(1, len(path.nodes) - 1)
                if not _near_junction(path.nodes[i], junctions, exclusion)
                and _kink_deg(path, i) >= JUNCTION_MIN_SEPARATION_DEG]
    if rule == "nearest":
        t = np.asarray(target, dtype=float)
        key = lambda i: (float(np.linalg.norm(np.asarray(path.nodes[i], dtype=float) - t)), i)
    elif rule == "midpoint":
        mid = (len(path.nodes) - 1) / 2
        key = lambda i: (abs(i - mid), i)
    else:
        raise ValueError(f"unknown split rule {rule!r}")
    return sorted(eligible, key=key)


def nearest_split_point(path: RoutePath, target, junctions=(), exclusion: int = 2) -> int:
    """Interior node index of ``path`` closest (Euclidean) to ``target``.

    Raises :class:`RoutingError` when no interior node qualifies.
    """
    if len(path.nodes) < 3:
        raise RoutingError(f"path of {len(path.nodes)} nodes has no interior node to split")
    cands = split_candidates(path, target, junctions, exclusion)
    if not cands:
        raise RoutingError("no eligible split point (all interior nodes are too close to a junction)")
    return cands[0]


def split_path(reg: PathRegistry, pid: int, index: int) -> tuple[int, int]:
    """Replace path ``pid`` by two halves that share node ``index``."""
    path = reg.paths[pid]
    if not 0 < index < len(path.nodes) - 1:
        raise IndexError(f"split index {index} is not interior to a path of {len(path.nodes)} nodes")
    del reg.paths[pid]
    left = reg.add(RoutePath(path.nodes[: index + 1], path.pitch))
    right = reg.add(RoutePath(path.nodes[index:], path.pitch))
    return left, right


# --------------------------------------------------------------------------- terminals


def terminal_site(n: Netlist, t: Terminal, pitch: float, port_layer: int | None = 1) -> TerminalSite:
    """Grid cell for a terminal.

    Gate ports get a cell outside the footprint along the port's outward
    direction, past the press-fit socket.  With ``port_layer`` set, the cell is
    lowered to that layer (tubes then leave the port downward toward the bed).
    External terminals use the cell nearest their declared position.
    """
    pos, direction, diameter = port_location(n, t)
    if direction is None:
        cell = tuple(int(v) for v in np.rint(np.asarray(pos) / pitch))
        return TerminalSite(t, cell, pos, None, None)
    standoff = SOCKET_LENGTH + 2 * pitch
    out = np.asarray(pos) + np.asarray(direction) * standoff
    cell = [int(v) for v in np.rint(out / pitch)]
    if port_layer is not None:
        cell[2] = min(cell[2], port_layer)
    return TerminalSite(t, tuple(cell), pos, direction, diameter)


# --------------------------------------------------------------------------- network


class _Builder:
    def __init__(self, n: Netlist, params: RouterParams, split_rule: str, port_layer):
        self.n = n
        self.cp = n.params
        self.params = params
        if split_rule not in ("nearest", "midpoint"):
            raise ValueError(f"unknown split rule {split_rule!r}")
        self.split_rule = split_rule
        pitch = self.cp.grid_pitch
        self.sites = {}
        for c in n.connections:
            for t in (c.start, c.end):
                if t not in self.sites:
                    self.sites[t] = terminal_site(n, t, pitch, port_layer)
        cells = {}
        for t, s in self.sites.items():
            if s.cell in cells and cells[s.cell] != t:
                raise GridError(f"terminals {cells[s.cell]} and {t} share grid cell {s.cell}")
            cells[s.cell] = t
        boxes = [gate_box(n, g) for g in n.gates]
        world = build_grid(self.cp, boxes)
        for t, s in self.sites.items():
            if not world.in_bounds(s.cell):
                raise GridError(f"terminal {t}: port cell {s.cell} is outside the grid {world.dims}")
            if world.blocked[s.cell]:
                raise GridError(f"terminal {t}: port cell {s.cell} is blocked (placement too tight); "
                                "check gate placement and external terminal positions")
        self.world = build_grid(self.cp, boxes, (), [s.cell for s in self.sites.values()])
        self.reg = PathRegistry()
        self.junctions: list[Junction] = []
        self.connected: dict[Terminal, tuple[int, int]] = {}
        self.routes: list[ConnectionRoute] = []
        self.overrides: dict[int, tuple] = {}

    def net_paths(self, pid: int) -> list[int]:
        """All paths sharing a junction tree with ``pid``."""
        seen = {pid}
        stack = [pid]
        while stack:
            cur = stack.pop()
            for j in self.junctions:
                ids = [p for p, _ in j.incident]
                if cur in ids:
                    for p in ids:
                        if p not in seen:
                            seen.add(p)
                            stack.append(p)
        return sorted(seen)

    def candidates(self, term: Terminal, target):
        """Split candidates ``(rank key, path id, index)`` over the terminal's net, best first."""
        pid, _ = self.connected[term]
        jpts = [j.point for j in self.junctions]
        out = []
        for p in self.net_paths(pid):
            path = self.reg[p]
            for rank, idx in enumerate(split_candidates(path, target, jpts, rule=self.split_rule)):
                key = math.dist(path.nodes[idx], target) if self.split_rule == "nearest" else rank
                out.append((key, p, idx))
        out.sort()
        return out

    def arrival_keepout(self, point, pid, index):
        """Neighbours of a split point from which a new tube would enter at a
        shallow angle to the existing halves (junction openings would merge)."""
        path = self.reg[pid]
        halves = [np.subtract(path.nodes[index - 1], point), np.subtract(path.nodes[index + 1], point)]
        halves = [h / np.linalg.norm(h) for h in halves]
        limit = math.cos(math.radians(JUNCTION_MIN_SEPARATION_DEG))
        cells = []
        for d in _NEIGHBOURS:
            u = np.asarray(d, dtype=float) / np.linalg.norm(d)
            if any(float(u @ h) > limit for h in halves):
                c = tuple(int(point[a] + d[a]) for a in range(3))
                if self.world.in_bounds(c):
                    cells.append(c)
        return cells

    def route(self, conn: Connection):
        ends = {}
        splits = []
        for role, term, other in (("start", conn.start, conn.end), ("end", conn.end, conn.start)):
            if term in self.connected:
                other_cell = ends.get("start") if role == "end" and "start" in ends else self.sites[other].cell
                splits.append((role, term, other_cell))
            else:
                ends[role] = self.sites[term].cell

        if not splits:
            path = self._search(self.world, ends["start"], ends["end"], conn)
            return self._commit(conn, path, [])

        # try split candidates per connected endpoint, best first
        plans = []
        for role, term, other_cell in splits:
            plans.append((role, term, self.candidates(term, other_cell)))
        if len(plans) == 1:
            role, term, cands = plans[0]
            last_err = None
            for _, pid, idx in cands[:MAX_SPLIT_ATTEMPTS]:
                point = self.reg[pid].nodes[idx]
                world = self.world.opened([point]).with_blocked(self.arrival_keepout(point, pid, idx))
                a, b = (point, ends["end"]) if role == "start" else (ends["start"], point)
                try:
                    path = self._search(world, a, b, conn)
                except RoutingError as exc:
                    last_err = exc
                    continue
                return self._commit(conn, path, [(role, pid, idx)])
            raise RoutingError(
                f"cannot route {conn}: no reachable split point"
                + (f" ({last_err})" if last_err else ""), str(conn))

        # both endpoints already attached: pick the first feasible pair
        (_, _, c_start), (_, _, c_end) = plans
        last_err = None
        for _, pid_s, idx_s in c_start[:MAX_SPLIT_ATTEMPTS]:
            for _, pid_e, idx_e in c_end[:MAX_SPLIT_ATTEMPTS]:
                ps, pe = self.reg[pid_s].nodes[idx_s], self.reg[pid_e].nodes[idx_e]
                if ps == pe or max(abs(ps[a] - pe[a]) for a in range(3)) <= 2:
                    continue
                world = (self.world.opened([ps, pe])
                         .with_blocked(self.arrival_keepout(ps, pid_s, idx_s))
                         .with_blocked(self.arrival_keepout(pe, pid_e, idx_e)))
                try:
                    path = self._search(world, ps, pe, conn)
                except RoutingError as exc:
                    last_err = exc
                    continue
                return self._commit(conn, path, [("start", pid_s, idx_s), ("end", pid_e, idx_e)])
        raise RoutingError(f"cannot route {conn}: no reachable split points"
                           + (f" ({last_err})" if last_err else ""), str(conn))

    def _search(self, world, a, b, conn):
        try:
            return find_path(world, a, b, self.params)
        except NoPathError as exc:
            raise RoutingError(f"cannot route {conn}: {exc}", str(conn)) from None

    def _commit(self, conn, path, splits):
        # splits are applied only after the search succeeded; split points are
        # interior nodes, so each one is re-located even if an earlier split in
        # this same step cut its path in two
        points = [(role, self.reg[pid].nodes[idx]) for role, pid, idx in splits]
        new_id = self.reg.next_id + 2 * len(points)
        for role, point in points:
            pid, idx = self._locate(point)
            left, right = split_path(self.reg, pid, idx)
            self._repoint(pid, idx, left, right)
            self.junctions.append(Junction(point, ((left, True), (right, False), (new_id, role == "end"))))
        added = self.reg.add(path)
        assert added == new_id
        if conn.start not in self.connected:
            self.connected[conn.start] = (new_id, 0)
        if conn.end not in self.connected:
            self.connected[conn.end] = (new_id, len(path.nodes) - 1)
        if conn.overrides:
            self.overrides[new_id] = conn.overrides
        radius = dict(conn.overrides).get("tube_outer_d", self.cp.tube_outer_d)
        self.world = rasterize_path(self.world, path, radius, self.cp.clearance)
        m = path.metrics
        self.routes.append(ConnectionRoute(conn, new_id, m.explored_count, m.frontier_peak,
                                           m.turn_count, m.length_mm, len(splits), tuple(path.nodes)))

    def _locate(self, point):
        for pid, p in self.reg.paths.items():
            for idx in range(1, len(p.nodes) - 1):
                if p.nodes[idx] == point:
                    return pid, idx
        raise RoutingError(f"split point {point} no longer lies inside a path")

    def _repoint(self, old, index, left, right):
        for term, (pid, idx) in list(self.connected.items()):
            if pid == old:
                self.connected[term] = (left, idx) if idx <= index else (right, idx - index)
        fixed = []
        for j in self.junctions:
            inc = []
            for pid, at_end in j.incident:
                if pid == old:
                    pid = right if at_end else left
                inc.append((pid, at_end))
            fixed.append(replace(j, incident=tuple(inc)))
        self.junctions = fixed
        if old in self.overrides:
            ov = self.overrides.pop(old)
            self.overrides[left] = self.overrides[right] = ov


JUNCTION_MIN_SEPARATION_DEG = 50.0
MAX_SPLIT_ATTEMPTS = 8
_NEIGHBOURS = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1) if (a, b, c) != (0, 0, 0)]


def order_connections(n: Netlist, order: str = "source") -> tuple[Connection, ...]:
    """``source`` keeps file order; ``sorted-by-length`` routes short connections
    first (straight-line distance between terminals, file order breaking ties)."""
    if order == "source":
        return n.connections
    if order != "sorted-by-length":
        raise ValueError(f"unknown route order {order!r}")

    def span(c):
        a, _, _ = port_location(n, c.start)
        b, _, _ = port_location(n, c.end)
        return math.dist(a, b)

    return tuple(c for _, c in sorted(enumerate(n.connections), key=lambda ic: (span(ic[1]), ic[0])))


def build_network(
    n: Netlist,
    params: RouterParams | None = None,
    *,
    order: str = "source",
    split_rule: str = "nearest",
    port_layer: int | None = 1,
    keep_going: bool = False,
) -> RoutedNetwork:
    """Route every connection of a placed netlist into a tube network.

    With ``keep_going`` every connection is attempted and a single
    :class:`RoutingError` listing all failures is raised at the end.
    """
    if not n.is_placed:
        raise RoutingError("netlist has unplaced gates; run auto_place first")
    params = params or RouterParams(alpha=n.params.alpha, beta=n.params.beta)
    b = _Builder(n, params, split_rule, port_layer)
    failures = []
    for conn in order_connections(n, order):
        try:
            b.route(conn)
        except RoutingError as exc:
            if not keep_going:
                raise
            failures.append(exc)
            log.warning("%s", exc)
    if failures:
        err = RoutingError("; ".join(str(e) for e in failures), failures[0].connection)
        err.failures = failures
        raise err
    return RoutedNetwork(b.reg, b.junctions, dict(b.connected), b.sites, b.routes, b.world, b.overrides)


def network_stats(net: RoutedNetwork) -> dict:
    return {
        "paths": len(net.paths),
        "junctions": len(net.junctions),
        "total_length_mm": round(sum(path_length(p.nodes, p.pitch) for p in net.paths.values()), 6),
        "explored_total": sum(r.explored for r in net.routes),
    }

