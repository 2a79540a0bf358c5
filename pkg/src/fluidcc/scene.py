"""Turn a routed network into printable shells."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshError
from .mesh import (SweepProfile, TipSpec, TriMesh, fillet_polyline, junction_connector,
                   junction_min_separation_deg, merge_collinear, polyline_length, press_fit_tip, sweep_tube)
from .netbuild import SOCKET_LENGTH, RoutedNetwork
from .netlist import CircuitParams


@dataclass(frozen=True)
class MeshParams:
    segments: int = 16
    fillet_factor: float = 2.0  # fillet radius as a multiple of the tube outer radius
    subdiv: int = 6
    interference: float = 0.1
    chamfer: float = 0.5
    sphere_factor: float = 2.5
    stub_length: float = 0.5  # how far junction stubs stand proud of the sphere
    lead_extra: float = 2.0  # straight run after the socket before the first bend


@dataclass
class SceneStats:
    shells: int
    triangles: int
    bbox_min: tuple[float, float, float]
    bbox_max: tuple[float, float, float]
    total_tube_length_mm: float

    def as_dict(self) -> dict:
        return {
            "shells": self.shells,
            "triangles": self.triangles,
            "bbox_min": [round(v, 6) for v in self.bbox_min],
            "bbox_max": [round(v, 6) for v in self.bbox_max],
            "total_tube_length_mm": round(self.total_tube_length_mm, 6),
        }


def _radii(net: RoutedNetwork, cp: CircuitParams, pid: int) -> tuple[float, float]:
    ov = dict(net.overrides.get(pid, ()))
    return ov.get("tube_inner_d", cp.tube_inner_d) / 2, ov.get("tube_outer_d", cp.tube_outer_d) / 2


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class _PathGeometry:
    """Centre line of one path with its protected (never filleted) ends."""

    def __init__(self, body: np.ndarray):
        self.body = body
        self.head: np.ndarray | None = None  # point prepended after filleting
        self.tail: np.ndarray | None = None
        self.tip_head: float | None = None  # port diameter at a socket end
        self.tip_tail: float | None = None


def _junction_layout(net: RoutedNetwork, mp: MeshParams, cp: CircuitParams) -> dict:
    """Stub direction and swallowed node count for every path end at a junction.

    The sphere is wider than one grid cell, so the tube cannot follow the
    first grid step out of it.  Each stub points at the first path node far
    enough out that the tube can run straight over the stub and still round
    its next corner; if that would bring two openings too close together,
    the stubs fall back to the grid directions and the tube runs straight
    along them before turning.
    """
    limit = math.cos(math.radians(junction_min_separation_deg(mp.sphere_factor)))
    layout = {}
    for j in net.junctions:
        c = np.asarray(j.point, dtype=float) * net.world.pitch
        r_in, r_out = _radii(net, cp, j.incident[0][0])
        R = mp.sphere_factor * r_out
        stub_end = R + mp.stub_length
        reach = 2 * stub_end - (R - (r_out - r_in))
        direct = {}
        for pid, at_end in j.incident:
            nodes = np.asarray(net.paths[pid].nodes, dtype=float) * net.world.pitch
            if at_end:
                nodes = nodes[::-1]
            skip = 1
            while skip < len(nodes) - 1 and np.linalg.norm(nodes[skip] - c) <= reach:
                skip += 1
            direct[(pid, at_end)] = (_unit(nodes[skip] - c), skip - 1, _unit(nodes[1] - c))
        dirs = [v[0] for v in direct.values()]
        ok = all(float(dirs[a] @ dirs[b]) <= limit for a in range(3) for b in range(a + 1, 3))
        for key, (d, skip, grid_d) in direct.items():
            layout[key] = (c, d, skip, "direct") if ok else (c, grid_d, 0, "run")
    return layout


def _path_geometry(net: RoutedNetwork, pid: int, junction_ends: dict, cp: CircuitParams, mp: MeshParams,
                   straight: float, inner_start: float) -> _PathGeometry:
    nodes = np.asarray(net.paths[pid].nodes, dtype=float) * net.world.pitch
    sites = {}
    for term, (p, idx) in net.terminal_map.items():
        if p == pid:
            sites[idx == 0] = net.sites[term]

    pts = nodes
    head = tail = None
    tip_head = tip_tail = None
    # terminal ends: port face, straight socket lead, then the port cell
    for at_start in (True, False):
        site = sites.get(at_start)
        if site is None:
            continue
        pos = np.asarray(site.position, dtype=float)
        if site.direction is not None:
            lead = pos + np.asarray(site.direction, dtype=float) * (SOCKET_LENGTH + mp.lead_extra)
            extra = [pos, lead]
        else:
            # the port cell is the declared position snapped to the grid: use the exact point
            pts = pts.copy()
            pts[0 if at_start else -1] = pos
            extra = []
        if at_start:
            pts = np.vstack(extra[1:] + [pts]) if extra else pts
            head = extra[0] if extra else None
            if site.port_diameter is not None and site.direction is not None:
                tip_head = site.port_diameter
        else:
            pts = np.vstack([pts] + extra[::-1][:-1]) if extra else pts
            tail = extra[0] if extra else None
            if site.port_diameter is not None and site.direction is not None:
                tip_tail = site.port_diameter
    # junction ends
    for at_end in (False, True):
        info = junction_ends.get((pid, at_end))
        if info is None:
            continue
        c, d, skip, mode = info
        seq = pts[::-1] if at_end else pts
        if mode == "direct":
            seq = np.vstack([c + d * inner_start, seq[1 + skip:]])
            cap = None
        else:
            rest = seq[1:]
            while len(rest) > 1 and np.linalg.norm(rest[0] - c) <= straight + 0.5:
                rest = rest[1:]
            seq = np.vstack([c + d * straight, rest])
            cap = c + d * inner_start
        pts = seq[::-1] if at_end else seq
        if at_end:
            tail = cap
        else:
            head = cap
    g = _PathGeometry(pts)
    g.head, g.tail, g.tip_head, g.tip_tail = head, tail, tip_head, tip_tail
    return g


def path_shell(net: RoutedNetwork, pid: int, cp: CircuitParams | None = None, mp: MeshParams | None = None,
               junction_ends: dict | None = None) -> tuple[TriMesh, float]:
    """Shell for one path and its centre-line length (mm)."""
    cp = cp or CircuitParams()
    mp = mp or MeshParams()
    if junction_ends is None:
        junction_ends = _junction_layout(net, mp, cp)
    r_in, r_out = _radii(net, cp, pid)
    R = mp.sphere_factor * r_out
    straight = R + mp.stub_length + 0.5 * r_out
    inner_start = R - (r_out - r_in)
    g = _path_geometry(net, pid, junction_ends, cp, mp, straight, inner_start)
    body = merge_collinear(g.body)
    if len(body) > 2:
        body = fillet_polyline(body, mp.fillet_factor * r_out, mp.subdiv)
    parts = ([g.head] if g.head is not None else []) + [body] + ([g.tail] if g.tail is not None else [])
    pts = np.vstack(parts)
    keep = np.concatenate([[True], np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-9])
    pts = pts[keep]
    inner = np.full(len(pts), r_in)
    outer = np.full(len(pts), r_out)
    if g.tip_head is not None:
        pts, inner, outer = press_fit_tip(pts, inner, outer, TipSpec(g.tip_head, mp.interference, SOCKET_LENGTH,
                                                                       mp.chamfer), at_end=False)
    if g.tip_tail is not None:
        pts, inner, outer = press_fit_tip(pts, inner, outer, TipSpec(g.tip_tail, mp.interference, SOCKET_LENGTH,
                                                                       mp.chamfer), at_end=True)
    mesh = sweep_tube(pts, SweepProfile(mp.segments, r_in, r_out), inner, outer, label=f"path {pid}")
    return mesh, polyline_length(pts)


def junction_shell(net: RoutedNetwork, index: int, cp: CircuitParams | None = None,
                   mp: MeshParams | None = None, layout: dict | None = None) -> TriMesh:
    cp = cp or CircuitParams()
    mp = mp or MeshParams()
    if layout is None:
        layout = _junction_layout(net, mp, cp)
    j = net.junctions[index]
    dirs = [layout[key][1] for key in j.incident]
    r_in, r_out = _radii(net, cp, j.incident[0][0])
    c = np.asarray(j.point, dtype=float) * net.world.pitch
    return junction_connector(c, dirs, r_in, r_out, mp.segments, mp.sphere_factor, mp.stub_length,
                              label=f"junction {index}")


def assemble_scene(net: RoutedNetwork, cp: CircuitParams | None = None,
                   mp: MeshParams | None = None) -> tuple[list[TriMesh], SceneStats]:
    """One shell per path (ascending id) followed by one per junction (by point)."""
    cp = cp or CircuitParams()
    mp = mp or MeshParams()
    ends = _junction_layout(net, mp, cp)
    shells, length = [], 0.0
    for pid in sorted(net.paths):
        mesh, L = path_shell(net, pid, cp, mp, ends)
        shells.append(mesh)
        length += L
    order = sorted(range(len(net.junctions)), key=lambda i: net.junctions[i].point)
    for i in order:
        shells.append(junction_shell(net, i, cp, mp, ends))
    if shells:
        lo = np.min([m.vertices.min(axis=0) for m in shells], axis=0)
        hi = np.max([m.vertices.max(axis=0) for m in shells], axis=0)
    else:
        lo = hi = np.zeros(3)
    stats = SceneStats(len(shells), sum(len(m) for m in shells), tuple(map(float, lo)), tuple(map(float, hi)),
                       length)
    if not all(math.isfinite(v) for v in stats.bbox_min + stats.bbox_max):
        raise MeshError("non-finite vertex in scene")
    return shells, stats
