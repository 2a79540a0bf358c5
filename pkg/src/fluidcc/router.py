"""Voxel-grid tube router.

The search space is a 3D occupancy grid over the print bed; ``k`` is the
vertical axis and ``k = 0`` is the bed itself.  :func:`find_path` runs a
best-first search over ``f = g + h`` in one of two modes:

``standard``
    Euclidean step cost and Euclidean heuristic (plain A*, optimal).

``modified``
    Step cost rewards descending moves and moves that land on the bed, and the
    heuristic is the Chebyshev distance plus ``beta`` times the Euclidean
    distance.  Tubes routed this way hug the bed, which is what makes them
    printable without support.

Costs are in world millimetres (grid steps times pitch).  ``alpha`` enters
unscaled, so its effect is relative to the pitch.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, NoPathError

EMPTY, FOOTPRINT, TUBE, KEEPOUT = 0, 1, 2, 3
_GLYPH = {EMPTY: ".", FOOTPRINT: "#", TUBE: "o", KEEPOUT: "x"}

GridIndex = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class GridWorld:
    """Occupancy grid.  Treat as immutable; operations return new worlds.

    ``reserved`` marks terminal port cells: no search may pass through one
    unless it is that search's start or goal, and tube rasterization never
    blocks them.
    """

    blocked: np.ndarray
    provenance: np.ndarray
    pitch: float
    reserved: np.ndarray = None

    def __post_init__(self):
        if self.reserved is None:
            object.__setattr__(self, "reserved", np.zeros(self.blocked.shape, dtype=bool))
        if self.blocked.ndim != 3 or min(self.blocked.shape) < 1:
            raise GridError(f"grid dims must be positive, got {self.blocked.shape}")

    @classmethod
    def empty(cls, dims, pitch: float = 1.0) -> "GridWorld":
        dims = tuple(int(d) for d in dims)
        return cls(np.zeros(dims, dtype=bool), np.zeros(dims, dtype=np.int8), float(pitch))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.blocked.shape

    def in_bounds(self, idx) -> bool:
        return all(0 <= int(c) < n for c, n in zip(idx, self.dims))

    def is_blocked(self, idx) -> bool:
        return bool(self.blocked[tuple(idx)])

    def world(self, idx) -> np.ndarray:
        return np.asarray(idx, dtype=float) * self.pitch

    def nearest_index(self, point) -> GridIndex:
        idx = np.rint(np.asarray(point, dtype=float) / self.pitch).astype(int)
        return tuple(int(v) for v in idx)

    @property
    def blocked_count(self) -> int:
        return int(self.blocked.sum())

    def copy(self) -> "GridWorld":
        return GridWorld(self.blocked.copy(), self.provenance.copy(), self.pitch, self.reserved.copy())

    def opened(self, cells) -> "GridWorld":
        """New world with ``cells`` unblocked (provenance kept)."""
        w = self.copy()
        for c in cells:
            w.blocked[tuple(c)] = False
        return w

    def with_blocked(self, cells, tag: int = KEEPOUT) -> "GridWorld":
        w = self.copy()
        for c in cells:
            c = tuple(c)
            if not w.blocked[c]:
                w.blocked[c] = True
                w.provenance[c] = tag
        return w

    def voxel_dump(self, path=None) -> str:
        """Text dump, one block per layer ``k``; rows print with ``j`` descending.

        ``.`` free, ``#`` footprint, ``o`` tube, ``x`` keep-out, ``P`` reserved
        port cell, ``*`` path node, ``S``/``G`` path ends.
        """
        marks = {}
        if path is not None and len(path.nodes):
            for n in path.nodes:
                marks[tuple(n)] = "*"
            marks[tuple(path.nodes[0])] = "S"
            marks[tuple(path.nodes[-1])] = "G"
        ni, nj, nk = self.dims
        out = []
        for k in range(nk):
            out.append(f"layer k={k}")
            for j in reversed(range(nj)):
                row = []
                for i in range(ni):
                    c = (i, j, k)
                    if c in marks:
                        row.append(marks[c])
                    elif self.blocked[c]:
                        row.append(_GLYPH.get(int(self.provenance[c]), "#"))
                    elif self.reserved[c]:
                        row.append("P")
                    else:
                        row.append(".")
                out.append("".join(row))
            out.append("")
        return "\n".join(out)


@dataclass(frozen=True)
class RouterParams:
    alpha: float = 0.5
    beta: float = 0.5
    neighborhood: str = "full26"
    mode: str = "modified"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.neighborhood not in ("axis6", "full26"):
            raise ValueError(f"neighborhood must be axis6 or full26, got {self.neighborhood!r}")
        if self.mode not in ("modified", "standard"):
            raise ValueError(f"mode must be modified or standard, got {self.mode!r}")


@dataclass(frozen=True)
class SearchState:
    node: GridIndex
    g: float = 0.0
    parent: GridIndex | None = None
    incoming_dir: GridIndex | None = None


@dataclass(frozen=True)
class SearchMetrics:
    explored_count: int
    frontier_peak: int
    turn_count: int
    length_mm: float
    cost: float

    def as_dict(self) -> dict:
        return {
            "explored_count": self.explored_count,
            "frontier_peak": self.frontier_peak,
            "turn_count": self.turn_count,
            "length_mm": self.length_mm,
            "cost": self.cost,
        }


@dataclass(frozen=True)
class RoutePath:
    nodes: tuple[GridIndex, ...]
    pitch: float
    metrics: SearchMetrics = field(compare=False, default=None)

    def __post_init__(self):
        if self.metrics is None:
            object.__setattr__(self, "metrics", SearchMetrics(0, 0, turn_count(self.nodes),
                                                              path_length(self.nodes, self.pitch), 0.0))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def world_polyline(self) -> np.ndarray:
        return np.asarray(self.nodes, dtype=float).reshape(-1, 3) * self.pitch


def turn_count(nodes) -> int:
    turns = 0
    prev = None
    for a, b in zip(nodes, nodes[1:]):
        step = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
        if prev is not None and step != prev:
            turns += 1
        prev = step
    return turns


def path_length(nodes, pitch: float = 1.0) -> float:
    return float(sum(math.dist(a, b) for a, b in zip(nodes, nodes[1:])) * pitch)


# --------------------------------------------------------------------------- cost terms


def step_cost(parent: SearchState, node, params: RouterParams, pitch: float = 1.0) -> float:
    """Accumulated cost ``g`` of reaching ``node`` from ``parent``.

    ``g = g(parent) + d + R1 + R2`` where ``d`` is the Euclidean step length,
    ``R1 = d_xy - d`` for downward steps and ``R2 = -alpha`` when ``node`` is on
    the bed.  In standard mode both rewards are zero.
    """
    dx, dy, dz = (int(b) - int(a) for a, b in zip(parent.node, node))
    d = math.sqrt(dx * dx + dy * dy + dz * dz) * pitch
    g = parent.g + d
    if params.mode == "modified":
        if dz < 0:
            g += math.sqrt(dx * dx + dy * dy) * pitch - d
        if node[2] == 0:
            g -= params.alpha
    return g


def heuristic(s, goal, params: RouterParams, pitch: float = 1.0) -> float:
    dx, dy, dz = (abs(int(b) - int(a)) for a, b in zip(s, goal))
    euclid = math.sqrt(dx * dx + dy * dy + dz * dz)
    if params.mode == "standard":
        return euclid * pitch
    return (max(dx, dy, dz) + params.beta * euclid) * pitch


# --------------------------------------------------------------------------- search


def _offsets(neighborhood: str):
    """Neighbor steps with their lengths and the axis-decomposed cells a diagonal
    step must not cut through."""
    out = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        nz = sum(1 for c in d if c)
        if nz == 0 or (neighborhood == "axis6" and nz > 1):
            continue
        axes = [a for a in range(3) if d[a]]
        inter = []
        for r in range(1, len(axes)):
            for sub in itertools.combinations(axes, r):
                inter.append(tuple(d[a] if a in sub else 0 for a in range(3)))
        out.append((d, math.sqrt(nz), math.hypot(d[0], d[1]), tuple(inter)))
    return tuple(out)


_OFFSETS = {n: _offsets(n) for n in ("axis6", "full26")}


def find_path(world: GridWorld, start, goal, params: RouterParams) -> RoutePath:
    """Route one tube from ``start`` to ``goal``.

    Each node is expanded at most once (step increments can be negative in
    modified mode, so re-expansion is not guaranteed to terminate).  Among
    frontier entries with equal ``f`` the search prefers, in order: a step that
    continues the parent's incoming direction, a pure step along the axis with
    the largest remaining distance to the goal, and the lexicographically
    smallest node.  The result is therefore fully deterministic.

    Raises :class:`NoPathError` when the goal is unreachable.
    """
    start = tuple(int(c) for c in start)
    goal = tuple(int(c) for c in goal)
    for name, c in (("start", start), ("goal", goal)):
        if not world.in_bounds(c):
            raise NoPathError(f"{name} {c} is outside the grid {world.dims}")
        if world.blocked[c]:
            raise NoPathError(f"{name} {c} is blocked")
    pitch = world.pitch
    if start == goal:
        return RoutePath((start,), pitch, SearchMetrics(1, 1, 0, 0.0, 0.0))

    ni, nj, nk = world.dims
    stride_i, stride_j = nj * nk, nk
    blk = bytearray((world.blocked | world.reserved).ravel().tobytes())
    s_flat = start[0] * stride_i + start[1] * stride_j + start[2]
    g_flat = goal[0] * stride_i + goal[1] * stride_j + goal[2]
    blk[s_flat] = 0
    blk[g_flat] = 0
    closed = bytearray(len(blk))

    modified = params.mode == "modified"
    alpha, beta = params.alpha, params.beta
    gi, gj, gk = goal
    offsets = _OFFSETS[params.neighborhood]

    def h(i, j, k):
        dx, dy, dz = abs(gi - i), abs(gj - j), abs(gk - k)
        e = math.sqrt(dx * dx + dy * dy + dz * dz)
        if modified:
            return (max(dx, dy, dz) + beta * e) * pitch
        return e * pitch

    # flat -> (g, tie keys, parent flat, step)
    best = {s_flat: (0.0, (0, 0), -1, None)}
    heap = [(round(h(*start), 9), 0, 0, s_flat, 0.0, -1, None)]
    explored = 0
    open_n = 1
    frontier_peak = 1

    while heap:
        fkey, tk, ak, cur, g, par, step = heapq.heappop(heap)
        if closed[cur]:
            continue
        bg = best[cur][0]
        if g > bg:
            continue
        closed[cur] = 1
        open_n -= 1
        explored += 1
        best[cur] = (g, (tk, ak), par, step)
        if cur == g_flat:
            break
        ci, rem = divmod(cur, stride_i)
        cj, ck = divmod(rem, stride_j)
        # pure axis step toward the goal along its largest remaining component
        diffs = (gi - ci, gj - cj, gk - ck)
        a_star = max(range(3), key=lambda a: (abs(diffs[a]), -a))
        want = [0, 0, 0]
        want[a_star] = (diffs[a_star] > 0) - (diffs[a_star] < 0)
        want = tuple(want)
        for d, dlen, dxy, inter in offsets:
            i, j, k = ci + d[0], cj + d[1], ck + d[2]
            if not (0 <= i < ni and 0 <= j < nj and 0 <= k < nk):
                continue
            nf = i * stride_i + j * stride_j + k
            if blk[nf] or closed[nf]:
                continue
            cut = False
            for o in inter:
                if blk[(ci + o[0]) * stride_i + (cj + o[1]) * stride_j + ck + o[2]]:
                    cut = True
                    break
            if cut:
                continue
            ng = g + dlen * pitch
            if modified:
                if d[2] < 0:
                    ng += (dxy - dlen) * pitch
                if k == 0:
                    ng -= alpha
            keys = (0 if step is None or d == step else 1, 0 if d == want else 1)
            prev = best.get(nf)
            if prev is not None:
                if ng > prev[0] or (ng == prev[0] and keys >= prev[1]):
                    continue
            else:
                open_n += 1
                if open_n > frontier_peak:
                    frontier_peak = open_n
            best[nf] = (ng, keys, cur, d)
            heapq.heappush(heap, (round(ng + h(i, j, k), 9), keys[0], keys[1], nf, ng, cur, d))
    else:
        raise NoPathError(f"no path from {start} to {goal} ({explored} nodes explored)")

    nodes = []
    f = g_flat
    while f != -1:
        i, rem = divmod(f, stride_i)
        j, k = divmod(rem, stride_j)
        nodes.append((i, j, k))
        f = best[f][2]
    nodes.reverse()
    nodes = tuple(nodes)
    metrics = SearchMetrics(
        explored_count=explored,
        frontier_peak=frontier_peak,
        turn_count=turn_count(nodes),
        length_mm=path_length(nodes, pitch),
        cost=best[g_flat][0],
    )
    return RoutePath(nodes, pitch, metrics)


def compare_search(world: GridWorld, start, goal, params: RouterParams):
    """Run both search modes on the same world.  Returns ``(modified, standard)`` paths."""
    from dataclasses import replace

    mod = find_path(world, start, goal, replace(params, mode="modified"))
    std = find_path(world, start, goal, replace(params, mode="standard"))
    return mod, std


# --------------------------------------------------------------------------- obstacles


def _points_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def polyline_mask(dims, pitch: float, polyline: np.ndarray, reach: float) -> np.ndarray:
    """Cells whose centres lie strictly closer than ``reach`` mm to the polyline."""
    mask = np.zeros(dims, dtype=bool)
    poly = np.asarray(polyline, dtype=float).reshape(-1, 3)
    if len(poly) == 0:
        return mask
    segs = [(poly[0], poly[0])] if len(poly) == 1 else list(zip(poly[:-1], poly[1:]))
    eps = 1e-9
    for a, b in segs:
        lo = np.floor((np.minimum(a, b) - reach) / pitch).astype(int)
        hi = np.ceil((np.maximum(a, b) + reach) / pitch).astype(int)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, np.asarray(dims) - 1)
        if np.any(hi < lo):
            continue
        ax = [np.arange(lo[n], hi[n] + 1) for n in range(3)]
        grid = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 3)
        dist = _points_segment_distance(grid * pitch, a, b)
        hit = grid[dist < reach - eps]
        mask[hit[:, 0], hit[:, 1], hit[:, 2]] = True
    return mask


def rasterize_path(world: GridWorld, path: RoutePath, radius: float, clearance: float = 0.0) -> GridWorld:
    """Mark cells closer than ``radius + clearance`` to the path as tube obstacles.

    For the tube-to-tube case pass the tube outer diameter as ``radius``: two
    centrelines then stay at least one outer diameter plus clearance apart.
    Reserved port cells stay open.  Returns a new world.
    """
    if path is None or len(path.nodes) == 0:
        return world
    mask = polyline_mask(world.dims, world.pitch, path.world_polyline, radius + clearance)
    mask &= ~world.reserved
    w = world.copy()
    newly = mask & ~w.blocked
    w.blocked[newly] = True
    w.provenance[newly] = TUBE
    return w


def grid_dims(bed, pitch: float) -> tuple[int, int, int]:
    return tuple(int(math.floor(e / pitch + 1e-9)) + 1 for e in bed)


def build_grid(params, footprints=(), existing_tubes=(), ports=()) -> GridWorld:
    """Occupancy grid for a bed.

    ``params`` needs ``bed``, ``grid_pitch``, ``tube_outer_d`` and ``clearance``
    (a :class:`~fluidcc.netlist.CircuitParams`).  ``footprints`` are world boxes
    ``(xmin, ymin, zmin, xmax, ymax, zmax)``; cells whose centres fall inside a
    box inflated by half a tube plus clearance are blocked.  ``existing_tubes``
    are :class:`RoutePath` objects rasterized like :func:`rasterize_path`.
    ``ports`` are cells carved open and reserved for terminals.
    """
    pitch = params.grid_pitch
    world = GridWorld.empty(grid_dims(params.bed, pitch), pitch)
    inflate = params.tube_outer_d / 2 + params.clearance
    ni, nj, nk = world.dims
    centres = [np.arange(n) * pitch for n in (ni, nj, nk)]
    for box in footprints:
        lo = np.asarray(box[:3], dtype=float) - inflate
        hi = np.asarray(box[3:], dtype=float) + inflate
        sel = [(c >= lo[a] - 1e-9) & (c <= hi[a] + 1e-9) for a, c in enumerate(centres)]
        m = sel[0][:, None, None] & sel[1][None, :, None] & sel[2][None, None, :]
        world.blocked[m] = True
        world.provenance[m] = FOOTPRINT
    for tube in existing_tubes:
        world = rasterize_path(world, tube, params.tube_outer_d, params.clearance)
    for c in ports:
        c = tuple(int(v) for v in c)
        if not world.in_bounds(c):
            raise GridError(f"port cell {c} is outside the grid {world.dims}")
        if world.blocked[c]:
            raise GridError(f"port cell {c} is blocked (placement too tight)")
        world.reserved[c] = True
    return world
