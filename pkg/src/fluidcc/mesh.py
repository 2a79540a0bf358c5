"""Tube and junction meshes.

Every shell produced here is a closed, consistently oriented triangle mesh:
each undirected edge borders exactly two triangles that traverse it in
opposite directions.  Tubes are hollow (the bore stays open at both ends);
junctions are hollow spheres with three short welded stubs.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .errors import JunctionError, MeshError

MIN_PRINTABLE_WALL = 0.4  # mm
DEGENERATE_AREA = 1e-9  # mm^2


class MeshWarning(UserWarning):
    pass


@dataclass
class TriMesh:
    vertices: np.ndarray  # (n, 3) float mm
    triangles: np.ndarray  # (m, 3) int
    label: str = ""
    normals: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MeshError(f"{self.label or 'mesh'}: triangle index out of range")

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def volume(self) -> float:
        """Signed enclosed volume (positive for outward-facing shells)."""
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


@dataclass(frozen=True)
class SweepProfile:
    segments: int = 16
    inner_radius: float = 0.75
    outer_radius: float = 1.25

    def __post_init__(self):
        if self.segments < 8:
            raise ValueError("sweep needs at least 8 segments")
        if not self.outer_radius > self.inner_radius > 0:
            raise ValueError("profile needs outer radius > inner radius > 0")


# --------------------------------------------------------------------------- checks


@dataclass
class WatertightReport:
    non_manifold_edges: list[tuple[tuple[int, int], int]]
    winding_conflicts: list[tuple[int, int]]
    degenerate_triangles: list[int]

    @property
    def ok(self) -> bool:
        return not (self.non_manifold_edges or self.winding_conflicts or self.degenerate_triangles)

    def __bool__(self) -> bool:
        return self.ok


def watertight_check(mesh: TriMesh) -> WatertightReport:
    """Report edges not shared by exactly two triangles, edges whose two
    triangles run the same way, and zero-area triangles."""
    directed = Counter()
    for a, b, c in mesh.triangles.tolist():
        directed[(a, b)] += 1
        directed[(b, c)] += 1
        directed[(c, a)] += 1
    undirected = Counter()
    for (a, b), n in directed.items():
        undirected[(min(a, b), max(a, b))] += n
    bad = sorted((e, n) for e, n in undirected.items() if n != 2)
    conflicts = sorted(e for e, n in undirected.items()
                       if n == 2 and (directed[e] != 1 or directed[(e[1], e[0])] != 1))
    degenerate = np.flatnonzero(mesh.triangle_areas() <= DEGENERATE_AREA).tolist()
    return WatertightReport(bad, conflicts, degenerate)


# --------------------------------------------------------------------------- polylines


def _dedupe(points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    keep = [0]
    for i in range(1, len(points)):
        if np.linalg.norm(points[i] - points[keep[-1]]) > tol:
            keep.append(i)
    return points[keep]


def merge_collinear(points, tol: float = 1e-9) -> np.ndarray:
    """Drop interior points that lie on a straight run (same direction in and out)."""
    pts = _dedupe(np.asarray(points, dtype=float).reshape(-1, 3))
    if len(pts) < 3:
        return pts
    keep = [pts[0]]
    for i in range(1, len(pts) - 1):
        a = pts[i] - keep[-1]
        b = pts[i + 1] - pts[i]
        cross = np.linalg.norm(np.cross(a, b))
        if cross > tol * np.linalg.norm(a) * np.linalg.norm(b) or a @ b < 0:
            keep.append(pts[i])
    keep.append(pts[-1])
    return np.asarray(keep)


def fillet_polyline(points, radius: float, subdiv: int = 6) -> np.ndarray:
    """Round every interior corner with a circular arc.

    The arc radius is reduced where needed so each tangent point stays within
    half of the shorter adjacent segment.  The arc is sampled with ``subdiv``
    chords (``subdiv + 1`` points including both tangent points).  Collinear
    corners and reversals are left as they are.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if radius <= 0 or len(pts) < 3:
        return pts.copy()
    out = [pts[0]]
    for i in range(1, len(pts) - 1):
        p = pts[i]
        a, b = pts[i - 1] - p, pts[i + 1] - p
        la, lb = np.linalg.norm(a), np.linalg.norm(b)
        u, v = a / la, b / lb
        cos_inner = float(np.clip(u @ v, -1.0, 1.0))
        inner = math.acos(cos_inner)
        turn = math.pi - inner
        if turn < 1e-6 or inner < 1e-6:
            out.append(p)
            continue
        tan_half = math.tan(turn / 2)
        t = min(radius * tan_half, min(la, lb) / 2)
        r = t / tan_half
        w = u + v
        w /= np.linalg.norm(w)
        centre = p + w * (r / math.sin(inner / 2))
        sa, sb = p + u * t - centre, p + v * t - centre
        for s in range(subdiv + 1):
            f = s / subdiv
            # slerp between the two radius vectors
            q = (math.sin((1 - f) * turn) * sa + math.sin(f * turn) * sb) / math.sin(turn)
            out.append(centre + q)
    out.append(pts[-1])
    return _dedupe(np.asarray(out))


def polyline_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def trim_polyline_start(points, distance: float) -> np.ndarray:
    """Drop the first ``distance`` mm of a polyline (measured along it)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    remaining = distance
    for i in range(len(pts) - 1):
        seg = pts[i + 1] - pts[i]
        L = float(np.linalg.norm(seg))
        if L > remaining + 1e-12:
            start = pts[i] + seg * (remaining / L)
            return np.vstack([start, pts[i + 1:]])
        remaining -= L
    raise MeshError(f"cannot trim {distance} mm from a polyline of length {polyline_length(pts):.3f} mm")


# --------------------------------------------------------------------------- frames


def _any_perpendicular(t: np.ndarray) -> np.ndarray:
    axis = np.eye(3)[int(np.argmin(np.abs(t)))]
    r = np.cross(t, axis)
    return r / np.linalg.norm(r)


def _tangents(pts: np.ndarray) -> np.ndarray:
    seg = np.diff(pts, axis=0)
    seg /= np.linalg.norm(seg, axis=1)[:, None]
    tan = np.empty_like(pts)
    tan[0], tan[-1] = seg[0], seg[-1]
    for i in range(1, len(pts) - 1):
        t = seg[i - 1] + seg[i]
        n = np.linalg.norm(t)
        tan[i] = t / n if n > 1e-12 else seg[i - 1]
    return tan


def rotation_minimizing_frames(pts: np.ndarray, tangents: np.ndarray, r0=None) -> np.ndarray:
    """Reference normals along a polyline by the double-reflection method."""
    r = np.empty_like(pts)
    r[0] = _any_perpendicular(tangents[0]) if r0 is None else r0
    for i in range(len(pts) - 1):
        v1 = pts[i + 1] - pts[i]
        c1 = v1 @ v1
        rl = r[i] - (2 / c1) * (v1 @ r[i]) * v1
        tl = tangents[i] - (2 / c1) * (v1 @ tangents[i]) * v1
        v2 = tangents[i + 1] - tl
        c2 = v2 @ v2
        nxt = rl - (2 / c2) * (v2 @ rl) * v2 if c2 > 1e-24 else rl
        # re-orthogonalise against accumulated round-off
        nxt -= (nxt @ tangents[i + 1]) * tangents[i + 1]
        r[i + 1] = nxt / np.linalg.norm(nxt)
    return r


def _check_bends(pts: np.ndarray, outer: np.ndarray) -> None:
    seg = np.diff(pts, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    u = seg / lens[:, None]
    half = np.zeros(len(pts))
    cosines = np.clip(np.einsum("ij,ij->i", u[:-1], u[1:]), -1.0, 1.0)
    half[1:-1] = np.arccos(cosines) / 2
    for i in range(len(pts) - 1):
        tilt = math.tan(half[i]) + math.tan(half[i + 1])
        if tilt > 1e-12 and lens[i] / tilt < max(outer[i], outer[i + 1]):
            warnings.warn(
                f"bend near point {i} is tighter than the tube radius; the swept wall self-intersects",
                MeshWarning, stacklevel=3)
            return


def sweep_tube(polyline, profile: SweepProfile, inner_radii=None, outer_radii=None, label: str = "") -> TriMesh:
    """Hollow tube along a polyline, open bore, closed by annular end caps.

    Rings sit at every polyline point in the plane normal to the averaged
    tangent and are oriented by rotation-minimizing frames, so straight runs do
    not twist.  Per-point radii override the profile (used for press-fit tips).
    A tube over ``P`` points with ``S`` segments has ``4*S*(P-1) + 4*S`` triangles.
    """
    pts = np.asarray(polyline, dtype=float).reshape(-1, 3)
    if len(pts) < 2:
        raise MeshError("sweep needs at least two polyline points")
    if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) <= 1e-12):
        raise MeshError("polyline has coincident consecutive points")
    P, S = len(pts), profile.segments
    inner = np.full(P, profile.inner_radius) if inner_radii is None else np.asarray(inner_radii, dtype=float)
    outer = np.full(P, profile.outer_radius) if outer_radii is None else np.asarray(outer_radii, dtype=float)
    if np.any(outer <= inner) or np.any(inner <= 0):
        raise MeshError("tube radii must satisfy outer > inner > 0")
    wall = float(np.min(outer - inner))
    if wall < MIN_PRINTABLE_WALL:
        warnings.warn(f"tube wall {wall:.3f} mm is thinner than printable ({MIN_PRINTABLE_WALL} mm)",
                      MeshWarning, stacklevel=2)
    _check_bends(pts, outer)

    tan = _tangents(pts)
    ref = rotation_minimizing_frames(pts, tan)
    bin_ = np.cross(tan, ref)
    theta = 2 * np.pi * np.arange(S) / S
    ring = np.cos(theta)[None, :, None] * ref[:, None, :] + np.sin(theta)[None, :, None] * bin_[:, None, :]
    # mitre: stretch each interior ring along its bend direction so it lies on
    # both adjacent cylinders and the cross-section does not pinch at corners
    seg = np.diff(pts, axis=0)
    seg /= np.linalg.norm(seg, axis=1)[:, None]
    for i in range(1, P - 1):
        m = seg[i] - seg[i - 1]
        n = np.linalg.norm(m)
        cos_half = float(np.clip((seg[i] + seg[i - 1]) @ tan[i] / 2, 0.25, 1.0))
        if n < 1e-12 or cos_half > 1 - 1e-12:
            continue
        m /= n
        ring[i] += (1 / cos_half - 1) * (ring[i] @ m)[:, None] * m[None, :]
    outer_v = pts[:, None, :] + outer[:, None, None] * ring
    inner_v = pts[:, None, :] + inner[:, None, None] * ring
    verts = np.vstack([outer_v.reshape(-1, 3), inner_v.reshape(-1, 3)])

    def o(i, s):
        return i * S + s % S

    def n(i, s):
        return P * S + i * S + s % S

    tris = []
    for i in range(P - 1):
        for s in range(S):
            tris.append((o(i, s), o(i, s + 1), o(i + 1, s + 1)))
            tris.append((o(i, s), o(i + 1, s + 1), o(i + 1, s)))
            tris.append((n(i, s), n(i + 1, s + 1), n(i, s + 1)))
            tris.append((n(i, s), n(i + 1, s), n(i + 1, s + 1)))
    last = P - 1
    for s in range(S):
        tris.append((o(0, s), n(0, s), n(0, s + 1)))
        tris.append((o(0, s), n(0, s + 1), o(0, s + 1)))
        tris.append((o(last, s), n(last, s + 1), n(last, s)))
        tris.append((o(last, s), o(last, s + 1), n(last, s + 1)))
    return TriMesh(verts, np.asarray(tris), label)


# --------------------------------------------------------------------------- press fit


@dataclass(frozen=True)
class TipSpec:
    port_diameter: float
    interference: float = 0.1
    socket_length: float = 4.0
    chamfer: float = 0.5

    @property
    def socket_bore(self) -> float:
        return self.port_diameter - self.interference


def press_fit_tip(polyline, inner_radii, outer_radii, tip: TipSpec, at_end: bool = True):
    """Widen the last ``socket_length`` mm of bore into a press-fit socket.

    The socket bore is the port diameter minus the interference, opening into a
    45° lead-in chamfer at the mouth.  The wall around the socket keeps the
    tube's wall thickness plus the chamfer depth, so the mouth still has the
    full tube wall.  Returns new ``(polyline, inner_radii, outer_radii)``.
    """
    pts = np.asarray(polyline, dtype=float).reshape(-1, 3)
    inner = np.asarray(inner_radii, dtype=float)
    outer = np.asarray(outer_radii, dtype=float)
    if not at_end:
        p, i, o = press_fit_tip(pts[::-1], inner[::-1], outer[::-1], tip, True)
        return p[::-1].copy(), i[::-1].copy(), o[::-1].copy()

    tube_in, tube_out = float(inner[-1]), float(outer[-1])
    if tip.port_diameter <= 2 * tube_in:
        raise MeshError(f"port diameter {tip.port_diameter} mm is not larger than the tube bore "
                        f"{2 * tube_in} mm; no socket possible")
    socket_r = tip.socket_bore / 2
    wall = tube_out - tube_in
    length = polyline_length(pts)
    sock = min(tip.socket_length, 0.4 * length)
    taper = min(0.2, 0.1 * sock)
    chamfer = min(tip.chamfer, 0.25 * sock)
    tip_out = socket_r + wall + chamfer
    s_a, s_b, s_c = length - sock, length - sock + taper, length - chamfer

    def radii(s):
        if s <= s_a:
            return None
        if s <= s_b:
            f = (s - s_a) / taper
            return tube_in + f * (socket_r - tube_in), tube_out + f * (tip_out - tube_out)
        if s <= s_c:
            return socket_r, tip_out
        f = (s - s_c) / chamfer if chamfer > 0 else 1.0
        return socket_r + f * chamfer, tip_out

    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    new_pts, new_in, new_out = [], [], []
    marks = [s_a, s_b, s_c] if chamfer > 0 else [s_a, s_b]
    for i in range(len(pts)):
        if i > 0:
            for m in marks:
                if cum[i - 1] + 1e-9 < m < cum[i] - 1e-9:
                    f = (m - cum[i - 1]) / (cum[i] - cum[i - 1])
                    new_pts.append(pts[i - 1] + f * (pts[i] - pts[i - 1]))
                    r = radii(m) or (tube_in, tube_out)
                    new_in.append(r[0])
                    new_out.append(r[1])
        r = radii(cum[i])
        new_pts.append(pts[i])
        new_in.append(inner[i] if r is None else r[0])
        new_out.append(outer[i] if r is None else r[1])
    return np.asarray(new_pts), np.asarray(new_in), np.asarray(new_out)


# --------------------------------------------------------------------------- junctions


def junction_min_separation_deg(sphere_factor: float = 2.5) -> float:
    """Smallest angle between incident tubes before their openings touch."""
    return max(15.0, 2 * math.degrees(math.asin(1.0 / sphere_factor)) + 1.0)


def _frame(d: np.ndarray):
    e1 = _any_perpendicular(d)
    e2 = np.cross(d, e1)
    return e1, e2


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def _perforated_sphere(radius, hole_radius, dirs, frames, segments, spacing):
    """Triangulated sphere with circular holes.  Returns ``(vertices, triangles,
    rim index arrays)``; triangles face outward and rim rings run
    counter-clockwise about each hole axis."""
    theta_h = math.asin(hole_radius / radius)
    margin = 0.5 * spacing / radius
    n = max(64, int(4 * math.pi * radius ** 2 / (0.866 * spacing ** 2)))
    samples = _fibonacci_sphere(n)
    keep = np.ones(n, dtype=bool)
    for d in dirs:
        keep &= samples @ d < math.cos(theta_h + margin)
    pts = [samples[keep] * radius]
    rims = []
    phi = 2 * np.pi * np.arange(segments) / segments
    base = len(pts[0])
    for d, (e1, e2) in zip(dirs, frames):
        ring = radius * (math.cos(theta_h) * d[None, :]
                         + math.sin(theta_h) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
        pts.append(ring)
        rims.append(np.arange(base, base + segments))
        base += segments
    verts = np.vstack(pts)
    hull = ConvexHull(verts)
    tris = []
    rim_of = np.full(len(verts), -1)
    for h, r in enumerate(rims):
        rim_of[r] = h
    for simplex in hull.simplices:
        hs = rim_of[simplex]
        if hs[0] >= 0 and hs[0] == hs[1] == hs[2]:
            continue  # lies in a hole's disk
        a, b, c = verts[simplex]
        if np.cross(b - a, c - a) @ (a + b + c) < 0:
            simplex = simplex[[0, 2, 1]]
        tris.append(simplex)
    if len(set(hull.vertices.tolist())) != len(verts):
        raise JunctionError("sphere triangulation dropped vertices")
    return verts, np.asarray(tris), rims


def junction_connector(centre, directions, inner_radius: float = 0.75, outer_radius: float = 1.25,
                       segments: int = 16, sphere_factor: float = 2.5, stub_length: float | None = None,
                       label: str = "") -> TriMesh:
    """Hollow sphere joining three tubes.

    The sphere's outer radius is ``sphere_factor`` times the tube outer radius
    and its wall equals the tube wall.  Each incident direction gets a circular
    opening and a short stub whose outer and inner rims are the sphere's hole
    rims, vertex for vertex, so the whole assembly is a single closed shell.
    """
    dirs = [np.asarray(d, dtype=float) for d in directions]
    if len(dirs) != 3:
        raise ValueError(f"a junction joins exactly 3 tubes, got {len(dirs)} directions")
    dirs = [d / np.linalg.norm(d) for d in dirs]
    limit = junction_min_separation_deg(sphere_factor)
    for i in range(3):
        for j in range(i + 1, 3):
            ang = math.degrees(math.acos(float(np.clip(dirs[i] @ dirs[j], -1, 1))))
            if ang < limit:
                raise JunctionError(f"incident directions {i} and {j} are {ang:.1f}° apart; "
                                    f"openings overlap below {limit:.1f}°")
    centre = np.asarray(centre, dtype=float)
    R = sphere_factor * outer_radius
    wall = outer_radius - inner_radius
    Ri = R - wall
    L = R + (outer_radius if stub_length is None else stub_length)
    frames = [_frame(d) for d in dirs]
    spacing = 2 * math.pi * outer_radius / segments

    ov, ot, orims = _perforated_sphere(R, outer_radius, dirs, frames, segments, spacing)
    iv, it, irims = _perforated_sphere(Ri, inner_radius, dirs, frames, segments, spacing)
    it = it[:, [0, 2, 1]] + len(ov)
    irims = [r + len(ov) for r in irims]
    verts = [ov, iv]
    tris = [ot, it]
    base = len(ov) + len(iv)
    phi = 2 * np.pi * np.arange(segments) / segments
    for d, (e1, e2), orim, irim in zip(dirs, frames, orims, irims):
        circle = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
        oend = np.arange(base, base + segments)
        iend = oend + segments
        verts.append(L * d + outer_radius * circle)
        verts.append(L * d + inner_radius * circle)
        base += 2 * segments
        for s in range(segments):
            s1 = (s + 1) % segments
            tris.append([[orim[s], orim[s1], oend[s1]], [orim[s], oend[s1], oend[s]],
                         [irim[s], iend[s1], irim[s1]], [irim[s], iend[s], iend[s1]],
                         [oend[s], iend[s1], iend[s]], [oend[s], oend[s1], iend[s1]]])
    v = np.vstack(verts) + centre
    t = np.vstack([np.asarray(x).reshape(-1, 3) for x in tris])
    return TriMesh(v, t, label)


def merge_meshes(meshes, label: str = "") -> TriMesh:
    verts, tris, base = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + base)
        base += len(m.vertices)
    if not verts:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), label)
    return TriMesh(np.vstack(verts), np.vstack(tris), label)


def weld(mesh: TriMesh) -> TriMesh:
    """Merge vertices with identical coordinates (e.g. after reading an STL)."""
    uniq, inverse = np.unique(mesh.vertices, axis=0, return_inverse=True)
    return TriMesh(uniq, inverse.reshape(-1)[mesh.triangles], mesh.label)


def shell_count(mesh: TriMesh) -> int:
    """Number of vertex-connected components."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = len(mesh.vertices)
    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    used = np.zeros(n, dtype=bool)
    used[t.reshape(-1)] = True
    _, labels = connected_components(g, directed=False)
    return len(np.unique(labels[used]))
