"""Independent reference computations used by several test modules."""

import itertools
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


def grid_graph(blocked, pitch=1.0, neighborhood="full26"):
    """Sparse adjacency of free cells; a diagonal move needs every axis-decomposed
    intermediate cell free."""
    dims = blocked.shape
    free = ~blocked
    idx = np.arange(blocked.size).reshape(dims)
    rows, cols, vals = [], [], []
    for d in itertools.product((-1, 0, 1), repeat=3):
        nz = sum(map(abs, d))
        if nz == 0 or (neighborhood == "axis6" and nz > 1):
            continue
        src = [slice(max(0, -c), dims[a] - max(0, c)) for a, c in enumerate(d)]
        ok = free[tuple(src)].copy()

        def shifted(off):
            return free[tuple(slice(s.start + o, s.stop + o) for s, o in zip(src, off))]

        ok &= shifted(d)
        axes = [a for a in range(3) if d[a]]
        for r in range(1, len(axes)):
            for sub in itertools.combinations(axes, r):
                ok &= shifted(tuple(d[a] if a in sub else 0 for a in range(3)))
        a = idx[tuple(src)][ok]
        b = idx[tuple(slice(s.start + o, s.stop + o) for s, o in zip(src, d))][ok]
        rows.append(a)
        cols.append(b)
        vals.append(np.full(len(a), math.sqrt(nz) * pitch))
    r = np.concatenate(rows)
    return coo_matrix((np.concatenate(vals), (r, np.concatenate(cols))), shape=(blocked.size,) * 2).tocsr()


def dijkstra_cost(blocked, start, goal, pitch=1.0, neighborhood="full26"):
    g = grid_graph(blocked, pitch, neighborhood)
    flat = np.ravel_multi_index
    dist = dijkstra(g, indices=flat(start, blocked.shape))
    return float(dist[flat(goal, blocked.shape)])


def segment_distance(p, a, b):
    p, a, b = (np.asarray(v, float) for v in (p, a, b))
    ab = b - a
    t = 0.0 if not ab.any() else min(1.0, max(0.0, float((p - a) @ ab / (ab @ ab))))
    return float(np.linalg.norm(p - (a + t * ab)))


def polyline_distance(p, poly):
    poly = np.asarray(poly, float)
    if len(poly) == 1:
        return float(np.linalg.norm(np.asarray(p, float) - poly[0]))
    return min(segment_distance(p, a, b) for a, b in zip(poly[:-1], poly[1:]))


def ray_mesh_distance(origin, direction, vertices, triangles):
    """Nearest positive hit distance of a ray against a triangle soup
    (Moller-Trumbore), ``inf`` when it misses."""
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    v = np.asarray(vertices, float)[np.asarray(triangles)]
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - v[:, 0]
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    w = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= -1e-12) & (w >= -1e-12) & (u + w <= 1 + 1e-12) & (t > 1e-12)
    return float(t[hit].min()) if hit.any() else math.inf


def closest_on_polyline(p, poly):
    poly = np.asarray(poly, float)
    p = np.asarray(p, float)
    best, arg = math.inf, None
    for a, b in zip(poly[:-1], poly[1:]):
        ab = b - a
        t = min(1.0, max(0.0, float((p - a) @ ab / (ab @ ab))))
        q = a + t * ab
        dist = float(np.linalg.norm(p - q))
        if dist < best:
            best, arg = dist, q
    return arg
