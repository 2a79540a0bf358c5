"""Seeded random-scene comparison of the modified and standard searches."""

from __future__ import annotations

import statistics
from dataclasses import replace

import numpy as np

from .errors import NoPathError
from .router import GridWorld, RouterParams, find_path

SCHEMA_VERSION = 1

SCENE_KINDS = {
    "flat": (40, 40, 1),
    "3d": (30, 30, 10),
}


def random_scene(seed: int, index: int, kind: str, density: float = 0.2):
    """Return ``(world, start, goal)`` for one scene.

    Obstacles are i.i.d. with probability ``density``; start and goal are free
    cells at least half the grid width apart (Chebyshev, in the x/y plane).
    """
    dims = SCENE_KINDS[kind]
    rng = np.random.default_rng([seed, index])
    blocked = rng.random(dims) < density
    world = GridWorld(blocked, blocked.astype(np.int8) * 3, 1.0)
    free = np.argwhere(~blocked)
    min_sep = min(dims[0], dims[1]) // 2
    for _ in range(1000):
        a, b = free[rng.integers(len(free), size=2)]
        if max(abs(int(a[0]) - int(b[0])), abs(int(a[1]) - int(b[1]))) >= min_sep:
            return world, tuple(int(v) for v in a), tuple(int(v) for v in b)
    raise RuntimeError("could not draw start/goal")  # unreachable at sane densities


def _metrics(path):
    if path is None:
        return None
    m = path.metrics
    return {
        "explored": m.explored_count,
        "frontier_peak": m.frontier_peak,
        "length": round(m.length_mm, 9),
        "turns": m.turn_count,
    }


def run_bench(scenes: int = 50, seed: int = 7, density: float = 0.2,
              params: RouterParams | None = None) -> dict:
    """Run the comparison suite; scenes alternate flat and 3D."""
    params = params or RouterParams()
    records = []
    for i in range(scenes):
        kind = "flat" if i % 2 == 0 else "3d"
        world, start, goal = random_scene(seed, i, kind, density)
        try:
            std = find_path(world, start, goal, replace(params, mode="standard"))
            mod = find_path(world, start, goal, replace(params, mode="modified"))
        except NoPathError:
            std = mod = None
        records.append({
            "scene": i,
            "kind": kind,
            "dims": list(world.dims),
            "start": list(start),
            "goal": list(goal),
            "solvable": std is not None,
            "modified": _metrics(mod),
            "standard": _metrics(std),
        })
    return {"schema_version": SCHEMA_VERSION, "seed": seed, "density": density,
            "records": records, "aggregate": aggregate(records)}


def aggregate(records) -> dict:
    solved = [r for r in records if r["solvable"]]
    reductions = [1.0 - r["modified"]["explored"] / r["standard"]["explored"] for r in solved]
    fewer = sum(1 for r in solved if r["modified"]["explored"] < r["standard"]["explored"])
    return {
        "scenes": len(records),
        "solvable": len(solved),
        "modified_fewer": fewer,
        "fewer_fraction": fewer / len(solved) if solved else None,
        "median_reduction": round(statistics.median(reductions), 9) if reductions else None,
        "explored_modified_total": sum(r["modified"]["explored"] for r in solved),
        "explored_standard_total": sum(r["standard"]["explored"] for r in solved),
    }
