import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dijkstra_cost, polyline_distance
from fluidcc.errors import GridError, NoPathError
from fluidcc.router import (
    FOOTPRINT,
    TUBE,
    GridWorld,
    RoutePath,
    RouterParams,
    SearchState,
    build_grid,
    compare_search,
    find_path,
    heuristic,
    rasterize_path,
    step_cost,
    turn_count,
)

P = RouterParams(alpha=0.5, beta=0.5)
STD = RouterParams(mode="standard")


# ---------------------------------------------------------------------------- cost terms


@pytest.mark.parametrize(
    "a, b, increment",
    [
        ((0, 0, 1), (0, 0, 0), -0.5),  # straight down onto the bed: d=1, R1=-1, R2=-0.5
        ((1, 0, 0), (2, 0, 0), 0.5),  # along the bed: 1 - alpha
        ((0, 0, 0), (0, 0, 1), 1.0),  # up: no reward applies
    ],
)
def test_step_cost_cases(a, b, increment):
    assert abs(step_cost(SearchState(a, g=0.0), b, P) - increment) < 1e-12
    assert abs(step_cost(SearchState(a, g=2.25), b, P) - (2.25 + increment)) < 1e-12


def test_step_cost_diagonal_descent_pays_horizontal_only():
    # (0,0,2) -> (1,1,1): d = sqrt3, R1 = sqrt2 - sqrt3
    assert step_cost(SearchState((0, 0, 2)), (1, 1, 1), P) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_standard_mode_has_no_rewards():
    assert step_cost(SearchState((0, 0, 1)), (0, 0, 0), STD) == 1.0
    assert step_cost(SearchState((1, 0, 0)), (2, 1, 0), STD) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_step_cost_scales_with_pitch_but_alpha_does_not():
    assert step_cost(SearchState((1, 0, 0)), (2, 0, 0), P, pitch=3.0) == pytest.approx(2.5, abs=1e-12)


@pytest.mark.parametrize(
    "s, goal, h",
    [((0, 0, 0), (3, 4, 0), 6.5), ((2, 2, 2), (2, 2, 2), 0.0), ((0, 0, 0), (1, 1, 1), 1 + 0.5 * math.sqrt(3))],
)
def test_heuristic_examples(s, goal, h):
    assert heuristic(s, goal, P) == pytest.approx(h, abs=1e-12)


idx = st.tuples(*(st.integers(0, 30) for _ in range(3)))


@given(idx, idx, st.floats(0.01, 0.99))
def test_heuristic_zero_on_goal_and_symmetric(a, b, beta):
    p = RouterParams(beta=beta)
    assert heuristic(a, a, p) == 0.0
    assert heuristic(a, b, p) == heuristic(b, a, p)


@pytest.mark.parametrize("kw", [{"alpha": 1.0}, {"alpha": 0.0}, {"beta": 1.5}, {"mode": "x"}, {"neighborhood": "x"}])
def test_router_params_bounds(kw):
    with pytest.raises(ValueError):
        RouterParams(**kw)


# ---------------------------------------------------------------------------- search


def check_valid(world, path, start, goal):
    nodes = path.nodes
    assert nodes[0] == tuple(start) and nodes[-1] == tuple(goal)
    for a, b in zip(nodes, nodes[1:]):
        d = tuple(y - x for x, y in zip(a, b))
        assert max(map(abs, d)) == 1
        # no corner cutting: every axis-decomposed intermediate cell is free
        for mask in range(1, 8):
            sub = tuple(d[i] if mask >> i & 1 else 0 for i in range(3))
            if any(sub):
                assert not world.blocked[tuple(x + y for x, y in zip(a, sub))]
    assert not any(world.blocked[n] for n in nodes)
    assert len(set(nodes)) == len(nodes)
    assert path.metrics.turn_count == turn_count(nodes)


def random_world(rng, max_dims=(20, 20, 10)):
    dims = tuple(int(rng.integers(2, m + 1)) for m in max_dims)
    blocked = rng.random(dims) < rng.uniform(0.0, 0.35)
    free = np.argwhere(~blocked)
    if len(free) < 2:
        blocked[0, 0, 0] = blocked[-1, -1, -1] = False
        free = np.argwhere(~blocked)
    a, b = free[rng.choice(len(free), size=2, replace=False)]
    return GridWorld(blocked, blocked.astype(np.int8), 1.0), tuple(map(int, a)), tuple(map(int, b))


def test_standard_cost_matches_dijkstra_on_200_grids():
    rng = np.random.default_rng(2024)
    solved = 0
    for _ in range(200):
        world, a, b = random_world(rng)
        best = dijkstra_cost(world.blocked, a, b)
        if math.isinf(best):
            with pytest.raises(NoPathError):
                find_path(world, a, b, STD)
            continue
        path = find_path(world, a, b, STD)
        check_valid(world, path, a, b)
        assert path.metrics.cost == pytest.approx(best, rel=1e-9)
        assert path.metrics.length_mm == pytest.approx(best, rel=1e-9)
        solved += 1
    assert solved > 100


def test_standard_axis6_matches_dijkstra():
    rng = np.random.default_rng(5)
    for _ in range(30):
        world, a, b = random_world(rng, (12, 12, 6))
        best = dijkstra_cost(world.blocked, a, b, neighborhood="axis6")
        if math.isinf(best):
            continue
        p = find_path(world, a, b, RouterParams(mode="standard", neighborhood="axis6"))
        assert p.metrics.cost == pytest.approx(best, rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["modified", "standard"]), st.sampled_from(["axis6", "full26"]))
@settings(max_examples=60, deadline=None)
def test_returned_paths_are_valid(seed, mode, hood):
    world, a, b = random_world(np.random.default_rng(seed), (12, 12, 6))
    params = RouterParams(mode=mode, neighborhood=hood)
    try:
        path = find_path(world, a, b, params)
    except NoPathError:
        assert math.isinf(dijkstra_cost(world.blocked, a, b, neighborhood=hood))
        return
    check_valid(world, path, a, b)


def test_search_is_deterministic():
    rng = np.random.default_rng(11)
    for _ in range(10):
        world, a, b = random_world(rng, (15, 15, 6))
        try:
            p1 = find_path(world, a, b, P)
        except NoPathError:
            continue
        p2 = find_path(world.copy(), a, b, P)
        assert p1.nodes == p2.nodes and p1.metrics == p2.metrics


def test_start_equals_goal():
    p = find_path(GridWorld.empty((4, 4, 4)), (1, 1, 1), (1, 1, 1), P)
    assert p.nodes == ((1, 1, 1),) and p.metrics.length_mm == 0.0


def test_unreachable_goal_raises():
    w = GridWorld.empty((5, 5, 1)).with_blocked([(2, j, 0) for j in range(5)])
    with pytest.raises(NoPathError):
        find_path(w, (0, 0, 0), (4, 4, 0), P)


def test_blocked_start_raises():
    w = GridWorld.empty((5, 5, 1)).with_blocked([(0, 0, 0)])
    with pytest.raises(NoPathError):
        find_path(w, (0, 0, 0), (4, 4, 0), P)


def test_reserved_cells_only_usable_as_endpoints():
    w = GridWorld.empty((5, 1, 1))
    w.reserved[2, 0, 0] = True
    with pytest.raises(NoPathError):
        find_path(w, (0, 0, 0), (4, 0, 0), P)
    assert find_path(w, (0, 0, 0), (2, 0, 0), P).nodes[-1] == (2, 0, 0)


def test_one_layer_up_descends_to_bed():
    p = find_path(GridWorld.empty((20, 20, 5)), (0, 0, 1), (19, 0, 1), P)
    interior = p.nodes[1:-1]
    assert sum(n[2] == 0 for n in interior) >= 0.8 * len(interior)


@pytest.mark.xfail(strict=True, reason="the bed reward does not pay for a two-layer descent under this cost model")
def test_two_layers_up_descends_to_bed():
    p = find_path(GridWorld.empty((20, 20, 5)), (0, 0, 2), (19, 0, 2), P)
    interior = p.nodes[1:-1]
    assert sum(n[2] == 0 for n in interior) >= 0.8 * len(interior)


def test_standard_mode_ignores_the_bed():
    p = find_path(GridWorld.empty((20, 20, 5)), (0, 0, 1), (19, 0, 1), STD)
    assert all(n[2] == 1 for n in p.nodes)


@pytest.mark.parametrize("nk", [1, 5])
def test_wall_scene_modified_explores_fewer(nk):
    w = GridWorld.empty((21, 21, nk)).with_blocked([(10, j, k) for j in range(4, 17) for k in range(nk)])
    mod, std = compare_search(w, (3, 10, 0), (17, 10, 0), P)
    assert mod.metrics.explored_count < std.metrics.explored_count


def test_adjacent_endpoints_explore_at_most_two():
    mod, std = compare_search(GridWorld.empty((6, 6, 3)), (2, 2, 0), (3, 2, 0), P)
    assert mod.metrics.explored_count <= 2 and std.metrics.explored_count <= 2


# ---------------------------------------------------------------------------- obstacles


def test_rasterize_straight_path_thin_radius():
    w = GridWorld.empty((9, 9, 3))
    path = RoutePath(tuple((i, 4, 1) for i in range(2, 7)), 1.0)
    out = rasterize_path(w, path, radius=0.4)
    assert out.blocked_count == 5
    assert all(out.blocked[n] and out.provenance[n] == TUBE for n in path.nodes)
    assert w.blocked_count == 0  # input untouched


def test_rasterize_empty_path():
    w = GridWorld.empty((4, 4, 4))
    assert rasterize_path(w, RoutePath((), 1.0), 1.0).blocked_count == 0


@pytest.mark.parametrize("radius", [0.4, 0.8, 1.2, 2.5])
def test_rasterize_l_path_matches_distance_oracle(radius):
    w = GridWorld.empty((10, 10, 4))
    path = RoutePath(((1, 1, 1), (2, 1, 1), (3, 1, 1), (4, 1, 1), (4, 2, 1), (4, 3, 1), (4, 4, 1)), 1.0)
    out = rasterize_path(w, path, radius, clearance=0.1)
    poly = path.world_polyline
    for c in np.ndindex(w.dims):
        expect = polyline_distance(c, poly) < radius + 0.1 - 1e-9
        assert out.blocked[c] == expect, c
    if radius + 0.1 > 1.0:
        assert out.blocked[3, 2, 1]  # the cell inside the corner is one pitch from both legs


def test_rasterize_keeps_reserved_open():
    w = GridWorld.empty((6, 3, 3))
    w.reserved[0, 1, 1] = True
    out = rasterize_path(w, RoutePath(tuple((i, 1, 1) for i in range(6)), 1.0), 1.0)
    assert not out.blocked[0, 1, 1] and out.blocked[1, 1, 1]


def _params(bed, pitch=3.0, outer=2.5, clearance=0.5):
    return SimpleNamespace(bed=bed, grid_pitch=pitch, tube_outer_d=outer, clearance=clearance)


def test_build_grid_empty_bed():
    w = build_grid(_params((27, 27, 12)))
    assert w.dims == (10, 10, 5) and w.blocked_count == 0


def test_build_grid_footprint_matches_point_in_box_oracle():
    prm = _params((90, 90, 45))
    box = (30.0, 30.0, 0.0, 60.0, 60.0, 30.0)
    w = build_grid(prm, footprints=[box])
    inflate = 2.5 / 2 + 0.5
    expected = 0
    for c in np.ndindex(w.dims):
        p = np.asarray(c) * 3.0
        inside = all(box[a] - inflate - 1e-9 <= p[a] <= box[a + 3] + inflate + 1e-9 for a in range(3))
        expected += inside
        assert w.blocked[c] == inside
        if inside:
            assert w.provenance[c] == FOOTPRINT
    assert expected == w.blocked_count >= 10 * 10 * 7


def test_build_grid_existing_tube_corridor():
    prm = _params((30, 30, 15))
    tube = RoutePath(tuple((5, j, 2) for j in range(11)), 3.0)
    w = build_grid(prm, existing_tubes=[tube])
    reach = 2.5 + 0.5
    poly = tube.world_polyline
    for c in np.ndindex(w.dims):
        assert w.blocked[c] == (polyline_distance(np.asarray(c) * 3.0, poly) < reach - 1e-9)
    assert all(w.blocked[5, j, 2] for j in range(11))


def test_build_grid_reserves_ports_and_rejects_blocked_port():
    prm = _params((90, 90, 45))
    box = (30.0, 30.0, 0.0, 60.0, 60.0, 30.0)
    w = build_grid(prm, footprints=[box], ports=[(0, 0, 1)])
    assert w.reserved[0, 0, 1]
    with pytest.raises(GridError):
        build_grid(prm, footprints=[box], ports=[(15, 15, 1)])


def test_voxel_dump_layers():
    w = GridWorld.empty((3, 2, 2)).with_blocked([(1, 0, 0)])
    path = find_path(w, (0, 0, 0), (2, 0, 0), P)
    text = w.voxel_dump(path)
    assert text.splitlines()[0] == "layer k=0"
    assert "x" in text and "S" in text and "G" in text
