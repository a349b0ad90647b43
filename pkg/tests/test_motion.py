import math

import numpy as np
import pytest

from momaplan.motion import (
    MotionError,
    Navigator,
    inflate,
    navigator_for,
    robot_collides,
    step_cost,
)
from momaplan.world import OccupancyGrid

from oracles import dijkstra_counts

SQRT2 = math.sqrt(2.0)


def grid_from(occupied, resolution=0.1, origin=(0.0, 0.0)):
    return OccupancyGrid(resolution, origin, np.asarray(occupied, dtype=bool))


def random_grid(rng, shape=(20, 20), p_blocked=0.25):
    return grid_from(rng.random(shape) < p_blocked)


def test_inflate_against_center_distances():
    rng = np.random.default_rng(5)
    grid = random_grid(rng, shape=(15, 12), p_blocked=0.2)
    occ = np.argwhere(grid.occupied)
    for radius in (0.0, 0.1, 0.15, 0.32):
        blocked = inflate(grid, radius)
        for iy in range(grid.shape[0]):
            for ix in range(grid.shape[1]):
                d = min(
                    math.hypot(iy - oy, ix - ox) * grid.resolution for oy, ox in occ
                )
                assert blocked[iy, ix] == (d <= radius), (iy, ix, radius)


def test_inflate_empty_grid():
    grid = grid_from(np.zeros((4, 6), dtype=bool))
    assert not inflate(grid, 10.0).any()


def test_corner_cutting_is_forbidden():
    occupied = np.array(
        [
            [False, True],
            [True, False],
        ]
    )
    nav = Navigator.from_grid(grid_from(occupied))
    assert not nav.same_component((0, 0), (1, 1))
    with pytest.raises(MotionError, match="no path"):
        nav.astar((0, 0), (1, 1))


def test_astar_simple_open_grid():
    nav = Navigator.from_grid(grid_from(np.zeros((5, 5), dtype=bool)))
    plan = nav.astar((0, 0), (4, 2))
    # Two straight plus two diagonal steps is optimal for (4, 2).
    assert (plan.straight_steps, plan.diagonal_steps) == (2, 2)
    assert plan.cost == pytest.approx(0.1 * (2 + 2 * SQRT2))
    assert plan.cells[0] == (0, 0)
    assert plan.cells[-1] == (4, 2)


def _check_path_moves(nav, plan):
    straight = diagonal = 0
    for a, b in zip(plan.cells, plan.cells[1:]):
        dy, dx = b[0] - a[0], b[1] - a[1]
        assert max(abs(dy), abs(dx)) == 1
        assert nav.free[b]
        if dy != 0 and dx != 0:
            assert nav.free[a[0], b[1]] and nav.free[b[0], a[1]]
            diagonal += 1
        else:
            straight += 1
    assert (straight, diagonal) == (plan.straight_steps, plan.diagonal_steps)


def test_astar_matches_dijkstra_oracle_on_random_grids():
    rng = np.random.default_rng(17)
    for trial in range(25):
        grid = random_grid(rng)
        nav = Navigator.from_grid(grid)
        free_cells = [tuple(c) for c in np.argwhere(nav.free)]
        if len(free_cells) < 2:
            continue
        start = free_cells[int(rng.integers(len(free_cells)))]
        oracle = dijkstra_counts(nav.free, start)
        reachable = [c for c in oracle if c != start]
        goals = [reachable[int(rng.integers(len(reachable)))] for _ in range(8)]
        for goal in goals:
            plan = nav.astar(start, goal)
            assert (plan.straight_steps, plan.diagonal_steps) == oracle[goal]
            _check_path_moves(nav, plan)
        unreachable = [c for c in free_cells if c not in oracle]
        if unreachable:
            with pytest.raises(MotionError):
                nav.astar(start, unreachable[0])


def test_cost_field_matches_oracle_costs():
    rng = np.random.default_rng(23)
    grid = random_grid(rng)
    nav = Navigator.from_grid(grid)
    free_cells = [tuple(c) for c in np.argwhere(nav.free)]
    start = free_cells[0]
    oracle = dijkstra_counts(nav.free, start)
    field = nav.cost_field(start)
    for cell in free_cells:
        if cell in oracle:
            s, d = oracle[cell]
            assert field[cell] == pytest.approx(step_cost(s, d, grid.resolution), abs=1e-9)
        else:
            assert math.isinf(field[cell])
    assert math.isinf(field[tuple(np.argwhere(nav.blocked)[0])])


def test_cost_field_cached_and_readonly():
    nav = Navigator.from_grid(grid_from(np.zeros((6, 6), dtype=bool)))
    field = nav.cost_field((0, 0))
    assert nav.cost_field((0, 0)) is field
    with pytest.raises(ValueError):
        field[0, 0] = 1.0


def test_leg_cost_agrees_with_astar():
    rng = np.random.default_rng(31)
    grid = random_grid(rng, shape=(15, 15))
    nav = Navigator.from_grid(grid)
    free_cells = [tuple(c) for c in np.argwhere(nav.free)]
    a = free_cells[0]
    for _ in range(10):
        b = free_cells[int(rng.integers(len(free_cells)))]
        if not nav.same_component(a, b):
            assert math.isinf(nav.leg_cost(a, b))
            continue
        plan = nav.astar(a, b)
        assert nav.leg_cost(a, b) == pytest.approx(plan.cost, abs=1e-9)
        assert nav.leg_cost(b, a) == pytest.approx(plan.cost, abs=1e-9)


def test_astar_rejects_blocked_endpoints():
    occupied = np.zeros((4, 4), dtype=bool)
    occupied[2, 2] = True
    nav = Navigator.from_grid(grid_from(occupied))
    with pytest.raises(MotionError, match="start cell"):
        nav.astar((2, 2), (0, 0))
    with pytest.raises(MotionError, match="goal cell"):
        nav.astar((0, 0), (2, 2))


def test_components_match_oracle_reachability():
    rng = np.random.default_rng(41)
    grid = random_grid(rng, shape=(18, 18), p_blocked=0.35)
    nav = Navigator.from_grid(grid)
    free_cells = [tuple(c) for c in np.argwhere(nav.free)]
    start = free_cells[0]
    reachable = set(dijkstra_counts(nav.free, start))
    label = nav.component(start)
    for cell in free_cells:
        assert (nav.component(cell) == label) == (cell in reachable)
    blocked_cell = tuple(np.argwhere(nav.blocked)[0])
    assert nav.component(blocked_cell) == -1
    assert nav.component((-1, 0)) == -1


def test_point_queries_match_scalar(scene1):
    nav = navigator_for(scene1)
    rng = np.random.default_rng(3)
    xs = rng.uniform(-4.5, 4.5, size=200)
    ys = rng.uniform(-4.5, 4.5, size=200)
    pts = np.column_stack([xs, ys])
    mask = nav.free_mask_at(pts)
    comps = nav.components_at(pts)
    for (x, y), free, comp in zip(pts, mask, comps):
        cell = nav.cell_of(x, y)
        assert free == nav.is_free(cell)
        assert comp == nav.component(cell)


def test_navigator_cached_per_scene(scene1):
    assert navigator_for(scene1) is navigator_for(scene1)


def test_robot_collision_continuous(scene1):
    pose = scene1.robot_pose
    assert not robot_collides(scene1, pose.x, pose.y)
    table = next(t for t in scene1.tables if t.id == "dining")
    assert robot_collides(scene1, table.center[0], table.center[1])
