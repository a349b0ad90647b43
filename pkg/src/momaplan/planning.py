"""Utility-optimal task-and-motion planning over candidate configurations.

A task plan moves each requested object from its source table to the target
table as a pair of actions: navigate to a loading spot and pick the object
up, then navigate to an unloading spot beside the target table and put the
object down. Candidate plans enumerate object orders (restricted so a
support is always placed before anything stacked on it) crossed with, per
object, which side of the target table to unload from, up to a fixed budget
in enumeration order.

Each candidate is scored against each grounded configuration by expected
utility: a fixed reward scaled by the plan's expected manipulation
feasibility, minus its cost. Feasibility averages one term per manipulation
(loading counts as certain; unloading uses the standing-spot analysis for
that side and unload point). Cost adds optimal navigation distances between
consecutive stands and a fixed charge per manipulation. The search prices
navigation legs with cached single-source cost fields; only the winning
plan gets its legs rebuilt as explicit grid paths, and its cost and utility
are recomputed from those paths.

Standing spots are frozen deterministically: the unloading spot for a given
(configuration, object, side) triple is one probability-weighted draw from
the feasibility map, seeded from the scene seed, so re-planning reproduces
the same plan and execution replays the exact stands the planner scored.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .feasibility import (
    FeasibilityParams,
    compute_feasibility_map,
    manipulation_feasibility,
    sample_standing_cell,
    standing_pose,
    task_feasibility,
)
from .grounding import Configuration
from .motion import MotionPlan, Navigator, navigator_for
from .relations import ON_TOP_OF, PlacementAtom
from .world import Pose2D, SceneState, SymbolicLocation, symbolic_locations

log = logging.getLogger(__name__)

Cell = tuple[int, int]

REWARD = 100.0
MANIPULATION_COST = 0.5
MAX_PLANS = 500


class PlanningError(RuntimeError):
    """No candidate plan survived feasibility and connectivity screening."""


_MISS = object()


@dataclass
class PlanningParams:
    reward: float = REWARD
    manipulation_cost: float = MANIPULATION_COST
    max_plans: int = MAX_PLANS
    feasibility: FeasibilityParams = field(default_factory=FeasibilityParams)
    # Entropy word mixed into standing-draw seeds so repeated planning calls
    # on one scene can be made independent when desired.
    stand_seed: int = 0


@dataclass
class PlanStep:
    object_id: str
    source_table: str
    load_pose: Pose2D
    load_cell: Cell
    unload_location: str
    unload_pose: Pose2D
    unload_cell: Cell
    target_world: tuple[float, float]
    target_layer: int
    fea_task: float
    fea_stand: float
    leg_to_load: float
    leg_to_unload: float
    path_to_load: MotionPlan | None = None
    path_to_unload: MotionPlan | None = None


@dataclass
class SelectedPlan:
    config_index: int
    plan_index: int
    order: tuple[str, ...]
    sides: tuple[str, ...]
    configuration: Configuration
    steps: list[PlanStep]
    feasibility: float
    cost: float
    utility: float
    # Values seen during search, before the winning plan's legs were rebuilt
    # from explicit paths.
    search_cost: float
    search_utility: float
    candidates_evaluated: int
    # True when a leg could not be routed and the step list was cut short
    # (only baseline planners produce such plans; executing one ends in a
    # navigation failure at the cut).
    truncated: bool = False


def stacking_orders(
    objects: list[str], atoms: list[PlacementAtom], limit: int | None = None
) -> list[tuple[str, ...]]:
    """Object orders where every support precedes what stacks on it."""
    supports = {a.subject: a.reference for a in atoms if a.relation == ON_TOP_OF}
    orders: list[tuple[str, ...]] = []
    for perm in itertools.permutations(objects):
        pos = {o: i for i, o in enumerate(perm)}
        if all(
            pos[sub] > pos[sup]
            for sub, sup in supports.items()
            if sub in pos and sup in pos
        ):
            orders.append(perm)
            if limit is not None and len(orders) >= limit:
                break
    return orders


def enumerate_candidates(
    objects: list[str],
    atoms: list[PlacementAtom],
    sides: tuple[str, ...],
    max_plans: int,
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """(order, per-object side) pairs in enumeration order, capped."""
    out: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    for order in stacking_orders(objects, atoms):
        for side_combo in itertools.product(sides, repeat=len(objects)):
            out.append((order, side_combo))
            if len(out) >= max_plans:
                return out
    return out


class BandIndex:
    """Flat arrays over every band cell of one table, for nearest-free-cell
    queries."""

    def __init__(self, nav: Navigator, locations: list[SymbolicLocation]):
        self.locations = locations
        centers = []
        owner = []
        cells = []
        for li, loc in enumerate(locations):
            grid = loc.cell_centers().reshape(-1, 2)
            centers.append(grid)
            owner.append(np.full(len(grid), li))
            rows, cols = loc.dims
            rr, cc = np.divmod(np.arange(rows * cols), cols)
            cells.append(np.stack([rr, cc], axis=1))
        self.centers = np.concatenate(centers)
        self.owner = np.concatenate(owner)
        self.cells = np.concatenate(cells)
        self.free = nav.free_mask_at(self.centers)
        self.components = nav.components_at(self.centers)

    def nearest_free(
        self, point: tuple[float, float], component: int
    ) -> tuple[SymbolicLocation, Cell, tuple[float, float]] | None:
        usable = self.free & (self.components == component)
        if not usable.any():
            return None
        d2 = (self.centers[:, 0] - point[0]) ** 2 + (self.centers[:, 1] - point[1]) ** 2
        d2 = np.where(usable, d2, np.inf)
        idx = int(np.argmin(d2))
        loc = self.locations[int(self.owner[idx])]
        cell = (int(self.cells[idx, 0]), int(self.cells[idx, 1]))
        return loc, cell, (float(self.centers[idx, 0]), float(self.centers[idx, 1]))


@dataclass
class _UnloadOption:
    location: SymbolicLocation
    fea_task: float
    fea_stand: float
    cell: Cell
    pose: Pose2D
    grid_cell: Cell  # navigation grid cell of the standing pose
    target_world: tuple[float, float]
    layer: int


def _unload_option(
    scene: SceneState,
    nav: Navigator,
    location: SymbolicLocation,
    target_world: tuple[float, float],
    layer: int,
    params: PlanningParams,
    seed_key: tuple[int, ...],
) -> _UnloadOption:
    fmap = compute_feasibility_map(scene, location, target_world, params.feasibility)
    entropy = (scene.rng_seed, params.stand_seed)
    fea_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(*seed_key, 0)))
    )
    draw_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(*seed_key, 1)))
    )
    fea_task = task_feasibility(fmap, fea_rng)
    cell = sample_standing_cell(fmap, draw_rng)
    pose = standing_pose(location, cell, target_world)
    return _UnloadOption(
        location=location,
        fea_task=fea_task,
        fea_stand=manipulation_feasibility(fmap, cell),
        cell=cell,
        pose=pose,
        grid_cell=nav.cell_of(pose.x, pose.y),
        target_world=target_world,
        layer=layer,
    )


def plan_task(
    scene: SceneState,
    target_table: str,
    configurations: list[Configuration],
    atoms: list[PlacementAtom],
    params: PlanningParams | None = None,
) -> SelectedPlan:
    """Pick the utility-maximal (configuration, task plan) pair.

    Ties keep the lowest configuration index, then the lowest plan index.
    """
    params = params or PlanningParams()
    if not configurations:
        raise PlanningError("no grounded configurations to plan for")
    nav = navigator_for(scene)
    objects = list(configurations[0].positions)
    table = scene.table(target_table)
    target_locations = symbolic_locations(scene, target_table)
    side_ids = tuple(loc.side for loc in target_locations)
    loc_by_side = {loc.side: loc for loc in target_locations}

    candidates = enumerate_candidates(objects, atoms, side_ids, params.max_plans)
    if not candidates:
        raise PlanningError("no admissible object orders")

    start_cell = nav.cell_of(*scene.robot_pose.xy)
    start_comp = nav.component(start_cell)
    if start_comp < 0:
        raise PlanningError("robot start cell is blocked on the inflated grid")

    band_index: dict[str, BandIndex] = {}
    for obj in objects:
        src = scene.object(obj).initial_location
        if src not in band_index:
            band_index[src] = BandIndex(nav, symbolic_locations(scene, src))

    n = len(objects)
    manip_total = params.manipulation_cost * 2 * n

    best: tuple[float, int, int] | None = None  # (utility, config_idx, plan_idx)
    best_walk: list[PlanStep] | None = None
    best_f = 0.0
    best_c = math.inf
    evaluated = 0

    for m, config in enumerate(configurations):
        options: dict[tuple[str, str], _UnloadOption] = {}
        for oi, obj in enumerate(objects):
            tx, ty = config.positions[obj]
            target_world = table.to_world(tx, ty)
            for si, side in enumerate(side_ids):
                options[(obj, side)] = _unload_option(
                    scene,
                    nav,
                    loc_by_side[side],
                    target_world,
                    config.layers[obj],
                    params,
                    seed_key=(m, oi, si),
                )
        load_cache: dict[tuple[str, Cell], tuple | None] = {}
        for pi, (order, sides_combo) in enumerate(candidates):
            evaluated += 1
            walk = _walk_candidate(
                scene, nav, band_index, options, order, sides_combo,
                start_cell, start_comp, load_cache,
            )
            if walk is None:
                continue
            steps, nav_cost = walk
            fea = (n * 1.0 + sum(s.fea_task for s in steps)) / (2 * n)
            cost = nav_cost + manip_total
            utility = params.reward * fea - cost
            if best is None or utility > best[0] + 1e-12:
                best = (utility, m, pi)
                best_walk = steps
                best_f = fea
                best_c = cost
    if best is None or best_walk is None:
        raise PlanningError("every candidate plan was disconnected or infeasible")

    utility, m, pi = best
    order, sides_combo = candidates[pi]
    steps = _rebuild_paths(nav, start_cell, best_walk)
    final_cost = sum(s.leg_to_load + s.leg_to_unload for s in steps) + manip_total
    final_utility = params.reward * best_f - final_cost
    log.info(
        "selected config %d plan %d order=%s sides=%s F=%.3f C=%.2f U=%.2f",
        m, pi, order, sides_combo, best_f, final_cost, final_utility,
    )
    return SelectedPlan(
        config_index=m,
        plan_index=pi,
        order=order,
        sides=sides_combo,
        configuration=configurations[m],
        steps=steps,
        feasibility=best_f,
        cost=final_cost,
        utility=final_utility,
        search_cost=best_c,
        search_utility=utility,
        candidates_evaluated=evaluated,
    )


def _walk_candidate(
    scene: SceneState,
    nav: Navigator,
    band_index: dict[str, BandIndex],
    options: dict[tuple[str, str], "_UnloadOption"],
    order: tuple[str, ...],
    sides_combo: tuple[str, ...],
    start_cell: Cell,
    start_comp: int,
    load_cache: dict,
) -> tuple[list[PlanStep], float] | None:
    """Price one candidate; None when any leg is disconnected."""
    prev_cell = start_cell
    prev_point = scene.robot_pose.xy
    nav_cost = 0.0
    steps: list[PlanStep] = []
    for obj, side in zip(order, sides_combo):
        src_table = scene.object(obj).initial_location
        cache_key = (src_table, prev_cell)
        found = load_cache.get(cache_key, _MISS)
        if found is _MISS:
            found = band_index[src_table].nearest_free(prev_point, start_comp)
            load_cache[cache_key] = found
        if found is None:
            return None
        _, _, load_point = found
        load_cell = nav.cell_of(*load_point)
        option = options[(obj, side)]
        # Both legs of this step are priced off the load cell's field, so
        # the planner computes at most one field per distinct loading spot.
        load_field = nav.cost_field(load_cell)
        leg1 = 0.0 if prev_cell == load_cell else float(load_field[prev_cell])
        leg2 = float(load_field[option.grid_cell])
        if math.isinf(leg1) or math.isinf(leg2):
            return None
        src_spec = scene.object(obj)
        src = scene.table(src_table)
        obj_world = src.to_world(*src_spec.initial_position)  # type: ignore[misc]
        load_pose = Pose2D(
            load_point[0],
            load_point[1],
            math.atan2(obj_world[1] - load_point[1], obj_world[0] - load_point[0]),
        )
        steps.append(
            PlanStep(
                object_id=obj,
                source_table=src_table,
                load_pose=load_pose,
                load_cell=load_cell,
                unload_location=option.location.id,
                unload_pose=option.pose,
                unload_cell=option.grid_cell,
                target_world=option.target_world,
                target_layer=option.layer,
                fea_task=option.fea_task,
                fea_stand=option.fea_stand,
                leg_to_load=leg1,
                leg_to_unload=leg2,
            )
        )
        nav_cost += leg1 + leg2
        prev_cell = option.grid_cell
        prev_point = (option.pose.x, option.pose.y)
    return steps, nav_cost


def _rebuild_paths(nav: Navigator, start_cell: Cell, steps: list[PlanStep]) -> list[PlanStep]:
    """Replace field-priced legs with explicit optimal paths and their
    step-count costs."""
    prev = start_cell
    out: list[PlanStep] = []
    for step in steps:
        p1 = nav.astar(prev, step.load_cell) if prev != step.load_cell else None
        p2 = nav.astar(step.load_cell, step.unload_cell)
        step.path_to_load = p1
        step.path_to_unload = p2
        step.leg_to_load = p1.cost if p1 else 0.0
        step.leg_to_unload = p2.cost
        out.append(step)
        prev = step.unload_cell
    return out
