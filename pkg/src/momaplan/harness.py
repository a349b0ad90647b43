"""Experiment harness: benchmark tasks, scenes, systems and run reports.

The benchmark is a desk-scale dining setup: one target table flanked by
standing bands, two pickup tables holding the objects, and optionally a
chair blocking one side. Nine numbered tasks name object sets of growing
size. Four systems are compared:

* ``llm_grop``   - the full pipeline: language-model goals, multi-sample
                   grounding, feasibility-aware utility-optimal planning.
* ``latp``       - language-model goals grounded at their nominal layout,
                   unloading from a uniformly drawn in-reach standing cell,
                   objects in goal order (no feasibility or utility search).
* ``tpra``       - random collision-free placements, uniform in-reach
                   standing cells, catalog object order.
* ``grop``       - one random placement configuration, then the full
                   feasibility-aware utility-optimal planner.

Every trial simulates execution under arrival noise, verifies the final
arrangement against the task's canonical relational goal, and logs cost.
Reports are plain nested dictionaries serialized with sorted keys and no
timestamps, so a (task, environment, seed) triple reproduces its report
byte for byte.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .execution import (
    NAVIGATION,
    ExecutionResult,
    execute_plan,
    relation_satisfaction,
    verify_goal,
)
from .feasibility import FeasibilityParams
from .goalgen import GeneratedGoal, ScriptedBackend, bundled_script_path, generate_goal
from .grounding import (
    Configuration,
    GroundingError,
    GroundingParams,
    nominal_layout,
    sample_configurations,
)
from .motion import MotionError, navigator_for
from .planning import (
    BandIndex,
    MANIPULATION_COST,
    PlanningError,
    PlanningParams,
    PlanStep,
    SelectedPlan,
    plan_task,
)
from .relations import PlacementAtom, goal_objects
from .world import (
    ObjectSpec,
    ObstacleSpec,
    Pose2D,
    SceneState,
    SymbolicLocation,
    TableSpec,
    build_scene,
    symbolic_locations,
)

log = logging.getLogger(__name__)

SYSTEMS = ("llm_grop", "latp", "tpra", "grop")
ENVIRONMENTS = ("easy", "chair_top", "chair_bottom", "random")

# Object footprint radii (m) at desk scale, plus whether other objects may
# be stacked on top.
OBJECT_CATALOG: dict[str, tuple[float, bool]] = {
    "dinner_plate": (0.025, True),
    "dinner_fork": (0.012, False),
    "dinner_knife": (0.012, False),
    "bread_plate": (0.022, True),
    "water_cup": (0.015, False),
    "bread": (0.016, False),
    "mug": (0.016, True),
    "mug_mat": (0.020, True),
    "fruit_bowl": (0.022, True),
    "strawberry": (0.009, False),
    "mug_lid": (0.013, False),
}

TASK_OBJECTS: dict[int, tuple[str, ...]] = {
    1: ("dinner_plate", "dinner_fork", "dinner_knife"),
    2: ("bread_plate", "water_cup", "bread"),
    3: ("mug", "bread_plate", "mug_mat"),
    4: ("fruit_bowl", "mug", "strawberry"),
    5: ("mug", "dinner_plate", "mug_lid"),
    6: ("dinner_plate", "dinner_fork", "mug", "mug_lid"),
    7: ("dinner_plate", "dinner_fork", "dinner_knife", "strawberry"),
    8: ("dinner_plate", "dinner_fork", "dinner_knife", "mug", "mug_lid"),
    9: ("dinner_plate", "dinner_fork", "dinner_knife", "water_cup", "strawberry"),
}

TARGET_TABLE = "dining"

_DINING = TableSpec(TARGET_TABLE, (0.0, 0.0), (0.6, 0.15))
_PICKUP_LEFT = TableSpec("side_left", (-2.0, -2.0), (0.4, 0.3))
_PICKUP_RIGHT = TableSpec("side_right", (2.0, -2.0), (0.4, 0.3))
_ROBOT_START = Pose2D(0.0, -2.5, math.pi / 2)
_CHAIR_HALF = 0.225


def _chair(side: str) -> ObstacleSpec:
    hx, hy = _DINING.half_extents
    centers = {
        "north": (0.0, hy + _CHAIR_HALF),
        "south": (0.0, -hy - _CHAIR_HALF),
        "east": (hx + _CHAIR_HALF, 0.0),
        "west": (-hx - _CHAIR_HALF, 0.0),
    }
    return ObstacleSpec("chair", centers[side], (_CHAIR_HALF, _CHAIR_HALF))


def make_scene(task: int, environment: str = "easy", seed: int = 0) -> SceneState:
    """Benchmark scene for one task: objects alternate between the two
    pickup tables in catalog order."""
    if task not in TASK_OBJECTS:
        raise ValueError(f"unknown task {task}; choose from {sorted(TASK_OBJECTS)}")
    if environment not in ENVIRONMENTS:
        raise ValueError(f"unknown environment {environment!r}")
    objects = []
    for i, name in enumerate(TASK_OBJECTS[task]):
        radius, stackable = OBJECT_CATALOG[name]
        table = _PICKUP_LEFT.id if i % 2 == 0 else _PICKUP_RIGHT.id
        objects.append(ObjectSpec(name, radius, table, supports_stacking=stackable))
    obstacles: list[ObstacleSpec] = []
    if environment == "chair_top":
        obstacles.append(_chair("north"))
    elif environment == "chair_bottom":
        obstacles.append(_chair("south"))
    elif environment == "random":
        side = np.random.default_rng(seed).choice(["north", "south", "east", "west"])
        obstacles.append(_chair(str(side)))
    return build_scene(
        [_DINING, _PICKUP_LEFT, _PICKUP_RIGHT],
        obstacles,
        objects,
        _ROBOT_START,
        rng_seed=seed,
    )


def scripted_backend_for_task(task: int) -> ScriptedBackend:
    return ScriptedBackend.from_yaml(bundled_script_path(task))


# ---------------------------------------------------------------------------
# Experiment configuration


@dataclass
class ExperimentConfig:
    task: int = 1
    environment: str = "easy"
    systems: tuple[str, ...] = SYSTEMS
    trials: int = 20
    seed: int = 42
    configurations: int = 10  # grounded samples per goal
    feasibility: FeasibilityParams = field(default_factory=FeasibilityParams)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"{path}: unknown config keys {sorted(extra)}")
        if "systems" in data:
            data["systems"] = tuple(data["systems"])
        if "feasibility" in data:
            data["feasibility"] = FeasibilityParams(**data["feasibility"])
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "environment": self.environment,
            "systems": list(self.systems),
            "trials": self.trials,
            "seed": self.seed,
            "configurations": self.configurations,
            "feasibility": {
                "trials_per_cell": self.feasibility.trials_per_cell,
                "nav_sigma_xy": self.feasibility.nav_sigma_xy,
                "nav_sigma_theta": self.feasibility.nav_sigma_theta,
                "reach_radius": self.feasibility.reach_radius,
                "task_draws": self.feasibility.task_draws,
            },
        }


@dataclass
class TrialRecord:
    system: str
    trial: int
    completed: bool
    verified: bool
    success: bool
    satisfaction: float
    executed_cost: float
    planned_cost: float | None
    planned_feasibility: float | None
    planned_utility: float | None
    objects_delivered: int
    failure_kind: str | None
    goal_attempts: int | None

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "trial": self.trial,
            "completed": self.completed,
            "verified": self.verified,
            "success": self.success,
            "satisfaction": _round(self.satisfaction),
            "executed_cost": _round(self.executed_cost),
            "planned_cost": _round(self.planned_cost),
            "planned_feasibility": _round(self.planned_feasibility),
            "planned_utility": _round(self.planned_utility),
            "objects_delivered": self.objects_delivered,
            "failure_kind": self.failure_kind,
            "goal_attempts": self.goal_attempts,
        }


def _round(value: float | None, digits: int = 6) -> float | None:
    if value is None:
        return None
    return round(float(value), digits)


# ---------------------------------------------------------------------------
# System runners


def _trial_rng(config: ExperimentConfig, system: str, trial: int, stream: int) -> np.random.Generator:
    sys_idx = SYSTEMS.index(system)
    return np.random.default_rng(
        np.random.SeedSequence((config.seed, sys_idx, trial, stream))
    )


def _radii(scene: SceneState) -> dict[str, float]:
    return {o.id: o.footprint_radius for o in scene.objects}


def _random_configuration(
    scene: SceneState, objects: list[str], rng: np.random.Generator, attempts: int = 2000
) -> Configuration:
    """Uniform collision-free placements on the target table top."""
    table = scene.table(TARGET_TABLE)
    hx, hy = table.half_extents
    radii = _radii(scene)
    positions: dict[str, tuple[float, float]] = {}
    for obj in objects:
        r = radii[obj]
        for _ in range(attempts):
            x = rng.uniform(-hx + r, hx - r)
            y = rng.uniform(-hy + r, hy - r)
            if all(
                math.hypot(x - px, y - py) >= r + radii[other]
                for other, (px, py) in positions.items()
            ):
                positions[obj] = (x, y)
                break
        else:
            raise GroundingError(f"random placement failed for {obj!r}")
    return Configuration(positions, {o: 0 for o in objects})


def _uniform_inreach_steps(
    scene: SceneState,
    config: Configuration,
    order: list[str],
    rng: np.random.Generator,
    params: FeasibilityParams,
) -> list[PlanStep]:
    """Plan steps whose unload stands are uniform draws over band cells
    within arm's reach of each unload point (any side, no feasibility
    analysis). Navigation legs are filled in by the shared walker."""
    nav = navigator_for(scene)
    table = scene.table(TARGET_TABLE)
    locations = symbolic_locations(scene, TARGET_TABLE)
    steps: list[PlanStep] = []
    for obj in order:
        tx, ty = config.positions[obj]
        target = table.to_world(tx, ty)
        candidates: list[tuple[SymbolicLocation, tuple[int, int], tuple[float, float]]] = []
        for loc in locations:
            centers = loc.cell_centers()
            rows, cols = loc.dims
            for rr in range(rows):
                for cc in range(cols):
                    cx, cy = centers[rr, cc]
                    if math.hypot(cx - target[0], cy - target[1]) <= params.reach_radius:
                        candidates.append((loc, (rr, cc), (cx, cy)))
        if not candidates:
            raise PlanningError(f"no band cell within reach of {obj!r} target")
        loc, cell, point = candidates[int(rng.integers(len(candidates)))]
        pose = Pose2D(
            point[0], point[1], math.atan2(target[1] - point[1], target[0] - point[0])
        )
        steps.append(
            PlanStep(
                object_id=obj,
                source_table=scene.object(obj).initial_location,
                load_pose=Pose2D(0, 0),  # filled by _route_steps
                load_cell=(0, 0),
                unload_location=loc.id,
                unload_pose=pose,
                unload_cell=nav.cell_of(pose.x, pose.y),
                target_world=target,
                target_layer=config.layers[obj],
                fea_task=0.0,
                fea_stand=0.0,
                leg_to_load=0.0,
                leg_to_unload=0.0,
            )
        )
    return steps


def _route_steps(scene: SceneState, steps: list[PlanStep]) -> tuple[list[PlanStep], bool]:
    """Fill loading stands and explicit paths for externally built steps.

    Loading stands use the same nearest-free-band-cell rule as the main
    planner. When a leg cannot be connected (stand blocked or unreachable)
    the routed prefix is returned together with a truncation flag, so the
    failure shows up as a navigation breakdown at execution time rather
    than as a refusal to plan.
    """
    nav = navigator_for(scene)
    start_cell = nav.cell_of(*scene.robot_pose.xy)
    start_comp = nav.component(start_cell)
    bands: dict[str, BandIndex] = {}
    routed: list[PlanStep] = []
    prev_cell = start_cell
    prev_point = scene.robot_pose.xy
    for step in steps:
        src = step.source_table
        if src not in bands:
            bands[src] = BandIndex(nav, symbolic_locations(scene, src))
        found = bands[src].nearest_free(prev_point, start_comp)
        if found is None:
            return routed, True
        _, _, load_point = found
        load_cell = nav.cell_of(*load_point)
        obj_world = scene.table(src).to_world(*scene.object(step.object_id).initial_position)  # type: ignore[misc]
        step.load_pose = Pose2D(
            load_point[0],
            load_point[1],
            math.atan2(obj_world[1] - load_point[1], obj_world[0] - load_point[0]),
        )
        step.load_cell = load_cell
        try:
            p1 = nav.astar(prev_cell, load_cell) if prev_cell != load_cell else None
            p2 = nav.astar(load_cell, step.unload_cell)
        except MotionError:
            return routed, True
        step.path_to_load = p1
        step.path_to_unload = p2
        step.leg_to_load = p1.cost if p1 else 0.0
        step.leg_to_unload = p2.cost
        routed.append(step)
        prev_cell = step.unload_cell
        prev_point = (step.unload_pose.x, step.unload_pose.y)
    return routed, False


def _baseline_plan(
    scene: SceneState,
    config: Configuration,
    order: list[str],
    rng: np.random.Generator,
    params: FeasibilityParams,
) -> SelectedPlan:
    steps = _uniform_inreach_steps(scene, config, order, rng, params)
    steps, truncated = _route_steps(scene, steps)
    cost = sum(s.leg_to_load + s.leg_to_unload for s in steps)
    cost += MANIPULATION_COST * 2 * len(steps)
    return SelectedPlan(
        config_index=0,
        plan_index=0,
        order=tuple(order),
        sides=tuple(s.unload_location.split("/")[1] for s in steps),
        configuration=config,
        steps=steps,
        feasibility=0.0,  # baselines do not estimate feasibility
        cost=cost,
        utility=0.0,
        search_cost=cost,
        search_utility=0.0,
        candidates_evaluated=1,
        truncated=truncated,
    )


@dataclass
class _TrialPlan:
    plan: SelectedPlan | None
    goal_attempts: int | None
    failure: str | None = None


def _plan_llm_grop(
    scene: SceneState, goal: GeneratedGoal, config: ExperimentConfig, trial: int
) -> _TrialPlan:
    radii = _radii(scene)
    table = scene.table(TARGET_TABLE)
    grng = _trial_rng(config, "llm_grop", trial, 0)
    grounding = sample_configurations(
        goal,
        radii,
        table.half_extents,
        grng,
        GroundingParams(configurations=config.configurations),
    )
    params = PlanningParams(feasibility=config.feasibility, stand_seed=trial)
    plan = plan_task(scene, TARGET_TABLE, grounding.configurations, goal.atoms, params)
    return _TrialPlan(plan, goal.attempts)


def _plan_latp(
    scene: SceneState, goal: GeneratedGoal, config: ExperimentConfig, trial: int
) -> _TrialPlan:
    nominal = nominal_layout(goal)
    order = goal_objects(goal.atoms)
    rng = _trial_rng(config, "latp", trial, 2)
    plan = _baseline_plan(scene, nominal, order, rng, config.feasibility)
    return _TrialPlan(plan, goal.attempts)


def _plan_tpra(scene: SceneState, config: ExperimentConfig, trial: int) -> _TrialPlan:
    order = [o.id for o in scene.objects]
    rng = _trial_rng(config, "tpra", trial, 2)
    placement = _random_configuration(scene, order, rng)
    plan = _baseline_plan(scene, placement, order, rng, config.feasibility)
    return _TrialPlan(plan, None)


def _plan_grop(scene: SceneState, config: ExperimentConfig, trial: int) -> _TrialPlan:
    order = [o.id for o in scene.objects]
    rng = _trial_rng(config, "grop", trial, 2)
    placement = _random_configuration(scene, order, rng)
    params = PlanningParams(feasibility=config.feasibility, stand_seed=trial)
    plan = plan_task(scene, TARGET_TABLE, [placement], [], params)
    return _TrialPlan(plan, None)


def run_trial(
    scene: SceneState,
    system: str,
    goal: GeneratedGoal,
    config: ExperimentConfig,
    trial: int,
) -> TrialRecord:
    """One planning + execution episode for one system."""
    try:
        if system == "llm_grop":
            tp = _plan_llm_grop(scene, goal, config, trial)
        elif system == "latp":
            tp = _plan_latp(scene, goal, config, trial)
        elif system == "tpra":
            tp = _plan_tpra(scene, config, trial)
        elif system == "grop":
            tp = _plan_grop(scene, config, trial)
        else:
            raise ValueError(f"unknown system {system!r}")
    except (PlanningError, GroundingError, MotionError) as exc:
        log.warning("%s trial %d could not plan: %s", system, trial, exc)
        return TrialRecord(
            system=system,
            trial=trial,
            completed=False,
            verified=False,
            success=False,
            satisfaction=0.0,
            executed_cost=0.0,
            planned_cost=None,
            planned_feasibility=None,
            planned_utility=None,
            objects_delivered=0,
            failure_kind="planning",
            goal_attempts=None,
        )
    plan = tp.plan
    assert plan is not None
    xrng = _trial_rng(config, system, trial, 1)
    result: ExecutionResult = execute_plan(scene, plan, xrng, config.feasibility)
    completed = result.success and not plan.truncated
    table = scene.table(TARGET_TABLE)
    verified = completed and verify_goal(
        table, goal.atoms, result.final_positions, result.final_layers
    )
    satisfaction = relation_satisfaction(
        table, goal.atoms, result.final_positions, result.final_layers
    )
    failure = result.failure_kind
    if result.success and plan.truncated:
        # The routable prefix ran clean but the next leg had no path.
        failure = NAVIGATION
    elif completed and not verified:
        failure = "verification"
    return TrialRecord(
        system=system,
        trial=trial,
        completed=completed,
        verified=verified,
        success=verified,
        satisfaction=satisfaction,
        executed_cost=result.executed_cost,
        planned_cost=plan.cost,
        planned_feasibility=plan.feasibility if system in ("llm_grop", "grop") else None,
        planned_utility=plan.utility if system in ("llm_grop", "grop") else None,
        objects_delivered=result.objects_delivered,
        failure_kind=failure,
        goal_attempts=tp.goal_attempts,
    )


# ---------------------------------------------------------------------------
# Experiment driver


def run_experiment(
    config: ExperimentConfig,
    backend=None,
    log_path: str | Path | None = None,
) -> dict:
    """Run every (system, trial) episode and aggregate a report dict.

    The report contains only deterministic content (no timestamps, sorted
    serialization) so identical configs produce identical bytes.
    """
    scene = make_scene(config.task, config.environment, config.seed)
    backend = backend or scripted_backend_for_task(config.task)
    goal = generate_goal(list(TASK_OBJECTS[config.task]), backend)
    records: list[TrialRecord] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for system in config.systems:
            for trial in range(config.trials):
                record = run_trial(scene, system, goal, config, trial)
                records.append(record)
                if log_fh:
                    log_fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    finally:
        if log_fh:
            log_fh.close()
    return build_report(config, goal, records)


def build_report(
    config: ExperimentConfig, goal: GeneratedGoal, records: list[TrialRecord]
) -> dict:
    by_system: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_system.setdefault(r.system, []).append(r)
    aggregates = {}
    for system, rows in by_system.items():
        n = len(rows)
        successes = [r for r in rows if r.success]
        completed = [r for r in rows if r.completed]
        failure_counts: dict[str, int] = {}
        for r in rows:
            if r.failure_kind:
                failure_counts[r.failure_kind] = failure_counts.get(r.failure_kind, 0) + 1
        aggregates[system] = {
            "trials": n,
            "success_rate": _round(len(successes) / n) if n else None,
            "completion_rate": _round(len(completed) / n) if n else None,
            "mean_satisfaction": _round(float(np.mean([r.satisfaction for r in rows]))) if rows else None,
            "mean_cost_all": _round(float(np.mean([r.executed_cost for r in rows]))) if rows else None,
            "mean_cost_success": (
                _round(float(np.mean([r.executed_cost for r in successes])))
                if successes
                else None
            ),
            "failures": dict(sorted(failure_counts.items())),
        }
    return {
        "version": __version__,
        "config": config.to_dict(),
        "goal": {
            "atoms": [str(a) for a in goal.atoms],
            "distances_m": {str(k): _round(v) for k, v in goal.distances_m.items()},
            "attempts": goal.attempts,
        },
        "aggregates": aggregates,
        "trials": [r.to_dict() for r in records],
    }


def dump_report(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(report, fh, sort_keys=True, default_flow_style=False)


def report_bytes(report: dict) -> bytes:
    return yaml.safe_dump(report, sort_keys=True, default_flow_style=False).encode("utf-8")
