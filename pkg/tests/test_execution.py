import numpy as np
import pytest

from momaplan.execution import (
    MANIPULATION,
    NAVIGATION,
    execute_plan,
    relation_satisfaction,
    verify_goal,
)
from momaplan.feasibility import FeasibilityParams
from momaplan.grounding import GroundingParams, sample_configurations
from momaplan.harness import OBJECT_CATALOG, make_scene
from momaplan.planning import PlanningParams, plan_task
from momaplan.relations import PlacementAtom

RADII = {name: spec[0] for name, spec in OBJECT_CATALOG.items()}

FAST_FEA = FeasibilityParams(trials_per_cell=3, task_draws=10)


@pytest.fixture(scope="module")
def plan1(goal1):
    scene = make_scene(1, "easy", seed=42)
    table = scene.table("dining")
    configs = sample_configurations(
        goal1,
        RADII,
        table.half_extents,
        np.random.default_rng(0),
        GroundingParams(configurations=3),
    ).configurations
    plan = plan_task(scene, "dining", configs, goal1.atoms, PlanningParams(feasibility=FAST_FEA))
    return scene, plan


def _run_until_success(scene, plan, params=FAST_FEA, tries=50):
    for seed in range(tries):
        result = execute_plan(scene, plan, np.random.default_rng(seed), params)
        if result.success:
            return result
    raise AssertionError(f"no successful run in {tries} tries")


def test_successful_run_costs_exactly_the_plan(plan1):
    scene, plan = plan1
    result = _run_until_success(scene, plan)
    assert result.executed_cost == pytest.approx(plan.cost)
    assert result.objects_delivered == len(plan.steps)
    assert result.failure_kind is None
    assert result.failed_object is None
    # Two trace entries per step, all marked ok.
    assert len(result.trace) == 2 * len(plan.steps)
    assert all(t.ok for t in result.trace)


def test_delivered_objects_land_exactly_on_target(plan1):
    scene, plan = plan1
    result = _run_until_success(scene, plan)
    for step in plan.steps:
        assert result.final_positions[step.object_id] == step.target_world
        assert result.final_layers[step.object_id] == step.target_layer


def test_successful_run_verifies_goal(plan1, goal1):
    scene, plan = plan1
    result = _run_until_success(scene, plan)
    table = scene.table("dining")
    assert verify_goal(table, goal1.atoms, result.final_positions, result.final_layers)
    assert relation_satisfaction(
        table, goal1.atoms, result.final_positions, result.final_layers
    ) == 1.0


def test_successful_runs_verify_goal_in_bulk(plan1, goal1):
    """Placement on success is exact, so goal verification should hold for
    essentially every successful run, not just a lucky one."""
    scene, plan = plan1
    table = scene.table("dining")
    successes = 0
    verified = 0
    for seed in range(100):
        result = execute_plan(scene, plan, np.random.default_rng(seed), FAST_FEA)
        if not result.success:
            continue
        successes += 1
        if verify_goal(table, goal1.atoms, result.final_positions, result.final_layers):
            verified += 1
    assert successes >= 30
    assert verified >= 0.95 * successes


def test_execution_is_deterministic_per_seed(plan1):
    scene, plan = plan1
    a = execute_plan(scene, plan, np.random.default_rng(5), FAST_FEA)
    b = execute_plan(scene, plan, np.random.default_rng(5), FAST_FEA)
    assert a.success == b.success
    assert a.executed_cost == b.executed_cost
    assert [(t.arrival.x, t.arrival.y) for t in a.trace] == [
        (t.arrival.x, t.arrival.y) for t in b.trace
    ]


def test_huge_arrival_noise_fails_navigation(plan1):
    scene, plan = plan1
    params = FeasibilityParams(nav_sigma_xy=1.5)
    outcomes = [
        execute_plan(scene, plan, np.random.default_rng(s), params) for s in range(30)
    ]
    failures = [r for r in outcomes if not r.success]
    assert failures, "1.5 m arrival noise should sink most runs"
    assert any(r.failure_kind == NAVIGATION for r in failures)
    for r in failures:
        assert r.failure_kind in (NAVIGATION, MANIPULATION)
        assert r.failed_object is not None
        assert r.objects_delivered < len(plan.steps)


def test_tiny_reach_fails_manipulation(plan1):
    scene, plan = plan1
    params = FeasibilityParams(reach_radius=0.05)
    result = execute_plan(scene, plan, np.random.default_rng(0), params)
    assert not result.success
    assert result.failure_kind == MANIPULATION
    assert result.failed_stage == "unload"
    assert result.objects_delivered == 0


def test_run_halts_at_first_failure(plan1):
    scene, plan = plan1
    params = FeasibilityParams(reach_radius=0.05)
    result = execute_plan(scene, plan, np.random.default_rng(1), params)
    # Nothing after the failing step may appear in the trace.
    assert not result.trace[-1].ok
    assert all(t.ok for t in result.trace[:-1])
    failed_idx = [s.object_id for s in plan.steps].index(result.failed_object)
    assert result.objects_delivered == failed_idx
    # Undelivered objects never move off their source tables.
    for step in plan.steps[failed_idx:]:
        src = scene.table(step.source_table)
        spec = scene.object(step.object_id)
        assert result.final_positions[step.object_id] == pytest.approx(
            src.to_world(*spec.initial_position)
        )


def test_failed_run_cost_counts_only_traveled_legs(plan1):
    scene, plan = plan1
    params = FeasibilityParams(reach_radius=0.05)
    result = execute_plan(scene, plan, np.random.default_rng(2), params)
    assert result.failure_kind == MANIPULATION
    first = plan.steps[0]
    # Reached the load spot (leg + load charge) and drove to the unload spot,
    # then the reach check failed before the unload charge.
    assert result.executed_cost == pytest.approx(
        first.leg_to_load + 0.5 + first.leg_to_unload
    )


def test_verify_goal_tolerance():
    table = make_scene(1, "easy", seed=0).table("dining")
    atoms = [PlacementAtom("left_of", "a", "b")]
    base = table.to_world(0.0, 0.0)
    left = table.to_world(-0.05, 0.0)
    positions = {"a": left, "b": base}
    layers = {"a": 0, "b": 0}
    assert verify_goal(table, atoms, positions, layers)
    assert not verify_goal(table, atoms, {"a": base, "b": left}, layers)
    assert relation_satisfaction(table, atoms, {"a": base, "b": left}, layers) == 0.0
    assert relation_satisfaction(table, [], positions, layers) == 1.0


def test_partial_satisfaction_fraction():
    table = make_scene(1, "easy", seed=0).table("dining")
    atoms = [
        PlacementAtom("left_of", "a", "b"),
        PlacementAtom("above", "a", "b"),
    ]
    positions = {"a": table.to_world(-0.05, 0.0), "b": table.to_world(0.0, 0.0)}
    layers = {"a": 0, "b": 0}
    assert relation_satisfaction(table, atoms, positions, layers) == 0.5
