import numpy as np
import pytest
import yaml

from momaplan.feasibility import FeasibilityParams
from momaplan.harness import (
    ENVIRONMENTS,
    SYSTEMS,
    TASK_OBJECTS,
    ExperimentConfig,
    build_report,
    dump_report,
    make_scene,
    report_bytes,
    run_experiment,
    run_trial,
    scripted_backend_for_task,
)

FAST = FeasibilityParams(trials_per_cell=3, task_draws=10)


def fast_config(**overrides):
    base = dict(task=1, environment="easy", trials=2, seed=42, configurations=2, feasibility=FAST)
    base.update(overrides)
    return ExperimentConfig(**base)


def test_make_scene_rejects_bad_inputs():
    with pytest.raises(ValueError, match="unknown task"):
        make_scene(99)
    with pytest.raises(ValueError, match="unknown environment"):
        make_scene(1, "zero_g")


def test_scene_composition():
    for task, objects in TASK_OBJECTS.items():
        scene = make_scene(task, "easy", seed=task)
        assert tuple(o.id for o in scene.objects) == objects
        assert {t.id for t in scene.tables} == {"dining", "side_left", "side_right"}
        assert scene.obstacles == ()
    # Objects alternate between the two pickup tables in listed order.
    scene = make_scene(1, "easy", seed=0)
    sides = [o.initial_location for o in scene.objects]
    assert sides == ["side_left", "side_right", "side_left"]


def test_chair_environments_place_one_chair():
    top = make_scene(1, "chair_top", seed=0)
    assert len(top.obstacles) == 1
    assert top.obstacles[0].center[1] > 0
    bottom = make_scene(1, "chair_bottom", seed=0)
    assert bottom.obstacles[0].center[1] < 0
    # The random environment derives the chair side from the seed alone.
    sides = {tuple(make_scene(1, "random", seed=s).obstacles[0].center) for s in range(12)}
    assert len(sides) > 1
    again = make_scene(1, "random", seed=3)
    assert make_scene(1, "random", seed=3).obstacles == again.obstacles


def test_config_from_yaml_roundtrip(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "task": 4,
                "environment": "chair_top",
                "systems": ["llm_grop", "tpra"],
                "trials": 7,
                "seed": 3,
                "configurations": 5,
                "feasibility": {"trials_per_cell": 2},
            }
        )
    )
    config = ExperimentConfig.from_yaml(path)
    assert config.task == 4
    assert config.environment == "chair_top"
    assert config.systems == ("llm_grop", "tpra")
    assert config.trials == 7
    assert config.feasibility.trials_per_cell == 2
    assert config.feasibility.reach_radius == FeasibilityParams().reach_radius


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("task: 1\nworkers: 4\n")
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_yaml(path)


@pytest.fixture(scope="module")
def trial_setup(goal1):
    config = fast_config()
    scene = make_scene(config.task, config.environment, config.seed)
    return scene, goal1, config


@pytest.mark.parametrize("system", SYSTEMS)
def test_run_trial_each_system(trial_setup, system):
    scene, goal, config = trial_setup
    record = run_trial(scene, system, goal, config, trial=0)
    assert record.system == system
    assert record.trial == 0
    assert 0.0 <= record.satisfaction <= 1.0
    assert record.executed_cost >= 0.0
    assert record.objects_delivered <= len(scene.objects)
    if system in ("llm_grop", "grop"):
        assert record.planned_feasibility is not None
        assert record.planned_utility is not None
    else:
        assert record.planned_feasibility is None
        assert record.planned_utility is None
    if record.success:
        assert record.completed and record.verified
        assert record.failure_kind is None
    else:
        assert record.failure_kind is not None


def test_trial_is_deterministic(trial_setup):
    scene, goal, config = trial_setup
    a = run_trial(scene, "llm_grop", goal, config, trial=1)
    b = run_trial(scene, "llm_grop", goal, config, trial=1)
    assert a == b
    c = run_trial(scene, "llm_grop", goal, config, trial=2)
    assert (a.executed_cost, a.planned_cost) != (c.executed_cost, c.planned_cost)


def test_unreachable_baseline_stand_becomes_navigation_failure(goal1):
    """Chair blocks the north band: a baseline that drew a stand there must
    report a navigation failure, not a planning refusal."""
    config = fast_config(environment="chair_top", trials=8)
    scene = make_scene(config.task, config.environment, config.seed)
    records = [run_trial(scene, "latp", goal1, config, t) for t in range(config.trials)]
    kinds = {r.failure_kind for r in records if not r.success}
    assert "planning" not in kinds
    truncated = [r for r in records if r.failure_kind == "navigation"]
    assert truncated, "some uniform draws should land behind the chair"
    for r in truncated:
        assert not r.completed and not r.success


def test_run_experiment_report_layout(tmp_path):
    config = fast_config(systems=("llm_grop", "tpra"))
    log_path = tmp_path / "trials.jsonl"
    report = run_experiment(config, log_path=log_path)
    assert set(report) == {"version", "config", "goal", "aggregates", "trials"}
    assert set(report["aggregates"]) == {"llm_grop", "tpra"}
    assert len(report["trials"]) == 2 * config.trials
    for system, agg in report["aggregates"].items():
        assert agg["trials"] == config.trials
    lines = log_path.read_text().splitlines()
    assert len(lines) == len(report["trials"])
    import json

    assert [json.loads(l) for l in lines] == report["trials"]


def test_report_bytes_reproducible(tmp_path):
    config = fast_config(trials=1, systems=("llm_grop",))
    a = report_bytes(run_experiment(config))
    b = report_bytes(run_experiment(config))
    assert a == b
    out = tmp_path / "report.yaml"
    dump_report(run_experiment(config), out)
    assert out.read_bytes() == a
    parsed = yaml.safe_load(a)
    assert parsed["config"]["task"] == 1


def test_build_report_aggregates():
    from momaplan.harness import TrialRecord

    def rec(system, trial, success, cost, satisfaction, failure=None):
        return TrialRecord(
            system=system,
            trial=trial,
            completed=success,
            verified=success,
            success=success,
            satisfaction=satisfaction,
            executed_cost=cost,
            planned_cost=cost,
            planned_feasibility=None,
            planned_utility=None,
            objects_delivered=3 if success else 1,
            failure_kind=failure,
            goal_attempts=1,
        )

    records = [
        rec("latp", 0, True, 10.0, 1.0),
        rec("latp", 1, False, 4.0, 0.5, failure="navigation"),
        rec("latp", 2, False, 2.0, 0.0, failure="navigation"),
    ]
    from momaplan.goalgen import GeneratedGoal
    from momaplan.relations import PlacementAtom

    goal = GeneratedGoal([PlacementAtom("centered_on_table", "a")], {}, attempts=1)
    report = build_report(fast_config(), goal, records)
    agg = report["aggregates"]["latp"]
    assert agg["trials"] == 3
    assert agg["success_rate"] == pytest.approx(1 / 3)
    assert agg["completion_rate"] == pytest.approx(1 / 3)
    assert agg["mean_satisfaction"] == pytest.approx(0.5)
    assert agg["mean_cost_all"] == pytest.approx(16.0 / 3)
    assert agg["mean_cost_success"] == pytest.approx(10.0)
    assert agg["failures"] == {"navigation": 2}
    assert report["goal"]["atoms"] == ["centered_on_table(a)"]


def test_environments_roster():
    assert ENVIRONMENTS == ("easy", "chair_top", "chair_bottom", "random")
    assert SYSTEMS == ("llm_grop", "latp", "tpra", "grop")
    backend = scripted_backend_for_task(1)
    assert backend.responses
