#!/usr/bin/env python3
"""Regenerate the bundled language-model response scripts.

Each benchmark task ships a YAML script mapping prompt hashes to canned
responses so the pipeline runs offline and deterministically. This tool
replays a planned conversation through the real goal-generation loop, so
the recorded hashes always match the prompts the package renders (including
feedback re-prompts).

Run from the repository root:

    python3 scripts/gen_llm_fixtures.py
"""
from __future__ import annotations

import sys
from pathlib import Path

import yaml

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from momaplan.goalgen import (  # noqa: E402
    generate_goal,
    prompt_key,
    render_distance_prompt,
)
from momaplan.harness import TASK_OBJECTS  # noqa: E402
from momaplan.relations import PlacementAtom  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "momaplan" / "fixtures" / "llm"


class Recorder:
    """Backend that replays a planned conversation while recording every
    prompt/response pair."""

    def __init__(self, goal_responses: list[str], distance_answers: dict[str, str]):
        self.goal_queue = list(goal_responses)
        self.distance_answers = distance_answers
        self.recorded: dict[str, str] = {}
        self.prompts: dict[str, str] = {}

    def complete(self, prompt: str, attempt: int = 0) -> str:
        if prompt in self.distance_answers:
            response = self.distance_answers[prompt]
        else:
            if not self.goal_queue:
                raise RuntimeError(f"no planned response for prompt:\n{prompt}")
            response = self.goal_queue.pop(0)
        key = prompt_key(prompt)
        self.recorded[key] = response
        self.prompts[key] = prompt
        return response


def lines(*items: str) -> str:
    return "\n".join(f"{i + 1}. {text}" for i, text in enumerate(items))


# Planned conversations. Each entry: goal responses in attempt order, plus
# per-atom distance answers keyed by (relation, subject, reference).
PLANS: dict[int, dict] = {
    1: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the dinner fork goes to the left of the dinner plate",
                "the dinner knife goes to the right of the dinner plate",
            )
        ],
        "distances": {
            ("left_of", "dinner_fork", "dinner_plate"): "5-7 centimeters",
            ("right_of", "dinner_knife", "dinner_plate"): "6 centimeters",
        },
    },
    2: {
        "goal": [
            lines(
                "the bread plate goes in the center of the table",
                "the water cup goes above and to the right of the bread plate",
                "the bread goes on top of the bread plate",
            )
        ],
        "distances": {
            ("above_right", "water_cup", "bread_plate"): "about 8 centimeters",
        },
    },
    3: {
        "goal": [
            lines(
                "the mug mat goes in the center of the table",
                "the mug goes on top of the mug mat",
                "the bread plate goes to the left of the mug mat",
            )
        ],
        "distances": {
            ("left_of", "bread_plate", "mug_mat"): "10 centimeters",
        },
    },
    4: {
        # First answer contradicts itself; the corrected one arrives after
        # the feedback re-prompt.
        "goal": [
            lines(
                "the fruit bowl goes in the center of the table",
                "the mug goes to the right of the fruit bowl",
                "the mug goes to the left of the fruit bowl",
                "the strawberry goes on top of the fruit bowl",
            ),
            lines(
                "the fruit bowl goes in the center of the table",
                "the mug goes to the right of the fruit bowl",
                "the strawberry goes on top of the fruit bowl",
            ),
        ],
        "distances": {
            ("right_of", "mug", "fruit_bowl"): "9 centimeters",
        },
    },
    5: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the mug goes above and to the right of the dinner plate",
                "the mug lid goes on top of the mug",
            )
        ],
        "distances": {
            ("above_right", "mug", "dinner_plate"): "8 centimeters",
        },
    },
    6: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the dinner fork goes to the left of the dinner plate",
                "the mug goes above and to the right of the dinner plate",
                "the mug lid goes on top of the mug",
            )
        ],
        "distances": {
            ("left_of", "dinner_fork", "dinner_plate"): "6 centimeters",
            ("above_right", "mug", "dinner_plate"): "8 centimeters",
        },
    },
    7: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the dinner fork goes to the left of the dinner plate",
                "the dinner knife goes to the right of the dinner plate",
                "the strawberry goes above the dinner plate",
            )
        ],
        "distances": {
            ("left_of", "dinner_fork", "dinner_plate"): "6 centimeters",
            ("right_of", "dinner_knife", "dinner_plate"): "6 centimeters",
            ("above", "strawberry", "dinner_plate"): "7 centimeters",
        },
    },
    8: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the dinner fork goes to the left of the dinner plate",
                "the dinner knife goes to the right of the dinner plate",
                "the mug goes above and to the right of the dinner plate",
                "the mug lid goes on top of the mug",
            )
        ],
        "distances": {
            ("left_of", "dinner_fork", "dinner_plate"): "6 centimeters",
            ("right_of", "dinner_knife", "dinner_plate"): "6 centimeters",
            ("above_right", "mug", "dinner_plate"): "8 centimeters",
        },
    },
    9: {
        "goal": [
            lines(
                "the dinner plate goes in the center of the table",
                "the dinner fork goes to the left of the dinner plate",
                "the dinner knife goes to the right of the dinner plate",
                "the water cup goes above and to the right of the dinner plate",
                "the strawberry goes above and to the left of the dinner plate",
            )
        ],
        "distances": {
            ("left_of", "dinner_fork", "dinner_plate"): "6 centimeters",
            ("right_of", "dinner_knife", "dinner_plate"): "6 centimeters",
            ("above_right", "water_cup", "dinner_plate"): "8 centimeters",
            ("above_left", "strawberry", "dinner_plate"): "7 centimeters",
        },
    },
}


def build_task(task: int) -> dict:
    plan = PLANS[task]
    distance_answers = {
        render_distance_prompt(PlacementAtom(rel, sub, ref)): answer
        for (rel, sub, ref), answer in plan["distances"].items()
    }
    recorder = Recorder(plan["goal"], distance_answers)
    goal = generate_goal(list(TASK_OBJECTS[task]), recorder)
    if recorder.goal_queue:
        raise RuntimeError(f"task {task}: {len(recorder.goal_queue)} planned responses unused")
    expected_attempts = len(plan["goal"])
    if goal.attempts != expected_attempts:
        raise RuntimeError(
            f"task {task}: expected {expected_attempts} attempts, got {goal.attempts}"
        )
    return {
        "format_version": 1,
        "task": task,
        "objects": list(TASK_OBJECTS[task]),
        "responses": recorder.recorded,
        "prompts": recorder.prompts,
    }


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for task in sorted(PLANS):
        doc = build_task(task)
        path = OUT_DIR / f"task{task}.yaml"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "# Canned language-model responses for benchmark task "
                f"{task} ({', '.join(doc['objects'])}).\n"
                "# Generated by scripts/gen_llm_fixtures.py; keys are "
                "sha256(prompt)[:16].\n"
            )
            yaml.safe_dump(doc, fh, sort_keys=True, default_flow_style=False, width=100)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
