"""Empirical standing-spot feasibility for unloading objects onto a table.

For one symbolic standing location (a band of 8 x 24 cells of 0.1 m beside
a table side) and one unload point on the table, every cell gets a success
probability estimated by repeated simulated trials. A trial succeeds when

* navigation works: the cell is reachable from the robot's start on the
  inflated grid, and a noisy arrival position keeps the robot's disc clear
  of all furniture, and
* manipulation works: the arrival position is within arm's reach of the
  unload point and the straight reach line crosses nothing except the
  table being loaded.

The per-cell trial noise comes from a seed sequence derived from the scene
seed, the location, the unload point and the trial parameters, with one
child stream per cell. Recomputing a map for the same inputs therefore
reproduces it bit for bit, cells are statistically independent, and maps
are cached per scene instance.

Two summary quantities feed planning: the per-cell probability itself for
a concrete standing cell, and the expected probability under
probability-weighted standing-cell sampling for a whole unload task,
estimated from a fixed number of draws.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from weakref import WeakKeyDictionary

import numpy as np

from .geometry import segments_hit_rect
from .motion import navigator_for, robot_collides_batch
from .world import Pose2D, SceneState, SymbolicLocation

log = logging.getLogger(__name__)

Cell = tuple[int, int]


@dataclass(frozen=True)
class FeasibilityParams:
    trials_per_cell: int = 5
    # Std dev of the Gaussian arrival error around a commanded standing cell.
    nav_sigma_xy: float = 0.01
    nav_sigma_theta: float = 0.10
    reach_radius: float = 0.80
    # Standing-pose draws used to estimate whole-task feasibility.
    task_draws: int = 25

    def fingerprint(self) -> tuple[int, ...]:
        return (
            self.trials_per_cell,
            int(round(self.nav_sigma_xy * 1e9)),
            int(round(self.nav_sigma_theta * 1e9)),
            int(round(self.reach_radius * 1e9)),
            self.task_draws,
        )


@dataclass(frozen=True)
class FeasibilityMap:
    location_id: str
    target: tuple[float, float]  # unload point, world frame
    values: np.ndarray  # (rows, cols) success probabilities
    params: FeasibilityParams

    def value_at(self, cell: Cell) -> float:
        return float(self.values[cell])

    @property
    def all_zero(self) -> bool:
        return not self.values.any()


def _entropy_words(scene_seed: int, location_id: str, target: tuple[float, float],
                   params: FeasibilityParams) -> list[int]:
    digest = hashlib.sha256(location_id.encode("utf-8")).digest()
    loc_word = int.from_bytes(digest[:8], "big")
    return [
        int(scene_seed),
        loc_word,
        int(round(target[0] * 1e6)) & 0xFFFFFFFFFFFF,
        int(round(target[1] * 1e6)) & 0xFFFFFFFFFFFF,
        *params.fingerprint(),
    ]


def trial_outcomes(
    scene: SceneState,
    location: SymbolicLocation,
    target: tuple[float, float],
    params: FeasibilityParams | None = None,
) -> np.ndarray:
    """Per-trial success booleans, shape (rows, cols, trials_per_cell)."""
    params = params or FeasibilityParams()
    nav = navigator_for(scene)
    rows, cols = location.dims
    n = params.trials_per_cell
    success = np.zeros((rows, cols, n), dtype=bool)

    centers = location.cell_centers()  # (rows, cols, 2)
    flat_centers = centers.reshape(-1, 2)
    robot_cell = nav.cell_of(*scene.robot_pose.xy)
    robot_comp = nav.component(robot_cell)
    comps = nav.components_at(flat_centers).reshape(rows, cols)
    reachable = comps == robot_comp

    target_arr = np.asarray(target, dtype=float)
    # Reaching over the target table itself is what unloading means; every
    # other piece of furniture blocks the reach line.
    target_table = None
    for t in scene.tables:
        if t.id == location.table_id:
            target_table = t
    blocking = [r for r in scene.solid_rects() if target_table is None or r != target_table.rect]

    root = np.random.SeedSequence(
        _entropy_words(scene.rng_seed, location.id, target, params)
    )
    for r in range(rows):
        for c in range(cols):
            if not reachable[r, c]:
                continue
            child = np.random.SeedSequence(
                entropy=root.entropy, spawn_key=(r, c)
            )
            rng = np.random.Generator(np.random.PCG64(child))
            arrivals = centers[r, c] + rng.normal(0.0, params.nav_sigma_xy, size=(n, 2))
            nav_ok = ~robot_collides_batch(scene, arrivals)
            dist = np.hypot(arrivals[:, 0] - target_arr[0], arrivals[:, 1] - target_arr[1])
            manip_ok = dist <= params.reach_radius
            if manip_ok.any():
                for rect in blocking:
                    manip_ok &= ~segments_hit_rect(arrivals, target_arr, rect)
            success[r, c] = nav_ok & manip_ok
    return success


_MAP_CACHE: "WeakKeyDictionary[SceneState, dict]" = WeakKeyDictionary()


def compute_feasibility_map(
    scene: SceneState,
    location: SymbolicLocation,
    target: tuple[float, float],
    params: FeasibilityParams | None = None,
) -> FeasibilityMap:
    """Per-cell success probabilities for one location and unload point.

    Deterministic in (scene seed, location, target, params) and cached per
    scene instance.
    """
    params = params or FeasibilityParams()
    key = (location.id, round(target[0], 6), round(target[1], 6), params)
    per_scene = _MAP_CACHE.setdefault(scene, {})
    cached = per_scene.get(key)
    if cached is not None:
        return cached
    outcomes = trial_outcomes(scene, location, target, params)
    values = outcomes.mean(axis=2)
    values.setflags(write=False)
    fmap = FeasibilityMap(location.id, (float(target[0]), float(target[1])), values, params)
    per_scene[key] = fmap
    log.debug(
        "feasibility map %s target (%.2f, %.2f): mean %.3f max %.3f",
        location.id, target[0], target[1], values.mean(), values.max(),
    )
    return fmap


def manipulation_feasibility(fmap: FeasibilityMap, cell: Cell) -> float:
    """Success probability of unloading from one concrete standing cell."""
    return fmap.value_at(cell)


def sample_standing_cell(fmap: FeasibilityMap, rng: np.random.Generator) -> Cell:
    """Draw a standing cell with probability proportional to its feasibility.

    A map with no feasible cell at all falls back to a uniform draw so a
    pose can still be proposed (and will score zero).
    """
    flat = fmap.values.ravel()
    total = flat.sum()
    if total <= 0.0:
        idx = int(rng.integers(flat.size))
    else:
        idx = int(rng.choice(flat.size, p=flat / total))
    row, col = np.unravel_index(idx, fmap.values.shape)
    return (int(row), int(col))


def standing_pose(
    location: SymbolicLocation, cell: Cell, target: tuple[float, float]
) -> Pose2D:
    """Pose at a band cell center, facing the unload point."""
    x, y = location.cell_center(*cell)
    return Pose2D(x, y, float(np.arctan2(target[1] - y, target[0] - x)))


def task_feasibility(
    fmap: FeasibilityMap, rng: np.random.Generator, draws: int | None = None
) -> float:
    """Mean cell feasibility over repeated weighted standing draws."""
    draws = draws or fmap.params.task_draws
    vals = [fmap.value_at(sample_standing_cell(fmap, rng)) for _ in range(draws)]
    return float(np.mean(vals))


def expected_task_feasibility(fmap: FeasibilityMap) -> float:
    """Closed form of what task_feasibility estimates: the mean of the cell
    probability under probability-weighted sampling, sum(h^2) / sum(h)."""
    flat = fmap.values.ravel()
    total = flat.sum()
    if total <= 0.0:
        return 0.0
    return float((flat * flat).sum() / total)


# ---------------------------------------------------------------------------
# Bulk dataset generation


DATASET_DTYPE = np.dtype(
    [
        ("task", np.int32),
        ("location", "U32"),
        ("target_x", np.float64),
        ("target_y", np.float64),
        ("row", np.int16),
        ("col", np.int16),
        ("trial", np.int16),
        ("success", np.bool_),
    ]
)


def build_feasibility_dataset(
    scene: SceneState,
    locations: list[SymbolicLocation],
    n_tasks: int = 100,
    params: FeasibilityParams | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Simulated unload-trial records for randomly drawn unload tasks.

    Each task picks one standing band and one unload point uniformly on that
    band's table top, then records every per-cell trial outcome. The result
    is a structured array of n_tasks * rows * cols * trials_per_cell rows.
    """
    params = params or FeasibilityParams()
    rng = np.random.default_rng(seed)
    chunks: list[np.ndarray] = []
    for task in range(n_tasks):
        location = locations[int(rng.integers(len(locations)))]
        table = scene.table(location.table_id)
        hx, hy = table.half_extents
        margin = 0.02
        tx = table.center[0] + rng.uniform(-hx + margin, hx - margin)
        ty = table.center[1] + rng.uniform(-hy + margin, hy - margin)
        outcomes = trial_outcomes(scene, location, (tx, ty), params)
        rows, cols, trials = outcomes.shape
        block = np.empty(rows * cols * trials, dtype=DATASET_DTYPE)
        rr, cc, tt = np.meshgrid(
            np.arange(rows), np.arange(cols), np.arange(trials), indexing="ij"
        )
        block["task"] = task
        block["location"] = location.id
        block["target_x"] = tx
        block["target_y"] = ty
        block["row"] = rr.ravel()
        block["col"] = cc.ravel()
        block["trial"] = tt.ravel()
        block["success"] = outcomes.ravel()
        chunks.append(block)
    return np.concatenate(chunks)
