"""World model: poses, furniture, movable objects, the occupancy grid and
the symbolic standing locations that flank each table.

A scene is stored on disk as a small YAML document (one ``format_version: 1``
key plus tables / obstacles / objects / robot sections) so fixtures can be
read and tweaked by hand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .geometry import Rect, wrap_angle

SCENE_FORMAT_VERSION = 1

# Fetch-class base footprint; the grid inflation and the standing bands are
# both derived from this radius.
DEFAULT_ROBOT_RADIUS = 0.3

# Standing band shared by every table side: 24 x 8 cells of 0.1 m, long axis
# parallel to the table edge, near edge pushed a little past the robot radius
# so the first row of cells is never inside the inflation ring.
BAND_CELL_SIZE = 0.1
BAND_COLS = 24
BAND_ROWS = 8
BAND_OFFSET = 0.35

SIDES = ("north", "south", "east", "west")

DEFAULT_GRID_RESOLUTION = 0.05
_GRID_MARGIN = 0.5


class SceneError(ValueError):
    """Raised when a scene file is malformed or violates a scene invariant."""


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; theta is normalized to (-pi, pi] at construction."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class TableSpec:
    """A rectangular table whose top carries movable objects."""

    id: str
    center: tuple[float, float]
    half_extents: tuple[float, float]

    @property
    def rect(self) -> Rect:
        return Rect(self.center[0], self.center[1], self.half_extents[0], self.half_extents[1])

    def to_table_frame(self, x: float, y: float) -> tuple[float, float]:
        return (x - self.center[0], y - self.center[1])

    def to_world(self, x: float, y: float) -> tuple[float, float]:
        return (x + self.center[0], y + self.center[1])


@dataclass(frozen=True)
class ObstacleSpec:
    """A static rectangle the robot must avoid but cannot place objects on."""

    id: str
    center: tuple[float, float]
    half_extents: tuple[float, float]
    kind: str = "chair"

    @property
    def rect(self) -> Rect:
        return Rect(self.center[0], self.center[1], self.half_extents[0], self.half_extents[1])


@dataclass(frozen=True)
class ObjectSpec:
    """A movable tabletop object, modeled as a disc footprint.

    ``initial_location`` names the table the object starts on.
    ``initial_position`` is the starting spot in that table's frame; it is
    assigned automatically at load time when the file leaves it out.
    """

    id: str
    footprint_radius: float
    initial_location: str
    supports_stacking: bool = False
    initial_position: tuple[float, float] | None = None


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean occupancy raster. ``occupied[iy, ix]`` covers the square whose
    lower-left corner sits at ``origin + (ix, iy) * resolution``."""

    resolution: float
    origin: tuple[float, float]
    occupied: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupied.shape  # (rows, cols)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        return (iy, ix)

    def center_of(self, cell: tuple[int, int]) -> tuple[float, float]:
        iy, ix = cell
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        iy, ix = cell
        return 0 <= iy < self.occupied.shape[0] and 0 <= ix < self.occupied.shape[1]

    def is_free(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and not bool(self.occupied[cell])


@dataclass(frozen=True)
class SymbolicLocation:
    """A standing band beside one table side.

    The band rectangle may overlap obstacles in cluttered scenes; feasibility
    analysis decides which of its cells are actually usable.
    """

    id: str
    table_id: str
    side: str
    rect: Rect
    cell_size: float = BAND_CELL_SIZE
    # (rows, cols); rows run away from the table, row 0 is nearest the edge.
    dims: tuple[int, int] = (BAND_ROWS, BAND_COLS)
    # Unit vector pointing from the table toward the band.
    outward: tuple[float, float] = (0.0, 1.0)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        rows, cols = self.dims
        if not (0 <= row < rows and 0 <= col < cols):
            raise IndexError(f"band cell ({row}, {col}) outside {rows}x{cols} region")
        ox, oy = self.outward
        # Lateral axis is the outward normal rotated +90 degrees.
        lx, ly = -oy, ox
        near = (row + 0.5) * self.cell_size
        lateral = (col + 0.5) * self.cell_size - (cols * self.cell_size) / 2.0
        # Anchor at the band edge closest to the table.
        ax = self.rect.cx - ox * self._depth_half()
        ay = self.rect.cy - oy * self._depth_half()
        return (ax + ox * near + lx * lateral, ay + oy * near + ly * lateral)

    def _depth_half(self) -> float:
        return (self.dims[0] * self.cell_size) / 2.0

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Map a point to (row, col); raises when outside the band."""
        ox, oy = self.outward
        lx, ly = -oy, ox
        ax = self.rect.cx - ox * self._depth_half()
        ay = self.rect.cy - oy * self._depth_half()
        dx, dy = x - ax, y - ay
        near = dx * ox + dy * oy
        lateral = dx * lx + dy * ly + (self.dims[1] * self.cell_size) / 2.0
        row = int(math.floor(near / self.cell_size))
        col = int(math.floor(lateral / self.cell_size))
        rows, cols = self.dims
        if not (0 <= row < rows and 0 <= col < cols):
            raise ValueError(f"point ({x:.3f}, {y:.3f}) outside band {self.id}")
        return (row, col)

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an array of shape (rows, cols, 2)."""
        rows, cols = self.dims
        out = np.empty((rows, cols, 2))
        for r in range(rows):
            for c in range(cols):
                out[r, c] = self.cell_center(r, c)
        return out


@dataclass(frozen=True, eq=False)
class SceneState:
    """Immutable snapshot of the workspace.

    ``eq=False`` keeps identity hashing so derived artifacts (inflated grids,
    reachability labels, motion cost fields) can be memoized per instance.
    """

    tables: tuple[TableSpec, ...]
    obstacles: tuple[ObstacleSpec, ...]
    objects: tuple[ObjectSpec, ...]
    robot_pose: Pose2D
    grid: OccupancyGrid
    rng_seed: int
    robot_radius: float = DEFAULT_ROBOT_RADIUS

    def table(self, table_id: str) -> TableSpec:
        for t in self.tables:
            if t.id == table_id:
                return t
        raise KeyError(f"unknown table {table_id!r}")

    def object(self, object_id: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(f"unknown object {object_id!r}")

    def solid_rects(self) -> list[Rect]:
        return [t.rect for t in self.tables] + [o.rect for o in self.obstacles]


def symbolic_locations(scene: SceneState, table_id: str) -> list[SymbolicLocation]:
    """The four standing bands flanking a table, in fixed side order.

    Sides blocked by furniture are still returned; feasibility analysis is
    the component that rules them out.
    """
    table = scene.table(table_id)
    cx, cy = table.center
    hx, hy = table.half_extents
    depth = BAND_ROWS * BAND_CELL_SIZE
    length = BAND_COLS * BAND_CELL_SIZE
    out: list[SymbolicLocation] = []
    for side in SIDES:
        if side == "north":
            outward = (0.0, 1.0)
            center = (cx, cy + hy + BAND_OFFSET + depth / 2.0)
            half = (length / 2.0, depth / 2.0)
        elif side == "south":
            outward = (0.0, -1.0)
            center = (cx, cy - hy - BAND_OFFSET - depth / 2.0)
            half = (length / 2.0, depth / 2.0)
        elif side == "east":
            outward = (1.0, 0.0)
            center = (cx + hx + BAND_OFFSET + depth / 2.0, cy)
            half = (depth / 2.0, length / 2.0)
        else:
            outward = (-1.0, 0.0)
            center = (cx - hx - BAND_OFFSET - depth / 2.0, cy)
            half = (depth / 2.0, length / 2.0)
        out.append(
            SymbolicLocation(
                id=f"{table_id}/{side}",
                table_id=table_id,
                side=side,
                rect=Rect(center[0], center[1], half[0], half[1]),
                outward=outward,
            )
        )
    return out


def location_by_id(scene: SceneState, location_id: str) -> SymbolicLocation:
    table_id, _, side = location_id.partition("/")
    for loc in symbolic_locations(scene, table_id):
        if loc.side == side:
            return loc
    raise KeyError(f"unknown symbolic location {location_id!r}")


# ---------------------------------------------------------------------------
# Rasterization


def _auto_bounds(
    tables: tuple[TableSpec, ...],
    obstacles: tuple[ObstacleSpec, ...],
    robot_pose: Pose2D,
) -> tuple[float, float, float, float]:
    xs = [robot_pose.x]
    ys = [robot_pose.y]
    rects = [t.rect for t in tables] + [o.rect for o in obstacles]
    for r in rects:
        xs += [r.x_min, r.x_max]
        ys += [r.y_min, r.y_max]
    # Bands stick out BAND_OFFSET + band depth past each table edge.
    reach = BAND_OFFSET + BAND_ROWS * BAND_CELL_SIZE
    for t in tables:
        r = t.rect
        xs += [r.x_min - reach, r.x_max + reach, r.cx - BAND_COLS * BAND_CELL_SIZE / 2, r.cx + BAND_COLS * BAND_CELL_SIZE / 2]
        ys += [r.y_min - reach, r.y_max + reach, r.cy - BAND_COLS * BAND_CELL_SIZE / 2, r.cy + BAND_COLS * BAND_CELL_SIZE / 2]
    return (
        min(xs) - _GRID_MARGIN,
        min(ys) - _GRID_MARGIN,
        max(xs) + _GRID_MARGIN,
        max(ys) + _GRID_MARGIN,
    )


def rasterize(
    tables: tuple[TableSpec, ...],
    obstacles: tuple[ObstacleSpec, ...],
    robot_pose: Pose2D,
    resolution: float = DEFAULT_GRID_RESOLUTION,
    origin: tuple[float, float] | None = None,
    shape: tuple[int, int] | None = None,
) -> OccupancyGrid:
    """Rasterize furniture onto a boolean grid.

    A cell counts as occupied when its center lies inside any table or
    obstacle rectangle (closed boundaries). Pure function of the geometry:
    rasterizing the same scene twice yields identical arrays.
    """
    if origin is None or shape is None:
        x0, y0, x1, y1 = _auto_bounds(tables, obstacles, robot_pose)
        origin = (x0, y0)
        shape = (
            int(math.ceil((y1 - y0) / resolution)),
            int(math.ceil((x1 - x0) / resolution)),
        )
    rows, cols = shape
    xs = origin[0] + (np.arange(cols) + 0.5) * resolution
    ys = origin[1] + (np.arange(rows) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    occupied = np.zeros((rows, cols), dtype=bool)
    for rect in [t.rect for t in tables] + [o.rect for o in obstacles]:
        occupied |= (
            (gx >= rect.x_min) & (gx <= rect.x_max) & (gy >= rect.y_min) & (gy <= rect.y_max)
        )
    occupied.setflags(write=False)
    return OccupancyGrid(resolution=resolution, origin=origin, occupied=occupied)


def rasterize_scene(scene: SceneState) -> OccupancyGrid:
    """Re-rasterize an existing scene at its stored grid geometry."""
    return rasterize(
        scene.tables,
        scene.obstacles,
        scene.robot_pose,
        resolution=scene.grid.resolution,
        origin=scene.grid.origin,
        shape=scene.grid.shape,
    )


# ---------------------------------------------------------------------------
# Scene assembly and validation


def _spread_objects(objects: list[ObjectSpec], tables: dict[str, TableSpec]) -> list[ObjectSpec]:
    """Assign deterministic non-overlapping start positions to objects whose
    scene entry leaves initial_position out: spaced along their table's long
    axis, ordered by declaration."""
    per_table: dict[str, list[int]] = {}
    for i, obj in enumerate(objects):
        per_table.setdefault(obj.initial_location, []).append(i)
    out = list(objects)
    for table_id, idxs in per_table.items():
        table = tables.get(table_id)
        if table is None:
            names = [objects[i].id for i in idxs]
            raise SceneError(f"objects {names} start on unknown table {table_id!r}")
        hx, hy = table.half_extents
        along_x = hx >= hy
        span = (hx if along_x else hy) * 1.4  # total spread, stays inside the top
        n = len(idxs)
        for k, i in enumerate(idxs):
            if out[i].initial_position is not None:
                continue
            offset = 0.0 if n == 1 else -span / 2.0 + span * k / (n - 1)
            pos = (offset, 0.0) if along_x else (0.0, offset)
            out[i] = replace(out[i], initial_position=pos)
    return out


def _validate(scene: SceneState) -> None:
    ids: set[str] = set()
    for spec in list(scene.tables) + list(scene.obstacles) + list(scene.objects):
        if spec.id in ids:
            raise SceneError(f"duplicate id {spec.id!r}")
        ids.add(spec.id)
    table_ids = {t.id for t in scene.tables}
    rects = [(t.id, t.rect) for t in scene.tables] + [(o.id, o.rect) for o in scene.obstacles]
    for i, (id_a, a) in enumerate(rects):
        for id_b, b in rects[i + 1 :]:
            if a.overlaps(b):
                raise SceneError(f"{id_a!r} overlaps {id_b!r}")
    for obj in scene.objects:
        if obj.footprint_radius <= 0:
            raise SceneError(f"object {obj.id!r} has non-positive footprint radius")
        if obj.initial_location not in table_ids:
            raise SceneError(
                f"object {obj.id!r} starts on unknown table {obj.initial_location!r}"
            )
        table = scene.table(obj.initial_location)
        px, py = obj.initial_position  # type: ignore[misc]
        if abs(px) > table.half_extents[0] - obj.footprint_radius or abs(py) > table.half_extents[1] - obj.footprint_radius:
            raise SceneError(f"object {obj.id!r} initial position falls off its table")
    # No two objects on the same table may start overlapping.
    for i, a in enumerate(scene.objects):
        for b in scene.objects[i + 1 :]:
            if a.initial_location != b.initial_location:
                continue
            ax, ay = a.initial_position  # type: ignore[misc]
            bx, by = b.initial_position  # type: ignore[misc]
            if math.hypot(ax - bx, ay - by) < a.footprint_radius + b.footprint_radius:
                raise SceneError(f"objects {a.id!r} and {b.id!r} start overlapping")
    # The robot must start collision free and on the grid.
    for rect in scene.solid_rects():
        if rect.distance_to(scene.robot_pose.x, scene.robot_pose.y) <= scene.robot_radius:
            raise SceneError("robot start pose collides with furniture")
    if not scene.grid.in_bounds(scene.grid.cell_of(scene.robot_pose.x, scene.robot_pose.y)):
        raise SceneError("grid does not cover the robot start pose")


def build_scene(
    tables: list[TableSpec],
    obstacles: list[ObstacleSpec],
    objects: list[ObjectSpec],
    robot_pose: Pose2D,
    rng_seed: int,
    robot_radius: float = DEFAULT_ROBOT_RADIUS,
    resolution: float = DEFAULT_GRID_RESOLUTION,
    grid_origin: tuple[float, float] | None = None,
    grid_shape: tuple[int, int] | None = None,
) -> SceneState:
    """Assemble, rasterize and validate a scene."""
    table_map = {t.id: t for t in tables}
    placed = _spread_objects(objects, table_map)
    grid = rasterize(
        tuple(tables), tuple(obstacles), robot_pose, resolution, grid_origin, grid_shape
    )
    scene = SceneState(
        tables=tuple(tables),
        obstacles=tuple(obstacles),
        objects=tuple(placed),
        robot_pose=robot_pose,
        grid=grid,
        rng_seed=int(rng_seed),
        robot_radius=robot_radius,
    )
    _validate(scene)
    return scene


# ---------------------------------------------------------------------------
# Scene files


def scene_to_dict(scene: SceneState) -> dict:
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "seed": scene.rng_seed,
        "robot": {
            "x": scene.robot_pose.x,
            "y": scene.robot_pose.y,
            "theta": scene.robot_pose.theta,
            "radius": scene.robot_radius,
        },
        "grid": {
            "resolution": scene.grid.resolution,
            "origin": list(scene.grid.origin),
            "shape": list(scene.grid.shape),
        },
        "tables": [
            {
                "id": t.id,
                "center": list(t.center),
                "half_extents": list(t.half_extents),
            }
            for t in scene.tables
        ],
        "obstacles": [
            {
                "id": o.id,
                "kind": o.kind,
                "center": list(o.center),
                "half_extents": list(o.half_extents),
            }
            for o in scene.obstacles
        ],
        "objects": [
            {
                "id": o.id,
                "footprint_radius": o.footprint_radius,
                "supports_stacking": o.supports_stacking,
                "initial_location": o.initial_location,
                "initial_position": list(o.initial_position),  # type: ignore[arg-type]
            }
            for o in scene.objects
        ],
    }


def scene_from_dict(data: dict) -> SceneState:
    if not isinstance(data, dict):
        raise SceneError("scene document must be a mapping")
    version = data.get("format_version")
    if version != SCENE_FORMAT_VERSION:
        raise SceneError(f"unsupported scene format_version {version!r}")
    try:
        robot = data["robot"]
        robot_pose = Pose2D(robot["x"], robot["y"], robot.get("theta", 0.0))
        robot_radius = float(robot.get("radius", DEFAULT_ROBOT_RADIUS))
        tables = [
            TableSpec(t["id"], tuple(t["center"]), tuple(t["half_extents"]))
            for t in data.get("tables", [])
        ]
        obstacles = [
            ObstacleSpec(
                o["id"], tuple(o["center"]), tuple(o["half_extents"]), o.get("kind", "chair")
            )
            for o in data.get("obstacles", [])
        ]
        objects = [
            ObjectSpec(
                id=o["id"],
                footprint_radius=float(o["footprint_radius"]),
                initial_location=o["initial_location"],
                supports_stacking=bool(o.get("supports_stacking", False)),
                initial_position=(
                    tuple(o["initial_position"]) if o.get("initial_position") else None
                ),
            )
            for o in data.get("objects", [])
        ]
        seed = int(data.get("seed", 0))
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed scene entry: {exc}") from exc
    grid_cfg = data.get("grid") or {}
    return build_scene(
        tables,
        obstacles,
        objects,
        robot_pose,
        rng_seed=seed,
        robot_radius=robot_radius,
        resolution=float(grid_cfg.get("resolution", DEFAULT_GRID_RESOLUTION)),
        grid_origin=tuple(grid_cfg["origin"]) if "origin" in grid_cfg else None,
        grid_shape=tuple(grid_cfg["shape"]) if "shape" in grid_cfg else None,
    )


def load_scene(path: str | Path) -> SceneState:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return scene_from_dict(data)


def save_scene(scene: SceneState, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scene_to_dict(scene), fh, sort_keys=True)
