"""Building footprints, derived wall segments, receiver grids, and transmitter scenarios.

Environments are 2.5D: flat terrain, vertical walls, flat roofs. Footprints are
normalized to counter-clockwise order at construction so every derived wall
normal points away from the building interior.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Edges shorter than this are rejected as degenerate (meter-scale scenes).
DEGENERATE_EDGE_M = 1e-9


@dataclass(frozen=True)
class Point3:
    """A 3D point in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate: ({self.x}, {self.y}, {self.z})")


def signed_area(footprint: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise vertex order."""
    x = footprint[:, 0]
    y = footprint[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class Building:
    """A prism: simple polygon footprint (meters) extruded to ``height``.

    The footprint is stored counter-clockwise regardless of the input order;
    orientation is normalized via the signed area.
    """

    footprint: np.ndarray
    height: float

    def __post_init__(self) -> None:
        fp = np.array(self.footprint, dtype=np.float64)
        if fp.ndim != 2 or fp.shape[1] != 2 or fp.shape[0] < 3:
            raise ValueError(f"footprint must be (n>=3, 2), got shape {fp.shape}")
        if not np.isfinite(fp).all():
            raise ValueError("footprint contains non-finite coordinates")
        if not (math.isfinite(self.height) and self.height > 0):
            raise ValueError(f"building height must be > 0, got {self.height}")
        area = signed_area(fp)
        if area == 0.0:
            raise ValueError("footprint has zero area")
        if area < 0.0:
            fp = fp[::-1].copy()
        fp.setflags(write=False)
        object.__setattr__(self, "footprint", fp)

    @property
    def n_edges(self) -> int:
        return self.footprint.shape[0]

    def centroid(self) -> tuple[float, float]:
        """Area centroid of the footprint."""
        x = self.footprint[:, 0]
        y = self.footprint[:, 1]
        xn = np.roll(x, -1)
        yn = np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        cx = float(((x + xn) * cross).sum() / (6.0 * a))
        cy = float(((y + yn) * cross).sum() / (6.0 * a))
        return cx, cy


@dataclass(frozen=True)
class WallSegment:
    """A vertical wall: 2D bottom edge, height, and outward unit normal."""

    x1: float
    y1: float
    x2: float
    y2: float
    height: float
    nx: float
    ny: float

    def __post_init__(self) -> None:
        ex = self.x2 - self.x1
        ey = self.y2 - self.y1
        length = math.hypot(ex, ey)
        if length < DEGENERATE_EDGE_M:
            raise ValueError(f"wall endpoints coincide (length {length:.3e} m)")
        norm = math.hypot(self.nx, self.ny)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"outward normal is not unit length: |n| = {norm!r}")
        if abs((self.nx * ex + self.ny * ey) / length) > 1e-12:
            raise ValueError("outward normal is not perpendicular to the wall")
        if not (math.isfinite(self.height) and self.height > 0):
            raise ValueError(f"wall height must be > 0, got {self.height}")

    @property
    def midpoint(self) -> tuple[float, float]:
        """Midpoint of the bottom edge; the reference point for facing tests."""
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


def derive_walls(building: Building, label: str = "building") -> list[WallSegment]:
    """One wall per footprint edge, with outward normals.

    For a counter-clockwise footprint the outward normal of edge ``p1 -> p2``
    is the right-hand perpendicular ``(dy, -dx) / |d|``.

    Raises ``ValueError`` for degenerate edges (shorter than 1 nm), naming
    ``label`` and the edge index.
    """
    fp = building.footprint
    n = fp.shape[0]
    walls = []
    for i in range(n):
        x1, y1 = float(fp[i, 0]), float(fp[i, 1])
        x2, y2 = float(fp[(i + 1) % n, 0]), float(fp[(i + 1) % n, 1])
        dx = x2 - x1
        dy = y2 - y1
        length = math.hypot(dx, dy)
        if length < DEGENERATE_EDGE_M:
            raise ValueError(
                f"{label}: edge {i} is degenerate (length {length:.3e} m)"
            )
        walls.append(
            WallSegment(
                x1=x1, y1=y1, x2=x2, y2=y2,
                height=building.height,
                nx=dy / length, ny=-dx / length,
            )
        )
    return walls


@dataclass(frozen=True, eq=False)
class Environment:
    """A named collection of buildings with derived walls and bounding box."""

    name: str
    buildings: tuple[Building, ...]
    walls: tuple[WallSegment, ...]
    bbox: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        expected = sum(b.n_edges for b in self.buildings)
        if len(self.walls) != expected:
            raise ValueError(
                f"wall count {len(self.walls)} != total footprint edges {expected}"
            )
        min_x, min_y, max_x, max_y = self.bbox
        for w in self.walls:
            if not (
                min_x <= w.x1 <= max_x and min_y <= w.y1 <= max_y
                and min_x <= w.x2 <= max_x and min_y <= w.y2 <= max_y
            ):
                raise ValueError(f"wall {w} lies outside bbox {self.bbox}")

    @classmethod
    def from_buildings(cls, name: str, buildings: Iterable[Building]) -> "Environment":
        buildings = tuple(buildings)
        walls: list[WallSegment] = []
        for i, b in enumerate(buildings):
            walls.extend(derive_walls(b, label=f"{name} building {i}"))
        if buildings:
            all_xy = np.vstack([b.footprint for b in buildings])
            bbox = (
                float(all_xy[:, 0].min()), float(all_xy[:, 1].min()),
                float(all_xy[:, 0].max()), float(all_xy[:, 1].max()),
            )
        else:
            bbox = (0.0, 0.0, 0.0, 0.0)
        return cls(name=name, buildings=buildings, walls=tuple(walls), bbox=bbox)


def _reject_json_constant(value: str) -> float:
    raise ValueError(f"non-finite number {value!r} in environment file")


def load_environment(path: str | Path) -> Environment:
    """Parse an environment JSON file.

    Expected document: ``{"name": str, "buildings": [{"footprint": [[x, y],
    ...], "height": h}, ...]}`` with lengths in meters. NaN/Infinity literals
    and footprints with fewer than 3 vertices are rejected.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        doc = json.load(f, parse_constant=_reject_json_constant)
    if not isinstance(doc, dict) or "name" not in doc or "buildings" not in doc:
        raise ValueError(f"{path}: expected object with 'name' and 'buildings'")
    buildings = []
    for i, entry in enumerate(doc["buildings"]):
        try:
            buildings.append(
                Building(footprint=np.asarray(entry["footprint"], dtype=np.float64),
                         height=float(entry["height"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: building {i}: {exc}") from exc
    return Environment.from_buildings(str(doc["name"]), buildings)


def save_environment(env: Environment, path: str | Path) -> None:
    """Write an environment as the JSON document accepted by ``load_environment``."""
    doc = {
        "name": env.name,
        "buildings": [
            {"footprint": b.footprint.tolist(), "height": b.height}
            for b in env.buildings
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


@dataclass(frozen=True)
class ReceiverGridSpec:
    """A regular receiver grid: ``rows x cols`` points at a fixed height."""

    rows: int
    cols: int
    origin: tuple[float, float] = (0.0, 0.0)
    spacing_x: float = 1.0
    spacing_y: float = 1.0
    rx_height: float = 1.5

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.spacing_x <= 0 or self.spacing_y <= 0:
            raise ValueError("grid spacings must be > 0")
        if self.rx_height <= 0:
            raise ValueError(f"receiver height must be > 0, got {self.rx_height}")

    @property
    def n_points(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)


def grid_points(spec: ReceiverGridSpec) -> list[Point3]:
    """Receiver points in row-major order: index ``r * cols + c``."""
    ox, oy = spec.origin
    return [
        Point3(ox + c * spec.spacing_x, oy + r * spec.spacing_y, spec.rx_height)
        for r in range(spec.rows)
        for c in range(spec.cols)
    ]


def grid_arrays(spec: ReceiverGridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat row-major coordinate arrays (X, Y, Z) for ``spec``.

    Bit-identical to the coordinates produced by :func:`grid_points`.
    """
    ox, oy = spec.origin
    xs = ox + np.arange(spec.cols, dtype=np.float64) * spec.spacing_x
    ys = oy + np.arange(spec.rows, dtype=np.float64) * spec.spacing_y
    X = np.tile(xs, spec.rows)
    Y = np.repeat(ys, spec.cols)
    Z = np.full(spec.n_points, spec.rx_height, dtype=np.float64)
    return X, Y, Z


def points_in_polygon(x: np.ndarray, y: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Even-odd crossing-number containment test, vectorized over points.

    Uses the half-open edge convention (lower endpoint included, upper
    excluded in y), so boundary points classify deterministically regardless
    of grid alignment.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.zeros(x.shape, dtype=bool)
    n = footprint.shape[0]
    for i in range(n):
        x1, y1 = footprint[i]
        x2, y2 = footprint[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        if not crosses.any():
            continue
        # x-coordinate where the horizontal ray meets the edge.
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < x_cross)
    return inside


def point_in_building(p: tuple[float, float], env: Environment) -> bool:
    """True iff ``p`` falls inside any building footprint."""
    px = np.asarray([p[0]])
    py = np.asarray([p[1]])
    return any(bool(points_in_polygon(px, py, b.footprint)[0]) for b in env.buildings)


def points_in_any_building(x: np.ndarray, y: np.ndarray, env: Environment) -> np.ndarray:
    """Vectorized :func:`point_in_building` over coordinate arrays."""
    inside = np.zeros(np.shape(x), dtype=bool)
    for b in env.buildings:
        if inside.all():
            break
        inside |= points_in_polygon(x, y, b.footprint)
    return inside


@dataclass(frozen=True)
class TransmitterScenario:
    """One transmitter deployment: position, carrier, and receiver grid."""

    tx: Point3
    carrier_frequency_ghz: float
    tx_power_dbm: float
    grid: ReceiverGridSpec
    site: str

    def __post_init__(self) -> None:
        if self.carrier_frequency_ghz <= 0:
            raise ValueError(f"carrier frequency must be > 0 GHz, got {self.carrier_frequency_ghz}")
        if self.tx.z <= self.grid.rx_height:
            raise ValueError(
                f"transmitter altitude {self.tx.z} m must exceed receiver height "
                f"{self.grid.rx_height} m"
            )

    @property
    def scenario_id(self) -> str:
        """Stable identifier used for file names, split assignment, and RNG keying."""
        return f"{self.site}/tx{self.tx.x:g}_{self.tx.y:g}_alt{self.tx.z:g}"
