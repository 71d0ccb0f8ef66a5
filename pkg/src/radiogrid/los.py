"""Vectorized line-of-sight mask computation plus a scalar brute-force oracle.

A receiver has LOS when the straight transmitter-receiver segment crosses no
vertical wall rectangle. The fast path filters walls to those whose outward
normal faces the transmitter, then tests each surviving wall against all
receivers at once; the oracle loops over every receiver and every wall in
plain Python. Both share identical intersection semantics so they agree
bit-for-bit wherever the facing filter is lossless.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import ChannelKind, FeatureGrid
from .geometry import (
    Environment,
    Point3,
    ReceiverGridSpec,
    WallSegment,
    grid_arrays,
    points_in_polygon,
)

logger = logging.getLogger(__name__)

# Rays whose plane-equation denominator is below this are treated as parallel
# to the wall plane; well under double-precision noise for meter-scale scenes.
PARALLEL_EPS = 1e-12


def facing_walls(tx: Point3, walls: Sequence[WallSegment]) -> np.ndarray:
    """Boolean vector: wall m faces the transmitter.

    A wall faces the transmitter when its outward normal has a strictly
    positive dot product with the vector from the bottom-edge midpoint to the
    transmitter; edge-on walls (dot product 0) are excluded since they have
    zero thickness and cannot occlude.
    """
    if not walls:
        return np.zeros(0, dtype=bool)
    nx = np.array([w.nx for w in walls])
    ny = np.array([w.ny for w in walls])
    mx = np.array([0.5 * (w.x1 + w.x2) for w in walls])
    my = np.array([0.5 * (w.y1 + w.y2) for w in walls])
    return nx * (tx.x - mx) + ny * (tx.y - my) > 0.0


def _receiver_arrays(
    receivers: Sequence[Point3] | np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.asarray(
        receivers if isinstance(receivers, np.ndarray)
        else [(p.x, p.y, p.z) for p in receivers],
        dtype=np.float64,
    )
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"receivers must be (n, 3), got shape {arr.shape}")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _ray_hits(
    tx: Point3,
    X: np.ndarray,
    Y: np.ndarray,
    Z: np.ndarray,
    wall: WallSegment,
) -> np.ndarray:
    """Vectorized segment-vs-wall test over all receivers for one wall.

    A hit requires the segment to cross the wall plane at parameter
    t in (0, 1), the 2D crossing point to lie within the bottom edge
    (inclusive endpoints), and the crossing height to satisfy 0 <= z <= h.
    """
    dx = X - tx.x
    dy = Y - tx.y
    denom = wall.nx * dx + wall.ny * dy
    num = wall.nx * (wall.x1 - tx.x) + wall.ny * (wall.y1 - tx.y)
    ok = np.abs(denom) >= PARALLEL_EPS
    t = np.divide(num, denom, out=np.full_like(denom, -1.0), where=ok)
    ok &= (t > 0.0) & (t < 1.0)
    cx = tx.x + t * dx
    cy = tx.y + t * dy
    ex = wall.x2 - wall.x1
    ey = wall.y2 - wall.y1
    e2 = ex * ex + ey * ey
    s = ((cx - wall.x1) * ex + (cy - wall.y1) * ey) / e2
    ok &= (s >= 0.0) & (s <= 1.0)
    z = tx.z + t * (Z - tx.z)
    ok &= (z >= 0.0) & (z <= wall.height)
    return ok


def ray_wall_intersections(
    tx: Point3,
    receivers: Sequence[Point3] | np.ndarray,
    wall: WallSegment,
) -> np.ndarray:
    """Boolean vector: segment tx->receiver_n intersects ``wall``."""
    X, Y, Z = _receiver_arrays(receivers)
    return _ray_hits(tx, X, Y, Z, wall)


@dataclass(frozen=True, eq=False)
class VisibilityMatrix:
    """Receiver-major N x M record of ray-wall intersections."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        if self.bits.ndim != 2 or self.bits.dtype != bool:
            raise ValueError("bits must be a 2D boolean array")

    @property
    def n_receivers(self) -> int:
        return self.bits.shape[0]

    @property
    def n_walls(self) -> int:
        return self.bits.shape[1]

    @classmethod
    def zeros(cls, n_receivers: int, n_walls: int) -> "VisibilityMatrix":
        return cls(np.zeros((n_receivers, n_walls), dtype=bool))

    def los_vector(self) -> np.ndarray:
        """Receiver n is LOS iff its row sums to zero."""
        return self.bits.sum(axis=1) == 0


def compute_visibility(
    tx: Point3,
    receivers: Sequence[Point3] | np.ndarray,
    walls: Sequence[WallSegment],
) -> VisibilityMatrix:
    """Materialize the full intra-visibility matrix (facing walls only).

    Columns of non-facing walls stay all-false, matching the initialization
    convention. Intended for small scenes and diagnostics; the mask
    computation reduces per wall without this O(N*M) storage.
    """
    X, Y, Z = _receiver_arrays(receivers)
    vis = VisibilityMatrix.zeros(X.size, len(walls))
    facing = facing_walls(tx, walls)
    for m, wall in enumerate(walls):
        if facing[m]:
            vis.bits[:, m] = _ray_hits(tx, X, Y, Z, wall)
    return vis


def _warn_if_tx_inside(tx: Point3, env: Environment) -> None:
    for i, b in enumerate(env.buildings):
        if tx.z <= b.height and bool(
            points_in_polygon(np.array([tx.x]), np.array([tx.y]), b.footprint)[0]
        ):
            logger.warning(
                "transmitter (%g, %g, %g) is inside building %d of %s; "
                "LOS mask will be mostly zero", tx.x, tx.y, tx.z, i, env.name,
            )
            return


def compute_los_mask(
    tx: Point3,
    grid: ReceiverGridSpec,
    env: Environment,
    facing_filter: bool = True,
) -> FeatureGrid:
    """Binary LOS mask over the receiver grid (1 = unobstructed).

    Iterates facing walls only, evaluating all receivers per wall in bulk and
    OR-reducing into a blocked vector, so memory stays O(N) instead of the
    full N x M visibility matrix. The result is independent of wall order.

    ``facing_filter=False`` tests every wall; used to measure the filter's
    contribution in benchmarks.
    """
    _warn_if_tx_inside(tx, env)
    X, Y, Z = grid_arrays(grid)
    blocked = np.zeros(grid.n_points, dtype=bool)
    walls = env.walls
    if facing_filter:
        keep = facing_walls(tx, walls)
        walls = [w for w, f in zip(walls, keep) if f]
    for wall in walls:
        blocked |= _ray_hits(tx, X, Y, Z, wall)
    mask = (~blocked).astype(np.float64).reshape(grid.shape)
    return FeatureGrid(mask, ChannelKind.LOS_MASK)


def brute_force_los(
    tx: Point3,
    receivers: Sequence[Point3],
    env: Environment,
    shape: tuple[int, int] | None = None,
) -> FeatureGrid:
    """Scalar-loop LOS oracle: every receiver against every wall.

    No facing filter, no vectorization; intersection semantics are identical
    to :func:`compute_los_mask`. ``shape`` defaults to a single row.
    """
    txx, txy, txz = tx.x, tx.y, tx.z
    # Python-float wall tuples keep the inner loop free of attribute lookups.
    walls = [
        (w.x1, w.y1, w.nx, w.ny, w.x2 - w.x1, w.y2 - w.y1,
         (w.x2 - w.x1) ** 2 + (w.y2 - w.y1) ** 2, w.height)
        for w in env.walls
    ]
    mask = []
    for p in receivers:
        dx = p.x - txx
        dy = p.y - txy
        dz = p.z - txz
        blocked = False
        for x1, y1, nx, ny, ex, ey, e2, h in walls:
            denom = nx * dx + ny * dy
            if not (denom >= PARALLEL_EPS or denom <= -PARALLEL_EPS):
                continue
            t = (nx * (x1 - txx) + ny * (y1 - txy)) / denom
            if not 0.0 < t < 1.0:
                continue
            cx = txx + t * dx
            cy = txy + t * dy
            s = ((cx - x1) * ex + (cy - y1) * ey) / e2
            if not 0.0 <= s <= 1.0:
                continue
            z = txz + t * dz
            if 0.0 <= z <= h:
                blocked = True
                break
        mask.append(0.0 if blocked else 1.0)
    out = np.asarray(mask, dtype=np.float64)
    if shape is None:
        shape = (1, out.size)
    return FeatureGrid(out.reshape(shape), ChannelKind.LOS_MASK)
