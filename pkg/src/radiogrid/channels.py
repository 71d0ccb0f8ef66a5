"""Model input channels: log-distance, masks, normalization, and noise perturbation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Environment, Point3, ReceiverGridSpec, grid_arrays, points_in_any_building

logger = logging.getLogger(__name__)

# Receivers closer than 300 m to the transmitter are "near", the rest "far".
NEAR_FAR_SPLIT_M = 300.0

# Perturbed distances are clamped here so the log transform stays defined.
MIN_DISTANCE_M = 1e-3


class ChannelKind(str, Enum):
    LOG_DISTANCE = "log_distance"
    LOS_MASK = "los_mask"
    BUILDING_MASK = "building_mask"
    PATHLOSS = "pathloss"
    NORMALIZED = "normalized"

    @property
    def is_mask(self) -> bool:
        return self in (ChannelKind.LOS_MASK, ChannelKind.BUILDING_MASK)


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """A row-major 2D raster of 64-bit values aligned to the receiver grid.

    Values are copied and frozen at construction; operations return new grids.
    Mask kinds may only contain {0, 1}.
    """

    values: np.ndarray
    kind: ChannelKind

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"grid values must be 2D, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError(f"{self.kind.value} grid contains non-finite values")
        if self.kind.is_mask and not np.isin(vals, (0.0, 1.0)).all():
            raise ValueError(f"{self.kind.value} grid contains values outside {{0, 1}}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def flipped_horizontal(self) -> "FeatureGrid":
        """Columns reversed."""
        return FeatureGrid(self.values[:, ::-1], self.kind)

    def flipped_vertical(self) -> "FeatureGrid":
        """Rows reversed."""
        return FeatureGrid(self.values[::-1, :], self.kind)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel min/max bounds, computed over the training split only."""

    min: float
    max: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise ValueError("normalization bounds must be finite")
        if self.max < self.min:
            raise ValueError(f"max {self.max} < min {self.min}")

    @classmethod
    def from_values(cls, *arrays: np.ndarray) -> "NormalizationStats":
        lo = min(float(np.min(a)) for a in arrays)
        hi = max(float(np.max(a)) for a in arrays)
        return cls(min=lo, max=hi)


def log_distance_channel(tx: Point3, grid: ReceiverGridSpec) -> FeatureGrid:
    """20*log10 of the 3D transmitter-receiver distance (meters) per cell."""
    d = distance_grid(tx, grid)
    if float(d.values.min()) < 1e-6:
        raise ValueError(
            "a receiver coincides with the transmitter (distance < 1e-6 m); "
            "log-distance is undefined"
        )
    return FeatureGrid(20.0 * np.log10(d.values), ChannelKind.LOG_DISTANCE)


def distance_grid(tx: Point3, grid: ReceiverGridSpec) -> FeatureGrid:
    """Raw 3D distances in meters (the quantity perturbed by distance noise)."""
    X, Y, Z = grid_arrays(grid)
    d = np.sqrt((X - tx.x) ** 2 + (Y - tx.y) ** 2 + (Z - tx.z) ** 2)
    return FeatureGrid(d.reshape(grid.shape), ChannelKind.LOG_DISTANCE)


def log_distance_to_meters(g: FeatureGrid) -> np.ndarray:
    """Invert the 20*log10 transform back to meters."""
    return 10.0 ** (g.values / 20.0)


def building_mask_channel(grid: ReceiverGridSpec, env: Environment) -> FeatureGrid:
    """1 where the receiver cell falls inside a building footprint, else 0."""
    X, Y, _ = grid_arrays(grid)
    inside = points_in_any_building(X, Y, env)
    return FeatureGrid(inside.reshape(grid.shape).astype(np.float64), ChannelKind.BUILDING_MASK)


def normalize(g: FeatureGrid, stats: NormalizationStats) -> FeatureGrid:
    """Global min-max scaling: (v - min) / (max - min).

    Mask channels are inherently normalized and pass through unchanged.
    Values outside the training range map outside [0, 1]; that is permitted
    and flagged with a warning.
    """
    if g.kind.is_mask:
        return g
    if stats.max == stats.min:
        raise ValueError("cannot normalize with max == min")
    scaled = (g.values - stats.min) / (stats.max - stats.min)
    n_out = int(np.count_nonzero((scaled < 0.0) | (scaled > 1.0)))
    if n_out:
        logger.warning(
            "%d of %d values fall outside the training range [%g, %g] after "
            "normalization", n_out, scaled.size, stats.min, stats.max,
        )
    return FeatureGrid(scaled, ChannelKind.NORMALIZED)


def denormalize(
    g: FeatureGrid,
    stats: NormalizationStats,
    kind: ChannelKind = ChannelKind.PATHLOSS,
) -> FeatureGrid:
    """Exact inverse of :func:`normalize`; masks pass through unchanged."""
    if g.kind.is_mask:
        return g
    if stats.max == stats.min:
        raise ValueError("cannot denormalize with max == min")
    return FeatureGrid(g.values * (stats.max - stats.min) + stats.min, kind)


def _regime_indices(distances: np.ndarray, regime: str) -> np.ndarray:
    if regime == "near":
        return np.flatnonzero(distances < NEAR_FAR_SPLIT_M)
    if regime == "far":
        return np.flatnonzero(distances >= NEAR_FAR_SPLIT_M)
    raise ValueError(f"unknown regime {regime!r}; expected 'near' or 'far'")


def perturb_distance(
    g: FeatureGrid,
    regime: str,
    fraction: float,
    sigma_pct: float,
    seed: int,
) -> FeatureGrid:
    """Add Gaussian noise to raw distances (meters) in one spatial regime.

    Exactly ``floor(fraction * regime size)`` receivers are drawn uniformly
    without replacement from the regime; each selected distance d receives
    zero-mean noise with sigma = ``sigma_pct * d``. Results are clamped at
    1 mm. Operates on raw meters, before the 20*log10 transform.

    The selection is resampled per (seed, sigma_pct) pair.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    if sigma_pct < 0.0:
        raise ValueError(f"sigma_pct must be >= 0, got {sigma_pct}")
    flat = g.values.ravel()
    candidates = _regime_indices(flat, regime)
    if candidates.size == 0:
        logger.warning("distance perturbation: %s regime is empty, nothing to do", regime)
        return g
    k = int(fraction * candidates.size)
    if k == 0:
        return g
    rng = np.random.default_rng(
        np.random.SeedSequence([int(seed), int(round(sigma_pct * 1e9))])
    )
    chosen = rng.choice(candidates, size=k, replace=False)
    noise = rng.standard_normal(k) * sigma_pct * flat[chosen]
    out = flat.copy()
    out[chosen] = np.maximum(flat[chosen] + noise, MIN_DISTANCE_M)
    return FeatureGrid(out.reshape(g.shape), g.kind)


def flip_mask(g: FeatureGrid, fraction: float, seed: int) -> FeatureGrid:
    """Complement exactly ``floor(fraction * N)`` distinct mask pixels.

    Pixels are chosen uniformly via a seeded RNG, so applying the same flip
    set twice restores the original mask.
    """
    if not g.kind.is_mask:
        raise ValueError(f"flip_mask requires a mask channel, got {g.kind.value}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    n = g.values.size
    k = int(fraction * n)
    if k == 0:
        return g
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    chosen = rng.choice(n, size=k, replace=False)
    out = g.values.ravel().copy()
    out[chosen] = 1.0 - out[chosen]
    return FeatureGrid(out.reshape(g.shape), g.kind)
