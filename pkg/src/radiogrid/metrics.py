"""Evaluation metrics over denormalized pathloss maps: RMSE, MAE, NMSE."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _check_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size != yhat.size:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("metrics require at least one value")
    return y, yhat


def rmse(y, yhat) -> float:
    """Root mean squared error sqrt(mean((y - yhat)^2))."""
    y, yhat = _check_pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    """Mean absolute error."""
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def nmse(y, yhat) -> float:
    """Normalized MSE: sum((y - yhat)^2) / sum(y^2)."""
    y, yhat = _check_pair(y, yhat)
    ref = float(np.sum(y ** 2))
    if ref == 0.0:
        raise ValueError("NMSE undefined for all-zero ground truth")
    return float(np.sum((y - yhat) ** 2) / ref)


@dataclass
class MetricAccumulator:
    """Streaming sums so maps can be scored without holding them all.

    Updates happen in a deterministic order chosen by the caller; the
    accumulated totals are plain float sums.
    """

    sq_sum: float = 0.0
    abs_sum: float = 0.0
    ref_sq_sum: float = 0.0
    n_values: int = 0
    n_samples: int = 0

    def update(self, y, yhat) -> None:
        y, yhat = _check_pair(y, yhat)
        err = y - yhat
        self.sq_sum += float(np.sum(err ** 2))
        self.abs_sum += float(np.sum(np.abs(err)))
        self.ref_sq_sum += float(np.sum(y ** 2))
        self.n_values += y.size
        self.n_samples += 1

    @property
    def rmse(self) -> float:
        return float(np.sqrt(self.sq_sum / self.n_values))

    @property
    def mae(self) -> float:
        return self.abs_sum / self.n_values

    @property
    def nmse(self) -> float:
        if self.ref_sq_sum == 0.0:
            raise ValueError("NMSE undefined for all-zero ground truth")
        return self.sq_sum / self.ref_sq_sum


@dataclass
class MetricReport:
    """Aggregate metrics plus a per-scenario breakdown."""

    rmse_db: float
    mae_db: float
    nmse: float
    n_samples: int
    per_scenario: dict[str, dict[str, float]] = field(default_factory=dict)

    @classmethod
    def from_accumulators(
        cls,
        overall: MetricAccumulator,
        per_scenario: dict[str, MetricAccumulator] | None = None,
    ) -> "MetricReport":
        breakdown = {}
        for sid, acc in sorted((per_scenario or {}).items()):
            breakdown[sid] = {
                "rmse_db": acc.rmse,
                "mae_db": acc.mae,
                "nmse": acc.nmse,
                "n_samples": acc.n_samples,
            }
        return cls(
            rmse_db=overall.rmse,
            mae_db=overall.mae,
            nmse=overall.nmse,
            n_samples=overall.n_samples,
            per_scenario=breakdown,
        )

    def to_json(self) -> str:
        doc = {
            "rmse_db": self.rmse_db,
            "mae_db": self.mae_db,
            "nmse": self.nmse,
            "n_samples": self.n_samples,
            "per_scenario": self.per_scenario,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def format_table(self) -> str:
        """Aligned text table, one row per scenario plus the overall row."""
        header = f"{'scenario':40s} {'RMSE (dB)':>10s} {'MAE (dB)':>10s} {'NMSE':>12s} {'samples':>8s}"
        lines = [header, "-" * len(header)]
        for sid, row in self.per_scenario.items():
            lines.append(
                f"{sid:40s} {row['rmse_db']:10.4f} {row['mae_db']:10.4f} "
                f"{row['nmse']:12.6f} {row['n_samples']:8d}"
            )
        lines.append(
            f"{'overall':40s} {self.rmse_db:10.4f} {self.mae_db:10.4f} "
            f"{self.nmse:12.6f} {self.n_samples:8d}"
        )
        return "\n".join(lines)
