"""Empirical pathloss models and map assembly.

Implements the Close-In reference model with log-normal shadow fading, the
3GPP TR 38.900/38.901 LOS and NLOS urban-micro formulas, and the ITU-R
alpha-beta-gamma formulation, plus per-receiver map assembly with an external
min-fallback, a configurable indoor offset, and edge-aware smoothing.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .channels import ChannelKind, FeatureGrid
from .geometry import ReceiverGridSpec, TransmitterScenario, grid_arrays

logger = logging.getLogger(__name__)

# Propagation speed used throughout (m/s). The 3GPP breakpoint convention
# (TR 38.901) fixes c = 3.0e8, which also keeps the documented spot values
# exact, e.g. d'_BP(25 m, 1.5 m, 28 GHz) = 4480 m.
C_LIGHT = 3.0e8

THREEGPP_MIN_D2D_M = 10.0
THREEGPP_MAX_D2D_M = 5000.0


class BandVariant(str, Enum):
    """Which NLOS formula variant applies."""

    TR38900_28GHZ = "28ghz"
    TR38901_5P9GHZ = "5.9ghz"

    @classmethod
    def for_frequency(cls, frequency_ghz: float) -> "BandVariant":
        return cls.TR38900_28GHZ if frequency_ghz >= 10.0 else cls.TR38901_5P9GHZ


class Provenance(str, Enum):
    CI = "ci"
    THREEGPP = "3gpp"
    ABG = "abg"
    EXTERNAL = "external"


@dataclass(frozen=True)
class CarrierConfig:
    """Carrier frequency and derived wavelength."""

    frequency_ghz: float

    def __post_init__(self) -> None:
        if self.frequency_ghz <= 0:
            raise ValueError(f"carrier frequency must be > 0, got {self.frequency_ghz}")

    @property
    def frequency_hz(self) -> float:
        return self.frequency_ghz * 1e9

    @property
    def wavelength_m(self) -> float:
        return C_LIGHT / self.frequency_hz


@dataclass(frozen=True)
class CiModelParams:
    """Close-In model: reference distance, exponent, and shadow fading."""

    d0_m: float = 1.0
    pathloss_exponent: float = 3.0
    shadow_sigma_db: float = 6.8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.d0_m <= 0:
            raise ValueError(f"reference distance must be > 0, got {self.d0_m}")
        if self.pathloss_exponent <= 0:
            raise ValueError(f"pathloss exponent must be > 0, got {self.pathloss_exponent}")
        if self.shadow_sigma_db < 0:
            raise ValueError(f"shadow sigma must be >= 0, got {self.shadow_sigma_db}")


@dataclass(frozen=True)
class ThreeGppParams:
    """Antenna heights and band variant for the 3GPP formulas."""

    h_tx: float
    h_rx: float
    h_e: float = 1.0
    band_variant: BandVariant = BandVariant.TR38900_28GHZ

    def __post_init__(self) -> None:
        if self.h_tx <= self.h_e:
            raise ValueError(f"h_tx {self.h_tx} must exceed h_e {self.h_e}")
        if self.h_rx <= self.h_e:
            raise ValueError(f"h_rx {self.h_rx} must exceed h_e {self.h_e}")


@dataclass(frozen=True)
class AbgTriple:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if not all(np.isfinite(v) for v in (self.alpha, self.beta, self.gamma)):
            raise ValueError("ABG coefficients must be finite")


@dataclass(frozen=True)
class AbgParams:
    """Separate alpha/beta/gamma triples for LOS and NLOS conditions."""

    los: AbgTriple
    nlos: AbgTriple


@dataclass(frozen=True, eq=False)
class PathlossMap:
    """A pathloss raster in dB plus the model that produced it."""

    grid: FeatureGrid
    provenance: Provenance

    def __post_init__(self) -> None:
        if self.grid.kind != ChannelKind.PATHLOSS:
            raise ValueError(f"pathloss map requires kind=pathloss, got {self.grid.kind.value}")


def _maybe_scalar(out: np.ndarray, scalar_input: bool) -> np.ndarray | float:
    return float(out) if scalar_input else out


def fspl_at_reference(cfg: CarrierConfig, d0_m: float) -> float:
    """Free-space pathloss 20*log10(4*pi*d0 / lambda) in dB."""
    if d0_m <= 0:
        raise ValueError(f"reference distance must be > 0, got {d0_m}")
    return float(20.0 * np.log10(4.0 * np.pi * d0_m / cfg.wavelength_m))


def ci_pathloss(d_m, params: CiModelParams, cfg: CarrierConfig, shadow_db=0.0):
    """Close-In pathloss: FSPL(d0) + 10*n*log10(d/d0) + shadow.

    The shadow term is supplied by the caller (see :func:`shadow_field`).
    Distances below d0 are clamped to d0 with a diagnostic.
    """
    scalar = np.ndim(d_m) == 0
    d = np.asarray(d_m, dtype=np.float64)
    n_below = int(np.count_nonzero(d < params.d0_m))
    if n_below:
        logger.warning(
            "CI model: %d distance(s) below d0 = %g m clamped to d0",
            n_below, params.d0_m,
        )
        d = np.maximum(d, params.d0_m)
    out = (
        fspl_at_reference(cfg, params.d0_m)
        + 10.0 * params.pathloss_exponent * np.log10(d / params.d0_m)
        + shadow_db
    )
    return _maybe_scalar(out, scalar)


def shadow_field(params: CiModelParams, scenario_id: str, n: int) -> np.ndarray:
    """Per-receiver shadow fading draws, keyed by (seed, scenario id).

    Receiver i always receives draw i, so maps are reproducible across runs
    and thread counts.
    """
    key = zlib.crc32(scenario_id.encode("utf-8"))
    rng = np.random.default_rng(np.random.SeedSequence([params.rng_seed, key]))
    return rng.standard_normal(n) * params.shadow_sigma_db


def breakpoint_distance(cfg: CarrierConfig, p: ThreeGppParams) -> float:
    """3GPP breakpoint d'_BP = 4 * h'_tx * h'_rx * f / c, with f in Hz."""
    return 4.0 * (p.h_tx - p.h_e) * (p.h_rx - p.h_e) * cfg.frequency_hz / C_LIGHT


def _check_3gpp_validity(d2d: np.ndarray) -> None:
    n_low = int(np.count_nonzero(d2d < THREEGPP_MIN_D2D_M))
    if n_low:
        logger.warning(
            "3GPP model: %d receiver(s) closer than %g m 2D; evaluated with "
            "PL1 outside the model's stated validity range",
            n_low, THREEGPP_MIN_D2D_M,
        )
    n_high = int(np.count_nonzero(d2d > THREEGPP_MAX_D2D_M))
    if n_high:
        logger.warning(
            "3GPP model: %d receiver(s) beyond %g m 2D; outside validity "
            "range, values still returned", n_high, THREEGPP_MAX_D2D_M,
        )


def threegpp_los(d2d_m, d3d_m, cfg: CarrierConfig, p: ThreeGppParams):
    """3GPP LOS pathloss: PL1 up to the breakpoint, PL2 beyond."""
    scalar = np.ndim(d3d_m) == 0
    d2d = np.asarray(d2d_m, dtype=np.float64)
    d3d = np.asarray(d3d_m, dtype=np.float64)
    _check_3gpp_validity(d2d)
    f = cfg.frequency_ghz
    dbp = breakpoint_distance(cfg, p)
    log_d3d = np.log10(d3d)
    pl1 = 32.4 + 21.0 * log_d3d + 20.0 * np.log10(f)
    pl2 = (
        32.4 + 40.0 * log_d3d + 20.0 * np.log10(f)
        - 9.5 * np.log10(dbp ** 2 + (p.h_tx - p.h_rx) ** 2)
    )
    return _maybe_scalar(np.where(d2d <= dbp, pl1, pl2), scalar)


def threegpp_nlos(d3d_m, cfg: CarrierConfig, p: ThreeGppParams):
    """3GPP NLOS pathloss: max(PL_LOS, PL') with the band-specific PL'."""
    scalar = np.ndim(d3d_m) == 0
    d3d = np.asarray(d3d_m, dtype=np.float64)
    d2d = np.sqrt(np.maximum(d3d ** 2 - (p.h_tx - p.h_rx) ** 2, 0.0))
    pl_los = threegpp_los(d2d, d3d, cfg, p)
    f = cfg.frequency_ghz
    if p.band_variant == BandVariant.TR38900_28GHZ:
        pl_prime = (
            13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(f)
            - 0.6 * (p.h_rx - 1.5)
        )
    else:
        pl_prime = (
            22.4 + 35.3 * np.log10(d3d) + 21.3 * np.log10(f)
            - 0.3 * (p.h_rx - 1.5)
        )
    return _maybe_scalar(np.maximum(pl_los, pl_prime), scalar)


def breakpoint_discontinuity(cfg: CarrierConfig, p: ThreeGppParams) -> float:
    """|PL1 - PL2| evaluated exactly at the breakpoint distance.

    The two branches need not coincide; this documents the jump magnitude.
    """
    dbp = breakpoint_distance(cfg, p)
    d3d = np.sqrt(dbp ** 2 + (p.h_tx - p.h_rx) ** 2)
    f = cfg.frequency_ghz
    pl1 = 32.4 + 21.0 * np.log10(d3d) + 20.0 * np.log10(f)
    pl2 = (
        32.4 + 40.0 * np.log10(d3d) + 20.0 * np.log10(f)
        - 9.5 * np.log10(dbp ** 2 + (p.h_tx - p.h_rx) ** 2)
    )
    return float(abs(pl1 - pl2))


def abg_pathloss(d3d_m, cfg: CarrierConfig, p: AbgParams, los: bool):
    """Alpha-beta-gamma pathloss: 10a*log10(d3d) + b + 10g*log10(f_ghz)."""
    scalar = np.ndim(d3d_m) == 0
    d3d = np.asarray(d3d_m, dtype=np.float64)
    if np.any(d3d <= 0):
        raise ValueError("ABG model requires d3d > 0")
    t = p.los if los else p.nlos
    out = 10.0 * t.alpha * np.log10(d3d) + t.beta + 10.0 * t.gamma * np.log10(cfg.frequency_ghz)
    return _maybe_scalar(out, scalar)


@dataclass(frozen=True)
class ModelParams:
    """Bundle of model parameters as shipped in the defaults file."""

    ci: CiModelParams
    abg_by_band: dict[str, AbgParams]
    h_e: float
    indoor_offset_db: float

    def abg(self, band: BandVariant) -> AbgParams:
        return self.abg_by_band[band.value]


def load_model_params(path: str | Path | None = None) -> ModelParams:
    """Load model parameters from JSON; defaults to the packaged file."""
    if path is None:
        text = resources.files("radiogrid").joinpath("data/model_params.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    ci_doc = doc["ci"]
    ci = CiModelParams(
        d0_m=float(ci_doc["d0_m"]),
        pathloss_exponent=float(ci_doc["pathloss_exponent"]),
        shadow_sigma_db=float(ci_doc["shadow_sigma_db"]),
    )
    abg_by_band = {}
    for band, triples in doc["abg"].items():
        abg_by_band[band] = AbgParams(
            los=AbgTriple(**triples["los"]),
            nlos=AbgTriple(**triples["nlos"]),
        )
    return ModelParams(
        ci=ci,
        abg_by_band=abg_by_band,
        h_e=float(doc["threegpp"]["h_e_m"]),
        indoor_offset_db=float(doc["indoor_offset_db"]),
    )


def _require_shape(name: str, grid: FeatureGrid, shape: tuple[int, int]) -> None:
    if grid.shape != shape:
        raise ValueError(f"{name} shape {grid.shape} does not match grid shape {shape}")


def assemble_pathloss_map(
    scenario: TransmitterScenario,
    los_mask: FeatureGrid,
    building_mask: FeatureGrid,
    model: Provenance | str,
    *,
    ci: CiModelParams | None = None,
    abg: AbgParams | None = None,
    band: BandVariant | None = None,
    h_e: float = 1.0,
    indoor_offset_db: float = 20.0,
    raytraced: PathlossMap | None = None,
) -> PathlossMap:
    """Per-receiver pathloss map for one scenario.

    LOS receivers use the LOS formula of ``model``, NLOS receivers its NLOS
    formula. When an external (e.g. ray-traced) map is supplied, each NLOS
    value becomes min(external, Close-In) regardless of ``model``; the
    fallback is applied unconditionally on NLOS pixels. Indoor receivers get
    the additive ``indoor_offset_db`` in lieu of a building-entry-loss model.
    """
    model = Provenance(model)
    if model == Provenance.EXTERNAL:
        raise ValueError("pass the external map via raytraced=..., not as the model choice")
    grid = scenario.grid
    _require_shape("LOS mask", los_mask, grid.shape)
    _require_shape("building mask", building_mask, grid.shape)
    if raytraced is not None:
        _require_shape("external map", raytraced.grid, grid.shape)

    cfg = CarrierConfig(scenario.carrier_frequency_ghz)
    if ci is None:
        ci = CiModelParams()
    if band is None:
        band = BandVariant.for_frequency(scenario.carrier_frequency_ghz)

    X, Y, Z = grid_arrays(grid)
    d2d = np.sqrt((X - scenario.tx.x) ** 2 + (Y - scenario.tx.y) ** 2)
    d3d = np.sqrt(d2d ** 2 + (Z - scenario.tx.z) ** 2)
    los = los_mask.values.ravel() >= 0.5

    ci_vals: np.ndarray | None = None
    if model == Provenance.CI or raytraced is not None:
        shadow = shadow_field(ci, scenario.scenario_id, grid.n_points)
        ci_vals = ci_pathloss(d3d, ci, cfg, shadow)

    vals = np.empty(grid.n_points, dtype=np.float64)
    if model == Provenance.CI:
        vals[:] = ci_vals
    elif model == Provenance.THREEGPP:
        p3 = ThreeGppParams(h_tx=scenario.tx.z, h_rx=grid.rx_height, h_e=h_e, band_variant=band)
        vals[los] = threegpp_los(d2d[los], d3d[los], cfg, p3)
        vals[~los] = threegpp_nlos(d3d[~los], cfg, p3)
    elif model == Provenance.ABG:
        if abg is None:
            abg = load_model_params().abg(band)
        vals[los] = abg_pathloss(d3d[los], cfg, abg, los=True)
        vals[~los] = abg_pathloss(d3d[~los], cfg, abg, los=False)

    if raytraced is not None:
        ext = raytraced.grid.values.ravel()
        vals[~los] = np.minimum(ext[~los], ci_vals[~los])

    indoor = building_mask.values.ravel() >= 0.5
    vals[indoor] += indoor_offset_db

    grid_out = FeatureGrid(vals.reshape(grid.shape), ChannelKind.PATHLOSS)
    return PathlossMap(grid=grid_out, provenance=model)


def smooth_map(m: PathlossMap) -> PathlossMap:
    """Single-pass 4-neighbor mean with edge-aware handling.

    Each pixel becomes the mean of itself and its existing neighbors, so
    edge and corner pixels average over fewer values instead of padding.
    """
    v = m.grid.values
    total = v.copy()
    count = np.ones_like(v)
    total[1:, :] += v[:-1, :]
    count[1:, :] += 1.0
    total[:-1, :] += v[1:, :]
    count[:-1, :] += 1.0
    total[:, 1:] += v[:, :-1]
    count[:, 1:] += 1.0
    total[:, :-1] += v[:, 1:]
    count[:, :-1] += 1.0
    return PathlossMap(
        grid=FeatureGrid(total / count, ChannelKind.PATHLOSS),
        provenance=m.provenance,
    )
