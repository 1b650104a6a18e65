"""Hourly PV energy from cloud-cover forecasts.

Pipeline per hour: solar position -> clear-sky irradiance (Haurwitz) ->
cloud-cover attenuation -> nameplate scaling to kWh.  Solar geometry is
evaluated at the midpoint of each hourly interval to reduce sunrise/sunset
discretization bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .domain import DT_H, NWP_HORIZONS, PlantSpec, SeriesFrame, TimeGrid
from .errors import DomainError

# Haurwitz clear-sky coefficients: GHI_cs = A * cos(z) * exp(-B / cos(z)).
_HAURWITZ_A = 1098.0
_HAURWITZ_B = 0.057

# Attenuation of clear-sky GHI by normalized cloud cover (0 clear, 1 overcast).
_CC_FLOOR = 0.35
_CC_SPAN = 0.65

_CC_TOL = 0.01


@dataclass(frozen=True)
class SolarGeometry:
    """Site coordinates, optionally pinned to one UTC instant."""

    latitude_deg: float
    longitude_deg: float
    timestamp: datetime | None = None

    def __post_init__(self):
        if abs(self.latitude_deg) > 90:
            raise ValueError(f"latitude {self.latitude_deg} outside [-90, 90]")
        if abs(self.longitude_deg) > 180:
            raise ValueError(f"longitude {self.longitude_deg} outside [-180, 180]")

    def at(self, ts: datetime) -> "SolarGeometry":
        return SolarGeometry(self.latitude_deg, self.longitude_deg, ts)


@dataclass(frozen=True)
class PvTrace:
    """Per-hour PV energy on a grid."""

    grid: TimeGrid
    pv_kwh: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.pv_kwh, dtype=float))
        if arr.shape != (self.grid.count,):
            raise ValueError("pv trace length must match grid")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("pv energy must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "pv_kwh", arr)


def cos_zenith(latitude_deg: float, longitude_deg: float, ts: datetime) -> float:
    """Cosine of the solar zenith angle.

    Declination uses the 23.45 * sin(360 * (284 + n) / 365) approximation and
    the hour angle includes the equation-of-time correction; both are accurate
    to well under a degree, which is irrelevant at hourly energy granularity.
    """
    ts = ts.astimezone(timezone.utc)
    n = ts.timetuple().tm_yday
    decl = math.radians(23.45) * math.sin(math.radians(360.0 * (284 + n) / 365.0))
    b = math.radians(360.0 * (n - 81) / 364.0)
    eot_min = 9.87 * math.sin(2 * b) - 7.53 * math.cos(b) - 1.5 * math.sin(b)
    hour_utc = ts.hour + ts.minute / 60.0 + ts.second / 3600.0
    solar_time = hour_utc + longitude_deg / 15.0 + eot_min / 60.0
    omega = math.radians(15.0 * (solar_time - 12.0))
    lat = math.radians(latitude_deg)
    return math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(omega)


def solar_zenith_deg(geom: SolarGeometry) -> float:
    if geom.timestamp is None:
        raise ValueError("geometry carries no timestamp")
    c = cos_zenith(geom.latitude_deg, geom.longitude_deg, geom.timestamp)
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def clear_sky_ghi(geom: SolarGeometry) -> float:
    """Haurwitz clear-sky global horizontal irradiance in W/m^2.

    Zero whenever the sun is at or below the horizon; continuous through
    sunrise and sunset.
    """
    if geom.timestamp is None:
        raise ValueError("geometry carries no timestamp")
    c = cos_zenith(geom.latitude_deg, geom.longitude_deg, geom.timestamp)
    if c <= 0.0:
        return 0.0
    return _HAURWITZ_A * c * math.exp(-_HAURWITZ_B / c)


def cloud_to_ghi(ghi_cs, cc):
    """Attenuate clear-sky GHI by normalized cloud cover:
    ghi_cs * (0.35 + 0.65 * (1 - cc)).  Accepts scalars or arrays."""
    ghi_arr = np.asarray(ghi_cs, dtype=float)
    cc_arr = np.asarray(cc, dtype=float)
    if np.any(ghi_arr < 0):
        raise DomainError("clear-sky irradiance must be nonnegative")
    if np.any(cc_arr < -_CC_TOL) or np.any(cc_arr > 1 + _CC_TOL):
        raise DomainError("cloud cover outside [0, 1] beyond clamping tolerance")
    cc_arr = np.clip(cc_arr, 0.0, 1.0)
    out = ghi_arr * (_CC_FLOOR + _CC_SPAN * (1.0 - cc_arr))
    if out.ndim == 0:
        return float(out)
    return out


def pv_energy(ghi, spec: PlantSpec, dt_h: float = DT_H):
    """PV energy in kWh for one interval of ``dt_h`` hours at irradiance
    ``ghi`` W/m^2: nameplate (at 1000 W/m^2) scaled by irradiance, the
    transposition factor, and the performance ratio."""
    ghi_arr = np.asarray(ghi, dtype=float)
    if np.any(ghi_arr < 0):
        raise DomainError("irradiance must be nonnegative")
    out = (spec.pv_peak_w / 1000.0) * (ghi_arr / 1000.0) * spec.pv_tf * spec.pv_pr * dt_h
    if out.ndim == 0:
        return float(out)
    return out


def clear_sky_series(geom: SolarGeometry, grid: TimeGrid,
                     start: int = 0, count: int | None = None) -> np.ndarray:
    """Clear-sky GHI for grid hours start..start+count-1, each interval
    evaluated at its half-hour midpoint."""
    if count is None:
        count = grid.count - start
    half = timedelta(minutes=30)
    out = np.empty(count)
    for j in range(count):
        # Hour midpoints are well-defined in time even past the stored grid.
        ts = grid.start + timedelta(hours=start + j) + half
        out[j] = clear_sky_ghi(geom.at(ts))
    return out


def simulate_pv(frame: SeriesFrame, geom: SolarGeometry, spec: PlantSpec) -> PvTrace:
    """Realized PV trace for a whole frame, driven by the per-hour cloud
    cover (horizon-1 forecast values)."""
    ghi_cs = clear_sky_series(geom, frame.grid)
    ghi = cloud_to_ghi(ghi_cs, frame.cloud_cover)
    return PvTrace(grid=frame.grid, pv_kwh=pv_energy(ghi, spec, frame.grid.step_h))


def pv_forecast(frame: SeriesFrame, issue: int, geom: SolarGeometry,
                spec: PlantSpec, horizons: int = NWP_HORIZONS) -> np.ndarray:
    """PV energy forecast (kWh) for the hours issue..issue+horizons-1 using the
    cloud-cover forecast issued at grid hour ``issue``."""
    _, cc = frame.nwp_window(issue, horizons)
    ghi_cs = clear_sky_series(geom, frame.grid, start=issue, count=horizons)
    return pv_energy(cloud_to_ghi(ghi_cs, cc), spec, frame.grid.step_h)
