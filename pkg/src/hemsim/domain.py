"""Core data model: hourly time grid, input series, plant parameters, scenarios.

Unit conventions (fixed at ingestion, never converted downstream):
energy in kWh, power in kW, prices in DKK/kWh, PV nameplate in W.
All timestamps are UTC; the grid resolution is one hour.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import AlignmentError, EmptySelection, SchemaError

DT_H = 1.0
NWP_HORIZONS = 24

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# Longest run of consecutive missing hours that forward-fill may bridge.
MAX_GAP_HOURS = 3

# Cloud cover slightly outside [0, 1] is clamped; beyond this it is an error.
CC_CLAMP_TOL = 0.01


def parse_utc_hour(text: str) -> datetime:
    """Parse an ISO-8601 timestamp (offset or 'Z') and normalize to a UTC hour."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise SchemaError(f"unparseable timestamp {text!r}") from exc
    if ts.tzinfo is None:
        raise SchemaError(f"timestamp {text!r} has no UTC offset")
    ts = ts.astimezone(timezone.utc)
    if ts.minute or ts.second or ts.microsecond:
        raise SchemaError(f"timestamp {text!r} is not on a whole hour")
    return ts


def _epoch_hour(ts: datetime) -> int:
    return int((ts - _EPOCH).total_seconds()) // 3600


def _from_epoch_hour(h: int) -> datetime:
    return _EPOCH + timedelta(hours=int(h))


def format_utc(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class TimeGrid:
    """Aligned hourly axis shared by every series of one consumer."""

    start: datetime
    count: int
    step_h: float = DT_H

    def __post_init__(self):
        if self.step_h != DT_H:
            raise ValueError("grid step is fixed at 1 hour")
        if self.count < 1:
            raise ValueError("grid needs at least one hour")
        if self.start.tzinfo is None:
            raise ValueError("grid start must be timezone-aware UTC")
        object.__setattr__(self, "start", self.start.astimezone(timezone.utc))
        if self.start.minute or self.start.second or self.start.microsecond:
            raise ValueError("grid start must be on a whole hour")

    def __len__(self) -> int:
        return self.count

    @property
    def start_epoch_h(self) -> int:
        return _epoch_hour(self.start)

    def timestamp(self, i: int) -> datetime:
        if not 0 <= i < self.count:
            raise IndexError(f"hour index {i} outside grid of {self.count}")
        return _from_epoch_hour(self.start_epoch_h + i)

    def timestamps(self) -> list[datetime]:
        return [_from_epoch_hour(self.start_epoch_h + i) for i in range(self.count)]

    def index(self, ts: datetime) -> int:
        i = _epoch_hour(ts) - self.start_epoch_h
        if not 0 <= i < self.count:
            raise IndexError(f"{ts} outside grid")
        return i

    def year_month(self) -> np.ndarray:
        """Per-hour (year*100 + month) codes, handy for calendar filters."""
        out = np.empty(self.count, dtype=np.int64)
        for i in range(self.count):
            ts = self.timestamp(i)
            out[i] = ts.year * 100 + ts.month
        return out

    def hour_of_day(self) -> np.ndarray:
        h0 = self.start.hour
        return (h0 + np.arange(self.count)) % 24


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(a, dtype=float))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SeriesFrame:
    """All hourly inputs of one consumer on a single grid.

    ``temp_c`` and ``cloud_cover`` are the freshest weather values per hour
    (horizon-1 of the forecast issued at that hour).  When the full
    multi-horizon table is available it is kept in ``nwp_temp_c`` /
    ``nwp_cloud_cover`` with shape (count, 24): row i holds horizons 1..24 of
    the issue at grid hour i, horizon k covering the hour starting k-1 hours
    after the issue.
    """

    grid: TimeGrid
    load_kwh: np.ndarray
    temp_c: np.ndarray
    cloud_cover: np.ndarray
    price_buy_dkk_kwh: np.ndarray
    price_sell_dkk_kwh: np.ndarray
    nwp_temp_c: np.ndarray | None = None
    nwp_cloud_cover: np.ndarray | None = None
    consumer_id: str = ""
    gap_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.count
        for name in ("load_kwh", "temp_c", "cloud_cover",
                     "price_buy_dkk_kwh", "price_sell_dkk_kwh"):
            arr = _readonly(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, grid expects ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if np.any(self.load_kwh < 0):
            raise ValueError("load_kwh must be nonnegative")
        cc = np.asarray(self.cloud_cover, dtype=float)
        if np.any(cc < -CC_CLAMP_TOL) or np.any(cc > 1 + CC_CLAMP_TOL):
            raise ValueError("cloud_cover outside [0, 1] beyond clamping tolerance")
        object.__setattr__(self, "cloud_cover", _readonly(np.clip(cc, 0.0, 1.0)))
        for name in ("nwp_temp_c", "nwp_cloud_cover"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = _readonly(arr)
            if arr.shape != (n, NWP_HORIZONS):
                raise ValueError(f"{name} must have shape ({n}, {NWP_HORIZONS})")
            object.__setattr__(self, name, arr)
        if self.nwp_cloud_cover is not None:
            cc = np.asarray(self.nwp_cloud_cover)
            if np.any(cc < -CC_CLAMP_TOL) or np.any(cc > 1 + CC_CLAMP_TOL):
                raise ValueError("forecast cloud_cover outside [0, 1] beyond tolerance")
            object.__setattr__(self, "nwp_cloud_cover",
                               _readonly(np.clip(cc, 0.0, 1.0)))
        if np.any(self.price_buy_dkk_kwh < self.price_sell_dkk_kwh):
            warnings.warn("price_buy < price_sell on some hours; retail data "
                          "normally keeps purchase above feed-in", stacklevel=2)

    def __len__(self) -> int:
        return self.grid.count

    def nwp_window(self, i: int, horizons: int = NWP_HORIZONS):
        """Temperature and cloud-cover forecasts for hours i..i+horizons-1,
        as seen from the issue at grid hour i.

        Falls back to the realized series when no horizon table is attached
        (a perfect-forecast frame, used by synthetic in-memory tests).
        """
        if self.nwp_temp_c is not None and self.nwp_cloud_cover is not None:
            if not 0 <= i < self.grid.count:
                raise IndexError("issue hour outside grid")
            return (self.nwp_temp_c[i, :horizons].copy(),
                    self.nwp_cloud_cover[i, :horizons].copy())
        if i < 0 or i + horizons > self.grid.count:
            raise IndexError("forecast window extends past the grid")
        sl = slice(i, i + horizons)
        return self.temp_c[sl].copy(), self.cloud_cover[sl].copy()


@dataclass(frozen=True)
class PlantSpec:
    """Battery, converter, and PV nameplate parameters of one installation."""

    s_min_kwh: float = 0.0
    s_max_kwh: float = 13.5
    s_ini_kwh: float = 0.0
    b_in_kw: float = 5.0
    b_out_kw: float = 5.0
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    phi_dc_ac: float = 0.97
    phi_ac_dc: float = 0.97
    pv_peak_w: float = 5000.0
    pv_tf: float = 1.1
    pv_pr: float = 0.8

    def __post_init__(self):
        if not 0 <= self.s_min_kwh <= self.s_ini_kwh <= self.s_max_kwh:
            raise ValueError("battery bounds must satisfy 0 <= s_min <= s_ini <= s_max")
        if self.b_in_kw <= 0 or self.b_out_kw <= 0:
            raise ValueError("charge/discharge power limits must be positive")
        for name in ("eta_ch", "eta_dis", "phi_dc_ac", "phi_ac_dc"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.pv_peak_w < 0:
            raise ValueError("pv_peak_w must be nonnegative")
        if self.pv_tf <= 0 or not 0 < self.pv_pr <= 1:
            raise ValueError("pv_tf must be > 0 and pv_pr in (0, 1]")

    def with_soc(self, s_ini_kwh: float) -> "PlantSpec":
        from dataclasses import replace
        return replace(self, s_ini_kwh=float(s_ini_kwh))


@dataclass(frozen=True)
class ScenarioSet:
    """S x T matrix of demand realizations with scenario probabilities."""

    demand_kwh: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.demand_kwh, dtype=float))
        p = np.asarray(self.prob, dtype=float).ravel()
        if d.shape[0] != p.shape[0]:
            raise ValueError("one probability per scenario required")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("demands must be finite and nonnegative")
        if np.any(p <= 0):
            raise ValueError("scenario probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
        object.__setattr__(self, "demand_kwh", _readonly(d))
        object.__setattr__(self, "prob", _readonly(p))

    @property
    def n_scenarios(self) -> int:
        return self.demand_kwh.shape[0]

    @property
    def horizon(self) -> int:
        return self.demand_kwh.shape[1]

    def expected(self) -> np.ndarray:
        """Probability-weighted mean demand path."""
        return self.prob @ self.demand_kwh

    @staticmethod
    def single(demand_kwh: np.ndarray) -> "ScenarioSet":
        return ScenarioSet(np.atleast_2d(np.asarray(demand_kwh, dtype=float)),
                           np.array([1.0]))


@dataclass(frozen=True)
class PriceStats:
    mean_buy: float
    sd_buy: float
    mean_sell: float
    sd_sell: float


def price_stats(frame: SeriesFrame, month: str | tuple) -> PriceStats:
    """Mean and sample standard deviation (n-1) of buy/sell prices over one
    calendar month, e.g. ``price_stats(frame, "2021-01")``."""
    if isinstance(month, str):
        year_s, _, month_s = month.partition("-")
        try:
            code = int(year_s) * 100 + int(month_s)
        except ValueError as exc:
            raise ValueError(f"month filter {month!r} not in YYYY-MM form") from exc
    else:
        code = int(month[0]) * 100 + int(month[1])
    mask = frame.grid.year_month() == code
    if mask.sum() < 2:
        raise EmptySelection(f"month {month} selects {int(mask.sum())} hours, need >= 2")
    buy = frame.price_buy_dkk_kwh[mask]
    sell = frame.price_sell_dkk_kwh[mask]
    return PriceStats(float(buy.mean()), float(buy.std(ddof=1)),
                      float(sell.mean()), float(sell.std(ddof=1)))


# -- CSV ingestion -------------------------------------------------------------

LOAD_HEADER = ["timestamp", "consumer_id", "load_kwh"]
PRICES_HEADER = ["timestamp", "price_buy_dkk_kwh", "price_sell_dkk_kwh"]
NWP_HEADER = ["issue_time", "horizon_h", "temp_c", "cloud_cover"]


def _read_csv(path, expected_header):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        if [h.strip() for h in header] != expected_header:
            raise SchemaError(f"{path} header {header} != expected {expected_header}")
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    return rows


def _float(cell, path, what):
    try:
        return float(cell)
    except ValueError as exc:
        raise SchemaError(f"{path}: bad {what} value {cell!r}") from exc


def _fill_gaps(hours, mapping, label, counts):
    """Map each epoch hour to its value, forward-filling short dropouts.

    Runs longer than MAX_GAP_HOURS (or a missing leading hour) reject the file.
    """
    out = []
    run = 0
    last = None
    filled = 0
    for h in hours:
        if h in mapping:
            last = mapping[h]
            run = 0
        else:
            run += 1
            if last is None:
                raise AlignmentError(f"{label}: no value at or before first grid hour")
            if run > MAX_GAP_HOURS:
                raise AlignmentError(
                    f"{label}: gap longer than {MAX_GAP_HOURS} consecutive hours")
            filled += 1
        out.append(last)
    counts[label] = filled
    return out


def load_series(load_csv, prices_csv, nwp_csv, consumer_id: str) -> SeriesFrame:
    """Read the three input CSVs, align them on one hourly grid, and return a
    frame for ``consumer_id``.

    The grid covers the intersection of the three files' time ranges.  Missing
    hours inside the range are forward-filled up to three consecutive hours;
    anything longer rejects the file.  ``frame.gap_counts`` reports the number
    of filled hours per column.
    """
    load_rows = _read_csv(load_csv, LOAD_HEADER)
    price_rows = _read_csv(prices_csv, PRICES_HEADER)
    nwp_rows = _read_csv(nwp_csv, NWP_HEADER)

    load_map = {}
    for row in load_rows:
        if len(row) != 3:
            raise SchemaError(f"{load_csv}: malformed row {row}")
        if row[1].strip() != consumer_id:
            continue
        h = _epoch_hour(parse_utc_hour(row[0]))
        v = _float(row[2], load_csv, "load_kwh")
        if v < 0:
            raise ValueError(f"{load_csv}: negative load {v} at {row[0]}")
        if h in load_map:
            raise SchemaError(f"{load_csv}: duplicate hour {row[0]} for {consumer_id}")
        load_map[h] = v
    if not load_map:
        raise SchemaError(f"{load_csv}: no rows for consumer {consumer_id!r}")

    price_map = {}
    for row in price_rows:
        if len(row) != 3:
            raise SchemaError(f"{prices_csv}: malformed row {row}")
        h = _epoch_hour(parse_utc_hour(row[0]))
        if h in price_map:
            raise SchemaError(f"{prices_csv}: duplicate hour {row[0]}")
        price_map[h] = (_float(row[1], prices_csv, "price_buy"),
                        _float(row[2], prices_csv, "price_sell"))

    nwp_map = {}
    for row in nwp_rows:
        if len(row) != 4:
            raise SchemaError(f"{nwp_csv}: malformed row {row}")
        h = _epoch_hour(parse_utc_hour(row[0]))
        try:
            k = int(row[1])
        except ValueError as exc:
            raise SchemaError(f"{nwp_csv}: bad horizon {row[1]!r}") from exc
        if not 1 <= k <= NWP_HORIZONS:
            raise SchemaError(f"{nwp_csv}: horizon_h {k} outside 1..{NWP_HORIZONS}")
        cc = _float(row[3], nwp_csv, "cloud_cover")
        if cc < -CC_CLAMP_TOL or cc > 1 + CC_CLAMP_TOL:
            raise ValueError(f"{nwp_csv}: cloud_cover {cc} outside [0, 1] "
                             f"beyond {CC_CLAMP_TOL} tolerance")
        issue = nwp_map.setdefault(h, {})
        issue[k] = (_float(row[2], nwp_csv, "temp_c"), min(max(cc, 0.0), 1.0))
    complete = {h: issue for h, issue in nwp_map.items()
                if len(issue) == NWP_HORIZONS}
    if not complete:
        raise SchemaError(f"{nwp_csv}: no issue carries all horizons 1..{NWP_HORIZONS}")

    lo = max(min(load_map), min(price_map), min(complete))
    hi = min(max(load_map), max(price_map), max(complete))
    if hi < lo:
        raise AlignmentError("load, prices, and nwp files do not overlap in time")
    hours = list(range(lo, hi + 1))

    counts: dict = {}
    load = _fill_gaps(hours, load_map, "load_kwh", counts)
    prices = _fill_gaps(hours, price_map, "prices", counts)
    counts["price_buy_dkk_kwh"] = counts["price_sell_dkk_kwh"] = counts.pop("prices")
    issues = _fill_gaps(hours, complete, "nwp", counts)

    n = len(hours)
    nwp_temp = np.empty((n, NWP_HORIZONS))
    nwp_cc = np.empty((n, NWP_HORIZONS))
    for i, issue in enumerate(issues):
        for k in range(1, NWP_HORIZONS + 1):
            nwp_temp[i, k - 1], nwp_cc[i, k - 1] = issue[k]

    grid = TimeGrid(start=_from_epoch_hour(lo), count=n)
    buy = np.array([p[0] for p in prices])
    sell = np.array([p[1] for p in prices])
    return SeriesFrame(
        grid=grid,
        load_kwh=np.array(load),
        temp_c=nwp_temp[:, 0].copy(),
        cloud_cover=nwp_cc[:, 0].copy(),
        price_buy_dkk_kwh=buy,
        price_sell_dkk_kwh=sell,
        nwp_temp_c=nwp_temp,
        nwp_cloud_cover=nwp_cc,
        consumer_id=consumer_id,
        gap_counts=counts,
    )


def write_series(frame: SeriesFrame, out_dir, consumer_id: str | None = None) -> dict:
    """Write a frame back to load.csv / prices.csv / nwp.csv under ``out_dir``.

    Numeric formatting uses repr precision so a written frame re-reads equal
    to the original well below 1e-12.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cid = consumer_id if consumer_id is not None else frame.consumer_id
    stamps = [format_utc(ts) for ts in frame.grid.timestamps()]

    def fmt(x):
        return format(float(x), ".17g")

    paths = {"load": out_dir / "load.csv",
             "prices": out_dir / "prices.csv",
             "nwp": out_dir / "nwp.csv"}
    with open(paths["load"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LOAD_HEADER)
        for ts, v in zip(stamps, frame.load_kwh):
            w.writerow([ts, cid, fmt(v)])
    with open(paths["prices"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PRICES_HEADER)
        for ts, b, s in zip(stamps, frame.price_buy_dkk_kwh, frame.price_sell_dkk_kwh):
            w.writerow([ts, fmt(b), fmt(s)])
    with open(paths["nwp"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(NWP_HEADER)
        if frame.nwp_temp_c is not None:
            temp, cc = frame.nwp_temp_c, frame.nwp_cloud_cover
        else:
            # Perfect-forecast fallback: persist the realized series at every
            # horizon so the file round-trips into an equivalent frame.
            temp = np.repeat(frame.temp_c[:, None], NWP_HORIZONS, axis=1)
            cc = np.repeat(frame.cloud_cover[:, None], NWP_HORIZONS, axis=1)
        for i, ts in enumerate(stamps):
            for k in range(NWP_HORIZONS):
                w.writerow([ts, k + 1, fmt(temp[i, k]), fmt(cc[i, k])])
    return paths
