"""Seeded synthetic dataset: one simulated year of hourly load, weather
forecasts, and retail prices for a small set of consumers.

The generator mimics a Nordic heat-pump household: strongly seasonal load
coupled to temperature, morning and evening activity peaks, weekend shape,
multi-day cloudiness episodes (so stored PV energy has value beyond a
24-hour lookahead), and retail purchase prices that are volatile in the
cold months and flat in the warm ones, always well above the feed-in price.

Everything derives from one Philox seed, so the shipped dataset is
reproducible bit for bit and CI never needs proprietary data.
"""

from __future__ import annotations

import csv
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .domain import (LOAD_HEADER, NWP_HEADER, NWP_HORIZONS, PRICES_HEADER,
                     SeriesFrame, TimeGrid, format_utc)
from .forecast import make_rng

DEFAULT_START = datetime(2020, 12, 1, tzinfo=timezone.utc)
DEFAULT_HOURS = 9528          # 2020-12-01 .. 2021-12-31
CONSUMER_SCALES = (1.0, 1.45, 0.7)

# month -> (price volatility, evening-peak uplift)
PRICE_VOLATILITY = {1: 0.30, 2: 0.26, 3: 0.20, 4: 0.07, 5: 0.07, 6: 0.07,
                    7: 0.08, 8: 0.08, 9: 0.12, 10: 0.55, 11: 0.42, 12: 0.34}
PEAK_UPLIFT_COLD = 0.40       # October-March 17:00-19:59 distribution fee
PEAK_UPLIFT_WARM = 0.10


def _calendar(start: datetime, n: int):
    ts = [start + timedelta(hours=i) for i in range(n)]
    doy = np.array([t.timetuple().tm_yday for t in ts], dtype=float)
    hod = np.array([t.hour for t in ts], dtype=float)
    dow = np.array([t.weekday() for t in ts], dtype=float)
    month = np.array([t.month for t in ts])
    return ts, doy, hod, dow, month


def _ar1(rng, n, rho, sd):
    out = np.empty(n)
    out[0] = rng.normal(0.0, sd)
    innov = rng.normal(0.0, sd * np.sqrt(1 - rho * rho), n)
    for i in range(1, n):
        out[i] = rho * out[i - 1] + innov[i]
    return out


def _weather(rng, doy, hod, n):
    season = -np.cos(2 * np.pi * (doy - 20) / 365.0)
    temp = 8.0 + 9.0 * season + 4.0 * np.sin(2 * np.pi * (hod - 9) / 24.0) \
        + _ar1(rng, n, 0.95, 2.2)

    # cloudiness: day-scale autocorrelated episodes plus hourly wiggle
    n_days = n // 24 + 2
    base_day = 0.58 - 0.17 * season[::24][:n_days].repeat(24)[:n]
    episode = np.clip(_ar1(rng, n_days, 0.65, 0.30), -0.5, 0.5)
    cloud = np.clip(base_day + episode.repeat(24)[:n]
                    + 0.10 * _ar1(rng, n, 0.7, 1.0), 0.0, 1.0)
    return temp, cloud


def _load(rng, temp, hod, dow, scale):
    n = temp.shape[0]
    morning = 0.35 * np.exp(-0.5 * ((hod - 7.5) / 1.6) ** 2)
    evening = 0.55 * np.exp(-0.5 * ((hod - 18.5) / 2.2) ** 2)
    weekend = np.where(dow >= 5, 1.10, 1.0)
    heating = 0.075 * np.maximum(0.0, 16.0 - temp)
    base = (0.28 + morning + evening) * weekend + heating
    noise = np.exp(rng.normal(0.0, 0.22, n) - 0.5 * 0.22 ** 2)
    return np.maximum(scale * base * noise, 0.03)


def _prices(rng, doy, hod, month, n):
    season = 1.95 + 0.22 * (-np.cos(2 * np.pi * (doy - 10) / 365.0))
    peak = np.where((hod >= 17) & (hod < 20), 1.0, 0.0)
    cold = np.isin(month, (10, 11, 12, 1, 2, 3))
    uplift = peak * np.where(cold, PEAK_UPLIFT_COLD, PEAK_UPLIFT_WARM)
    vol = np.array([PRICE_VOLATILITY[m] for m in month])
    daily = 0.10 * np.sin(2 * np.pi * (hod - 10) / 24.0)
    buy = np.maximum(season + uplift + daily + vol * _ar1(rng, n, 0.8, 1.0),
                     0.35)
    sell = np.clip(0.35 * buy - 0.45 + 0.05 * rng.normal(0.0, 1.0, n),
                   0.02, 0.55 * buy)
    return buy, sell


def synthetic_frames(seed: int = 0, n_consumers: int = 3,
                     start: datetime = DEFAULT_START,
                     n_hours: int = DEFAULT_HOURS) -> dict:
    """In-memory frames keyed by consumer id; weather and prices are shared,
    loads differ by scale and by consumer-specific noise."""
    rng = make_rng((int(seed), 0xD47A))
    margin = n_hours + NWP_HORIZONS
    ts, doy, hod, dow, month = _calendar(start, margin)
    temp, cloud = _weather(rng, doy, hod, margin)
    buy, sell = _prices(rng, doy[:n_hours], hod[:n_hours], month[:n_hours],
                        n_hours)

    # forecast tables: horizon 1 is the realized hour, later horizons pick up
    # noise that grows with lead time
    nwp_temp = np.empty((n_hours, NWP_HORIZONS))
    nwp_cc = np.empty((n_hours, NWP_HORIZONS))
    ks = np.arange(NWP_HORIZONS)
    temp_noise = rng.normal(0.0, 1.0, (n_hours, NWP_HORIZONS)) \
        * (1.3 * np.sqrt(ks / 24.0))[None, :]
    cc_noise = rng.normal(0.0, 1.0, (n_hours, NWP_HORIZONS)) \
        * (0.15 * np.sqrt(ks / 24.0))[None, :]
    for k in range(NWP_HORIZONS):
        sl = slice(k, n_hours + k)
        nwp_temp[:, k] = temp[sl] + temp_noise[:, k]
        nwp_cc[:, k] = np.clip(cloud[sl] + cc_noise[:, k], 0.0, 1.0)

    grid = TimeGrid(start=start, count=n_hours)
    frames = {}
    for c in range(n_consumers):
        crng = make_rng((int(seed), 0x10AD, c))
        scale = CONSUMER_SCALES[c % len(CONSUMER_SCALES)] \
            * (1.0 + 0.2 * (c // len(CONSUMER_SCALES)))
        load = _load(crng, temp[:n_hours], hod[:n_hours], dow[:n_hours],
                     scale)
        cid = f"c{c + 1}"
        frames[cid] = SeriesFrame(
            grid=grid, load_kwh=load,
            temp_c=nwp_temp[:, 0].copy(), cloud_cover=nwp_cc[:, 0].copy(),
            price_buy_dkk_kwh=buy, price_sell_dkk_kwh=sell,
            nwp_temp_c=nwp_temp, nwp_cloud_cover=nwp_cc,
            consumer_id=cid)
    return frames


def write_dataset(out_dir, seed: int = 0, n_consumers: int = 3,
                  start: datetime = DEFAULT_START,
                  n_hours: int = DEFAULT_HOURS) -> dict:
    """Generate and write load.csv, prices.csv, nwp.csv under ``out_dir``."""
    frames = synthetic_frames(seed, n_consumers, start, n_hours)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    any_frame = next(iter(frames.values()))
    stamps = [format_utc(t) for t in any_frame.grid.timestamps()]

    def fmt(x):
        return format(float(x), ".10g")

    paths = {"load": out_dir / "load.csv",
             "prices": out_dir / "prices.csv",
             "nwp": out_dir / "nwp.csv"}
    with open(paths["load"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LOAD_HEADER)
        for cid, frame in frames.items():
            for t, v in zip(stamps, frame.load_kwh):
                w.writerow([t, cid, fmt(v)])
    with open(paths["prices"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PRICES_HEADER)
        for t, b, s in zip(stamps, any_frame.price_buy_dkk_kwh,
                           any_frame.price_sell_dkk_kwh):
            w.writerow([t, fmt(b), fmt(s)])
    with open(paths["nwp"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(NWP_HEADER)
        for i, t in enumerate(stamps):
            for k in range(NWP_HORIZONS):
                w.writerow([t, k + 1, fmt(any_frame.nwp_temp_c[i, k]),
                            fmt(any_frame.nwp_cloud_cover[i, k])])
    return paths
