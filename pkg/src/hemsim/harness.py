"""Rolling-horizon experiment driver.

Hourly loop per consumer and controller: learn the newly observed load,
forecast the next 24 hours, build the PV and price windows, solve (or apply
the naive rule), commit the first hour against the realized demand, account
the cost.  Forecaster state evolves over every hour of the frame, dispatch
happens only inside the simulated months, and the battery state carries
across month boundaries within a campaign.

Scenario draws are seeded per (campaign seed, consumer index, hour index) so
different controllers consuming scenarios at the same hour see identical
draws, which keeps controller comparisons paired.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controllers import (ControllerKind, DispatchDecision,
                          NAIVE_SEASON_MONTHS, StepResult, combined_delegate,
                          naive_step, optimizer_step, pi_rh_step)
from .domain import DT_H, PlantSpec, ScenarioSet, SeriesFrame, format_utc
from .errors import ConfigError
from .forecast import (EmpiricalCdf, ForecastBundle, ResidualModel, RlsState,
                       WARMUP_UPDATES, gaussian_rank_corr, point_forecast,
                       rls_update, sample_scenarios_copula,
                       sample_scenarios_rls, update_regressors)
from .milp import SolveOptions, build_instance, solve
from .pv_sim import PvTrace, SolarGeometry, pv_forecast, simulate_pv

HORIZON = 24


@dataclass(frozen=True)
class RunConfig:
    """Campaign settings shared by every run."""

    consumer_ids: tuple = ("c1",)
    months: tuple = (1, 4, 7, 10)          # calendar months to simulate
    year: int | None = None                # restrict to one calendar year
    controllers: tuple = (ControllerKind.NAIVE, ControllerKind.RLS_SP)
    scenario_count: int = 100
    seed: int = 0
    plant: PlantSpec = field(default_factory=PlantSpec)
    latitude_deg: float = 55.68
    longitude_deg: float = 12.57
    solver: SolveOptions = field(default_factory=lambda: SolveOptions(
        lp_backend="highs"))
    naive_months: frozenset = NAIVE_SEASON_MONTHS
    workers: int = 1
    reset_soc_monthly: bool = False        # test mode: monthly additivity

    def month_codes(self, frame: SeriesFrame) -> set:
        codes = set()
        years = {self.year} if self.year is not None else \
            {ts.year for ts in (frame.grid.timestamp(0),
                                frame.grid.timestamp(frame.grid.count - 1))}
        for y in years:
            for m in self.months:
                codes.add(y * 100 + int(m))
        return codes


@dataclass
class LedgerEntry:
    index: int
    timestamp: str
    month_code: int
    demand_kwh: float
    pv_kwh: float
    decision: DispatchDecision
    purchase_cost: float
    sale_revenue: float
    soc_kwh: float
    solver_status: str | None = None
    fallback: str | None = None

    @property
    def net_cost(self) -> float:
        return self.purchase_cost - self.sale_revenue


@dataclass
class RunLedger:
    controller: ControllerKind
    consumer_id: str
    seed: int
    entries: list = field(default_factory=list)

    def append(self, entry: LedgerEntry) -> None:
        self.entries.append(entry)

    @property
    def total_cost(self) -> float:
        return float(sum(e.net_cost for e in self.entries))

    def monthly_costs(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e.month_code] = out.get(e.month_code, 0.0) + e.net_cost
        return dict(sorted(out.items()))

    def monthly_mean_soc(self) -> dict:
        acc: dict = {}
        for e in self.entries:
            acc.setdefault(e.month_code, []).append(e.soc_kwh)
        return {k: float(np.mean(v)) for k, v in sorted(acc.items())}

    def fallback_count(self) -> int:
        return sum(1 for e in self.entries if e.fallback)

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = ["timestamp", "controller", "demand_kwh", "pv_kwh", "g_d_kw",
                "g_b_kw", "b_ch_kw", "b_dis_kw", "b_g_kw", "b_d_kw", "p_g_kw",
                "p_d_kw", "p_b_kw", "buy_kwh", "sell_kwh", "soc_kwh",
                "purchase_cost_dkk", "sale_revenue_dkk", "net_cost_dkk"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for e in self.entries:
                d = e.decision
                w.writerow([e.timestamp, self.controller.value,
                            *(format(v, ".10g") for v in (
                                e.demand_kwh, e.pv_kwh, d.g_d_kw, d.g_b_kw,
                                d.b_ch_kw, d.b_dis_kw, d.b_g_kw, d.b_d_kw,
                                d.p_g_kw, d.p_d_kw, d.p_b_kw, d.buy_kwh,
                                d.sell_kwh, e.soc_kwh, e.purchase_cost,
                                e.sale_revenue, e.net_cost))])
        return path


# -- forecaster wrappers -----------------------------------------------------


class RollingRlsForecaster:
    """Feeds the per-horizon RLS models hour by hour and tracks residuals."""

    def __init__(self, frame: SeriesFrame, forgetting: float = 0.999):
        self.frame = frame
        self.state = RlsState.create(forgetting=forgetting)
        self.residual = ResidualModel()
        self._pending: dict = {}   # issue index -> issued mean vector

    def observe(self, i: int) -> None:
        """Called at decision hour i: hour i-1 just completed."""
        if i < 1:
            return
        target = i - 1
        y = float(self.frame.load_kwh[target])
        temps = np.empty(HORIZON)
        for k in range(1, HORIZON + 1):
            issue = target - (k - 1)
            temps[k - 1] = (self.frame.nwp_temp_c[issue, k - 1]
                            if self.frame.nwp_temp_c is not None and issue >= 0
                            else self.frame.temp_c[target])
        ts = self.frame.grid.timestamp(target)
        regs = update_regressors(self.state, ts.hour,
                                 ts.weekday() * 24 + ts.hour, temps)
        self.state = rls_update(self.state, regs, y)
        self.residual.push_load(y)

        done = i - HORIZON
        if done in self._pending:
            mean = self._pending.pop(done)
            actual = self.frame.load_kwh[done:done + HORIZON]
            self.residual.push_residual(actual - mean)
        # drop stale issues that were never completed (frame gaps cannot
        # occur on one grid, but keep the dict bounded anyway)
        for key in [k for k in self._pending if k < i - 2 * HORIZON]:
            del self._pending[key]
        # issue a forecast every hour once the models are warm, so the
        # residual covariance keeps learning even when no controller asks
        if self.state.warm and i + HORIZON <= self.frame.grid.count:
            self.mean_forecast(i)

    @property
    def warm(self) -> bool:
        return self.state.warm and self.residual.n_residuals >= 8

    def mean_forecast(self, i: int) -> np.ndarray:
        temp, _ = self.frame.nwp_window(i, HORIZON)
        ts = self.frame.grid.timestamp(i)
        mean = point_forecast(self.state, temp, ts.hour,
                              ts.weekday() * 24 + ts.hour)
        self._pending.setdefault(i, mean)
        return mean

    def bundle(self, i: int, s_count: int, seed) -> ForecastBundle:
        mean = self.mean_forecast(i)
        scen = sample_scenarios_rls(self.residual, mean, s_count, seed)
        return ForecastBundle(mean, scen, issued_at=i)


class RollingCopulaForecaster:
    """Quantile-copula forecaster: hour-of-day-conditional empirical
    marginals plus a Gaussian-domain temporal correlation."""

    def __init__(self, frame: SeriesFrame, window: int = 672,
                 neighborhood: int = 1):
        self.frame = frame
        self.window = window
        self.neighborhood = neighborhood
        self.loads: list = []
        self.hours: list = []

    def observe(self, i: int) -> None:
        if i < 1:
            return
        ts = self.frame.grid.timestamp(i - 1)
        self.loads.append(float(self.frame.load_kwh[i - 1]))
        self.hours.append(ts.hour)
        if len(self.loads) > self.window:
            del self.loads[0]
            del self.hours[0]

    @property
    def warm(self) -> bool:
        return len(self.loads) >= self.window

    def marginals(self, i: int) -> list:
        loads = np.asarray(self.loads)
        hours = np.asarray(self.hours)
        first = self.frame.grid.timestamp(i).hour
        out = []
        for k in range(HORIZON):
            h = (first + k) % 24
            near = np.minimum((hours - h) % 24, (h - hours) % 24) \
                <= self.neighborhood
            out.append(EmpiricalCdf(loads[near]))
        return out

    def bundle(self, i: int, s_count: int, seed) -> ForecastBundle:
        margs = self.marginals(i)
        corr = gaussian_rank_corr(np.asarray(self.loads), HORIZON)
        scen = sample_scenarios_copula(margs, corr, s_count, seed)
        mean = np.array([m.mean() for m in margs])
        return ForecastBundle(mean, scen, issued_at=i)


def scenario_seed(base_seed: int, consumer_index: int, hour_index: int):
    """Stream key shared by every controller that consumes scenarios."""
    return (int(base_seed), int(consumer_index), int(hour_index))


# -- rolling loop --------------------------------------------------------------


def run_rolling(frame: SeriesFrame, pv: PvTrace, kind: ControllerKind,
                config: RunConfig, consumer_index: int = 0,
                forecaster=None) -> RunLedger:
    """Simulate one controller over the configured months of one frame.

    Hours outside the simulated months still feed the forecaster; the
    battery only moves inside them (idle across gaps, state carried over).
    """
    geom = SolarGeometry(config.latitude_deg, config.longitude_deg)
    codes = config.month_codes(frame)
    ym = frame.grid.year_month()
    sim_mask = np.isin(ym, sorted(codes))
    n = frame.grid.count
    if not sim_mask.any():
        raise ConfigError(f"months {sorted(codes)} not present in the frame")

    needs_forecast = kind in (ControllerKind.RLS_SP, ControllerKind.RLS_EV,
                              ControllerKind.NAIVE_PLUS_RLS_SP)
    needs_copula = kind in (ControllerKind.COPULA_SP, ControllerKind.COPULA_EV)
    if forecaster is None:
        if needs_forecast:
            forecaster = RollingRlsForecaster(frame)
        elif needs_copula:
            forecaster = RollingCopulaForecaster(frame)

    ledger = RunLedger(kind, frame.consumer_id or config.consumer_ids[0],
                       config.seed)
    soc = config.plant.s_ini_kwh
    spec = config.plant
    last_code = None

    for i in range(n):
        if forecaster is not None:
            forecaster.observe(i)
        if not sim_mask[i]:
            continue
        if i + HORIZON > n:
            break  # lookahead window would leave the frame
        if config.reset_soc_monthly and ym[i] != last_code:
            soc = config.plant.s_ini_kwh
        last_code = int(ym[i])

        demand = float(frame.load_kwh[i])
        pv_now = float(pv.pv_kwh[i])
        month = int(str(ym[i])[-2:])
        active = kind
        if kind is ControllerKind.NAIVE_PLUS_RLS_SP:
            active = combined_delegate(month, config.naive_months)

        if active is ControllerKind.NAIVE:
            decision = naive_step(soc, pv_now, demand, spec)
            step = StepResult(decision)
        else:
            if forecaster is not None and not forecaster.warm:
                decision = naive_step(soc, pv_now, demand, spec)
                step = StepResult(decision, fallback="cold-start")
            else:
                buy = frame.price_buy_dkk_kwh[i:i + HORIZON]
                sell = frame.price_sell_dkk_kwh[i:i + HORIZON]
                pv_win = pv_forecast(frame, i, geom, spec, HORIZON)
                pv_win[0] = pv_now
                if active is ControllerKind.PI_RH:
                    truth = frame.load_kwh[i:i + HORIZON]
                    step = pi_rh_step(soc, truth, pv_win, buy, sell, spec,
                                      realized_pv_kwh=pv_now,
                                      opts=config.solver)
                else:
                    seed = scenario_seed(config.seed, consumer_index, i)
                    bundle = forecaster.bundle(i, config.scenario_count, seed)
                    step = optimizer_step(active, soc, bundle.scenarios,
                                          pv_win, buy, sell, spec,
                                          realized_demand_kwh=demand,
                                          realized_pv_kwh=pv_now,
                                          opts=config.solver)
        d = step.decision
        entry = LedgerEntry(
            index=i, timestamp=format_utc(frame.grid.timestamp(i)),
            month_code=int(ym[i]), demand_kwh=demand, pv_kwh=pv_now,
            decision=d,
            purchase_cost=float(frame.price_buy_dkk_kwh[i]) * d.buy_kwh,
            sale_revenue=float(frame.price_sell_dkk_kwh[i]) * d.sell_kwh,
            soc_kwh=d.soc_kwh, solver_status=step.solver_status,
            fallback=step.fallback)
        ledger.append(entry)
        soc = d.soc_kwh
    return ledger


def passive_cost(frame: SeriesFrame, config: RunConfig | None = None) -> float:
    """Bill of a consumer with no PV and no battery: buy price times load,
    over the simulated months (or the whole frame without a config)."""
    if config is None:
        mask = np.ones(frame.grid.count, dtype=bool)
    else:
        mask = np.isin(frame.grid.year_month(),
                       sorted(config.month_codes(frame)))
    return float(frame.price_buy_dkk_kwh[mask] @ frame.load_kwh[mask])


def global_optimum(frame: SeriesFrame, pv: PvTrace, spec: PlantSpec,
                   hours: slice, opts: SolveOptions | None = None) -> float:
    """Full-information optimum over an arbitrary span: one deterministic
    solve covering every hour at once.  Lower-bounds any rolling policy on
    the same data; test-mode yardstick, not a controller."""
    demand = frame.load_kwh[hours]
    scen = ScenarioSet.single(demand)
    inst = build_instance(spec, pv.pv_kwh[hours],
                          frame.price_buy_dkk_kwh[hours],
                          frame.price_sell_dkk_kwh[hours], scen)
    res = solve(inst, opts or SolveOptions(lp_backend="highs"))
    if res.x is None:
        raise RuntimeError(f"global solve failed: {res.status}")
    return res.objective


# -- campaigns -----------------------------------------------------------------


def _run_one(args):
    frame, pv, kind, config, consumer_index = args
    return run_rolling(frame, pv, kind, config, consumer_index)


def compare_controllers(frames: dict, config: RunConfig,
                        pv_traces: dict | None = None) -> "Comparison":
    """Run every configured controller on every consumer over identical
    data and seeds; collect per-month and total costs."""
    if len(config.controllers) < 1:
        raise ConfigError("configure at least one controller")
    geom = SolarGeometry(config.latitude_deg, config.longitude_deg)
    if pv_traces is None:
        pv_traces = {cid: simulate_pv(frames[cid], geom, config.plant)
                     for cid in config.consumer_ids}
    jobs = []
    for ci, cid in enumerate(config.consumer_ids):
        if cid not in frames:
            raise ConfigError(f"no frame for consumer {cid!r}")
        for kind in config.controllers:
            jobs.append((frames[cid], pv_traces[cid], kind, config, ci))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            ledgers = list(pool.map(_run_one, jobs))
    else:
        ledgers = [_run_one(j) for j in jobs]

    comp = Comparison(config=config)
    for (frame, _, kind, _, ci), ledger in zip(jobs, ledgers):
        cid = config.consumer_ids[ci]
        comp.add(cid, kind, ledger, passive=passive_cost(frame, config))
    return comp


@dataclass
class Comparison:
    """Controller-versus-controller cost table for one campaign."""

    config: RunConfig
    rows: list = field(default_factory=list)
    ledgers: dict = field(default_factory=dict)

    def add(self, consumer_id: str, kind: ControllerKind, ledger: RunLedger,
            passive: float) -> None:
        self.ledgers[(consumer_id, kind)] = ledger
        for code, cost in ledger.monthly_costs().items():
            self.rows.append({"consumer": consumer_id,
                              "controller": kind.value,
                              "month": f"{code // 100:04d}-{code % 100:02d}",
                              "cost_dkk": cost})
        self.rows.append({"consumer": consumer_id, "controller": kind.value,
                          "month": "total", "cost_dkk": ledger.total_cost})
        if not any(r for r in self.rows
                   if r["consumer"] == consumer_id
                   and r["controller"] == "passive"):
            self.rows.append({"consumer": consumer_id,
                              "controller": "passive", "month": "total",
                              "cost_dkk": passive})

    def total(self, consumer_id: str, controller: str) -> float:
        for r in self.rows:
            if (r["consumer"] == consumer_id
                    and r["controller"] == controller
                    and r["month"] == "total"):
                return r["cost_dkk"]
        raise KeyError((consumer_id, controller))

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["consumer", "controller", "month", "cost_dkk"])
            for r in sorted(self.rows, key=lambda r: (r["consumer"],
                                                      r["controller"],
                                                      r["month"])):
                w.writerow([r["consumer"], r["controller"], r["month"],
                            format(r["cost_dkk"], ".10g")])
        return path


def splice_load_prices(load_frame: SeriesFrame, price_frame: SeriesFrame,
                       load_year: int, price_year: int) -> SeriesFrame:
    """Overlay one calendar year's prices onto another year's load frame,
    aligned by (month, day, hour); February 29 rows are dropped from the
    output when the years disagree on leap days."""
    price_map = {}
    for j in range(price_frame.grid.count):
        ts = price_frame.grid.timestamp(j)
        if ts.year == price_year:
            price_map[(ts.month, ts.day, ts.hour)] = (
                float(price_frame.price_buy_dkk_kwh[j]),
                float(price_frame.price_sell_dkk_kwh[j]))
    keep, buy, sell = [], [], []
    for i in range(load_frame.grid.count):
        ts = load_frame.grid.timestamp(i)
        if ts.year != load_year:
            continue
        key = (ts.month, ts.day, ts.hour)
        if key not in price_map:
            if ts.month == 2 and ts.day == 29:
                continue
            raise ConfigError(f"price year {price_year} lacks hour {key}")
        keep.append(i)
        b, s = price_map[key]
        buy.append(b)
        sell.append(s)
    if not keep:
        raise ConfigError("load frame has no hours in the load year")
    # the spliced frame must stay hourly-contiguous: re-anchor on the first
    # kept hour and keep a contiguous run (leap-day drops break contiguity,
    # so splice month by month in campaigns that straddle February)
    runs = np.split(np.asarray(keep),
                    np.flatnonzero(np.diff(keep) != 1) + 1)
    longest = max(runs, key=len)
    sel = np.asarray(longest)
    pos = {k: idx for idx, k in enumerate(keep)}
    from .domain import TimeGrid
    grid = TimeGrid(start=load_frame.grid.timestamp(int(sel[0])),
                    count=int(sel.size))
    take = [pos[int(i)] for i in sel]
    return SeriesFrame(
        grid=grid,
        load_kwh=load_frame.load_kwh[sel],
        temp_c=load_frame.temp_c[sel],
        cloud_cover=load_frame.cloud_cover[sel],
        price_buy_dkk_kwh=np.asarray(buy)[take],
        price_sell_dkk_kwh=np.asarray(sell)[take],
        nwp_temp_c=None if load_frame.nwp_temp_c is None
        else load_frame.nwp_temp_c[sel],
        nwp_cloud_cover=None if load_frame.nwp_cloud_cover is None
        else load_frame.nwp_cloud_cover[sel],
        consumer_id=load_frame.consumer_id,
        gap_counts=dict(load_frame.gap_counts),
    )
