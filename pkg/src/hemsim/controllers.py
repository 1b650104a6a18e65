"""Hourly dispatch policies sharing one decision interface.

Every policy consumes the current state of charge plus whatever information
it is entitled to, and emits the realized hour's flows as a
DispatchDecision:

- naive: self-consumption priority rule, no forecasts, no optimization;
  never trades grid-to-battery or battery-to-grid.
- optimizing (SP and EV flavors): solve the 24-hour stochastic dispatch,
  apply the first hour's battery setpoints, let grid import/export absorb
  the gap between scenario and realized demand.  EV flavors collapse the
  scenario set to its expected path before solving.
- perfect-information: the optimizing step fed the true future demand.
- combined: calendar switch between naive (April-September) and the
  stochastic optimizer (October-March).

Battery setpoints from a solve are physical first-stage commitments; on
realization only the grid side adjusts.  If a stochastic solve comes back
infeasible (possible when a zero-demand scenario collides with unsellable
PV), the step falls back to the expected-value solve and finally to the
naive rule, recording which rung was used.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import DT_H, PlantSpec, ScenarioSet
from .milp import SolveOptions, build_instance, check_solution, solve

_EPS = 1e-12


class ControllerKind(enum.Enum):
    NAIVE = "naive"
    RLS_SP = "rls-sp"
    RLS_EV = "rls-ev"
    COPULA_SP = "copula-sp"
    COPULA_EV = "copula-ev"
    PI_RH = "pi-rh"
    NAIVE_PLUS_RLS_SP = "naive+rls-sp"

    @property
    def uses_scenarios(self) -> bool:
        return self in (ControllerKind.RLS_SP, ControllerKind.COPULA_SP)

    @property
    def is_expected_value(self) -> bool:
        return self in (ControllerKind.RLS_EV, ControllerKind.COPULA_EV,
                        ControllerKind.PI_RH)


# Calendar months handled by the naive rule inside the combined policy.
NAIVE_SEASON_MONTHS = frozenset({4, 5, 6, 7, 8, 9})


def combined_delegate(month: int,
                      naive_months=NAIVE_SEASON_MONTHS) -> ControllerKind:
    """Which policy the season-switching controller applies in ``month``."""
    if not 1 <= month <= 12:
        raise ValueError(f"month {month} outside 1..12")
    return ControllerKind.NAIVE if month in naive_months else ControllerKind.RLS_SP


@dataclass(frozen=True)
class DispatchDecision:
    """One realized hour of flows.  Power in kW, trades in kWh."""

    g_d_kw: float = 0.0      # grid to demand
    g_b_kw: float = 0.0      # grid to battery
    b_ch_kw: float = 0.0     # battery charge flow
    b_dis_kw: float = 0.0    # battery discharge flow
    b_g_kw: float = 0.0      # battery to grid
    b_d_kw: float = 0.0      # battery to demand
    p_g_kw: float = 0.0      # PV to grid
    p_d_kw: float = 0.0      # PV to demand
    p_b_kw: float = 0.0      # PV to battery
    buy_kwh: float = 0.0
    sell_kwh: float = 0.0
    soc_kwh: float = 0.0     # state of charge after the hour

    def cost(self, price_buy: float, price_sell: float) -> float:
        return price_buy * self.buy_kwh - price_sell * self.sell_kwh


def _clip(v: float) -> float:
    return 0.0 if abs(v) < _EPS else float(v)


def naive_step(soc_kwh: float, pv_kwh: float, demand_kwh: float,
               spec: PlantSpec, dt_h: float = DT_H) -> DispatchDecision:
    """Self-consumption priority: PV feeds demand, surplus charges the
    battery until full, the rest is sold; deficits drain the battery before
    the grid steps in.  The battery never touches the grid directly."""
    phi_out, phi_in = spec.phi_dc_ac, spec.phi_ac_dc
    e_pv = max(0.0, float(pv_kwh))
    d = max(0.0, float(demand_kwh))

    pd_e = min(e_pv, d / phi_out)
    leftover = e_pv - pd_e
    headroom = spec.s_max_kwh - soc_kwh
    pb_e = min(leftover,
               spec.b_in_kw * dt_h / spec.eta_ch,
               max(0.0, headroom) / spec.eta_ch)
    pg_e = leftover - pb_e
    b_ch = pb_e * spec.eta_ch / dt_h

    d_rem = d - pd_e * phi_out
    stored = max(0.0, soc_kwh - spec.s_min_kwh)
    bd_e = min(d_rem / phi_out,
               spec.b_out_kw * spec.eta_dis * dt_h,
               stored * spec.eta_dis) if d_rem > _EPS else 0.0
    b_dis = bd_e / spec.eta_dis / dt_h
    if b_ch > 0.0 and b_dis > 0.0:  # cannot occur: surplus implies no deficit
        b_dis, bd_e = 0.0, 0.0
    gd_e = max(0.0, d - (pd_e + bd_e) * phi_out)

    soc = soc_kwh + (b_ch - b_dis) * dt_h
    return DispatchDecision(
        g_d_kw=_clip(gd_e / dt_h), g_b_kw=0.0,
        b_ch_kw=_clip(b_ch), b_dis_kw=_clip(b_dis),
        b_g_kw=0.0, b_d_kw=_clip(bd_e / dt_h),
        p_g_kw=_clip(pg_e / dt_h), p_d_kw=_clip(pd_e / dt_h),
        p_b_kw=_clip(pb_e / dt_h),
        buy_kwh=_clip(gd_e), sell_kwh=_clip(pg_e * phi_out),
        soc_kwh=_clip(soc))


def dispatch_hour(soc_kwh: float, pv_kwh: float, demand_kwh: float,
                  b_ch_kw: float, b_dis_kw: float, spec: PlantSpec,
                  dt_h: float = DT_H) -> DispatchDecision:
    """Route one hour's flows around fixed battery setpoints.

    The battery plan is a physical commitment; PV feeds the battery first,
    then demand, then the grid, and purchases close whatever remains.  Used
    to reconcile an optimizer's first-stage plan with the realized demand.
    Setpoints are clamped to the power limits and the available SoC range.
    """
    phi_out, phi_in = spec.phi_dc_ac, spec.phi_ac_dc
    e_pv = max(0.0, float(pv_kwh))
    d = max(0.0, float(demand_kwh))
    b_ch = min(max(0.0, b_ch_kw), spec.b_in_kw,
               max(0.0, spec.s_max_kwh - soc_kwh) / dt_h)
    b_dis = min(max(0.0, b_dis_kw), spec.b_out_kw,
                max(0.0, soc_kwh - spec.s_min_kwh) / dt_h)
    if b_ch >= b_dis:   # exclusivity: net out solver dust on the smaller side
        b_dis = 0.0
    else:
        b_ch = 0.0

    if b_dis > 0.0:
        batt_dc = b_dis * spec.eta_dis * dt_h
        bd_e = min(batt_dc, d / phi_out)
        pd_e = min(e_pv, d / phi_out - bd_e)
        bg_e = batt_dc - bd_e
        pg_e = e_pv - pd_e
        gd_e = max(0.0, d - (bd_e + pd_e) * phi_out)
        return DispatchDecision(
            g_d_kw=_clip(gd_e / dt_h), g_b_kw=0.0,
            b_ch_kw=0.0, b_dis_kw=_clip(b_dis),
            b_g_kw=_clip(bg_e / dt_h), b_d_kw=_clip(bd_e / dt_h),
            p_g_kw=_clip(pg_e / dt_h), p_d_kw=_clip(pd_e / dt_h), p_b_kw=0.0,
            buy_kwh=_clip(gd_e), sell_kwh=_clip((bg_e + pg_e) * phi_out),
            soc_kwh=_clip(soc_kwh - b_dis * dt_h))

    need_dc = b_ch * dt_h / spec.eta_ch if b_ch > 0.0 else 0.0
    pb_e = min(e_pv, need_dc)
    gb_e = (need_dc - pb_e) / phi_in
    pv_left = e_pv - pb_e
    pd_e = min(pv_left, d / phi_out)
    pg_e = pv_left - pd_e
    gd_e = max(0.0, d - pd_e * phi_out)
    return DispatchDecision(
        g_d_kw=_clip(gd_e / dt_h), g_b_kw=_clip(gb_e / dt_h),
        b_ch_kw=_clip(b_ch), b_dis_kw=0.0,
        b_g_kw=0.0, b_d_kw=0.0,
        p_g_kw=_clip(pg_e / dt_h), p_d_kw=_clip(pd_e / dt_h),
        p_b_kw=_clip(pb_e / dt_h),
        buy_kwh=_clip(gd_e + gb_e), sell_kwh=_clip(pg_e * phi_out),
        soc_kwh=_clip(soc_kwh + b_ch * dt_h))


@dataclass
class StepResult:
    decision: DispatchDecision
    objective: float | None = None
    solver_status: str | None = None
    fallback: str | None = None      # None | "ev" | "naive"
    n_nodes: int = 0


def optimizer_step(kind: ControllerKind, soc_kwh: float, scen: ScenarioSet,
                   pv_24h, price_buy_24h, price_sell_24h, spec: PlantSpec,
                   realized_demand_kwh: float, realized_pv_kwh: float,
                   opts: SolveOptions | None = None,
                   dt_h: float = DT_H) -> StepResult:
    """Solve the lookahead problem, commit the first hour's battery
    setpoints, and reconcile against the realized demand.

    SP flavors use the scenario set as given; EV flavors (and the
    perfect-information policy) solve on its probability-weighted mean path.
    """
    if kind is ControllerKind.NAIVE:
        raise ValueError("the naive policy does not run the optimizer")
    if kind.is_expected_value:
        scen = ScenarioSet.single(scen.expected())

    opts = opts or SolveOptions()
    fallback = None
    inst = build_instance(spec, pv_24h, price_buy_24h, price_sell_24h,
                          scen, s_ini_kwh=soc_kwh, dt_h=dt_h)
    res = solve(inst, opts)
    if res.x is None and scen.n_scenarios > 1:
        fallback = "ev"
        inst = build_instance(spec, pv_24h, price_buy_24h, price_sell_24h,
                              ScenarioSet.single(scen.expected()),
                              s_ini_kwh=soc_kwh, dt_h=dt_h)
        res = solve(inst, opts)
    if res.x is None:
        decision = naive_step(soc_kwh, realized_pv_kwh, realized_demand_kwh,
                              spec, dt_h)
        return StepResult(decision, None, res.status, "naive", res.n_nodes)

    b_ch = float(res.x[inst.var_index("bp", 0, 0)])
    b_dis = float(res.x[inst.var_index("bm", 0, 0)])
    decision = dispatch_hour(soc_kwh, realized_pv_kwh, realized_demand_kwh,
                             b_ch, b_dis, spec, dt_h)
    return StepResult(decision, res.objective, res.status, fallback,
                      res.n_nodes)


def pi_rh_step(soc_kwh: float, future_demand_24h, pv_24h, price_buy_24h,
               price_sell_24h, spec: PlantSpec, realized_pv_kwh: float,
               opts: SolveOptions | None = None,
               dt_h: float = DT_H) -> StepResult:
    """Clairvoyant rolling step: the optimizer fed the true demand path.

    Identical code path to an expected-value step whose forecast is exact;
    the realized hour is the first entry of the given demand path.
    """
    truth = np.asarray(future_demand_24h, dtype=float).ravel()
    return optimizer_step(ControllerKind.PI_RH, soc_kwh,
                          ScenarioSet.single(truth), pv_24h, price_buy_24h,
                          price_sell_24h, spec,
                          realized_demand_kwh=float(truth[0]),
                          realized_pv_kwh=realized_pv_kwh,
                          opts=opts, dt_h=dt_h)


def decision_to_instance(decision: DispatchDecision, soc_before: float,
                         pv_kwh: float, demand_kwh: float, spec: PlantSpec,
                         price_buy: float = 1.0, price_sell: float = 0.0,
                         dt_h: float = DT_H):
    """Pack a realized hour into a one-period instance plus matching solution
    vector, so the MILP audit can certify the decision."""
    inst = build_instance(spec, [pv_kwh], [price_buy], [price_sell],
                          ScenarioSet.single([demand_kwh]),
                          s_ini_kwh=soc_before, dt_h=dt_h)
    x = np.zeros(inst.n_vars)
    d = decision
    values = {
        "xp": d.buy_kwh, "xm": d.sell_kwh, "gD": d.g_d_kw, "gb": d.g_b_kw,
        "bp": d.b_ch_kw, "bm": d.b_dis_kw, "bg": d.b_g_kw, "bD": d.b_d_kw,
        "soc": d.soc_kwh, "pg": d.p_g_kw, "pD": d.p_d_kw, "pb": d.p_b_kw,
        "z": 1.0 if d.sell_kwh > 0 else 0.0,
        "y": 1.0 if d.b_ch_kw > 0 else 0.0,
    }
    for name, v in values.items():
        x[inst.var_index(name, 0, 0)] = v
    return inst, x


def audit_decision(decision: DispatchDecision, soc_before: float,
                   pv_kwh: float, demand_kwh: float, spec: PlantSpec,
                   dt_h: float = DT_H):
    inst, x = decision_to_instance(decision, soc_before, pv_kwh, demand_kwh,
                                   spec, dt_h=dt_h)
    return check_solution(inst, x)
