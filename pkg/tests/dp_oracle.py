"""Independent dynamic-programming oracle on a discretized state-of-charge grid.

Exhaustive enumeration over SoC transitions, written without touching the
MILP builder or solver so it can vouch for them.  The hourly stage cost for a
fixed net battery energy change is computed from the power-flow physics by a
closed-form greedy split that is optimal whenever the purchase price is at
least the feed-in price (the only regime the oracle is used in).

Supports the two-stage structure: the first hour's battery action is shared
across scenarios, later hours recourse per scenario.
"""

from __future__ import annotations

import numpy as np


def hour_cost(spec, price_buy, price_sell, pv_kwh, demand_kwh, delta_soc,
              dt_h=1.0):
    """Cheapest cost of one hour given the battery's net SoC change (kWh).

    ``delta_soc`` may be an array; returns matching shape.  Infeasible
    changes (beyond power limits) come back as +inf.
    """
    d = np.asarray(delta_soc, dtype=float)
    cost = np.full(d.shape, np.inf)

    phi_out, phi_in = spec.phi_dc_ac, spec.phi_ac_dc
    eta_c, eta_d = spec.eta_ch, spec.eta_dis
    pv = pv_kwh / dt_h      # kW at the DC bus
    dem = demand_kwh        # kWh at the AC bus

    charging = d >= 0
    if np.any(charging):
        dc = d[charging]
        ok = dc <= spec.b_in_kw * dt_h + 1e-12
        # DC-side energy the battery must be fed before charge efficiency
        need = dc / eta_c
        pv_to_batt = np.minimum(pv * dt_h, need)
        grid_to_batt_ac = (need - pv_to_batt) / phi_in
        pv_left = pv * dt_h - pv_to_batt
        pv_to_dem = np.minimum(pv_left, dem / phi_out)
        sold = (pv_left - pv_to_dem) * phi_out
        bought = np.maximum(dem - pv_to_dem * phi_out, 0.0) + grid_to_batt_ac
        c = price_buy * bought - price_sell * sold
        cost[charging] = np.where(ok, c, np.inf)

    discharging = ~charging
    if np.any(discharging):
        dd = -d[discharging]                 # kWh drained from storage
        ok = dd <= spec.b_out_kw * dt_h + 1e-12
        batt_dc = dd * eta_d                 # energy reaching the DC bus
        avail = batt_dc + pv * dt_h
        to_dem = np.minimum(avail, dem / phi_out)
        sold = (avail - to_dem) * phi_out
        bought = np.maximum(dem - to_dem * phi_out, 0.0)
        c = price_buy * bought - price_sell * sold
        cost[discharging] = np.where(ok, c, np.inf)
    return cost


def _transition_cost_matrix(spec, grid, price_buy, price_sell, pv_kwh,
                            demand_kwh, dt_h):
    """cost[i, j] of moving SoC from grid[i] to grid[j] in one hour."""
    delta = grid[None, :] - grid[:, None]
    return hour_cost(spec, price_buy, price_sell, pv_kwh, demand_kwh,
                     delta, dt_h)


def soc_grid(spec, step=0.01):
    n = int(round((spec.s_max_kwh - spec.s_min_kwh) / step)) + 1
    return spec.s_min_kwh + step * np.arange(n)


def dp_single_path(spec, price_buy, price_sell, pv_kwh, demand_kwh,
                   step=0.01, dt_h=1.0, s_ini=None):
    """Minimum total cost of one deterministic demand path.

    Enumerates SoC transitions on a uniform grid; the initial SoC is snapped
    to the nearest grid point.
    """
    price_buy = np.asarray(price_buy, float)
    price_sell = np.asarray(price_sell, float)
    pv_kwh = np.asarray(pv_kwh, float)
    demand_kwh = np.asarray(demand_kwh, float)
    T = len(demand_kwh)
    grid = soc_grid(spec, step)
    value = np.zeros(grid.shape)
    for t in range(T - 1, -1, -1):
        cost = _transition_cost_matrix(spec, grid, price_buy[t], price_sell[t],
                                       pv_kwh[t], demand_kwh[t], dt_h)
        value = np.min(cost + value[None, :], axis=1)
    s0 = spec.s_ini_kwh if s_ini is None else s_ini
    i0 = int(np.argmin(np.abs(grid - s0)))
    return float(value[i0])


def dp_two_stage(spec, price_buy, price_sell, pv_kwh, demand_scenarios,
                 prob, step=0.01, dt_h=1.0, s_ini=None):
    """Expected-cost optimum with a shared first-hour battery action.

    ``demand_scenarios`` is (S, T); hours 2..T are per-scenario recourse,
    solved by backward induction per scenario, while the hour-1 SoC move is
    one decision shared by all scenarios.
    """
    demand_scenarios = np.atleast_2d(np.asarray(demand_scenarios, float))
    prob = np.asarray(prob, float)
    S, T = demand_scenarios.shape
    grid = soc_grid(spec, step)

    # per-scenario value of entering hour 2 at each SoC grid point
    tail = np.zeros((S, grid.size))
    for s in range(S):
        value = np.zeros(grid.shape)
        for t in range(T - 1, 0, -1):
            cost = _transition_cost_matrix(
                spec, grid, price_buy[t], price_sell[t], pv_kwh[t],
                demand_scenarios[s, t], dt_h)
            value = np.min(cost + value[None, :], axis=1)
        tail[s] = value

    s0 = spec.s_ini_kwh if s_ini is None else s_ini
    i0 = int(np.argmin(np.abs(grid - s0)))
    first = np.stack([
        hour_cost(spec, price_buy[0], price_sell[0], pv_kwh[0],
                  demand_scenarios[s, 0], grid - grid[i0], dt_h)
        for s in range(S)])                      # (S, n_grid) hour-1 costs
    expected = prob @ (first + tail)             # (n_grid,)
    return float(np.min(expected))
