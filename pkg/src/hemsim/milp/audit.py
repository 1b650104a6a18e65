"""Independent feasibility audit of accepted solutions.

Residuals are recomputed from the raw instance data (plant parameters, PV,
demands, probabilities), never from the stored constraint matrix, so builder
bugs cannot hide themselves.  Exclusivity is asserted from the flow values,
not from the binaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MilpInstance, compute_big_m

DEFAULT_ATOL = 1e-6


@dataclass
class ViolationReport:
    families: dict
    atol: float = DEFAULT_ATOL

    @property
    def max_violation(self) -> float:
        return max(self.families.values()) if self.families else 0.0

    def ok(self, atol: float | None = None) -> bool:
        return self.max_violation <= (self.atol if atol is None else atol)

    def worst(self, k: int = 3):
        return sorted(self.families.items(), key=lambda kv: -kv[1])[:k]


def check_solution(inst: MilpInstance, result_or_x) -> ViolationReport:
    """Max constraint residual per family for an accepted solution."""
    x = getattr(result_or_x, "x", result_or_x)
    if x is None:
        raise ValueError("result carries no solution vector")
    f = inst.flows(x)
    spec, dt = inst.spec, inst.dt_h
    demand = inst.scen.demand_kwh
    pv = inst.pv_kwh
    big_m = compute_big_m(pv, demand, spec.b_in_kw)

    soc_replay = inst.s_ini_kwh + np.cumsum((f["bp"] - f["bm"]) * dt, axis=1)

    fam = {
        "demand_balance": np.abs(
            demand - (f["gD"] + (f["pD"][None, :] + f["bD"]) * spec.phi_dc_ac) * dt
        ).max(),
        "purchase_balance": np.abs(f["xp"] - (f["gD"] + f["gb"]) * dt).max(),
        "sale_balance": np.abs(
            f["xm"] - (f["bg"] + f["pg"][None, :]) * spec.phi_dc_ac * dt).max(),
        "pv_balance": np.abs(
            pv - (f["pg"] + f["pD"] + f["pb"]) * dt).max(),
        "charge_def": np.abs(
            f["bp"] - (f["gb"] * spec.phi_ac_dc + f["pb"][None, :]) * spec.eta_ch
        ).max(),
        "discharge_def": np.abs(
            f["bm"] - (f["bg"] + f["bD"]) / spec.eta_dis).max(),
        "charge_cap": max(0.0, (f["bp"] - spec.b_in_kw).max()),
        "discharge_cap": max(0.0, (f["bm"] - spec.b_out_kw).max()),
        "soc_lower": max(0.0, (spec.s_min_kwh - f["soc"]).max()),
        "soc_upper": max(0.0, (f["soc"] - spec.s_max_kwh).max()),
        "soc_replay": np.abs(soc_replay - f["soc"]).max(),
        "nonnegativity": max(0.0, -min(
            f[name].min() for name in
            ("xp", "xm", "gD", "gb", "bp", "bm", "bg", "bD", "pg", "pD", "pb"))),
        "buy_sell_exclusivity": np.minimum(f["xp"], f["xm"]).max(),
        "charge_discharge_exclusivity": np.minimum(f["bp"], f["bm"]).max(),
        "binary_integrality": max(
            np.abs(f["z"] - np.round(f["z"])).max(),
            np.abs(f["y"] - np.round(f["y"])).max()),
        "sale_big_m": max(0.0, (f["xm"] - big_m * f["z"]).max()),
        "buy_big_m": max(0.0, (f["xp"] - big_m * (1.0 - f["z"])).max()),
        "charge_big_m": max(0.0, (f["bp"] - big_m * f["y"]).max()),
        "discharge_big_m": max(0.0, (f["bm"] - big_m * (1.0 - f["y"])).max()),
    }
    if inst.n_scenarios > 1:
        fam["first_stage"] = max(
            np.abs(f["bp"][:, 0] - f["bp"][0, 0]).max(),
            np.abs(f["bm"][:, 0] - f["bm"][0, 0]).max(),
            np.abs(f["soc"][:, 0] - f["soc"][0, 0]).max())
    else:
        fam["first_stage"] = 0.0
    return ViolationReport({k: float(v) for k, v in fam.items()})
