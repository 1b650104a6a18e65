"""Deterministic-equivalent expansion of the two-stage stochastic dispatch MILP.

Variables per scenario s and period t (all continuous nonnegative unless
noted): grid purchase xp / sale xm [kWh], grid-to-demand gD and
grid-to-battery gb [kW], battery charge bp / discharge bm [kW],
battery-to-grid bg and battery-to-demand bD [kW], state of charge soc [kWh],
plus the buy/sell indicator z and charge/discharge indicator y (binary).
PV splits pg / pD / pb [kW] are indexed by period only: PV is deterministic,
so its dispatch is shared across scenarios.

Closed-form sizes for S scenarios and T periods (asserted in tests and
documented in this directory's README):

    continuous variables  9*S*T + 3*T
    binary variables      2*S*T
    constraint rows       12*S*T + T + 3*(S-1)

State-of-charge capacity limits are carried as variable bounds, not rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domain import DT_H, PlantSpec, ScenarioSet
from ..errors import DimensionError

ST_BLOCKS = ("xp", "xm", "gD", "gb", "bp", "bm", "bg", "bD", "soc")
T_BLOCKS = ("pg", "pD", "pb")
BIN_BLOCKS = ("z", "y")

ROW_FAMILIES = (
    "demand_balance", "purchase_balance", "sale_balance",
    "sale_big_m", "buy_big_m", "pv_balance",
    "charge_def", "discharge_def", "charge_cap", "discharge_cap",
    "charge_big_m", "discharge_big_m", "soc_link", "first_stage",
)

# Secondary objective weight discouraging grid throughput at equal cost.
# It perturbs flows among cost-ties only; the reported objective is always
# recomputed without it.
THROUGHPUT_TIEBREAK = 1e-7


@dataclass
class MilpInstance:
    """One deterministic-equivalent MILP, stored as sparse triplets."""

    n_scenarios: int
    horizon: int
    spec: PlantSpec
    pv_kwh: np.ndarray          # (T,)
    price_buy: np.ndarray       # (T,)
    price_sell: np.ndarray      # (T,)
    scen: ScenarioSet
    s_ini_kwh: float
    dt_h: float
    big_m: float

    n_vars: int
    c: np.ndarray               # objective incl. throughput tie-break
    lo: np.ndarray
    hi: np.ndarray
    is_binary: np.ndarray       # bool mask
    rows: np.ndarray            # triplet row indices
    cols: np.ndarray            # triplet col indices
    vals: np.ndarray            # triplet coefficients
    sense: np.ndarray           # 'E' equality / 'L' row <= rhs
    rhs: np.ndarray
    family_slices: dict = field(default_factory=dict)

    _dense_a: np.ndarray | None = None
    _sparse_a = None

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]

    @property
    def n_continuous(self) -> int:
        return int(self.n_vars - self.is_binary.sum())

    # -- variable indexing ----------------------------------------------------

    def var_index(self, name: str, s: int = 0, t: int = 0) -> int:
        S, T = self.n_scenarios, self.horizon
        if name in ST_BLOCKS:
            return ST_BLOCKS.index(name) * S * T + s * T + t
        if name in T_BLOCKS:
            return 9 * S * T + T_BLOCKS.index(name) * T + t
        if name in BIN_BLOCKS:
            return 9 * S * T + 3 * T + BIN_BLOCKS.index(name) * S * T + s * T + t
        raise KeyError(name)

    def var_name(self, j: int) -> str:
        S, T = self.n_scenarios, self.horizon
        if j < 9 * S * T:
            block, r = divmod(j, S * T)
            s, t = divmod(r, T)
            return f"{ST_BLOCKS[block]}_s{s}_t{t}"
        j2 = j - 9 * S * T
        if j2 < 3 * T:
            block, t = divmod(j2, T)
            return f"{T_BLOCKS[block]}_t{t}"
        j3 = j2 - 3 * T
        block, r = divmod(j3, S * T)
        s, t = divmod(r, T)
        return f"{BIN_BLOCKS[block]}_s{s}_t{t}"

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        """View of one variable block shaped (S, T), or (T,) for PV splits."""
        S, T = self.n_scenarios, self.horizon
        if name in ST_BLOCKS:
            i = ST_BLOCKS.index(name) * S * T
            return x[i:i + S * T].reshape(S, T)
        if name in T_BLOCKS:
            i = 9 * S * T + T_BLOCKS.index(name) * T
            return x[i:i + T]
        if name in BIN_BLOCKS:
            i = 9 * S * T + 3 * T + BIN_BLOCKS.index(name) * S * T
            return x[i:i + S * T].reshape(S, T)
        raise KeyError(name)

    def flows(self, x: np.ndarray) -> dict:
        return {name: self.block(x, name).copy()
                for name in ST_BLOCKS + T_BLOCKS + BIN_BLOCKS}

    def expected_cost(self, x: np.ndarray) -> float:
        """Objective value without the throughput tie-break."""
        xp = self.block(x, "xp")
        xm = self.block(x, "xm")
        per_scen = xp @ self.price_buy - xm @ self.price_sell
        return float(self.scen.prob @ per_scen)

    # -- matrix realizations ---------------------------------------------------

    def dense_matrix(self) -> np.ndarray:
        if self._dense_a is None:
            a = np.zeros((self.n_rows, self.n_vars))
            np.add.at(a, (self.rows, self.cols), self.vals)
            self._dense_a = a
        return self._dense_a

    def sparse_matrix(self):
        if self._sparse_a is None:
            from scipy.sparse import coo_array
            self._sparse_a = coo_array(
                (self.vals, (self.rows, self.cols)),
                shape=(self.n_rows, self.n_vars)).tocsr()
        return self._sparse_a


def compute_big_m(pv_kwh, demand_kwh, b_in_kw) -> float:
    """max PV + max demand + charge limit, recomputed per instance."""
    return float(np.max(pv_kwh) + np.max(demand_kwh) + b_in_kw)


def build_instance(spec: PlantSpec, pv, price_buy, price_sell,
                   scen: ScenarioSet, s_ini_kwh: float | None = None,
                   dt_h: float = DT_H) -> MilpInstance:
    """Assemble the scenario-expanded dispatch problem over ``scen.horizon``
    periods.

    ``pv`` may be a PvTrace slice or a plain kWh array of length T.  The
    initial state of charge defaults to ``spec.s_ini_kwh`` and may be
    overridden by the rolling loop.
    """
    pv_kwh = np.asarray(getattr(pv, "pv_kwh", pv), dtype=float).ravel()
    price_buy = np.asarray(price_buy, dtype=float).ravel()
    price_sell = np.asarray(price_sell, dtype=float).ravel()
    S, T = scen.n_scenarios, scen.horizon
    if T < 1:
        raise DimensionError("horizon must be at least one period")
    for name, arr in (("pv", pv_kwh), ("price_buy", price_buy),
                      ("price_sell", price_sell)):
        if arr.shape != (T,):
            raise DimensionError(f"{name} has length {arr.shape[0]}, expected {T}")
    s_ini = spec.s_ini_kwh if s_ini_kwh is None else float(s_ini_kwh)
    if not spec.s_min_kwh <= s_ini <= spec.s_max_kwh:
        raise ValueError(f"s_ini {s_ini} outside [{spec.s_min_kwh}, {spec.s_max_kwh}]")

    demand = scen.demand_kwh
    big_m = compute_big_m(pv_kwh, demand, spec.b_in_kw)
    dt = float(dt_h)
    if dt <= 0:
        raise ValueError("dt_h must be positive")

    nst = S * T
    n_vars = 11 * nst + 3 * T
    inst = MilpInstance(
        n_scenarios=S, horizon=T, spec=spec, pv_kwh=pv_kwh,
        price_buy=price_buy, price_sell=price_sell, scen=scen,
        s_ini_kwh=s_ini, dt_h=dt, big_m=big_m,
        n_vars=n_vars, c=np.zeros(n_vars),
        lo=np.zeros(n_vars), hi=np.full(n_vars, np.inf),
        is_binary=np.zeros(n_vars, dtype=bool),
        rows=np.empty(0), cols=np.empty(0), vals=np.empty(0),
        sense=np.empty(0), rhs=np.empty(0),
    )

    def vi(name, smat=None, tmat=None):
        """Vectorized variable indices for a block over all (s, t)."""
        S_, T_ = S, T
        if name in ST_BLOCKS:
            return ST_BLOCKS.index(name) * nst + smat * T_ + tmat
        if name in T_BLOCKS:
            return 9 * nst + T_BLOCKS.index(name) * T_ + tmat
        return 9 * nst + 3 * T_ + BIN_BLOCKS.index(name) * nst + smat * T_ + tmat

    s_idx = np.repeat(np.arange(S), T)
    t_idx = np.tile(np.arange(T), S)

    # bounds: soc is range-bounded, binaries live in [0, 1]
    soc0 = inst.var_index("soc", 0, 0)
    inst.lo[soc0:soc0 + nst] = spec.s_min_kwh
    inst.hi[soc0:soc0 + nst] = spec.s_max_kwh
    z0 = inst.var_index("z", 0, 0)
    inst.hi[z0:z0 + 2 * nst] = 1.0
    inst.is_binary[z0:z0 + 2 * nst] = True

    # objective: probability-weighted cost plus the throughput tie-break,
    # itself probability-weighted so scenario duplication leaves it invariant
    pw = np.repeat(scen.prob, T)
    inst.c[vi("xp", s_idx, t_idx)] = pw * (np.tile(price_buy, S) + THROUGHPUT_TIEBREAK)
    inst.c[vi("xm", s_idx, t_idx)] = pw * (-np.tile(price_sell, S) + THROUGHPUT_TIEBREAK)

    rows_l, cols_l, vals_l, sense_l, rhs_l = [], [], [], [], []
    family_slices = {}
    row_base = [0]

    def add_family(name, sense, rhs_vec, *terms):
        """terms: (var_index_array, coeff) pairs, one row per element."""
        k = rhs_vec.shape[0]
        r = np.arange(row_base[0], row_base[0] + k)
        family_slices[name] = (row_base[0], k)
        for idx_arr, coeff in terms:
            rows_l.append(r)
            cols_l.append(idx_arr)
            vals_l.append(np.broadcast_to(np.asarray(coeff, dtype=float), (k,)))
        sense_l.append(np.full(k, sense, dtype="U1"))
        rhs_l.append(np.asarray(rhs_vec, dtype=float))
        row_base[0] += k

    phi_out = spec.phi_dc_ac
    phi_in = spec.phi_ac_dc

    add_family("demand_balance", "E", demand.ravel(),
               (vi("gD", s_idx, t_idx), dt),
               (vi("pD", s_idx, t_idx), phi_out * dt),
               (vi("bD", s_idx, t_idx), phi_out * dt))
    add_family("purchase_balance", "E", np.zeros(nst),
               (vi("xp", s_idx, t_idx), 1.0),
               (vi("gD", s_idx, t_idx), -dt),
               (vi("gb", s_idx, t_idx), -dt))
    add_family("sale_balance", "E", np.zeros(nst),
               (vi("xm", s_idx, t_idx), 1.0),
               (vi("bg", s_idx, t_idx), -phi_out * dt),
               (vi("pg", s_idx, t_idx), -phi_out * dt))
    add_family("sale_big_m", "L", np.zeros(nst),
               (vi("xm", s_idx, t_idx), 1.0),
               (vi("z", s_idx, t_idx), -big_m))
    add_family("buy_big_m", "L", np.full(nst, big_m),
               (vi("xp", s_idx, t_idx), 1.0),
               (vi("z", s_idx, t_idx), big_m))
    t_only = np.arange(T)
    add_family("pv_balance", "E", pv_kwh,
               (vi("pg", None, t_only), dt),
               (vi("pD", None, t_only), dt),
               (vi("pb", None, t_only), dt))
    add_family("charge_def", "E", np.zeros(nst),
               (vi("bp", s_idx, t_idx), 1.0),
               (vi("gb", s_idx, t_idx), -phi_in * spec.eta_ch),
               (vi("pb", s_idx, t_idx), -spec.eta_ch))
    add_family("discharge_def", "E", np.zeros(nst),
               (vi("bm", s_idx, t_idx), 1.0),
               (vi("bg", s_idx, t_idx), -1.0 / spec.eta_dis),
               (vi("bD", s_idx, t_idx), -1.0 / spec.eta_dis))
    add_family("charge_cap", "L", np.full(nst, spec.b_in_kw),
               (vi("bp", s_idx, t_idx), 1.0))
    add_family("discharge_cap", "L", np.full(nst, spec.b_out_kw),
               (vi("bm", s_idx, t_idx), 1.0))
    add_family("charge_big_m", "L", np.zeros(nst),
               (vi("bp", s_idx, t_idx), 1.0),
               (vi("y", s_idx, t_idx), -big_m))
    add_family("discharge_big_m", "L", np.full(nst, big_m),
               (vi("bm", s_idx, t_idx), 1.0),
               (vi("y", s_idx, t_idx), big_m))

    # state-of-charge recursion; the t=0 row anchors at the initial SoC
    rhs_soc = np.zeros(nst)
    rhs_soc[t_idx == 0] = s_ini
    r0 = row_base[0]
    add_family("soc_link", "E", rhs_soc,
               (vi("soc", s_idx, t_idx), 1.0),
               (vi("bp", s_idx, t_idx), -dt),
               (vi("bm", s_idx, t_idx), dt))
    later = t_idx > 0
    rows_l.append(np.arange(r0, r0 + nst)[later])
    cols_l.append(vi("soc", s_idx[later], t_idx[later] - 1))
    vals_l.append(np.full(int(later.sum()), -1.0))

    if S > 1:
        s_rest = np.arange(1, S)
        zero3 = np.zeros(S - 1)
        for name in ("bp", "bm", "soc"):
            add_family(f"first_stage_{name}", "E", zero3,
                       (vi(name, s_rest, np.zeros(S - 1, dtype=int)), 1.0),
                       (vi(name, np.zeros(S - 1, dtype=int),
                           np.zeros(S - 1, dtype=int)), -1.0))

    inst.rows = np.concatenate(rows_l).astype(np.int64)
    inst.cols = np.concatenate(cols_l).astype(np.int64)
    inst.vals = np.concatenate(vals_l).astype(float)
    inst.sense = np.concatenate(sense_l)
    inst.rhs = np.concatenate(rhs_l)
    inst.family_slices = family_slices
    return inst
