"""Branch-and-bound over LP relaxations of a dispatch instance.

The relaxation is frequently implementable as-is for realistic price data
(purchase above feed-in and lossy round trips make simultaneous buy/sell or
charge/discharge unprofitable), so the tree usually collapses to the root
node.  A binary whose relaxation value is fractional but whose exclusivity
pair already has one side at zero is snapped, not branched on; branching
targets only binaries whose pair is genuinely violated, picking the most
violated pair first.

Two interchangeable LP backends sit behind the same contract: the package's
own bounded-variable simplex (exact, dense, for small and mid-size
relaxations) and scipy's HiGHS interface for large scenario expansions.
``lp_backend="auto"`` switches on row count only, keeping results a pure
function of the instance and options.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .model import MilpInstance
from .simplex import solve_bounded_lp

# An LP vertex is accepted once every buy/sell and charge/discharge pair has
# one side at (numerical) zero; its indicator can then be snapped to a valid
# integer without touching any flow.
PAIR_TOL = 1e-7


@dataclass(frozen=True)
class SolveOptions:
    rel_gap: float = 1e-6
    time_limit_s: float | None = None
    node_limit: int | None = None
    lp_backend: str = "auto"      # "auto" | "simplex" | "highs"
    simplex_row_limit: int = 600  # "auto" uses the simplex below this


@dataclass
class SolveResult:
    status: str                   # Optimal | GapReached | Infeasible | TimeLimit
    objective: float              # expected cost, tie-break excluded
    x: np.ndarray | None
    mip_gap: float
    n_nodes: int
    lp_iterations: int


class _SimplexBackend:
    def __init__(self, inst: MilpInstance):
        a = inst.dense_matrix()
        ub_rows = np.flatnonzero(inst.sense == "L")
        n_slack = ub_rows.size
        slack = np.zeros((inst.n_rows, n_slack))
        slack[ub_rows, np.arange(n_slack)] = 1.0
        self.a = np.hstack([a, slack])
        self.b = inst.rhs
        self.c = np.concatenate([inst.c, np.zeros(n_slack)])
        self.n = inst.n_vars
        self.slack_lo = np.zeros(n_slack)
        self.slack_hi = np.full(n_slack, np.inf)

    def solve(self, lo, hi):
        res = solve_bounded_lp(
            self.c, self.a, self.b,
            np.concatenate([lo, self.slack_lo]),
            np.concatenate([hi, self.slack_hi]))
        if res.status == "unbounded":
            raise NumericalError("relaxation unbounded; instance is malformed")
        x = None if res.x is None else res.x[:self.n]
        return res.status, res.objective, x, res.iterations


class _HighsBackend:
    def __init__(self, inst: MilpInstance):
        from scipy.optimize import linprog
        a = inst.sparse_matrix().tocsr()
        eq = np.flatnonzero(inst.sense == "E")
        ub = np.flatnonzero(inst.sense == "L")
        self._linprog = linprog
        self.a_eq = a[eq] if eq.size else None
        self.b_eq = inst.rhs[eq] if eq.size else None
        self.a_ub = a[ub] if ub.size else None
        self.b_ub = inst.rhs[ub] if ub.size else None
        self.c = inst.c

    def solve(self, lo, hi):
        res = self._linprog(
            self.c, A_ub=self.a_ub, b_ub=self.b_ub,
            A_eq=self.a_eq, b_eq=self.b_eq,
            bounds=np.column_stack([lo, hi]), method="highs",
            options={"primal_feasibility_tolerance": 1e-10,
                     "dual_feasibility_tolerance": 1e-9})
        iters = int(getattr(res, "nit", 0) or 0)
        if res.status == 2:
            return "infeasible", np.inf, None, iters
        if res.status == 3:
            raise NumericalError("relaxation unbounded; instance is malformed")
        if res.status != 0:
            raise NumericalError(f"LP backend failed: {res.message}")
        return "optimal", float(res.fun), res.x, iters


def _make_backend(inst: MilpInstance, opts: SolveOptions):
    kind = opts.lp_backend
    if kind == "auto":
        kind = "simplex" if inst.n_rows <= opts.simplex_row_limit else "highs"
    if kind == "simplex":
        return _SimplexBackend(inst)
    if kind == "highs":
        return _HighsBackend(inst)
    raise ValueError(f"unknown lp_backend {opts.lp_backend!r}")


def solve(inst: MilpInstance, opts: SolveOptions | None = None) -> SolveResult:
    """Solve the instance to proven optimality or the requested gap.

    Deterministic given the instance and options: node selection is
    best-bound with insertion-order tie-breaking, branching picks the most
    fractional binary.
    """
    opts = opts or SolveOptions()
    backend = _make_backend(inst, opts)
    t0 = time.monotonic()

    incumbent = None
    inc_obj = np.inf           # tie-break objective of the incumbent
    lp_iterations = 0
    n_nodes = 0
    counter = 0
    heap = []

    def out_of_time():
        return (opts.time_limit_s is not None
                and time.monotonic() - t0 > opts.time_limit_s)

    def push(bound, lo, hi):
        nonlocal counter
        heapq.heappush(heap, (bound, counter, lo, hi))
        counter += 1

    push(-np.inf, inst.lo.copy(), inst.hi.copy())
    root_infeasible = False
    hit_limit = False

    while heap:
        bound, _, lo, hi = heapq.heappop(heap)
        if bound >= inc_obj - 1e-12:
            continue
        if out_of_time() or (opts.node_limit is not None
                             and n_nodes >= opts.node_limit):
            hit_limit = True
            push(bound, lo, hi)  # keep for the gap statement
            break
        n_nodes += 1
        status, obj, x, iters = backend.solve(lo, hi)
        lp_iterations += iters
        if status == "infeasible":
            if n_nodes == 1:
                root_infeasible = True
            continue
        if obj >= inc_obj - 1e-12:
            continue

        # exclusivity from values: a binary only matters where both sides of
        # its pair are active, so measure min(xp, xm) and min(bp, bm)
        trade_viol = np.minimum(inst.block(x, "xp"), inst.block(x, "xm"))
        batt_viol = np.minimum(inst.block(x, "bp"), inst.block(x, "bm"))
        worst_trade = float(trade_viol.max())
        worst_batt = float(batt_viol.max())
        if max(worst_trade, worst_batt) <= PAIR_TOL:
            x = x.copy()
            z_on = (inst.block(x, "xm") > PAIR_TOL).astype(float).ravel()
            y_on = (inst.block(x, "bp") > PAIR_TOL).astype(float).ravel()
            S, T = inst.n_scenarios, inst.horizon
            z0 = inst.var_index("z", 0, 0)
            y0 = inst.var_index("y", 0, 0)
            # snapping must respect bounds already fixed by branching
            x[z0:z0 + S * T] = np.clip(z_on, lo[z0:z0 + S * T], hi[z0:z0 + S * T])
            x[y0:y0 + S * T] = np.clip(y_on, lo[y0:y0 + S * T], hi[y0:y0 + S * T])
            incumbent, inc_obj = x, obj
            continue

        if worst_trade >= worst_batt:
            s, t = np.unravel_index(int(np.argmax(trade_viol)), trade_viol.shape)
            j = inst.var_index("z", int(s), int(t))
        else:
            s, t = np.unravel_index(int(np.argmax(batt_viol)), batt_viol.shape)
            j = inst.var_index("y", int(s), int(t))
        lo0, hi0 = lo.copy(), hi.copy()
        hi0[j] = 0.0
        push(obj, lo0, hi0)
        lo1, hi1 = lo.copy(), hi.copy()
        lo1[j] = 1.0
        push(obj, lo1, hi1)

        # stop early once the open bound proves the requested gap
        if incumbent is not None and heap:
            best_open = heap[0][0]
            gap = (inc_obj - best_open) / max(1e-10, abs(inc_obj))
            if gap <= opts.rel_gap:
                break

    if incumbent is None:
        if root_infeasible and not heap:
            return SolveResult("Infeasible", np.inf, None, np.inf,
                               n_nodes, lp_iterations)
        if hit_limit:
            return SolveResult("TimeLimit", np.inf, None, np.inf,
                               n_nodes, lp_iterations)
        return SolveResult("Infeasible", np.inf, None, np.inf,
                           n_nodes, lp_iterations)

    open_bounds = [node[0] for node in heap if node[0] < inc_obj - 1e-12]
    if open_bounds:
        best_open = min(open_bounds)
        gap = max(0.0, (inc_obj - best_open) / max(1e-10, abs(inc_obj)))
        status = "TimeLimit" if hit_limit else "GapReached"
    else:
        gap = 0.0
        status = "Optimal"
    return SolveResult(status, inst.expected_cost(incumbent), incumbent,
                       gap, n_nodes, lp_iterations)


def solve_with_options(inst: MilpInstance, **kwargs) -> SolveResult:
    return solve(inst, SolveOptions(**kwargs))
