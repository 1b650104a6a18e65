"""Self-contained bounded-variable primal simplex.

Two-phase dense implementation: phase one drives artificial variables to
zero, phase two optimizes the real objective.  Pricing is Dantzig's rule
with a permanent switch to Bland's rule once a long degenerate stall is
detected, which breaks cycling.  The basis inverse is maintained by
elementary row updates and refactorized periodically for numerical hygiene.

Intended for small and mid-size relaxations; the branch-and-bound driver
routes large instances to an alternative LP backend behind the same result
contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError

OPT_TOL = 1e-9          # reduced-cost threshold
PIVOT_TOL = 1e-10       # smallest usable pivot magnitude
PHASE1_FEAS_TOL = 1e-7  # residual infeasibility that still counts as feasible
REFACTOR_EVERY = 200
DEGEN_STALL = 400       # consecutive zero-step pivots before Bland's rule


@dataclass
class LpResult:
    status: str            # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float
    iterations: int


class _Tableau:
    def __init__(self, c, a, b, lo, hi):
        m, n = a.shape
        self.m, self.n_real = m, n
        self.n = n + m
        self.a = np.hstack([a, np.zeros((m, m))])
        self.lo = np.concatenate([np.asarray(lo, float), np.zeros(m)])
        self.hi = np.concatenate([np.asarray(hi, float), np.full(m, np.inf)])
        self.c_real = np.concatenate([np.asarray(c, float), np.zeros(m)])
        if np.any(~np.isfinite(self.lo)):
            raise NumericalError("free variables are not supported")

        # nonbasic start: every real variable parked at its lower bound
        self.status = np.zeros(self.n, dtype=np.int8)  # 0 at-lo, 1 at-hi, 2 basic
        x_start = self.lo[:n].copy()
        resid = np.asarray(b, float) - a @ x_start
        sign = np.where(resid >= 0, 1.0, -1.0)
        self.a[np.arange(m), n + np.arange(m)] = sign
        self.basis = n + np.arange(m)
        self.status[self.basis] = 2
        self.binv = np.diag(sign)  # inverse of the artificial basis
        self.xb = np.abs(resid)
        self.b = np.asarray(b, float)
        self.iterations = 0
        self.bland = False

    def _nonbasic_values(self):
        v = np.where(self.status == 1, self.hi, self.lo)
        v[self.status == 2] = 0.0
        return v

    def refactor(self):
        basis_mat = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(basis_mat)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular basis during refactorization") from exc
        xn = self._nonbasic_values()
        xn_mask = self.status != 2
        rhs = self.b - self.a[:, xn_mask] @ xn[xn_mask]
        self.xb = self.binv @ rhs

    def run(self, cvec, max_iter):
        degen_run = 0
        while True:
            if self.iterations >= max_iter:
                raise NumericalError(f"simplex iteration limit {max_iter} hit")
            self.iterations += 1
            if self.iterations % REFACTOR_EVERY == 0:
                self.refactor()

            y = cvec[self.basis] @ self.binv
            d = cvec - y @ self.a
            movable = self.lo < self.hi
            cand_lo = (self.status == 0) & movable & (d < -OPT_TOL)
            cand_hi = (self.status == 1) & movable & (d > OPT_TOL)
            cand = np.flatnonzero(cand_lo | cand_hi)
            if cand.size == 0:
                return "optimal"
            if self.bland:
                e = int(cand[0])
            else:
                e = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if self.status[e] == 0 else -1.0

            w = self.binv @ self.a[:, e]
            v = direction * w  # basic values move by -v * step
            step_cap = self.hi[e] - self.lo[e]

            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            down = v > PIVOT_TOL
            ratios[down] = np.maximum(self.xb[down] - lo_b[down], 0.0) / v[down]
            up = (v < -PIVOT_TOL) & np.isfinite(hi_b)
            ratios[up] = np.minimum(self.xb[up] - hi_b[up], 0.0) / v[up]

            r = int(np.argmin(ratios)) if self.m else -1
            t_basic = ratios[r] if self.m else np.inf
            if self.bland and np.isfinite(t_basic):
                # smallest basic variable index among the tied rows
                tied = np.flatnonzero(ratios <= t_basic + 1e-15)
                r = int(tied[np.argmin(self.basis[tied])])
                t_basic = ratios[r]

            step = min(step_cap, t_basic)
            if not np.isfinite(step):
                return "unbounded"

            if step <= 1e-13:
                degen_run += 1
                if degen_run >= DEGEN_STALL and not self.bland:
                    self.bland = True
            else:
                degen_run = 0

            if step_cap <= t_basic:
                # bound flip: the entering variable crosses to its other bound
                self.xb -= v * step_cap
                self.status[e] = 1 - self.status[e]
                continue

            self.xb -= v * step
            entering_value = (self.lo[e] if direction > 0 else self.hi[e]) \
                + direction * step
            leaving = self.basis[r]
            self.status[leaving] = 0 if v[r] > 0 else 1
            self.status[e] = 2
            self.basis[r] = e
            self.xb[r] = entering_value

            # eta update of the basis inverse
            piv = w[r]
            if abs(piv) < PIVOT_TOL:
                self.refactor()
                continue
            row_r = self.binv[r] / piv
            self.binv -= np.outer(w, row_r)
            self.binv[r] = row_r

    def solution(self):
        x = self._nonbasic_values()
        x[self.basis] = self.xb
        return x


def solve_bounded_lp(c, a, b, lo, hi, max_iter: int | None = None) -> LpResult:
    """Minimize c @ x subject to a @ x = b and lo <= x <= hi.

    All lower bounds must be finite; upper bounds may be infinite.
    """
    a = np.ascontiguousarray(a, dtype=float)
    m, n = a.shape
    if max_iter is None:
        max_iter = 20000 + 60 * (m + n)
    tab = _Tableau(c, a, b, lo, hi)

    phase1_c = np.zeros(tab.n)
    phase1_c[n:] = 1.0
    status = tab.run(phase1_c, max_iter)
    if status != "optimal":
        raise NumericalError(f"phase one ended {status}")
    tab.refactor()
    infeas = float(phase1_c[tab.basis] @ tab.xb)
    if infeas > PHASE1_FEAS_TOL:
        return LpResult("infeasible", None, np.inf, tab.iterations)

    # artificials are pinned at zero for phase two
    tab.lo[n:] = 0.0
    tab.hi[n:] = 0.0
    status = tab.run(tab.c_real, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", None, -np.inf, tab.iterations)
    tab.refactor()
    x = tab.solution()[:n]
    # snap tiny bound violations left by floating-point pivoting
    x = np.minimum(np.maximum(x, np.asarray(lo, float)), np.asarray(hi, float))
    return LpResult("optimal", x, float(np.asarray(c, float) @ x), tab.iterations)
