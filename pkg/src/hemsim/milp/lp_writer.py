"""Instance export in the industry LP text format.

Lets any external MILP solver cross-check objectives.  The written objective
is the pure expected cost (the internal throughput tie-break is omitted), so
an external optimum may differ in flows among cost ties but agrees on cost
to well within 1e-5.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import MilpInstance


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _terms(names, coeffs, per_line: int = 6):
    chunks, line = [], []
    for name, coeff in zip(names, coeffs):
        if coeff == 0.0:
            continue
        sign = "+" if coeff >= 0 else "-"
        line.append(f"{sign} {_fmt(abs(coeff))} {name}")
        if len(line) >= per_line:
            chunks.append(" ".join(line))
            line = []
    if line:
        chunks.append(" ".join(line))
    if not chunks:
        return "0 " + names[0] if len(names) else "0"
    out = "\n   ".join(chunks)
    return out[2:] if out.startswith("+ ") else out


def write_lp(inst: MilpInstance, path) -> Path:
    """Write the instance to ``path`` in CPLEX LP syntax."""
    path = Path(path)
    S, T = inst.n_scenarios, inst.horizon
    names = [inst.var_name(j) for j in range(inst.n_vars)]

    pure_c = np.zeros(inst.n_vars)
    for s in range(S):
        for t in range(T):
            pure_c[inst.var_index("xp", s, t)] = inst.scen.prob[s] * inst.price_buy[t]
            pure_c[inst.var_index("xm", s, t)] = -inst.scen.prob[s] * inst.price_sell[t]

    by_row: dict[int, list] = {}
    for r, c, v in zip(inst.rows, inst.cols, inst.vals):
        by_row.setdefault(int(r), []).append((int(c), float(v)))

    lines = ["\\ home energy dispatch instance "
             f"(S={S}, T={T}, rows={inst.n_rows}, vars={inst.n_vars})",
             "Minimize",
             " obj: " + _terms(names, pure_c),
             "Subject To"]
    for r in range(inst.n_rows):
        terms = by_row.get(r, [])
        terms.sort()
        expr = _terms([names[c] for c, _ in terms], [v for _, v in terms])
        op = "=" if inst.sense[r] == "E" else "<="
        lines.append(f" c{r}: {expr} {op} {_fmt(inst.rhs[r])}")

    lines.append("Bounds")
    for j in range(inst.n_vars):
        lo, hi = inst.lo[j], inst.hi[j]
        if inst.is_binary[j]:
            continue
        if np.isinf(hi):
            if lo != 0.0:
                lines.append(f" {_fmt(lo)} <= {names[j]}")
            # default 0 <= x <= +inf needs no statement
        else:
            lines.append(f" {_fmt(lo)} <= {names[j]} <= {_fmt(hi)}")

    lines.append("Binaries")
    bin_names = [names[j] for j in np.flatnonzero(inst.is_binary)]
    for i in range(0, len(bin_names), 8):
        lines.append(" " + " ".join(bin_names[i:i + 8]))
    lines.append("End")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
