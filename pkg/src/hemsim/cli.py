"""Command-line front end.

Subcommands: ``synth-data`` (seeded dataset generation), ``ingest``
(validate and normalize input CSVs), ``simulate`` (one controller, one
consumer), ``compare`` (controller campaign with reports), ``export-lp``
(write one dispatch instance in LP format), ``report`` (re-render report
files from a comparison.csv).

Configuration lives in one JSON file; command-line flags override file
values.  Exit codes: 0 success, 2 usage, 3 configuration, 4 data, 5 solver.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .controllers import ControllerKind
from .domain import PlantSpec, ScenarioSet, load_series, write_series
from .errors import (AlignmentError, ConfigError, DataError, HemsimError,
                     SchemaError, SolverError, UsageError)
from .harness import (RunConfig, RollingRlsForecaster, compare_controllers,
                      run_rolling)
from .milp import SolveOptions, build_instance, write_lp
from .pv_sim import SolarGeometry, pv_forecast, simulate_pv
from . import synth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_SOLVER = 5


# -- report math -----------------------------------------------------------------

def relative_pct(cost: float, baseline: float) -> float:
    """Extra cost of ``cost`` over ``baseline``, in percent of the baseline."""
    return (cost - baseline) / baseline * 100.0


def savings(passive: float, cost: float) -> float:
    return passive - cost


def savings_pct(passive: float, cost: float) -> float:
    return (passive - cost) / passive * 100.0


def savings_difference(savings_a: float, savings_b: float) -> tuple:
    """Absolute and percentage gap between two savings figures (b vs a)."""
    diff = savings_b - savings_a
    return diff, diff / savings_a * 100.0


# -- config handling ---------------------------------------------------------------


def _parse_controllers(text) -> tuple:
    kinds = []
    for name in ([t.strip() for t in text.split(",")] if isinstance(text, str)
                 else text):
        try:
            kinds.append(ControllerKind(name))
        except ValueError:
            valid = ", ".join(k.value for k in ControllerKind)
            raise ConfigError(f"unknown controller {name!r}; valid: {valid}")
    return tuple(kinds)


def _parse_months(text) -> tuple:
    vals = [int(t) for t in (text.split(",") if isinstance(text, str) else text)]
    if any(not 1 <= m <= 12 for m in vals):
        raise ConfigError(f"months must lie in 1..12, got {vals}")
    return tuple(vals)


def load_config(path, overrides: dict) -> tuple:
    """Merge the JSON config with CLI overrides into (RunConfig, raw dict)."""
    raw = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}")
    merged = dict(raw)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    plant = PlantSpec(**merged.get("plant", {}))
    site = merged.get("site", {})
    solver_raw = dict(merged.get("solver", {}))
    if "rel_gap" in merged and merged["rel_gap"] is not None:
        solver_raw["rel_gap"] = merged["rel_gap"]
    if "time_limit_s" in merged and merged["time_limit_s"] is not None:
        solver_raw["time_limit_s"] = merged["time_limit_s"]
    solver_raw.setdefault("lp_backend", "highs")
    try:
        solver = SolveOptions(**solver_raw)
    except TypeError as exc:
        raise ConfigError(f"bad solver options: {exc}")

    cfg = RunConfig(
        consumer_ids=tuple(merged.get("consumers", ("c1",))),
        months=_parse_months(merged.get("months", (1, 4, 7, 10))),
        year=merged.get("year"),
        controllers=_parse_controllers(merged.get(
            "controllers", ("naive", "rls-sp"))),
        scenario_count=int(merged.get("scenarios", 100)),
        seed=int(merged.get("seed", 0)),
        plant=plant,
        latitude_deg=float(site.get("latitude_deg", 55.68)),
        longitude_deg=float(site.get("longitude_deg", 12.57)),
        solver=solver,
        naive_months=frozenset(merged.get("naive_months",
                                          (4, 5, 6, 7, 8, 9))),
        workers=int(merged.get("workers", 1)),
    )
    if cfg.scenario_count < 1:
        raise ConfigError("scenarios must be >= 1")
    if not cfg.months:
        raise ConfigError("months must be nonempty")
    return cfg, merged


def _load_frames(cfg: RunConfig, merged: dict) -> dict:
    data_dir = Path(merged.get("data_dir", "data"))
    frames = {}
    for cid in cfg.consumer_ids:
        frames[cid] = load_series(data_dir / "load.csv",
                                  data_dir / "prices.csv",
                                  data_dir / "nwp.csv", cid)
    return frames


# -- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hemsim",
        description="Rolling-horizon home energy management simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="JSON run config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--scenarios", type=int, default=None)
        p.add_argument("--months", default=None, help="e.g. 1,4,7,10")
        p.add_argument("--year", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--rel-gap", type=float, default=None, dest="rel_gap")
        p.add_argument("--time-limit", type=float, default=None,
                       dest="time_limit_s")
        p.add_argument("--data-dir", default=None, dest="data_dir")

    p = sub.add_parser("synth-data", help="generate the seeded synthetic dataset")
    p.add_argument("--out", default="data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--consumers", type=int, default=3)
    p.add_argument("--hours", type=int, default=synth.DEFAULT_HOURS)

    p = sub.add_parser("ingest", help="validate input CSVs and report gaps")
    p.add_argument("--load", required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--nwp", required=True)
    p.add_argument("--consumer", required=True)
    p.add_argument("--out", default=None,
                   help="optionally rewrite normalized CSVs here")

    p = sub.add_parser("simulate", help="run one controller for one consumer")
    add_common(p)
    p.add_argument("--controller", default=None)
    p.add_argument("--consumer", default=None)

    p = sub.add_parser("compare", help="run a controller comparison campaign")
    add_common(p)
    p.add_argument("--controllers", default=None, help="e.g. naive,rls-sp,pi-rh")

    p = sub.add_parser("export-lp", help="write one hour's instance as an LP file")
    add_common(p)
    p.add_argument("--consumer", default=None)
    p.add_argument("--hour", type=int, required=True,
                   help="grid hour index the 24 h window starts at")
    p.add_argument("--lp-out", default="instance.lp")

    p = sub.add_parser("report", help="re-render reports from comparison.csv")
    p.add_argument("--comparison", required=True)
    p.add_argument("--out", default="reports")
    p.add_argument("--format", default="md,csv,json")
    return ap


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            raise UsageError("bad command line") from None
        raise


# -- report emission ---------------------------------------------------------------


def emit_report(rows: list, out_dir, formats=("csv", "json", "md"),
                naive_name: str = "naive",
                combined_name: str = "naive+rls-sp",
                baseline_name: str = "pi-rh") -> dict:
    """Render totals, percentages, and savings tables from comparison rows.

    Numeric formatting is fixed to two decimals for DKK and percent columns;
    report contents are a pure function of the rows.
    """
    if not rows:
        raise ValueError("no comparison rows to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    consumers = sorted({r["consumer"] for r in rows})
    controllers = [c for c in
                   dict.fromkeys(r["controller"] for r in rows)
                   if c != "passive"]

    def total(cid, ctrl):
        for r in rows:
            if (r["consumer"] == cid and r["controller"] == ctrl
                    and r["month"] == "total"):
                return float(r["cost_dkk"])
        return None

    table = []
    for cid in consumers:
        rec = {"consumer": cid}
        base = total(cid, baseline_name)
        passive = total(cid, "passive")
        for ctrl in controllers:
            cost = total(cid, ctrl)
            if cost is None:
                continue
            rec[ctrl] = round(cost, 2)
            if base is not None and ctrl != baseline_name:
                rec[f"{ctrl}_vs_{baseline_name}_pct"] = round(
                    relative_pct(cost, base), 2)
            if passive is not None:
                rec[f"{ctrl}_savings_pct"] = round(savings_pct(passive, cost), 2)
        if passive is not None:
            rec["passive"] = round(passive, 2)
            naive_cost = total(cid, naive_name)
            comb_cost = total(cid, combined_name)
            if naive_cost is not None and comb_cost is not None:
                s_naive = savings(passive, naive_cost)
                s_comb = savings(passive, comb_cost)
                diff, pct = savings_difference(s_naive, s_comb)
                rec["naive_savings_dkk"] = round(s_naive, 2)
                rec["combined_savings_dkk"] = round(s_comb, 2)
                rec["savings_difference_dkk"] = round(diff, 2)
                rec["savings_difference_pct"] = round(pct, 2)
        table.append(rec)

    paths = {}
    if "json" in formats:
        paths["json"] = out_dir / "comparison.json"
        paths["json"].write_text(
            json.dumps({"rows": rows, "summary": table}, indent=2,
                       sort_keys=True) + "\n", encoding="utf-8")
    if "csv" in formats:
        paths["csv"] = out_dir / "summary.csv"
        cols = sorted({k for rec in table for k in rec} - {"consumer"})
        with open(paths["csv"], "w", encoding="utf-8") as fh:
            fh.write(",".join(["consumer"] + cols) + "\n")
            for rec in table:
                cells = ["" if rec.get(c) is None else f"{rec[c]:.2f}"
                         for c in cols]
                fh.write(",".join([str(rec["consumer"])] + cells) + "\n")
    if "md" in formats:
        paths["md"] = out_dir / "summary.md"
        lines = ["# Controller comparison", ""]
        for rec in table:
            lines.append(f"## Consumer {rec['consumer']}")
            lines.append("")
            lines.append("| metric | value |")
            lines.append("|--------|-------|")
            for k, v in rec.items():
                if k == "consumer":
                    continue
                lines.append(f"| {k} | {v:.2f} |")
            lines.append("")
        paths["md"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths


# -- commands ----------------------------------------------------------------------


def cmd_synth(ns) -> int:
    paths = synth.write_dataset(ns.out, seed=ns.seed,
                                n_consumers=ns.consumers, n_hours=ns.hours)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_ingest(ns) -> int:
    frame = load_series(ns.load, ns.prices, ns.nwp, ns.consumer)
    print(f"consumer {ns.consumer}: {frame.grid.count} hours from "
          f"{frame.grid.timestamp(0).isoformat()}")
    print(f"filled gaps: {frame.gap_counts}")
    if ns.out:
        paths = write_series(frame, ns.out, ns.consumer)
        print(f"normalized CSVs in {Path(ns.out)}")
    return EXIT_OK


def _overrides(ns) -> dict:
    keys = ("seed", "scenarios", "months", "year", "workers", "rel_gap",
            "time_limit_s", "data_dir")
    out = {k: getattr(ns, k, None) for k in keys}
    if getattr(ns, "controllers", None):
        out["controllers"] = ns.controllers
    if getattr(ns, "controller", None):
        out["controllers"] = ns.controller
    if getattr(ns, "consumer", None):
        out["consumers"] = [ns.consumer]
    return out


def cmd_simulate(ns) -> int:
    cfg, merged = load_config(ns.config, _overrides(ns))
    if len(cfg.controllers) != 1:
        raise ConfigError("simulate runs exactly one controller; use --controller")
    frames = _load_frames(cfg, merged)
    out_dir = Path(ns.out or merged.get("out_dir", "results"))
    geom = SolarGeometry(cfg.latitude_deg, cfg.longitude_deg)
    kind = cfg.controllers[0]
    for ci, cid in enumerate(cfg.consumer_ids):
        frame = frames[cid]
        pv = simulate_pv(frame, geom, cfg.plant)
        ledger = run_rolling(frame, pv, kind, cfg, consumer_index=ci)
        path = ledger.write_csv(out_dir / f"ledger_{cid}_{kind.value}.csv")
        print(f"{cid} {kind.value}: cost {ledger.total_cost:.2f} DKK over "
              f"{len(ledger.entries)} hours -> {path}")
    return EXIT_OK


def cmd_compare(ns) -> int:
    cfg, merged = load_config(ns.config, _overrides(ns))
    frames = _load_frames(cfg, merged)
    comp = compare_controllers(frames, cfg)
    out_dir = Path(ns.out or merged.get("out_dir", "results"))
    csv_path = comp.write_csv(out_dir / "comparison.csv")
    paths = emit_report(comp.rows, out_dir)
    print(f"wrote {csv_path} and {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_export_lp(ns) -> int:
    cfg, merged = load_config(ns.config, _overrides(ns))
    frames = _load_frames(cfg, merged)
    cid = cfg.consumer_ids[0]
    frame = frames[cid]
    geom = SolarGeometry(cfg.latitude_deg, cfg.longitude_deg)
    i = ns.hour
    if not 0 <= i <= frame.grid.count - 24:
        raise DataError(f"hour {i} leaves no 24 h window in the frame")
    pv_win = pv_forecast(frame, i, geom, cfg.plant)
    if cfg.scenario_count > 1:
        fc = RollingRlsForecaster(frame)
        for j in range(i + 1):
            fc.observe(j)
        if not fc.warm:
            raise DataError("not enough history before --hour to forecast; "
                            "use --scenarios 1 for a perfect-information export")
        scen = fc.bundle(i, cfg.scenario_count, (cfg.seed, 0, i)).scenarios
    else:
        scen = ScenarioSet.single(frame.load_kwh[i:i + 24])
    inst = build_instance(cfg.plant, pv_win,
                          frame.price_buy_dkk_kwh[i:i + 24],
                          frame.price_sell_dkk_kwh[i:i + 24], scen)
    path = write_lp(inst, ns.lp_out)
    print(f"wrote {path} ({inst.n_rows} rows, {inst.n_vars} vars)")
    return EXIT_OK


def cmd_report(ns) -> int:
    import csv as _csv
    path = Path(ns.comparison)
    if not path.exists():
        raise DataError(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [{"consumer": r["consumer"], "controller": r["controller"],
                 "month": r["month"], "cost_dkk": float(r["cost_dkk"])}
                for r in _csv.DictReader(fh)]
    paths = emit_report(rows, ns.out, tuple(ns.format.split(",")))
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


_COMMANDS = {
    "synth-data": cmd_synth,
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "export-lp": cmd_export_lp,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        ns = parse_args(argv if argv is not None else sys.argv[1:])
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit:
        return EXIT_OK
    try:
        return _COMMANDS[ns.command](ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, AlignmentError, DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, HemsimError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
