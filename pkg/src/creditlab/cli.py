"""Command line pipeline: gen, abt, train, curve, grid, strategy, report.

Exit codes: 0 success, 2 configuration error, 3 data contract violation.
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from creditlab.io import RunManifest, load_world, save_world, write_csv, write_json

EXIT_CONFIG = 2
EXIT_DATA = 3


def _config_errors():
    from creditlab.engine.rules import RuleSyntaxError
    from creditlab.engine.strategy import StrategyConfigError
    from creditlab.finance import PricingError
    from creditlab.scorecard import ScorecardFormatError
    from creditlab.simkernel import CalibrationError, ConfigError
    from creditlab.simkernel.matrix import TransitionMatrixError

    return (ConfigError, CalibrationError, StrategyConfigError, RuleSyntaxError,
            ScorecardFormatError, TransitionMatrixError, PricingError, json.JSONDecodeError)


def _data_errors():
    from creditlab.engine.rules import UnboundIdentifier
    from creditlab.scorecard import BinCoverageError, FitError, MetricError
    from creditlab.simkernel import ContractViolation

    return (ContractViolation, BinCoverageError, FitError, MetricError, UnboundIdentifier,
            FileNotFoundError)


def handled(fn):
    """Map library errors to exit codes with a one-line diagnostic."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _config_errors() as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except _data_errors() as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)

    return wrapper


def _load_config(path, seed):
    from creditlab.simkernel import GenConfig

    cfg = GenConfig() if path is None else GenConfig.from_json(Path(path).read_text(encoding="utf-8"))
    return cfg if seed is None else cfg.replace(seed=int(seed))


def _periods(period_from, period_to, default=(None, None)):
    lo = default[0] if period_from is None else period_from
    hi = default[1] if period_to is None else period_to
    if lo is None and hi is None:
        return None
    return (lo if lo is not None else 0, hi if hi is not None else 999912)


def _world_inputs(world_dir):
    return sorted(p for p in Path(world_dir).glob("*") if p.suffix in (".csv", ".json")
                  and p.name != "manifest.json")


def _load_suite(models_dir):
    from creditlab.scorecard import ModelSuite

    if models_dir is None:
        raise click.UsageError("--models is required")
    return ModelSuite.load(models_dir)


def _finish(manifest: RunManifest, out, written, started):
    manifest.timings["total"] = round(time.perf_counter() - started, 3)
    manifest.add_outputs(written)
    manifest.write(out)
    click.echo(f"wrote {len(written)} files to {out}")


world_arg = click.argument("world", type=click.Path(exists=True, file_okay=False))
out_opt = click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
period_opts = [
    click.option("--period-from", type=int, default=None, help="First application month (YYYYMM)."),
    click.option("--period-to", type=int, default=None, help="Last application month (YYYYMM)."),
]
models_opt = click.option("--models", type=click.Path(exists=True, file_okay=False), default=None,
                          help="Directory with the four scorecard JSON files.")


def with_periods(fn):
    for opt in reversed(period_opts):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Consumer-finance simulation and credit-decisioning laboratory."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Generator config JSON (missing keys take defaults).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--target-risk", type=float, default=None,
              help="Calibrate risk_shift to this default_12 rate before generating.")
@out_opt
@handled
def gen(config_path, seed, target_risk, out):
    """Generate a world: four CSV tables, the config and a manifest."""
    from creditlab.simkernel import calibrate_global_risk, generate_world

    t0 = time.perf_counter()
    cfg = _load_config(config_path, seed)
    man = RunManifest("gen", seed=cfg.seed)
    if config_path:
        man.add_inputs([config_path])
    if target_risk is not None:
        res = calibrate_global_risk(cfg, target_risk)
        cfg = res.config
        man.metrics["calibration_iterations"] = res.iterations
        man.timings["calibrate"] = round(time.perf_counter() - t0, 3)
    t1 = time.perf_counter()
    world = generate_world(cfg)
    man.timings["generate"] = round(time.perf_counter() - t1, 3)
    man.config_digest = cfg.digest()
    man.metrics.update({
        "global_risk": world.global_risk(),
        "ins_risk": float(world.ins_production["default_12"].mean()),
        "css_risk": float(world.css_production["default_12"].mean()),
        "n_ins": len(world.ins_production), "n_css": len(world.css_production),
        "n_snapshots": len(world.ins_transactions) + len(world.css_transactions),
        "risk_shift": cfg.risk_shift,
    })
    _finish(man, out, save_world(world, out), t0)


@main.command()
@world_arg
@with_periods
@out_opt
@handled
def abt(world, period_from, period_to, out):
    """Full-universe analytical base table (204 variables plus targets)."""
    from creditlab.abt import build_abt

    t0 = time.perf_counter()
    w = load_world(world)
    man = RunManifest("abt", w.config.digest() if w.config else None, w.config.seed if w.config else None)
    man.add_inputs(_world_inputs(world))
    periods = _periods(period_from, period_to)
    table = build_abt(w)
    prod = w.production
    if periods is not None:
        table = table[prod["period"].between(*periods).to_numpy()]
    front = prod.loc[table.index, ["cid", "aid", "period", "product"]].reset_index(drop=True)
    table = table.reset_index(drop=True)
    table = table.drop(columns=[c for c in front.columns if c in table.columns])
    frame = front.join(table)
    _finish(man, out, [write_csv(frame, Path(out) / "abt.csv")], t0)


@main.command()
@world_arg
@with_periods
@out_opt
@handled
def train(world, period_from, period_to, out):
    """Fit PD_Ins, PD_Css, Cross_PD_Css and PR_Css on the training window."""
    from creditlab.abt import build_abt
    from creditlab.training import TRAIN_FROM, TRAIN_TO, train_suite

    t0 = time.perf_counter()
    w = load_world(world)
    man = RunManifest("train", w.config.digest() if w.config else None, w.config.seed if w.config else None)
    man.add_inputs(_world_inputs(world))
    lo, hi = _periods(period_from, period_to, (TRAIN_FROM, TRAIN_TO))
    suite = train_suite(w, build_abt(w, with_targets=False), lo, hi)
    suite.save(out)
    man.metrics = {name: card.reported.get("gini_train") for name, card in suite.items()}
    _finish(man, out, sorted(Path(out).glob("*.json")), t0)


@main.command()
@world_arg
@models_opt
@click.option("--pricing", type=click.Choice(["product", "table"]), default="product",
              help="Per-product pricing, or the single reference pricing for every loan.")
@with_periods
@out_opt
@handled
def curve(world, models, pricing, period_from, period_to, out):
    """Profit curves of PD_Ins and PD_Css with the best cut-offs."""
    from creditlab.engine.runner import full_information
    from creditlab.finance import CSS_PRICING, INS_PRICING, TABLE_PRICING, best_cutoff, profit_curve

    t0 = time.perf_counter()
    w = load_world(world)
    suite = _load_suite(models)
    man = RunManifest("curve", w.config.digest() if w.config else None, w.config.seed if w.config else None)
    man.add_inputs(_world_inputs(world) + sorted(Path(models).glob("*.json")))
    full = full_information(w, suite)
    prod = w.production
    periods = _periods(period_from, period_to)
    window = np.ones(len(prod), bool) if periods is None else prod["period"].between(*periods).to_numpy()
    written, kpi = [], {}
    for product, model, params in (("Ins", "PD_Ins", INS_PRICING), ("Css", "PD_Css", CSS_PRICING)):
        m = (prod["product"] == product).to_numpy() & window
        if not m.any():
            continue
        params = TABLE_PRICING if pricing == "table" else params
        c = profit_curve(full.loc[m, model].to_numpy(), prod.loc[m, "app_loan_amount"],
                         prod.loc[m, "app_n_installments"], prod.loc[m, "default_12"].astype(bool), params)
        thr, best = best_cutoff(c)
        k = int(np.flatnonzero(c.threshold == thr)[-1])
        kpi[model] = {"threshold": thr, "profit": best, "acceptance_rate": float(c.acceptance_rate[k]),
                      "full_acceptance_profit": float(c.profit[-1])}
        written.append(write_csv(c.to_frame(), Path(out) / f"curve_{model}.csv"))
    written.append(write_json(kpi, Path(out) / "kpi.json"))
    man.metrics = kpi
    _finish(man, out, written, t0)


@main.command()
@world_arg
@models_opt
@click.option("--groups", type=int, default=5, show_default=True, help="Groups per axis.")
@with_periods
@out_opt
@handled
def grid(world, models, groups, period_from, period_to, out):
    """PD x PR segment grid and the cut-off strategies derived from it."""
    from creditlab.engine.derive import derive_cutoffs
    from creditlab.engine.runner import full_information
    from creditlab.training import TRAIN_FROM, TRAIN_TO

    t0 = time.perf_counter()
    w = load_world(world)
    suite = _load_suite(models)
    man = RunManifest("grid", w.config.digest() if w.config else None, w.config.seed if w.config else None)
    man.add_inputs(_world_inputs(world) + sorted(Path(models).glob("*.json")))
    periods = _periods(period_from, period_to, (TRAIN_FROM, TRAIN_TO))
    plan = derive_cutoffs(w, full_information(w, suite), periods, groups)
    d = Path(out)
    written = [write_csv(plan.grid.cells, d / "grid.csv")]
    for special, name in ((True, "derived_special.txt"), (False, "derived_cutoffs.txt")):
        p = d / name
        p.write_text(plan.strategy(special).to_text(), encoding="utf-8")
        written.append(p)
    summary = {"css_cut": plan.css_cut, "pd_high": plan.pd_high, "pd_low": plan.pd_low,
               "pr_min": plan.pr_min, "best_cell": list(plan.grid.best_cell())}
    written.append(write_json(summary, d / "plan.json"))
    man.metrics = summary
    _finish(man, out, written, t0)


@main.command()
@world_arg
@models_opt
@click.option("--strategy", "strategy_ref", required=True,
              help="Strategy config file, or strategy1..strategy4 for the shipped ones.")
@with_periods
@out_opt
@handled
def strategy(world, models, strategy_ref, period_from, period_to, out):
    """Run a strategy with bank visibility and compare with full information."""
    from creditlab.engine.runner import expected_vs_realized
    from creditlab.engine.strategy import SHIPPED_STRATEGIES, Strategy, shipped_strategy

    t0 = time.perf_counter()
    w = load_world(world)
    suite = _load_suite(models)
    strat = shipped_strategy(strategy_ref) if strategy_ref in SHIPPED_STRATEGIES else Strategy.load(strategy_ref)
    man = RunManifest("strategy", w.config.digest() if w.config else None, w.config.seed if w.config else None)
    inputs = _world_inputs(world) + sorted(Path(models).glob("*.json"))
    if strategy_ref not in SHIPPED_STRATEGIES:
        inputs.append(Path(strategy_ref))
    man.add_inputs(inputs)
    res = expected_vs_realized(w, suite, strat, _periods(period_from, period_to))
    rep = res.realized_report
    d = Path(out)
    written = [write_csv(rep.products[p], d / f"decisions_{p}.csv") for p in rep.products]
    written += [write_csv(rep.periods, d / "periods.csv"), write_csv(rep.averages, d / "averages.csv"),
                write_csv(rep.gini, d / "gini.csv"),
                write_json(res.to_dict(), d / "summary.json")]
    man.metrics = {"expected_profit": res.expected, "realized_profit": res.realized,
                   "relative_gap": res.relative_gap}
    _finish(man, out, written, t0)


@main.command()
@world_arg
@click.option("--kind", type=click.Choice(["vintage", "stock", "power"]), required=True)
@click.option("--product", type=click.Choice(["Ins", "Css", "all"]), default="all", show_default=True)
@click.option("--noise", "noise_levels", default="0,0.2,0.4,0.6,0.8,1", show_default=True,
              help="Comma-separated noise levels for the power experiment.")
@click.option("--seed", type=int, default=0, show_default=True, help="Noise seed for the power experiment.")
@with_periods
@out_opt
@handled
def report(world, kind, product, noise_levels, seed, period_from, period_to, out):
    """Vintage, stock or Gini-to-profit report as CSV."""
    from creditlab.reports import power_profit_experiment, stock_report, vintage_report

    t0 = time.perf_counter()
    w = load_world(world)
    man = RunManifest(f"report {kind}", w.config.digest() if w.config else None, seed)
    man.add_inputs(_world_inputs(world))
    periods = _periods(period_from, period_to)
    if kind == "vintage":
        prod = w.production
        if periods is not None:
            prod = prod[prod["period"].between(*periods)]
        frame = vintage_report(prod, None if product == "all" else product)
    elif kind == "stock":
        frame = stock_report(w)
        if periods is not None:
            frame = frame[frame["period"].between(*periods)]
    else:
        try:
            levels = tuple(float(x) for x in noise_levels.split(","))
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--noise") from exc
        frame = power_profit_experiment(w, levels, seed=seed, periods=periods)
    _finish(man, out, [write_csv(frame, Path(out) / f"{kind}.csv")], t0)


if __name__ == "__main__":
    main()
