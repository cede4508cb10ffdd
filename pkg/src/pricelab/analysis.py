"""Cross-run analysis of run artifacts: per-cell report, series CSVs and plots."""
from collections import OrderedDict
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from . import svg
from .econ import compute_benchmarks
from .metrics import aggregate_runs, episode_series, summarize
from .runner import RunConfig, read_step_log

log = logging.getLogger(__name__)

SMOOTH_FRACTION = 0.05
EXCERPT_STEPS = 100


def find_runs(runs_dir):
    return sorted(p.parent for p in Path(runs_dir).rglob("summary.json"))


def load_run(run_dir):
    """Recompute one run's series and figures from its files on disk."""
    run_dir = Path(run_dir)
    with open(run_dir / "config.json", encoding="utf-8") as fh:
        cfg = RunConfig.from_dict(json.load(fh))
    with open(run_dir / "summary.json", encoding="utf-8") as fh:
        stored = json.load(fh)
    rows = read_step_log(run_dir / "steps.csv")
    series = episode_series(rows)
    bench = compute_benchmarks(cfg.market_params())
    if cfg.log_every == 1:
        figures = summarize(series, bench, cfg.n_agents, cfg.convergence_threshold,
                            cfg.convergence_window, cfg.convergence_reading)
    else:
        # subsampled logs cannot reproduce the episode-level statistics
        figures = {k: stored[k] for k in ("converged", "t_euc", "delta",
                                          "mean_price_post_conv", "mean_profit_post_conv")}
    last_ep = max(r.episode for r in rows)
    n_excerpt = min(EXCERPT_STEPS, cfg.steps_per_episode)
    excerpt = np.zeros((n_excerpt, cfg.n_agents))
    for r in rows:
        if r.episode == last_ep and r.step < n_excerpt:
            excerpt[r.step, r.agent_id] = r.price
    return {
        "dir": run_dir,
        "config": cfg,
        "run_id": stored["run_id"],
        "series": series,
        "figures": figures,
        "benchmarks": bench,
        "excerpt": excerpt,
        "last_episode": last_ep,
    }


def cell_key(cfg):
    d = cfg.to_dict()
    d.pop("run_index")
    h = hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:6]
    return f"{cfg.cell_label()}-{h}"


def _write_series_csv(path, agg_price, agg_profit):
    cols = [agg_price.mean, agg_price.smoothed, agg_price.lower, agg_price.upper,
            agg_profit.mean, agg_profit.smoothed, agg_profit.lower, agg_profit.upper]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("episode,mean_price,smoothed_price,price_lower,price_upper,"
                 "mean_profit,smoothed_profit,profit_lower,profit_upper\n")
        for i in range(len(agg_price.mean)):
            fh.write(",".join([str(i)] + [repr(float(c[i])) for c in cols]) + "\n")


def analyze(runs_dir, out_dir):
    """Analyze every artifact under ``runs_dir``; returns ``(report, n_loaded)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs, skipped = [], []
    for d in find_runs(runs_dir):
        try:
            runs.append(load_run(d))
        except Exception as e:  # unreadable artifacts are reported, not fatal
            log.warning("skipping %s: %s", d, e)
            skipped.append({"path": str(d), "error": f"{type(e).__name__}: {e}"})

    groups = OrderedDict()
    for r in runs:
        groups.setdefault(cell_key(r["config"]), []).append(r)

    cells = OrderedDict()
    for key, members in groups.items():
        members.sort(key=lambda r: r["config"].run_index)
        cfg, bench = members[0]["config"], members[0]["benchmarks"]
        n = cfg.n_agents
        try:
            agg_p = aggregate_runs([m["series"].mean_price for m in members], SMOOTH_FRACTION)
            agg_r = aggregate_runs([m["series"].mean_profit for m in members], SMOOTH_FRACTION)
        except ValueError as e:
            skipped.extend({"path": str(m["dir"]), "error": f"cell {key}: {e}"} for m in members)
            continue
        x = np.arange(len(agg_p.mean), dtype=np.float64)
        x_label = "episode" if cfg.log_every == 1 else f"logged episode (every {cfg.log_every})"
        svg.write(svg.PlotSpec(
            title=f"Episode price {cfg.cell_label()} ({len(members)} runs)",
            x_label=x_label, y_label="mean price", x=x,
            series=[("smoothed mean", agg_p.smoothed)], band=(agg_p.lower, agg_p.upper),
            ref_lines=[("CB", bench.cb_price), ("MP", bench.mp_price)],
        ), out / f"{key}_price.svg")
        svg.write(svg.PlotSpec(
            title=f"Episode step profit {cfg.cell_label()} ({len(members)} runs)",
            x_label=x_label, y_label="mean step profit per seller", x=x,
            series=[("smoothed mean", agg_r.smoothed)], band=(agg_r.lower, agg_r.upper),
            ref_lines=[("CB", bench.cb_total_profit / n), ("MP", bench.mp_profit / n)],
        ), out / f"{key}_profit.svg")
        _write_series_csv(out / f"{key}_series.csv", agg_p, agg_r)

        for m in members:
            ex = m["excerpt"]
            svg.write(svg.PlotSpec(
                title=f"{m['run_id']}: first {ex.shape[0]} steps of episode {m['last_episode']}",
                x_label="step", y_label="price", x=np.arange(ex.shape[0], dtype=np.float64),
                series=[(f"seller {i}", ex[:, i]) for i in range(ex.shape[1])],
                ref_lines=[("CB", bench.cb_price), ("MP", bench.mp_price)],
            ), out / f"{m['run_id']}_steps.svg")

        deltas = [m["figures"]["delta"] for m in members]
        conv = [m["figures"]["converged"] for m in members]
        cells[key] = {
            "cell": cfg.cell_label(),
            "scenario": cfg.scenario,
            "algorithm": cfg.algorithm,
            "n_agents": n,
            "mu": cfg.mu,
            "run_ids": [m["run_id"] for m in members],
            "mean_delta": float(np.mean(deltas)),
            "deltas": deltas,
            "t_eucs": [m["figures"]["t_euc"] for m in members],
            "converged": conv,
            "convergence_rate": float(np.mean(conv)),
            "mean_price_post_conv": [m["figures"]["mean_price_post_conv"] for m in members],
        }

    report = {"n_runs": len(runs), "cells": cells, "skipped": skipped}
    with open(out / "analysis.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, len(runs)
