"""Command-line entry point: ``pricelab bench|run|grid|analyze``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
import argparse
import logging
import sys

from .econ import MarketParams, compute_benchmarks
from .runner import ConfigError, GridSpec, RunConfig, default_out_root, load_json, run_grid, run_single

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _fmt(v):
    return f"{round(v, 6):g}"


def cmd_bench(args):
    kw = {k: v for k, v in (("m", args.m), ("p_max", args.p_max), ("c", args.cost),
                            ("grid_unit", args.grid_unit)) if v is not None}
    try:
        params = MarketParams(**kw)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    b = compute_benchmarks(params)
    print("benchmark price quantity profit")
    print(f"MP {b.mp_price:.2f} {_fmt(b.mp_quantity)} {b.mp_profit:.2f}")
    print(f"CB {b.cb_price:.2f} {_fmt(b.cb_quantity)} {b.cb_total_profit:.2f}")
    return EXIT_OK


def cmd_run(args):
    try:
        cfg = RunConfig.from_dict(load_json(args.config))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        art = run_single(cfg, args.out or default_out_root())
    except Exception as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    s = art.summary
    print(f"run_id={s['run_id']} converged={s['converged']} t_euc={s['t_euc']} "
          f"delta={s['delta']:.4f} path={art.path}")
    return EXIT_OK


def cmd_grid(args):
    try:
        grid = GridSpec.from_dict(load_json(args.config))
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or default_out_root()
    try:
        manifest = run_grid(grid, out, args.parallel)
    except Exception as e:
        print(f"grid failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{manifest['n_runs']} runs, {manifest['n_failed']} failed; manifest at {out}/manifest.json")
    return EXIT_RUNTIME if manifest["n_failed"] == manifest["n_runs"] else EXIT_OK


def cmd_analyze(args):
    from .analysis import analyze

    try:
        report, n_loaded = analyze(args.runs, args.out)
    except OSError as e:
        print(f"analysis failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for s in report["skipped"]:
        print(f"skipped {s['path']}: {s['error']}", file=sys.stderr)
    for key, cell in report["cells"].items():
        print(f"{key} runs={len(cell['run_ids'])} mean_delta={cell['mean_delta']:.4f} "
              f"convergence_rate={cell['convergence_rate']:.2f}")
    if n_loaded == 0:
        print(f"no readable run artifacts under {args.runs}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="pricelab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="print monopoly and competitive benchmarks")
    b.add_argument("--m", type=int)
    b.add_argument("--p-max", type=float)
    b.add_argument("--cost", type=float)
    b.add_argument("--grid-unit", type=float)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("run", help="execute one run from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("grid", help="execute a grid of runs")
    g.add_argument("--config", required=True)
    g.add_argument("--parallel", type=int, default=1)
    g.add_argument("--out")
    g.set_defaults(func=cmd_grid)

    a = sub.add_parser("analyze", help="aggregate run artifacts into a report and SVG plots")
    a.add_argument("--runs", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
