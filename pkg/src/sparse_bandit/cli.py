"""Command line entry point: ``sparse-bandit {design,run,slope,plot}``.

Exit codes: 0 on success, 2 for an invalid config or input file, 3 when a
run fails.
"""
import argparse
import json
import logging
import sys

from .core import load_problem
from .design import solve_e_optimal, solve_g_optimal
from .harness import (ConfigError, ExperimentConfig, curves_from_table, loglog_slope,
                      read_results_csv, read_summary_csv, run_experiment, write_outputs)
from .plotting import regret_svg

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _cmd_design(args):
    try:
        actions, _, _ = load_problem(args.actions)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{args.actions}: {exc}") from None
    solver = solve_e_optimal if args.criterion == "e" else solve_g_optimal
    design, cert = solver(actions, tol=args.tol, max_iter=args.max_iter)
    doc = {"criterion": args.criterion, "design": design.to_dict(), "certificate": cert.to_dict()}
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_run(args):
    config = ExperimentConfig.from_json(args.config)
    if args.threads is not None:
        config = ExperimentConfig(**{**config.__dict__, "threads": args.threads})
    result = run_experiment(config)
    written = write_outputs(result, args.output_dir)
    for policy, n, med, iqr in result.summary():
        print(f"{policy:>24s}  n={n:<7d} median={med:.3f}  iqr={iqr:.3f}")
    for path in written:
        print(f"wrote {path}")


def _cmd_slope(args):
    try:
        table = read_summary_csv(args.summary)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    for policy, (horizons, medians) in table.items():
        if args.policy and policy != args.policy:
            continue
        if len(horizons) < 3:
            print(f"{policy}: fewer than 3 horizons, no slope")
            continue
        print(f"{policy}: slope={loglog_slope(horizons, medians):.4f}")


def _cmd_plot(args):
    try:
        table = read_results_csv(args.results)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    svg = regret_svg(curves_from_table(table, args.horizon), title=args.title)
    with open(args.output, "w") as fh:
        fh.write(svg)
    print(f"wrote {args.output}")


def build_parser():
    parser = argparse.ArgumentParser(prog="sparse-bandit",
                                     description="Sparse linear bandit experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="solve an optimal design for an action set")
    p.add_argument("actions", help="JSON file with an 'actions' matrix")
    p.add_argument("--criterion", choices=("e", "g"), default="e")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("run", help="run an experiment described by a JSON config")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir",
                   help="default directory for results.csv, summary.csv, runs.csv, regret.svg")
    p.add_argument("--threads", type=int, help="worker threads (capped by SPARSE_BANDIT_THREADS)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("slope", help="log-log regret slope per policy from a summary CSV")
    p.add_argument("summary")
    p.add_argument("--policy", help="only report this policy")
    p.set_defaults(func=_cmd_slope)

    p = sub.add_parser("plot", help="SVG of median regret curves from a results CSV")
    p.add_argument("results")
    p.add_argument("-o", "--output", default="regret.svg")
    p.add_argument("--horizon", type=int, help="horizon to plot (default: largest per policy)")
    p.add_argument("--title", default="Cumulative regret")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
