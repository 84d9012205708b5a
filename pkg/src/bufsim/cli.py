"""Command-line front end: ``bufsim {simulate,sweep,bounds,verify}``.

Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import measure_fairness, min_utilization, search_min_buffer, summarize
from .bounds import FORMULAS, compute
from .config import ConfigError, Experiment, load_config, sweep_point
from .engine import SimConfig, SimulationError, run
from .output import FORMATS, dumps, table_csv, write_run
from .verification import DEFAULT_SUITE, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _formats(text: str) -> tuple[str, ...]:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be a subset of {','.join(FORMATS)}")
    return items


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--format", type=_formats, help="comma list of csv,json,svg")
    common.add_argument("--seed", type=_seed, help="seed override (unsigned 64-bit)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    parser = _Parser(prog="bufsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bufsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="run one config, write trace + summary")
    sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    sub.add_parser("verify", parents=[common], help="run a theorem verification suite")

    b = sub.add_parser("bounds", parents=[common], help="evaluate a closed-form bound")
    b.add_argument("formula", choices=FORMULAS)
    b.add_argument("--algo")
    b.add_argument("--beta", type=float)
    b.add_argument("--gamma", type=float, default=1.0)
    b.add_argument("--bdp", type=float)
    b.add_argument("--buffer", type=float)
    b.add_argument("--n", type=int)
    b.add_argument("--delta-lo", type=float, default=1.0)
    b.add_argument("--delta-hi", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--p", type=float)
    b.add_argument("--s", type=float, help="extra reacting flows (desync)")
    b.add_argument("--w-min", type=float)
    return parser


def _experiment(args, need_sim: bool) -> Experiment:
    if not args.config:
        raise ConfigError("--config is required for this command")
    exp = load_config(args.config)
    if need_sim and exp.sim is None:
        raise ConfigError("field link: the config does not describe a simulation")
    if exp.sim is not None and args.seed is not None:
        exp.sim = exp.sim.replace(seed=args.seed)
    if args.out:
        exp.out_dir = args.out
    if args.format:
        exp.formats = args.format
    return exp


def _out_dir(exp: Experiment) -> Path:
    return Path(exp.out_dir or "out")


def _search(cfg: SimConfig, opts: dict):
    return search_min_buffer(cfg, opts.get("target", 1.0), opts.get("tolerance", 1.0),
                             opts.get("window", 1), opts.get("percentile", 0.0))


def cmd_simulate(args) -> int:
    exp = _experiment(args, need_sim=True)
    trace = run(exp.sim)
    min_buffer = _search(exp.sim, exp.search).to_dict() if exp.search else None
    summary = summarize(trace, min_buffer=min_buffer)
    for path in write_run(trace, summary, _out_dir(exp), exp.formats):
        print(path)
    return EXIT_OK


def _sweep_row(task):
    index, parameter, value, cfg, search = task
    try:
        trace = run(cfg.replace(record_flows=True))
        band = measure_fairness(trace)
        width = min(10, len(trace))
        row = {
            "index": index,
            "parameter": parameter,
            "value": json.dumps(value, sort_keys=True),
            "n_flows": cfg.n_flows,
            "bdp": cfg.link.bdp,
            "buffer": cfg.link.buffer,
            "util_min": float(trace.mu.min()),
            "util_p1": min_utilization(trace, width, 0.01),
            "fair_lo": band.delta_lo,
            "fair_hi": band.delta_hi,
            "losses": int(trace.loss.sum()),
            "min_buffer": None,
            "error": None,
        }
        if search:
            row["min_buffer"] = _search(cfg, search).buffer
        return row
    except (SimulationError, ValueError) as exc:
        return {"index": index, "parameter": parameter,
                "value": json.dumps(value, sort_keys=True), "error": str(exc)}


_SWEEP_COLUMNS = ["index", "parameter", "value", "n_flows", "bdp", "buffer", "util_min",
                  "util_p1", "fair_lo", "fair_hi", "losses", "min_buffer", "error"]


def _sort_key(value):
    return (0, value, "") if isinstance(value, (int, float)) else (1, 0, json.dumps(value, sort_keys=True))


def cmd_sweep(args) -> int:
    exp = _experiment(args, need_sim=True)
    if not exp.sweep:
        raise ConfigError("field sweep: required for the sweep command")
    parameter = exp.sweep["parameter"]
    values = sorted(exp.sweep["values"], key=_sort_key)
    tasks = [(i, parameter, v, sweep_point(exp.sim, parameter, v), exp.search)
             for i, v in enumerate(values)]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    rows.sort(key=lambda r: r["index"])
    out = _out_dir(exp)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in exp.formats:
        (out / "sweep.csv").write_text(table_csv(rows, _SWEEP_COLUMNS))
    if "json" in exp.formats:
        (out / "sweep.json").write_text(dumps({"config": exp.sim.to_dict(), "sweep": exp.sweep,
                                               "rows": rows, "version": __version__}))
    sys.stdout.write(table_csv(rows, _SWEEP_COLUMNS))
    failed = [r for r in rows if r.get("error")]
    for r in failed:
        print(f"sweep point {r['value']} failed: {r['error']}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_bounds(args) -> int:
    kw = {k: v for k, v in vars(args).items()
          if k in ("bdp", "buffer", "n", "delta_lo", "delta_hi", "delta", "p", "s", "w_min", "gamma")
          and v is not None}
    if args.formula == "single":
        if not args.algo:
            raise ConfigError("--algo is required for the single-flow formula")
        kw["algo"] = {"name": args.algo, "beta": args.beta} if args.algo == "md" else args.algo
    try:
        report = compute(args.formula, **kw)
    except KeyError as exc:
        flag = "--" + exc.args[0].replace("_", "-")
        raise ConfigError(f"{args.formula}: missing required input {flag}") from exc
    except ValueError as exc:
        raise ConfigError(f"{args.formula}: {exc}") from exc
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        exp = _experiment(args, need_sim=False)
        opts = exp.verify or {}
        sim = exp.sim
    else:
        exp, opts, sim = None, {}, None
    suite = opts.get("suite", "default")
    suite = DEFAULT_SUITE if suite == "default" else tuple(suite)
    band = tuple(opts["band"]) if "band" in opts else None
    seed = args.seed if args.seed is not None else (sim.seed if sim is not None else 0)
    results = run_suite(suite, sim=sim, seeds=opts.get("seeds", 10), band=band,
                        trials=opts.get("trials", 10_000), delta=opts.get("delta", 0.05),
                        seed=seed, jobs=args.jobs)
    for r in results:
        print(f"{r['theorem']}: {r['status']}")
    if exp is not None and (exp.out_dir or args.out):
        out = _out_dir(exp)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(dumps({"reports": results, "version": __version__}))
    return EXIT_OK if all(r["status"] == "pass" for r in results) else EXIT_VERIFY


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "bounds": cmd_bounds,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
