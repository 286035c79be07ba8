"""Command-line front end: ``lqgame {validate,solve,simulate,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .equilibrium import backward_riccati, solve
from .errors import IOFailure, LQGameError, ValidationError, VerificationError
from .filter import CORRECTED, NAIVE
from .model import config_hash, load_config, validate
from .reporting import (
    RunManifest,
    checks_table,
    gains_table,
    series_table,
    stats_table,
    trace_table,
    values_table,
    write_csv,
)
from .scenarios import SCENARIO_NAMES, get_scenario
from .simulate import SIM_MODES, figure_series, paired_comparison, run_batch
from .verify import SUITES, run_suite

log = logging.getLogger("lqgame")

ERROR_WINDOW = "estimation errors averaged over t=0..T (prior estimate included)"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors count as invalid input
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", default=dflt(None), help="JSON model configuration")
    src.add_argument("--scenario", default=dflt(None), choices=SCENARIO_NAMES, help="built-in scenario")
    p.add_argument("--out", default=dflt("."), help="output directory (or a .csv path for single-file outputs)")
    p.add_argument("--seed", type=int, default=dflt(0), help="base random seed (default 0)")
    p.add_argument("--jobs", type=int, default=dflt(1), help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lqgame", description="Two-player partially observed LQ games.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pv = sub.add_parser("validate", help="check a model against the standing assumptions")
    _common(pv, suppress=True)

    ps = sub.add_parser("solve", help="equilibrium gains, value matrices and constants")
    _common(ps, suppress=True)
    ps.add_argument("--mode", choices=(CORRECTED, NAIVE), default=CORRECTED, help="filter used for the value constants")

    pm = sub.add_parser("simulate", help="Monte Carlo batch of equilibrium play")
    _common(pm, suppress=True)
    pm.add_argument("--mode", choices=SIM_MODES, default=CORRECTED)
    pm.add_argument("--paired", action="store_true", help="corrected and naive filters on common noise")
    pm.add_argument("--episodes", type=int, default=500)
    pm.add_argument("--threshold", type=float, default=None, help="agreement threshold on |xB_T - xS_T|")
    pm.add_argument("--max-trace", type=int, default=None, help="cap on episodes written to the trace CSV")

    pq = sub.add_parser("verify", help="run a numerical verification suite")
    _common(pq, suppress=True)
    pq.add_argument("--suite", choices=SUITES + ("all",), default="all")
    pq.add_argument("--trials", type=int, default=None)
    pq.add_argument("--tol", type=float, default=None)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("LQG_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load(args):
    """Model, prior, true initial state, offer indices, threshold and source label."""
    if args.config:
        model, prior = load_config(args.config)
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise IOFailure(f"cannot read {args.config}: {exc}") from exc
        x0 = np.asarray(raw["x0"], dtype=float) if "x0" in raw else None
        return model, prior, x0, None, 3.0, args.config
    if args.scenario:
        sc = get_scenario(args.scenario)
        return sc.model, sc.prior, sc.x0, sc.offer_indices, sc.threshold, sc.name
    raise ValidationError("one of --config or --scenario is required")


def _out_paths(out: str, names: list[str]) -> list[Path]:
    """Map logical file names into ``out``; a ``.csv`` target names the first file."""
    p = Path(out)
    if p.suffix == ".csv":
        first = p
        return [first] + [p.with_name(f"{p.stem}_{n}") for n in names[1:]]
    return [p / n for n in names]


def replay_command(argv: list[str]) -> str:
    """Command line without ``--out`` and ``--jobs``, which never change results."""
    keep = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("--out", "--jobs"):
            skip = True
            continue
        if a.startswith(("--out=", "--jobs=")):
            continue
        keep.append(a)
    return "lqgame " + " ".join(keep)


def _manifest(argv, args, source, model, prior, paths, **kw) -> RunManifest:
    return RunManifest(
        command=replay_command(argv),
        source=source,
        outputs=[p.name for p in paths],
        config_hash=config_hash(model, prior),
        **kw,
    )


def _report(model, prior):
    rep = validate(model, prior)
    for w in rep.warnings:
        log.warning(w)
    return rep


def cmd_validate(args, argv) -> int:
    model, prior, *_ , source = _load(args)
    rep = _report(model, prior)
    for v in rep.violations:
        print(f"FAIL {v}")
    for w in rep.warnings:
        print(f"WARN {w}")
    if rep.ok:
        print(f"OK {source}")
        return 0
    return ValidationError.exit_code


def cmd_solve(args, argv) -> int:
    model, prior, _, _, _, source = _load(args)
    _report(model, prior).raise_if_failed()
    eq = solve(model, prior, args.mode)
    paths = _out_paths(args.out, ["gains.csv", "values.csv"])
    man = _manifest(argv, args, source, model, prior, paths, mode=args.mode)
    write_csv(paths[0], *gains_table(eq.riccati), man)
    write_csv(paths[1], *values_table(eq.riccati, eq.constants), man)
    for p in paths:
        print(p)
    return 0


def cmd_simulate(args, argv) -> int:
    model, prior, x0, offers, thr, source = _load(args)
    _report(model, prior).raise_if_failed()
    threshold = thr if args.threshold is None else args.threshold
    ric = backward_riccati(model)
    kw = dict(x0=x0, offer_indices=offers, jobs=args.jobs, keep_trajectories=True, scenario=source)
    if args.paired:
        res = paired_comparison(model, prior, ric, args.episodes, args.seed, threshold, **kw)
        batches = [(CORRECTED, res.corrected), (NAIVE, res.naive)]
        mode = "paired"
    else:
        batches = [(args.mode, run_batch(model, prior, ric, args.mode, args.episodes, args.seed, threshold, **kw))]
        mode = args.mode
    names = ["stats.csv"] + [f"trace_{m}.csv" for m, _ in batches] + ["series.csv"]
    paths = _out_paths(args.out, names)
    man = _manifest(
        argv, args, source, model, prior, paths,
        mode=mode, episodes=args.episodes, base_seed=args.seed, threshold=threshold,
        notes={"error_window": ERROR_WINDOW},
    )
    header, rows = stats_table([b.stats for _, b in batches])
    if args.paired:
        extra = ["ap_common_count", "ap_common_mean", "ap_common_lo", "ap_common_hi"]
        header = header + extra
        for row, common in zip(rows, (res.corrected_common, res.naive_common)):
            row += [common.ap_count, common.ap_mean, common.ap_lo, common.ap_hi]
    write_csv(paths[0], header, rows, man)
    series_rows = []
    for (m, b), path in zip(batches, paths[1:-1]):
        tr = b.trajectories
        if args.max_trace is not None:
            tr = type(tr)(*(getattr(tr, f)[: args.max_trace] for f in ("X", "XP", "XE", "UP", "UE", "ZP", "ZE")))
        write_csv(path, *trace_table(tr), man)
        sh, sr = series_table(figure_series(b.trajectories), m)
        series_rows += sr
    write_csv(paths[-1], sh, series_rows, man)
    for s in (b.stats for _, b in batches):
        print(f"{s.mode}: agreements={s.agreements}/{s.episodes} mse_P={s.mse_P:.4g} "
              f"cost_P={s.mean_cost_P:.6g} cost_E={s.mean_cost_E:.6g}")
    for p in paths:
        print(p)
    return 0


def cmd_verify(args, argv) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    paths = _out_paths(args.out, [f"verify_{s}.csv" for s in suites])
    failed = 0
    for suite, path in zip(suites, paths):
        rows = run_suite(suite, args.trials, args.tol, args.seed, args.jobs)
        man = RunManifest(command=replay_command(argv), source=f"suite:{suite}", base_seed=args.seed,
                          outputs=[path.name], notes={"trials": str(args.trials or "default"), "tol": str(args.tol or "default")})
        write_csv(path, *checks_table(rows), man)
        bad = sum(not r.passed for r in rows)
        failed += bad
        print(f"{suite}: {len(rows) - bad}/{len(rows)} checks passed -> {path}")
    if failed:
        raise VerificationError(f"{failed} check(s) failed")
    return 0


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except LQGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IOFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
