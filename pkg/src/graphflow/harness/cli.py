"""Command-line entry point: ``graphflow {run,verify,resume,report}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 run ended in GraphLost or Instability.  Failures print one line
``Kind: message`` on stderr as the last line of output.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import time

from threadpoolctl import threadpool_limits

from graphflow.errors import ConfigError, GraphflowError
from graphflow.harness.config import load_config
from graphflow.harness.runner import EXIT_CONFIG, EXIT_FLOW, EXIT_OK, EXIT_VERIFY, execute_run, report_run, resume_run

THREADS_ENV = "GRAPHFLOW_THREADS"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphflow", description="Graphical mean curvature flow lab.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and hypothesis flags")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help=f"data-parallel width of the numeric kernels (overrides ${THREADS_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a JSON config")
    run.add_argument("--config", required=True, help="scenario JSON file")
    run.add_argument("--out", default=None, help="output directory (default: output.dir of the config)")
    run.add_argument("--force", action="store_true", help="run even when the initial map is borderline")

    ver = sub.add_parser("verify", help="run the identity suite and the grid-refinement battery")
    ver.add_argument("--samples", type=_positive_int, default=10_000, help="random draws per identity")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--resolution", type=_positive_int, default=32, help="coarse grid of the refinement battery")

    res = sub.add_parser("resume", help="continue a run from a snapshot")
    res.add_argument("--snapshot", required=True, help="snapshot .csv or .json file")
    res.add_argument("--out", required=True, help="output directory")
    res.add_argument("--t-end", type=float, default=None, help="new end time")
    res.add_argument("--max-steps", type=int, default=None, help="new total step budget")

    rep = sub.add_parser("report", help="regenerate plots and summary from a run directory")
    rep.add_argument("--run", required=True, help="run directory")
    return p


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env is None or env == "":
        return None
    try:
        return _positive_int(env)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(THREADS_ENV, str(exc)) from None


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.output_dir
    if out is None:
        raise ConfigError("output.dir", "no output directory; pass --out or set output.dir")
    outcome = execute_run(cfg, out, force=args.force)
    s = outcome.summary
    print(f"{s['reason']} after {s['steps']} steps, t={s['final_time']!r}, "
          f"max lambda {s['final_max_lambda']!r}, wall {s['wall_time_s']:.2f}s -> {out}", flush=True)
    line = outcome.error_line()
    if line:
        print(line, file=sys.stderr)
    return outcome.exit_code


def _cmd_resume(args) -> int:
    try:
        outcome = resume_run(args.snapshot, args.out, t_end=args.t_end, max_steps=args.max_steps)
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, GraphflowError):
            raise
        raise ConfigError("snapshot", str(exc)) from exc
    s = outcome.summary
    print(f"{s['reason']} at step {s['final_step']}, t={s['final_time']!r} -> {args.out}", flush=True)
    line = outcome.error_line()
    if line:
        print(line, file=sys.stderr)
    return outcome.exit_code


def _cmd_report(args) -> int:
    try:
        s = report_run(args.run)
    except (OSError, ValueError) as exc:
        raise ConfigError("run", str(exc)) from exc
    print(f"{s.get('reason', '?')}: {s.get('rows', 0)} rows, final max lambda {s.get('final_max_lambda')!r}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from graphflow.identities import format_report, run_verification
    from graphflow.refinement import refinement_battery

    start = time.perf_counter()
    rows = run_verification(args.samples, args.seed)
    print(format_report(rows))
    print(f"identity suite: {time.perf_counter() - start:.2f}s")
    battery = refinement_battery(args.resolution)
    print(f"{'refinement':<28}  {'N':>4}  {'err(N)':>11}  {'err(2N)':>11}  ratio  result")
    for r in battery:
        label = f"{r.state}/{r.measure}"
        print(f"{label:<28}  {r.n:>4d}  {r.coarse:>11.4e}  {r.fine:>11.4e}  {r.ratio:5.2f}  "
              f"{'pass' if r.passed() else 'FAIL'}")
    failed = [r.name for r in rows if not r.passed] + [f"{r.state}/{r.measure}" for r in battery if not r.passed()]
    if failed:
        print(f"VerificationFailure: {len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "verify": _cmd_verify, "resume": _cmd_resume, "report": _cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="graphflow %(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        width = _threads(args.threads)
        limits = threadpool_limits(limits=width) if width else contextlib.nullcontext()
        with limits:
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphflowError as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        return EXIT_FLOW


if __name__ == "__main__":
    sys.exit(main())
