"""Command line entry point.

Exit codes: 0 on success, 1 when an invariant or slope band is violated,
2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from importlib import resources
from pathlib import Path

from fracheat.config import ConfigError, ExperimentConfig, load_config, parse_config
from fracheat.harness import (
    check_report,
    oracle_table,
    run_projector_sweep,
    run_space_sweep,
    run_sweep,
    run_time_sweep,
    run_truncation_sweep,
)
from fracheat.solver import DiscreteProblem, run

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("fracheat")


def default_configs() -> list[tuple[str, str]]:
    """``(name, text)`` for every config shipped with the package."""
    root = resources.files("fracheat") / "configs"
    found = sorted(p for p in root.iterdir() if p.name.endswith(".cfg"))
    return [(p.name.removesuffix(".cfg"), p.read_text()) for p in found]


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _need_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError(f"{args.command} requires --config")
    return load_config(args.config)


def _cmd_solve(args) -> int:
    cfg = _need_config(args)
    if cfg.stepper != "fem":
        raise ConfigError("solve runs the fem stepper; set stepper = fem")
    pb = DiscreteProblem.build(cfg.data, cfg.M, cfg.K, cfg.T, cfg.Y, mu=cfg.mu)
    traj = run(pb, keep_states=False)
    with _output(args.out) as fh:
        traj.write_csv(fh, pb.grid)
    if not traj.stability.holds(1e-10):
        logger.error("stability functional violated")
        return EXIT_VIOLATION
    return EXIT_OK


def _sweep_command(runner, kinds):
    def command(args) -> int:
        cfg = _need_config(args)
        if cfg.sweep_kind not in kinds:
            raise ConfigError(f"{args.command} needs [sweep] kind in {kinds}, got {cfg.sweep_kind!r}")
        report = runner(cfg)
        with _output(args.out) as fh:
            report.write_csv(fh)
        for problem in report.violations:
            logger.error(problem)
        return EXIT_VIOLATION if report.violations else EXIT_OK

    return command


def _space_or_projector(cfg):
    return run_projector_sweep(cfg) if cfg.sweep_kind == "projector" else run_space_sweep(cfg)


def _cmd_oracle(args) -> int:
    cfg = _need_config(args)
    with _output(args.out) as fh:
        oracle_table(cfg, fh)
    return EXIT_OK


def _cmd_check(args) -> int:
    if args.config is not None:
        configs = [load_config(args.config)]
    else:
        configs = [parse_config(text, name) for name, text in default_configs()]
    failures = 0
    for cfg in configs:
        report = run_sweep(cfg)
        problems = check_report(cfg, report)
        if args.out is not None:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            with open(Path(args.out) / f"{cfg.name}.csv", "w", newline="") as fh:
                report.write_csv(fh)
        status = "FAIL" if problems else "ok"
        slope = report.slopes.get(cfg.check.column) if cfg.check.column else None
        detail = f" slope({cfg.check.column})={slope:.4f}" if slope is not None else ""
        print(f"{status:4s} {cfg.name}{detail}")
        for p in problems:
            print(f"     {p}")
        failures += bool(problems)
    return EXIT_VIOLATION if failures else EXIT_OK


COMMANDS = {
    "solve": (_cmd_solve, "run one fully discrete simulation and write the trajectory CSV"),
    "sweep-time": (_sweep_command(run_time_sweep, ("time",)), "temporal convergence sweep"),
    "sweep-space": (_sweep_command(_space_or_projector, ("space", "projector")), "spatial convergence sweep"),
    "sweep-trunc": (_sweep_command(run_truncation_sweep, ("truncation",)), "truncation height sweep"),
    "oracle": (_cmd_oracle, "tabulate the exact extended solution"),
    "check": (_cmd_check, "run sweeps and compare slopes against the configured bands"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="experiment config file")
        p.add_argument(
            "--out",
            help="output CSV path (stdout if omitted); for check, a directory for per-config CSVs",
        )
        p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"fracheat: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fracheat: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
