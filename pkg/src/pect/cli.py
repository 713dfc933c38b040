"""Command-line entry point: ``pect run | report | dynamics | oracle``.

Exit codes: 0 success, 1 run failure, 2 configuration error. Config values
come from the TOML file, then ``--set key=value`` overrides, then
``--output``; a relative output directory is placed under
``$PECT_OUTPUT_ROOT`` when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import PectTrace
from .experiment import ConfigError, compare_report, dynamics_csv, load_config, reference_energy, run_experiment

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("pect")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="TOML experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. --set pect.s_global=0.3 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pect", description="Parameter-efficient circuit training experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment over all configured seeds")
    _add_config_args(p)
    p.add_argument("--output", help="output directory (overrides output_dir)")

    p = sub.add_parser("report", help="compare runs against the first one")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", help="write the CSV here instead of stdout")

    p = sub.add_parser("dynamics", help="per-layer parameter-dynamics curves from a trace")
    p.add_argument("trace", help="trace.jsonl file")
    p.add_argument("--out", help="write the CSV here instead of stdout")

    p = sub.add_parser("oracle", help="print the exact ground energy of the configured Hamiltonian")
    _add_config_args(p)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f"output_dir={json.dumps(args.output)}")
    cfg = load_config(args.config, overrides)
    outcome = run_experiment(cfg)
    for r in outcome.rows:
        err = "n/a" if r.abs_error is None else f"{r.abs_error:.3e}"
        print(f"seed {r.seed}: energy {r.final_energy:.10f} abs_error {err} mean_depth {r.mean_depth:.2f} "
              f"fevals {r.total_fevals} ({r.termination})")
    print(outcome.success_line)
    print(f"artifacts: {outcome.output_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    _emit(compare_report(args.runs), args.out)
    return EXIT_OK


def _cmd_dynamics(args) -> int:
    path = Path(args.trace)
    if not path.is_file():
        raise ConfigError("trace", f"no such file {path}")
    _emit(dynamics_csv(PectTrace.from_jsonl(path.read_text())), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = load_config(args.config, args.overrides)
    e = reference_energy(cfg.build_hamiltonian())
    print("n/a" if e is None else f"{e:.12f}")
    return EXIT_OK if e is not None else EXIT_FAILURE


COMMANDS = {"run": _cmd_run, "report": _cmd_report, "dynamics": _cmd_dynamics, "oracle": _cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a run failure
        log.debug("run failed", exc_info=True)
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
