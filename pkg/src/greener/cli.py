"""Command-line driver: analyze/annotate, simulate, and compare modes.

Every run is file-in/file-out and reproducible: the same flags, files,
and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import annotator, dataflow, energy, gasm, simcore
from .cfg import to_dot
from .dataflow import DEFAULT_THRESHOLD


def _read_program(path: str) -> gasm.Program:
    return gasm.parse_program(Path(path).read_text(encoding="utf-8"))


def _build_config(args, mode: str | None = None) -> simcore.SimConfig:
    """Merge defaults, an optional JSON config file, and flags.

    Flags win over the file; unknown file keys are rejected.
    """
    data: dict = {}
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise simcore.SimulationError("config file must hold a JSON object")
        data.update(loaded)
    flag_map = {
        "warps": "warps",
        "regs_per_thread": "registers_per_thread",
        "scheduler": "scheduler",
        "wake_sleep": "wake_sleep_cycles",
        "wake_off": "wake_off_cycles",
        "seed": "seed",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if mode is not None:
        data["mode"] = mode
    if getattr(args, "runtime_opt", None) is not None:
        data["runtime_opt"] = args.runtime_opt
    elif "runtime_opt" not in data:
        data["runtime_opt"] = data.get("mode") == "greener"
    config = simcore.SimConfig.from_dict(data)
    config.validate()
    return config


def cmd_analyze(args) -> int:
    program = _read_program(args.input)
    analysis = dataflow.analyze(program, args.threshold)
    annotated = annotator.annotate(program, analysis)
    out_text = gasm.serialize_program(annotated)
    if args.output:
        Path(args.output).write_text(out_text, encoding="utf-8")
    else:
        sys.stdout.write(out_text)
    if args.dump_facts:
        Path(args.dump_facts).write_text(analysis.facts_csv(), encoding="utf-8")
    if args.dump_cfg:
        Path(args.dump_cfg).write_text(to_dot(analysis.cfg), encoding="utf-8")
    return 0


def cmd_sim(args) -> int:
    program = _read_program(args.input)
    config = _build_config(args, mode=args.mode)
    result = simcore.simulate(program, config)
    report_text = result.report_json()
    if args.report:
        Path(args.report).write_text(report_text, encoding="utf-8")
    else:
        sys.stdout.write(report_text)
    if args.trace:
        Path(args.trace).write_text(result.trace_csv(), encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    modes = args.modes
    if len(modes) < 2:
        raise simcore.SimulationError("compare needs at least two modes")
    program = _read_program(args.input)
    results = {}
    for mode in modes:
        config = _build_config(args, mode=mode)
        results[mode] = simcore.simulate(program, config)
    report = energy.compare_report(results)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags take precedence)")
    parser.add_argument("--warps", type=int, default=None)
    parser.add_argument("--regs-per-thread", dest="regs_per_thread", type=int, default=None)
    parser.add_argument("--scheduler", choices=simcore.SCHEDULERS, default=None)
    parser.add_argument("--wake-sleep", dest="wake_sleep", type=int, default=None,
                        help="SLEEP->ON wake latency in cycles")
    parser.add_argument("--wake-off", dest="wake_off", type=int, default=None,
                        help="OFF->ON wake latency in cycles")
    parser.add_argument("--seed", type=int, default=None)
    opt = parser.add_mutually_exclusive_group()
    opt.add_argument("--runtime-opt", dest="runtime_opt", action="store_true",
                     default=None, help="enable the lookup-table state correction")
    opt.add_argument("--no-runtime-opt", dest="runtime_opt", action="store_false",
                     help="disable the lookup-table state correction")
    parser.add_argument("--report", help="write the report JSON here (default stdout)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greener",
        description="Register power-state annotation and register-file "
        "leakage simulation for GASM programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="annotate a program with power states")
    p_an.add_argument("input")
    p_an.add_argument("-W", "--threshold", type=int, default=DEFAULT_THRESHOLD,
                      help="instruction-distance window that keeps a register ON")
    p_an.add_argument("-o", "--output", help="annotated output path (default stdout)")
    p_an.add_argument("--dump-facts", help="write per-point facts CSV here")
    p_an.add_argument("--dump-cfg", help="write a block-collapsed DOT graph here")
    p_an.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("sim", help="simulate one mode")
    p_sim.add_argument("input")
    p_sim.add_argument("--mode", choices=simcore.MODES, required=True)
    p_sim.add_argument("--trace", help="write the event trace CSV here")
    _add_sim_flags(p_sim)
    p_sim.set_defaults(func=cmd_sim)

    p_cmp = sub.add_parser("compare", help="run several modes on one program")
    p_cmp.add_argument("input")
    p_cmp.add_argument("--modes", nargs="+", choices=simcore.MODES,
                       default=["baseline", "sleepreg", "greener"])
    _add_sim_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        gasm.GasmError,
        simcore.SimulationError,
        annotator.AnnotationError,
        ValueError,
        OSError,
    ) as exc:
        print(f"greener: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
