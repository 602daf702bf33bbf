"""Register power-state toolchain: a GASM assembly front end, liveness and
next-access-distance analyses that classify each register ON/SLEEP/OFF at
every program point, an annotator that encodes the states back into the
instruction stream, and a warp-level register-file simulator that measures
the resulting leakage energy."""

from .annotator import annotate, unencoded_accesses
from .cfg import Cfg, CfgError, build_cfg, program_points
from .dataflow import (
    INF,
    AnalysisResult,
    analyze,
    classify,
    distance,
    distance_oracle,
    inc,
    liveness,
    liveness_oracle,
    sleep_off,
)
from .energy import (
    EnergyLedger,
    PowerParams,
    activity_stats,
    compare_report,
    lookup_table_bits,
    scoreboard_overhead_bits,
)
from .gasm import (
    OFF,
    ON,
    SLEEP,
    GasmError,
    Instruction,
    Program,
    Register,
    encodable_slots,
    parse_program,
    register_defs,
    register_uses,
    serialize_program,
    strip_power,
)
from .simcore import SimConfig, SimResult, SimulationError, simulate

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "Cfg",
    "CfgError",
    "EnergyLedger",
    "GasmError",
    "INF",
    "Instruction",
    "OFF",
    "ON",
    "PowerParams",
    "Program",
    "Register",
    "SLEEP",
    "SimConfig",
    "SimResult",
    "SimulationError",
    "activity_stats",
    "analyze",
    "annotate",
    "build_cfg",
    "classify",
    "compare_report",
    "distance",
    "distance_oracle",
    "encodable_slots",
    "inc",
    "liveness",
    "liveness_oracle",
    "lookup_table_bits",
    "parse_program",
    "program_points",
    "register_defs",
    "register_uses",
    "scoreboard_overhead_bits",
    "serialize_program",
    "simulate",
    "sleep_off",
    "strip_power",
    "unencoded_accesses",
]
