"""Leakage-energy accounting and hardware-overhead formulas.

The ledger keeps integer tallies (register-cycles per power state and
transition counts); joule figures are derived from the tallies in a
single multiplication per state, so the closed-form reconstruction is
exact by construction and runs are bit-for-bit reproducible.

Per-register power defaults are normalized units (ON = 1.0 W), not
silicon data: published per-register leakage numbers for the modeled
states do not exist, so every shipped comparison is relative.  The
transition energies and clock are the measured defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .gasm import OFF, ON, SLEEP

# Transition kinds.  SLEEP<->ON pairs cost the sleep-transition energy;
# anything crossing the OFF boundary costs the off-transition energy.
SLEEP_TO_ON = "sleep_to_on"
ON_TO_SLEEP = "on_to_sleep"
OFF_TO_ON = "off_to_on"
ON_TO_OFF = "on_to_off"
SLEEP_TO_OFF = "sleep_to_off"
TRANSITION_KINDS = (SLEEP_TO_ON, ON_TO_SLEEP, OFF_TO_ON, ON_TO_OFF, SLEEP_TO_OFF)
_SLEEP_PAIR = (SLEEP_TO_ON, ON_TO_SLEEP)

WAKE_KINDS = (SLEEP_TO_ON, OFF_TO_ON)


@dataclass(frozen=True)
class PowerParams:
    p_on: float = 1.0       # watts per warp-register, normalized
    p_sleep: float = 0.2
    p_off: float = 0.02
    e_sleep_transition: float = 0.0633e-9  # joules per SLEEP<->ON event
    e_off_transition: float = 0.198e-9    # joules per OFF<->ON event
    clock_hz: float = 732e6

    def __post_init__(self):
        if not (self.p_on >= self.p_sleep >= self.p_off >= 0):
            raise ValueError("state powers must satisfy p_on >= p_sleep >= p_off >= 0")
        if self.e_sleep_transition < 0 or self.e_off_transition < 0:
            raise ValueError("transition energies must be >= 0")
        if self.clock_hz <= 0:
            raise ValueError("clock must be positive")

    def state_power(self, state: str) -> float:
        return {ON: self.p_on, SLEEP: self.p_sleep, OFF: self.p_off}[state]

    def transition_energy(self, kind: str) -> float:
        if kind not in TRANSITION_KINDS:
            raise ValueError(f"unknown transition kind {kind!r}")
        return self.e_sleep_transition if kind in _SLEEP_PAIR else self.e_off_transition


@dataclass
class EnergyLedger:
    params: PowerParams
    state_cycles: dict[str, int] = field(
        default_factory=lambda: {ON: 0, SLEEP: 0, OFF: 0}
    )
    transition_counts: dict[str, int] = field(
        default_factory=lambda: {k: 0 for k in TRANSITION_KINDS}
    )

    def accrue_cycle(self, census: dict[str, int], file_size: int) -> None:
        """Charge one cycle of leakage for the given state census.

        The census must cover every physical warp-register exactly once.
        """
        total = sum(census.values())
        if total != file_size:
            raise ValueError(
                f"census covers {total} registers, register file has {file_size}"
            )
        for state, count in census.items():
            self.state_cycles[state] += count

    def record_transition(self, kind: str) -> None:
        self.params.transition_energy(kind)  # validates the kind
        self.transition_counts[kind] += 1

    @property
    def leakage_j(self) -> float:
        return sum(
            self.state_cycles[s] * self.params.state_power(s) / self.params.clock_hz
            for s in (ON, SLEEP, OFF)
        )

    @property
    def transition_j(self) -> float:
        return sum(
            self.transition_counts[k] * self.params.transition_energy(k)
            for k in TRANSITION_KINDS
        )

    @property
    def total_j(self) -> float:
        return self.leakage_j + self.transition_j

    def snapshot(self) -> dict:
        return {
            "state_cycles": dict(self.state_cycles),
            "transitions": dict(self.transition_counts),
            "leakage_nj": self.leakage_j * 1e9,
            "transition_nj": self.transition_j * 1e9,
            "total_nj": self.total_j * 1e9,
        }


def _log2_ceil(n: int) -> int:
    if n < 1:
        raise ValueError("register count must be >= 1")
    return (n - 1).bit_length()


def lookup_table_bits(
    max_warps: int,
    entries_per_warp: int,
    pc_bits: int,
    regs_per_thread: int,
    operand_slots: int,
) -> int:
    """Storage for the runtime lookup table:
    warps * entries * (pc bits + reg-number bits per operand slot)."""
    return max_warps * entries_per_warp * (
        pc_bits + _log2_ceil(regs_per_thread) * operand_slots
    )


def scoreboard_overhead_bits(max_warps: int, regs_per_thread: int) -> int:
    """Extra scoreboard storage for tracking up to 4 source register
    numbers per in-flight instruction: 4 * warps * log2(regs)."""
    return 4 * max_warps * _log2_ceil(regs_per_thread)


def compare_report(results: dict[str, "SimResult"]) -> dict:  # noqa: F821
    """Combine per-mode runs of one program into a relative report.

    Reductions are percentages against the baseline run when present.
    """
    hashes = {r.program_sha256 for r in results.values()}
    if len(hashes) > 1:
        raise ValueError("compared runs executed different programs")
    base = results.get("baseline")
    rows = []
    for mode, res in results.items():
        row = res.report()
        if base is not None and base.ledger.total_j > 0:
            row["reduction_vs_baseline_pct"] = (
                100.0 * (base.ledger.total_j - res.ledger.total_j) / base.ledger.total_j
            )
        if base is not None and base.cycles > 0:
            row["cycle_overhead_pct"] = (
                100.0 * (res.cycles - base.cycles) / base.cycles
            )
        rows.append(row)
    return {"modes": rows}


def activity_stats(result: "SimResult") -> dict:  # noqa: F821
    """Fraction of each register's warp lifetime spent in accesses.

    Needs a run with tracing enabled; lifetime is the owning warp's
    completion cycle.  Registers the warp never touched report 0.0.
    """
    if not result.trace:
        raise ValueError("activity stats require a trace-enabled run")
    access_cycles: dict[tuple[int, str], set[int]] = {}
    for ev in result.trace:
        if ev.event in ("read", "write"):
            access_cycles.setdefault((ev.warp, ev.reg), set()).add(ev.cycle)
    per_register = {}
    for warp in sorted(result.completion_cycles):
        lifetime = result.completion_cycles[warp]
        for reg_name in result.physical_registers:
            cycles = access_cycles.get((warp, reg_name), set())
            per_register[f"w{warp}:{reg_name}"] = (
                len(cycles) / lifetime if lifetime else 0.0
            )
    values = list(per_register.values())
    return {
        "per_register": per_register,
        "average": sum(values) / len(values) if values else 0.0,
    }
