"""Cycle-level warp pipeline simulator over GASM programs.

Per cycle each warp fetches/decodes one instruction into a depth-2 queue;
a single scheduler (LRR or GTO) issues at most one ready warp.  A warp is
ready when its head-of-queue instruction has no scoreboard conflict and
every register it touches is ON; registers found in SLEEP/OFF get a wake
signal and the warp stalls for the wake latency.  Read-operands completes
one cycle after issue (sources released, source power states applied);
writeback follows the opcode latency (destination states applied,
lookup-table entry retired, branches resolved, exit completes the warp).

Three modes share the machinery: ``baseline`` never changes register
states; ``sleepreg`` drops every accessed register to SLEEP after the
access; ``greener`` applies the states encoded in the instruction stream,
optionally corrected at run time by the per-warp lookup table of decoded,
not-yet-written-back instructions.

Runs are deterministic: guard outcomes come from per-label trip-count
overrides or a PRNG keyed on (seed, warp, pc, occurrence).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
from dataclasses import dataclass, field

from .annotator import ENCODING
from .energy import (
    OFF_TO_ON,
    ON_TO_OFF,
    ON_TO_SLEEP,
    SLEEP_TO_ON,
    EnergyLedger,
    PowerParams,
)
from .gasm import (
    OFF,
    ON,
    SLEEP,
    Instruction,
    MemRegOperand,
    Program,
    Register,
    SharedIndexedOperand,
    SharedOperand,
    accessed_registers,
    encodable_slots,
    register_defs,
    register_uses,
    serialize_program,
)

MODES = ("baseline", "sleepreg", "greener")
SCHEDULERS = ("lrr", "gto")
DECODE_QUEUE_DEPTH = 2

_LATENCY_CLASSES = ("alu", "compare", "control")


class SimulationError(RuntimeError):
    pass


class SimulationInvariantError(AssertionError):
    """A hard model invariant was violated during simulation."""


@dataclass
class SimConfig:
    warps: int = 8
    registers_per_thread: int = 16
    mode: str = "baseline"
    runtime_opt: bool = False
    scheduler: str = "lrr"
    wake_sleep_cycles: int = 1
    wake_off_cycles: int = 2
    clock_hz: float = 732e6
    opcode_latency: dict[str, int] = field(
        default_factory=lambda: {"alu": 4, "compare": 1, "control": 1}
    )
    mem_latency: int = 100
    p_on: float = 1.0
    p_sleep: float = 0.2
    p_off: float = 0.02
    e_sleep_transition: float = 0.0633e-9
    e_off_transition: float = 0.198e-9
    seed: int = 0
    branch_taken: dict[str, int] = field(default_factory=dict)
    max_cycles: int = 1_000_000

    def validate(self) -> None:
        if self.mode not in MODES:
            raise SimulationError(f"unknown mode {self.mode!r}")
        if self.scheduler not in SCHEDULERS:
            raise SimulationError(f"unknown scheduler {self.scheduler!r}")
        if not (self.wake_off_cycles >= self.wake_sleep_cycles >= 0):
            raise SimulationError("need wake_off_cycles >= wake_sleep_cycles >= 0")
        if self.warps < 1:
            raise SimulationError("need at least one warp")
        if self.registers_per_thread < 1:
            raise SimulationError("need at least one register per thread")
        for key, value in self.opcode_latency.items():
            if key not in _LATENCY_CLASSES:
                raise SimulationError(f"unknown opcode class {key!r}")
            if value < 1:
                raise SimulationError(f"latency for {key!r} must be >= 1")
        if self.mem_latency < 1:
            raise SimulationError("mem_latency must be >= 1")
        if self.max_cycles < 1:
            raise SimulationError("max_cycles must be >= 1")
        for label, trips in self.branch_taken.items():
            if trips < 0:
                raise SimulationError(f"branch_taken[{label!r}] must be >= 0")
        self.power()  # PowerParams validates the power ordering

    def power(self) -> PowerParams:
        return PowerParams(
            p_on=self.p_on,
            p_sleep=self.p_sleep,
            p_off=self.p_off,
            e_sleep_transition=self.e_sleep_transition,
            e_off_transition=self.e_off_transition,
            clock_hz=self.clock_hz,
        )

    def replace(self, **kwargs) -> "SimConfig":
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SimulationError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        merged = dict(data)
        if "opcode_latency" in merged:
            defaults = {"alu": 4, "compare": 1, "control": 1}
            defaults.update(merged["opcode_latency"])
            merged["opcode_latency"] = defaults
        return cls(**merged)


def latency_class(ins: Instruction) -> str:
    if ins.opcode in ("ld", "st"):
        return "mem"
    for op in ins.destinations + ins.sources:
        if isinstance(op, (MemRegOperand, SharedOperand, SharedIndexedOperand)):
            return "mem"
    if ins.is_control or ins.opcode in ("ssy", "nop"):
        return "control"
    if ins.opcode in ("set", "setp"):
        return "compare"
    return "alu"


def scheduler_pick(
    policy: str,
    ready: list[int],
    last_issued: int | None,
    warp_count: int,
) -> int | None:
    """Select the warp to issue this cycle, or None when nothing is ready.

    LRR rotates starting after the last issued warp; GTO sticks with the
    last issued warp while it stays ready, else takes the oldest ready
    warp by id.
    """
    if not ready:
        return None
    ready_set = set(ready)
    if policy == "lrr":
        start = 0 if last_issued is None else (last_issued + 1) % warp_count
        for k in range(warp_count):
            w = (start + k) % warp_count
            if w in ready_set:
                return w
        return None
    if policy == "gto":
        if last_issued is not None and last_issued in ready_set:
            return last_issued
        return min(ready_set)
    raise SimulationError(f"unknown scheduler {policy!r}")


@dataclass
class RegisterFileModel:
    """Per-warp register power states plus in-progress wake-ups."""

    state: dict[tuple[int, Register], str]
    wake_ready: dict[tuple[int, Register], int]
    allocated: frozenset[Register]
    physical: tuple[Register, ...]

    def accessible(self, warp: int, r: Register, cycle: int) -> bool:
        key = (warp, r)
        return self.state[key] == ON and self.wake_ready.get(key, 0) <= cycle


def initial_register_states(
    config: SimConfig, allocated: set[Register]
) -> RegisterFileModel:
    """Initial power states per mode.

    baseline keeps the whole file ON; sleepreg starts allocated registers
    ON and gates the rest OFF; greener starts everything OFF — allocated
    registers hold no live data before their first write, which pays the
    OFF wake latency instead.
    """
    general = {Register("general", i) for i in range(config.registers_per_thread)}
    physical = tuple(sorted(general | allocated))
    states: dict[tuple[int, Register], str] = {}
    for w in range(config.warps):
        for r in physical:
            if config.mode == "baseline":
                states[(w, r)] = ON
            elif config.mode == "sleepreg":
                states[(w, r)] = ON if r in allocated else OFF
            else:
                states[(w, r)] = OFF
    return RegisterFileModel(states, {}, frozenset(allocated), physical)


@dataclass
class Scoreboard:
    """Registers reserved by issued, incomplete instructions, per warp.

    Sources and destinations are both reserved so that reads are ordered
    against the power-state changes that follow them (RAR and WAR matter,
    not just RAW/WAW).
    """

    reserved: dict[int, set[Register]]

    def conflict(self, warp: int, regs: list[Register]) -> bool:
        hot = self.reserved[warp]
        return any(r in hot for r in regs)

    def reserve(self, warp: int, regs: list[Register]) -> None:
        hot = self.reserved[warp]
        for r in regs:
            if r in hot:
                raise SimulationInvariantError(
                    f"register {r} double-reserved in warp {warp}"
                )
            hot.add(r)

    def release(self, warp: int, regs) -> None:
        self.reserved[warp].difference_update(regs)


@dataclass
class LookupTable:
    """Per-warp record of decoded, not-yet-written-back instructions."""

    entries: dict[int, list[tuple[int, int, frozenset[Register]]]] = field(
        default_factory=dict
    )  # warp -> [(decode seq, pc, accessed registers)]

    def insert(self, warp: int, seq: int, pc: int, regs: frozenset[Register]) -> None:
        self.entries.setdefault(warp, []).append((seq, pc, regs))

    def remove(self, warp: int, seq: int) -> None:
        rows = self.entries.get(warp, [])
        self.entries[warp] = [e for e in rows if e[0] != seq]

    def pending_access(self, warp: int, pc: int, r: Register) -> bool:
        """True when a different-pc instruction of the warp references r."""
        return any(
            entry_pc != pc and r in regs
            for _, entry_pc, regs in self.entries.get(warp, [])
        )


@dataclass
class TraceEvent:
    cycle: int
    warp: int
    event: str
    reg: str
    detail: str

    def csv_row(self) -> str:
        return f"{self.cycle},{self.warp},{self.event},{self.reg},{self.detail}"


def trace_csv(events: list[TraceEvent]) -> str:
    lines = ["cycle,warp,event,reg,detail"]
    lines.extend(ev.csv_row() for ev in events)
    return "\n".join(lines) + "\n"


@dataclass
class SimResult:
    mode: str
    scheduler: str
    seed: int
    cycles: int
    completion_cycles: dict[int, int]
    ledger: EnergyLedger
    counters: dict
    trace: list[TraceEvent]
    program_sha256: str
    physical_registers: tuple[str, ...] = ()

    def report(self) -> dict:
        snap = self.ledger.snapshot()
        return {
            "mode": self.mode,
            "scheduler": self.scheduler,
            "seed": self.seed,
            "cycles": self.cycles,
            "per_warp_cycles": {str(w): c for w, c in sorted(self.completion_cycles.items())},
            "leakage_nj": snap["leakage_nj"],
            "transition_nj": snap["transition_nj"],
            "total_nj": snap["total_nj"],
            "transitions": snap["transitions"],
            "state_cycles": snap["state_cycles"],
            "wake_events": dict(self.counters["wake_events"]),
            "runtime_opt_overrides": self.counters["runtime_opt_overrides"],
            "stalls": {
                "scoreboard": self.counters["scoreboard_stalls"],
                "wake": self.counters["wake_stalls"],
                "idle_cycles": self.counters["idle_cycles"],
            },
            "instructions_issued": self.counters["instructions_issued"],
            "program_sha256": self.program_sha256,
        }

    def report_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2) + "\n"

    def trace_csv(self) -> str:
        return trace_csv(self.trace)


@dataclass
class _WarpState:
    id: int
    pc: int = 0
    queue: list = field(default_factory=list)  # decoded [(seq, Instruction)]
    in_flight: list = field(default_factory=list)
    finished: bool = False
    fetch_blocked: bool = False  # branch decoded, outcome pending
    fetch_stopped: bool = False  # exit decoded


@dataclass
class _InFlight:
    seq: int
    ins: Instruction
    read_cycle: int
    wb_cycle: int


class Simulation:
    def __init__(self, program: Program, config: SimConfig):
        config.validate()
        self.program = program
        self.config = config
        self._validate_program()
        allocated = set()
        for ins in program.instructions:
            allocated.update(accessed_registers(ins))
        self.regfile = initial_register_states(config, allocated)
        self.file_size = len(self.regfile.physical) * config.warps
        self.warps = [_WarpState(w) for w in range(config.warps)]
        self.scoreboard = Scoreboard({w: set() for w in range(config.warps)})
        self.lookup = LookupTable()
        self.ledger = EnergyLedger(config.power())
        self.counters = {
            "wake_events": {SLEEP_TO_ON: 0, OFF_TO_ON: 0},
            "runtime_opt_overrides": 0,
            "scoreboard_stalls": 0,
            "wake_stalls": 0,
            "idle_cycles": 0,
            "instructions_issued": 0,
            "legality_checks": 0,
        }
        self.trace: list[TraceEvent] = []
        self.cycle = 0
        self.decode_seq = 0
        self.last_issued: int | None = None
        self.branch_counts: dict[tuple[int, int], int] = {}
        self.completion: dict[int, int] = {}

    # -- validation ------------------------------------------------------

    def _validate_program(self) -> None:
        for ins in self.program.instructions:
            for r in accessed_registers(ins):
                if r.kind == "general" and r.index >= self.config.registers_per_thread:
                    raise SimulationError(
                        f"register {r} exceeds the {self.config.registers_per_thread}"
                        f"-registers-per-thread bound (instruction {ins.id})"
                    )
            if self.config.mode == "greener" and not ins.is_control:
                slots = encodable_slots(ins)
                if slots and (
                    ins.power_list is None or len(ins.power_list) != len(slots)
                ):
                    raise SimulationError(
                        f"greener mode needs an annotated program; instruction "
                        f"{ins.id} ({ins.opcode}) has no usable power list"
                    )

    # -- tracing and invariants -------------------------------------------

    def _emit(self, warp: int, event: str, reg: str, detail: str) -> None:
        self.trace.append(TraceEvent(self.cycle, warp, event, reg, detail))

    def _assert_access_legal(self, warp: int, r: Register, what: str) -> None:
        self.counters["legality_checks"] += 1
        if not self.regfile.accessible(warp, r, self.cycle):
            raise SimulationInvariantError(
                f"{what} of {r} in warp {warp} at cycle {self.cycle} while "
                f"state={self.regfile.state[(warp, r)]}"
            )

    # -- register state machinery ------------------------------------------

    def _begin_wake(self, warp: int, r: Register, pc: int) -> None:
        key = (warp, r)
        old = self.regfile.state[key]
        assert old in (SLEEP, OFF)
        kind = SLEEP_TO_ON if old == SLEEP else OFF_TO_ON
        latency = (
            self.config.wake_sleep_cycles
            if old == SLEEP
            else self.config.wake_off_cycles
        )
        self.ledger.record_transition(kind)
        self.counters["wake_events"][kind] += 1
        # The ledger charges the wake window as ON cycles: the cell is
        # powering up and consuming power while not yet accessible.
        self.regfile.state[key] = ON
        self.regfile.wake_ready[key] = self.cycle + latency
        self._emit(warp, "wake_begin", str(r), f"pc={pc};kind={kind};latency={latency}")
        if latency == 0:
            self._emit(warp, "wake_end", str(r), f"pc={pc}")
            del self.regfile.wake_ready[key]

    def _apply_post_access_state(
        self, warp: int, ins: Instruction, r: Register, phase: str
    ) -> None:
        """Set a register's state after it was read or written by ins."""
        mode = self.config.mode
        if mode == "baseline":
            return
        if mode == "sleepreg":
            target = SLEEP
        else:
            slots = encodable_slots(ins)
            if r in slots:
                target = ins.power_list[slots.index(r)]
            else:
                target = ENCODING.default_state_for_unencoded
        if target == ON:
            return
        key = (warp, r)
        assert self.regfile.state[key] == ON
        if self.config.runtime_opt and self.lookup.pending_access(warp, ins.id, r):
            self.counters["runtime_opt_overrides"] += 1
            return
        self.regfile.state[key] = target
        self.ledger.record_transition(ON_TO_SLEEP if target == SLEEP else ON_TO_OFF)
        self._emit(
            warp, "state_change", str(r), f"pc={ins.id};ON->{target};phase={phase}"
        )
        if self.config.runtime_opt and self.lookup.pending_access(warp, ins.id, r):
            raise SimulationInvariantError(
                f"{r} moved to {target} with a pending same-warp access in the pipeline"
            )

    # -- per-cycle phases ----------------------------------------------------

    def _complete_wakes(self) -> None:
        due = [key for key, ready in self.regfile.wake_ready.items() if ready <= self.cycle]
        for key in sorted(due, key=lambda k: (k[0], k[1])):
            warp, r = key
            self._emit(warp, "wake_end", str(r), "")
            del self.regfile.wake_ready[key]

    def _fetch_decode(self) -> None:
        for warp in self.warps:
            if warp.finished or warp.fetch_blocked or warp.fetch_stopped:
                continue
            if len(warp.queue) >= DECODE_QUEUE_DEPTH:
                continue
            if warp.pc >= len(self.program.instructions):
                raise SimulationError(
                    f"warp {warp.id} fell off the program at pc {warp.pc}"
                )
            ins = self.program.instructions[warp.pc]
            seq = self.decode_seq
            self.decode_seq += 1
            warp.queue.append((seq, ins))
            self.lookup.insert(
                warp.id, seq, ins.id, frozenset(accessed_registers(ins))
            )
            occupancy = len(self.lookup.entries[warp.id])
            if occupancy != len(warp.queue) + len(warp.in_flight):
                raise SimulationInvariantError(
                    f"lookup table holds {occupancy} entries for warp {warp.id}, "
                    f"pipeline holds {len(warp.queue) + len(warp.in_flight)}"
                )
            if ins.is_branch:
                warp.fetch_blocked = True
            elif ins.is_exit:
                warp.fetch_stopped = True
            else:
                warp.pc += 1

    def _branch_outcome(self, warp: int, ins: Instruction) -> bool:
        if ins.guard is None:
            return True
        label = ins.branch_target()
        key = (warp, ins.id)
        count = self.branch_counts.get(key, 0)
        self.branch_counts[key] = count + 1
        trips = self.config.branch_taken.get(label)
        if trips is not None:
            return count % (trips + 1) < trips
        stream = random.Random(
            self.config.seed * 1_000_003 + warp * 9_176 + ins.id * 131 + count
        )
        return stream.random() < 0.5

    def _writebacks(self) -> None:
        for warp in self.warps:
            done = [rec for rec in warp.in_flight if rec.wb_cycle == self.cycle]
            for rec in done:
                ins = rec.ins
                defs = register_defs(ins)
                for r in defs:
                    self._assert_access_legal(warp.id, r, "write")
                    self._emit(warp.id, "write", str(r), f"pc={ins.id}")
                    self._apply_post_access_state(warp.id, ins, r, "writeback")
                self.scoreboard.release(warp.id, defs)
                self.lookup.remove(warp.id, rec.seq)
                warp.in_flight.remove(rec)
                if ins.is_exit:
                    warp.finished = True
                    self.completion[warp.id] = self.cycle
                elif ins.is_branch:
                    taken = self._branch_outcome(warp.id, ins)
                    warp.pc = (
                        self.program.labels[ins.branch_target()]
                        if taken
                        else ins.id + 1
                    )
                    warp.fetch_blocked = False

    def _reads(self) -> None:
        for warp in self.warps:
            for rec in warp.in_flight:
                if rec.read_cycle != self.cycle:
                    continue
                ins = rec.ins
                uses = register_uses(ins)
                defs = set(register_defs(ins))
                for r in uses:
                    self._assert_access_legal(warp.id, r, "read")
                    self._emit(warp.id, "read", str(r), f"pc={ins.id}")
                for r in uses:
                    # Registers that are also written keep their state
                    # until writeback: the later pipeline event wins.
                    if r not in defs:
                        self._apply_post_access_state(warp.id, ins, r, "read")
                self.scoreboard.release(warp.id, [r for r in uses if r not in defs])

    def _schedule_and_issue(self) -> None:
        ready = []
        for warp in self.warps:
            if warp.finished or not warp.queue:
                continue
            seq, ins = warp.queue[0]
            regs = accessed_registers(ins)
            if self.scoreboard.conflict(warp.id, regs):
                self.counters["scoreboard_stalls"] += 1
                self._emit(warp.id, "stall_scoreboard", "", f"pc={ins.id}")
                continue
            if ins.is_exit and warp.in_flight:
                # exit drains the pipeline so the warp cannot complete
                # before its own writebacks.
                self.counters["scoreboard_stalls"] += 1
                self._emit(warp.id, "stall_scoreboard", "", f"pc={ins.id};drain")
                continue
            for r in regs:
                key = (warp.id, r)
                if self.regfile.state[key] != ON:
                    self._begin_wake(warp.id, r, ins.id)
            if all(self.regfile.accessible(warp.id, r, self.cycle) for r in regs):
                ready.append(warp.id)
            else:
                self.counters["wake_stalls"] += 1
                self._emit(warp.id, "stall_wake", "", f"pc={ins.id}")

        pick = scheduler_pick(
            self.config.scheduler, ready, self.last_issued, self.config.warps
        )
        if pick is None:
            self.counters["idle_cycles"] += 1
            return
        warp = self.warps[pick]
        seq, ins = warp.queue.pop(0)
        self.scoreboard.reserve(warp.id, accessed_registers(ins))
        lat_class = latency_class(ins)
        latency = (
            self.config.mem_latency
            if lat_class == "mem"
            else self.config.opcode_latency[lat_class]
        )
        warp.in_flight.append(
            _InFlight(seq, ins, self.cycle + 1, self.cycle + latency + 2)
        )
        self.counters["instructions_issued"] += 1
        self._emit(warp.id, "issue", "", f"pc={ins.id}")
        self.last_issued = pick

    def _accrue(self) -> None:
        census = {ON: 0, SLEEP: 0, OFF: 0}
        for state in self.regfile.state.values():
            census[state] += 1
        self.ledger.accrue_cycle(census, self.file_size)

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimResult:
        if not self.program.instructions:
            for warp in self.warps:
                warp.finished = True
                self.completion[warp.id] = 0
        while not all(w.finished for w in self.warps):
            self.cycle += 1
            if self.cycle > self.config.max_cycles:
                raise SimulationError(
                    f"exceeded {self.config.max_cycles} cycles; "
                    "runaway loop or unreachable exit"
                )
            self._complete_wakes()
            self._fetch_decode()
            self._writebacks()
            self._reads()
            self._schedule_and_issue()
            self._accrue()
        return SimResult(
            mode=self.config.mode,
            scheduler=self.config.scheduler,
            seed=self.config.seed,
            cycles=self.cycle,
            completion_cycles=dict(sorted(self.completion.items())),
            ledger=self.ledger,
            counters=self.counters,
            trace=self.trace,
            program_sha256=hashlib.sha256(
                serialize_program(self.program).encode()
            ).hexdigest(),
            physical_registers=tuple(str(r) for r in self.regfile.physical),
        )


def simulate(program: Program, config: SimConfig) -> SimResult:
    """Run every warp of the program to exit and return the result."""
    return Simulation(program, config).run()
