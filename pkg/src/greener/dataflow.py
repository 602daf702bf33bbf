"""Backward dataflow analyses over the CFG: register liveness, saturating
next-access distance, and the power-state classification built on them.

The distance value at a point is the largest, over all control-flow paths
leaving the point, of the index of the first instruction that accesses
the register (1-based).  Values saturate: anything beyond the threshold W
collapses to infinity, as does every path that reaches Exit untouched.
Both analyses are solved to a least fixpoint by worklist iteration and
have independent path-enumeration oracles used by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cfg import ENTRY, EXIT, Cfg, Node, Point, build_cfg, program_points
from .gasm import (
    OFF,
    ON,
    SLEEP,
    Program,
    Register,
    accessed_registers,
    register_defs,
    register_uses,
)

INF = math.inf

Distance = int | float

DEFAULT_THRESHOLD = 3


def inc(x: Distance, threshold: int) -> Distance:
    """Saturating increment on the chain 1 < 2 < ... < W < INF."""
    if x == INF or x >= threshold:
        return INF
    return x + 1


def classify(live: bool, sleepoff: bool) -> str:
    """Power state of a register given its liveness and whether its next
    access lies beyond the distance window.

    Near reuse keeps the register ON.  A far next access allows SLEEP when
    the stored value is still needed, and OFF when it is dead.
    """
    if sleepoff:
        return SLEEP if live else OFF
    return ON


def sleep_off(dist: dict[tuple[Point, Register], Distance]) -> dict[tuple[Point, Register], bool]:
    """True exactly where the next-access distance saturated to INF."""
    return {key: value == INF for key, value in dist.items()}


def program_registers(program: Program) -> list[Register]:
    seen: dict[Register, None] = {}
    for ins in program.instructions:
        for r in accessed_registers(ins):
            seen.setdefault(r)
    return sorted(seen)


def liveness(cfg: Cfg) -> dict[tuple[Point, Register], bool]:
    """Classic backward may-liveness at every IN/OUT point.

    live(OUT(S)) is the union over successors of live(IN); Exit seeds the
    empty set.  live(IN(S)) = uses(S) ∪ (live(OUT(S)) − defs(S)).
    """
    program = cfg.program
    uses = {i.id: frozenset(register_uses(i)) for i in program.instructions}
    defs = {i.id: frozenset(register_defs(i)) for i in program.instructions}
    live_in: dict[int, frozenset[Register]] = {i: frozenset() for i in cfg.instr_nodes}
    live_out: dict[int, frozenset[Register]] = {i: frozenset() for i in cfg.instr_nodes}

    work = list(cfg.instr_nodes)
    in_work = set(work)
    while work:
        node = work.pop()
        in_work.discard(node)
        out = frozenset().union(
            *(live_in[s] for s in cfg.succ[node] if s != EXIT)
        )
        new_in = uses[node] | (out - defs[node])
        live_out[node] = out
        if new_in != live_in[node]:
            live_in[node] = new_in
            for p in cfg.pred[node]:
                if p != ENTRY and p not in in_work:
                    in_work.add(p)
                    work.append(p)

    regs = program_registers(program)
    result: dict[tuple[Point, Register], bool] = {}
    for i in cfg.instr_nodes:
        for r in regs:
            result[(("in", i), r)] = r in live_in[i]
            result[(("out", i), r)] = r in live_out[i]
    return result


def distance(cfg: Cfg, threshold: int) -> dict[tuple[Point, Register], Distance]:
    """Saturating next-access distance at every IN/OUT point.

    Solved per register as the least fixpoint from bottom = 1 under the
    max-merge at joins; cycles that never touch the register climb the
    chain and saturate to INF, matching arbitrarily long loop paths.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    program = cfg.program
    accesses = {i.id: frozenset(accessed_registers(i)) for i in program.instructions}
    regs = program_registers(program)
    result: dict[tuple[Point, Register], Distance] = {}

    for r in regs:
        din: dict[int, Distance] = {i: 1 for i in cfg.instr_nodes}
        dout: dict[int, Distance] = {i: 1 for i in cfg.instr_nodes}
        work = list(cfg.instr_nodes)
        in_work = set(work)
        while work:
            node = work.pop()
            in_work.discard(node)
            out: Distance = 1
            for s in cfg.succ[node]:
                out = max(out, INF if s == EXIT else din[s])
            dout[node] = out
            new_in: Distance = 1 if r in accesses[node] else inc(out, threshold)
            if new_in != din[node]:
                din[node] = new_in
                for p in cfg.pred[node]:
                    if p != ENTRY and p not in in_work:
                        in_work.add(p)
                        work.append(p)
        for i in cfg.instr_nodes:
            result[(("in", i), r)] = din[i]
            result[(("out", i), r)] = dout[i]
    return result


@dataclass
class AnalysisResult:
    program: Program
    cfg: Cfg
    threshold: int
    live: dict[tuple[Point, Register], bool]
    dist: dict[tuple[Point, Register], Distance]
    power: dict[tuple[Point, Register], str]

    def registers(self) -> list[Register]:
        return program_registers(self.program)

    def facts_csv(self) -> str:
        """Per-point facts as CSV rows ``point,reg,live,dist,power``."""
        lines = ["point,reg,live,dist,power"]
        for point in program_points(self.cfg):
            for r in self.registers():
                d = self.dist[(point, r)]
                lines.append(
                    ",".join(
                        (
                            f"{point[0]}:{point[1]}",
                            str(r),
                            "true" if self.live[(point, r)] else "false",
                            "inf" if d == INF else str(int(d)),
                            self.power.get((point, r), ""),
                        )
                    )
                )
        return "\n".join(lines) + "\n"


def analyze(program: Program, threshold: int = DEFAULT_THRESHOLD) -> AnalysisResult:
    """Run liveness and distance and classify every accessed register at
    the OUT point of the instruction that accesses it."""
    cfg = build_cfg(program)
    return analyze_cfg(cfg, threshold)


def analyze_cfg(cfg: Cfg, threshold: int = DEFAULT_THRESHOLD) -> AnalysisResult:
    """Like analyze(), but over an existing (possibly synthetic) CFG."""
    live = liveness(cfg)
    dist = distance(cfg, threshold)
    power: dict[tuple[Point, Register], str] = {}
    for ins in cfg.program.instructions:
        point = ("out", ins.id)
        for r in accessed_registers(ins):
            power[(point, r)] = classify(live[(point, r)], dist[(point, r)] == INF)
    return AnalysisResult(cfg.program, cfg, threshold, live, dist, power)


# ---------------------------------------------------------------------------
# Brute-force oracles (path enumeration; for verification on small graphs)

def _access_sets(cfg: Cfg) -> dict[int, frozenset[Register]]:
    cached = getattr(cfg, "_oracle_access_sets", None)
    if cached is None:
        cached = {
            i.id: frozenset(accessed_registers(i)) for i in cfg.program.instructions
        }
        cfg._oracle_access_sets = cached
    return cached


def _use_def_sets(cfg: Cfg):
    cached = getattr(cfg, "_oracle_use_def_sets", None)
    if cached is None:
        cached = (
            {i.id: frozenset(register_uses(i)) for i in cfg.program.instructions},
            {i.id: frozenset(register_defs(i)) for i in cfg.program.instructions},
        )
        cfg._oracle_use_def_sets = cached
    return cached


def distance_oracle(cfg: Cfg, threshold: int, point: Point, r: Register) -> Distance:
    """Enumerate all paths from the point, depth-limited by the threshold.

    Returns the maximum over maximal paths of the 1-based index of the
    first access to the register; INF as soon as any path runs past the
    window or reaches Exit without touching it.
    """
    accesses = _access_sets(cfg)
    kind, sid = point
    best = 0
    # Stack entries are (node, index-of-node-in-path); INF short-circuits.
    stack: list[tuple[int, int]] = []

    def push_successors(node: int, depth: int) -> bool:
        for t in cfg.succ[node]:
            if t == EXIT:
                return True  # path ends with no access
            stack.append((t, depth + 1))
        return False

    if kind == "in":
        stack.append((sid, 1))
    else:
        if push_successors(sid, 0):
            return INF
    while stack:
        node, depth = stack.pop()
        if r in accesses[node]:
            best = max(best, depth)
            continue
        if depth >= threshold:
            return INF  # some continuation exceeds the window
        if push_successors(node, depth):
            return INF
    assert best > 0, "every maximal path must access or saturate"
    return best


def liveness_oracle(cfg: Cfg, point: Point, r: Register) -> bool:
    """Search for a definition-free path from the point to a use of the
    register.  Matches liveness() at every point of a valid CFG."""
    uses, defs = _use_def_sets(cfg)
    kind, sid = point
    seen: set[int] = set()
    stack: list[int] = []  # nodes whose IN point we are exploring

    def enter(node: Node) -> bool:
        """Schedule node; returns True if it is an immediate use."""
        if node == EXIT or node in seen:
            return False
        if r in uses[node]:
            return True
        seen.add(node)
        if r not in defs[node]:
            stack.append(node)
        return False

    if kind == "in":
        if enter(sid):
            return True
    else:
        # From OUT(S), S's own uses are behind the point; explore successors.
        for t in cfg.succ[sid]:
            if enter(t):
                return True
    while stack:
        node = stack.pop()
        for t in cfg.succ[node]:
            if enter(t):
                return True
    return False
