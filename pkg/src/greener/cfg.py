"""Instruction-granularity control-flow graph with synthetic Entry/Exit.

Nodes are instruction ids (ints) plus the ENTRY and EXIT sentinels.  The
graph is immutable after construction and validated for reachability in
both directions: every instruction must be reachable from Entry and must
be able to reach Exit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .gasm import Program

ENTRY = "ENTRY"
EXIT = "EXIT"

Node = int | str

Point = tuple[str, int]  # ("in", id) or ("out", id)


class CfgError(ValueError):
    pass


def _node_order(n: Node):
    if n == ENTRY:
        return (0, 0)
    if n == EXIT:
        return (2, 0)
    return (1, n)


@dataclass
class Cfg:
    program: Program
    succ: dict[Node, tuple[Node, ...]]
    pred: dict[Node, tuple[Node, ...]]

    @property
    def instr_nodes(self) -> range:
        return range(len(self.program.instructions))

    @classmethod
    def from_successors(cls, program: Program, succ: dict[Node, set[Node]]) -> "Cfg":
        """Build and validate a Cfg from a successor map.

        The predecessor map is derived, so the two are consistent by
        construction.  Tests may call this directly to build synthetic
        graph shapes that no single GASM encoding produces.
        """
        nodes: list[Node] = [ENTRY, *range(len(program.instructions)), EXIT]
        pred: dict[Node, list[Node]] = {n: [] for n in nodes}
        norm_succ: dict[Node, tuple[Node, ...]] = {}
        for n in nodes:
            targets = sorted(succ.get(n, ()), key=_node_order)
            for t in targets:
                if t not in pred:
                    raise CfgError(f"edge {n} -> {t} leaves the node set")
                pred[t].append(n)
            norm_succ[n] = tuple(targets)

        for n in nodes:
            if n != EXIT and not norm_succ[n]:
                raise CfgError(f"node {n} has no successor")
        if norm_succ[EXIT]:
            raise CfgError("Exit must not have successors")

        cfg = cls(program, norm_succ, {n: tuple(pred[n]) for n in nodes})
        cfg._validate_reachability()
        return cfg

    def _validate_reachability(self):
        forward = self._reach(ENTRY, self.succ)
        for i in self.instr_nodes:
            if i not in forward:
                raise CfgError(f"unreachable instruction {i}")
        backward = self._reach(EXIT, self.pred)
        for i in self.instr_nodes:
            if i not in backward:
                raise CfgError(f"no path from instruction {i} to exit")

    @staticmethod
    def _reach(start: Node, edges: dict[Node, tuple[Node, ...]]) -> set[Node]:
        seen = {start}
        stack = [start]
        while stack:
            n = stack.pop()
            for t in edges[n]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen


def build_cfg(program: Program) -> Cfg:
    """Derive the CFG from instruction opcodes.

    Non-control instructions fall through; an unguarded ``bra`` has only
    its target as successor; a guarded ``bra`` has the target and the
    fallthrough; ``exit`` flows to the Exit node.
    """
    n = len(program.instructions)
    succ: dict[Node, set[Node]] = {ENTRY: {0 if n else EXIT}}
    for ins in program.instructions:
        i = ins.id
        if ins.is_exit:
            succ[i] = {EXIT}
        elif ins.is_branch:
            target = program.labels[ins.branch_target()]
            edges = {target}
            if ins.guard is not None:
                if i + 1 >= n:
                    raise CfgError(f"guarded branch at instruction {i} falls off the program")
                edges.add(i + 1)
            succ[i] = edges
        else:
            if i + 1 >= n:
                raise CfgError(f"control falls off the program after instruction {i}")
            succ[i] = {i + 1}
    return Cfg.from_successors(program, succ)


def program_points(cfg: Cfg) -> list[Point]:
    """The IN and OUT points of every instruction, in id order."""
    points: list[Point] = []
    for i in cfg.instr_nodes:
        points.append(("in", i))
        points.append(("out", i))
    return points


def basic_blocks(cfg: Cfg) -> list[tuple[int, int]]:
    """Maximal straight-line instruction ranges [start, end], inclusive."""
    n = len(cfg.program.instructions)
    if n == 0:
        return []
    leaders = {0}
    for ins in cfg.program.instructions:
        if ins.is_branch:
            leaders.add(cfg.program.labels[ins.branch_target()])
            if ins.id + 1 < n:
                leaders.add(ins.id + 1)
        elif ins.is_exit and ins.id + 1 < n:
            leaders.add(ins.id + 1)
    starts = sorted(leaders)
    blocks = []
    for idx, start in enumerate(starts):
        end = (starts[idx + 1] - 1) if idx + 1 < len(starts) else n - 1
        blocks.append((start, end))
    return blocks


def to_dot(cfg: Cfg) -> str:
    """Block-collapsed DOT rendering of the CFG."""
    blocks = basic_blocks(cfg)
    block_of = {}
    for start, end in blocks:
        for i in range(start, end + 1):
            block_of[i] = start

    def name(node: Node) -> str:
        if node in (ENTRY, EXIT):
            return str(node)
        ins = cfg.program.instructions[block_of[node]]
        return ins.label if ins.label else f"b{block_of[node]}"

    lines = ["digraph cfg {", "  node [shape=box];"]
    for start, end in blocks:
        ins = cfg.program.instructions[start]
        title = ins.label if ins.label else f"b{start}"
        lines.append(f'  "{title}" [label="{title}: {start}..{end}"];')
    edges = set()
    for node, targets in cfg.succ.items():
        if node == EXIT:
            continue
        src = name(node)
        for t in targets:
            # Keep only block-boundary edges; intra-block fallthrough is implied.
            if node not in (ENTRY, EXIT) and t not in (ENTRY, EXIT):
                if block_of[node] == block_of[t] and t == node + 1:
                    continue
            edges.add((src, name(t)))
    for src, dst in sorted(edges):
        lines.append(f'  "{src}" -> "{dst}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
