"""GASM assembly dialect: parsing, serialization, and operand classification.

GASM is a small GPU assembly language whose instructions may carry a
trailing power-state list (ON/SLEEP/OFF tokens after the operands), one
token per encodable register slot.  Instructions are terminated by ``;``
and may carry a leading ``label:`` and a ``@$pN.cond`` guard.  Comments
run from ``#`` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Power states, ordered from most to least leakage under any valid config.
ON = "ON"
SLEEP = "SLEEP"
OFF = "OFF"
POWER_STATES = (ON, SLEEP, OFF)

REGISTER_KINDS = ("general", "predicate", "offset", "output")
_KIND_PREFIX = {"general": "r", "predicate": "p", "offset": "ofs", "output": "o"}
_PREFIX_KIND = {v: k for k, v in _KIND_PREFIX.items()}

BRANCH_OPCODE = "bra"
EXIT_OPCODE = "exit"
# ssy marks a reconvergence point; we keep its address operand for
# round-tripping but it reads/writes no registers and never branches.
NOOP_OPCODES = ("ssy", "nop")


class GasmError(ValueError):
    """Parse or validation failure, with source position when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class Register:
    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in REGISTER_KINDS:
            raise GasmError(f"unknown register kind {self.kind!r}")
        if self.index < 0:
            raise GasmError(f"negative register index {self.index}")

    def __str__(self) -> str:
        return f"${_KIND_PREFIX[self.kind]}{self.index}"


def reg(text: str) -> Register:
    """Build a Register from its textual form, e.g. ``$r8`` or ``r8``."""
    t = text.lstrip("$")
    for prefix in ("ofs", "r", "p", "o"):  # ofs before o
        if t.startswith(prefix) and t[len(prefix):].isdigit():
            return Register(_PREFIX_KIND[prefix], int(t[len(prefix):]))
    raise GasmError(f"malformed register token {text!r}")


@dataclass(frozen=True)
class RegOperand:
    reg: Register


@dataclass(frozen=True)
class ImmOperand:
    value: int
    text: str  # original token, preserved for faithful round-trips


@dataclass(frozen=True)
class MemRegOperand:
    base: Register
    offset: int = 0
    offset_text: str | None = None


@dataclass(frozen=True)
class SharedOperand:
    offset: int
    text: str


@dataclass(frozen=True)
class SharedIndexedOperand:
    base: Register
    offset: int = 0
    offset_text: str | None = None


@dataclass(frozen=True)
class LabelOperand:
    name: str


Operand = (
    RegOperand
    | ImmOperand
    | MemRegOperand
    | SharedOperand
    | SharedIndexedOperand
    | LabelOperand
)


@dataclass(frozen=True)
class Instruction:
    id: int
    opcode: str
    options: tuple[str, ...] = ()
    destinations: tuple[Operand, ...] = ()
    sources: tuple[Operand, ...] = ()
    guard: tuple[Register, str] | None = None
    label: str | None = None
    power_list: tuple[str, ...] | None = None
    line: int = field(default=0, compare=False)

    @property
    def is_branch(self) -> bool:
        return self.opcode == BRANCH_OPCODE

    @property
    def is_exit(self) -> bool:
        return self.opcode == EXIT_OPCODE

    @property
    def is_control(self) -> bool:
        return self.is_branch or self.is_exit

    def branch_target(self) -> str:
        for op in self.sources:
            if isinstance(op, LabelOperand):
                return op.name
        raise GasmError(f"instruction {self.id} has no branch target")

    def __str__(self) -> str:
        return format_instruction(self, with_power=True)


@dataclass
class Program:
    instructions: tuple[Instruction, ...]
    labels: dict[str, int]

    def __len__(self) -> int:
        return len(self.instructions)


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<reg>\$(?:ofs|r|p|o)\d+)
      | (?P<num>0[xX][0-9a-fA-F]+|\d+)
      | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>[@.,;:/\[\]+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            if text[pos] == "$":
                raise GasmError(f"malformed register token at {text[pos:pos+6]!r}", line, col)
            raise GasmError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok_text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, tok_text, line, pos - line_start + 1))
        newlines = tok_text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + tok_text.rindex("\n") + 1
        pos = m.end()
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, offset: int = 0) -> _Token | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at(self, kind: str, text: str | None = None, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == kind and (text is None or t.text == text)

    def take(self) -> _Token:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else _Token("", "", 1, 1)
            raise GasmError("unexpected end of input", last.line, last.col)
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Token:
        t = self.peek()
        if t is None or t.kind != kind or (text is not None and t.text != text):
            got = repr(t.text) if t else "end of input"
            want = repr(text) if text else kind
            where = t or (self.toks[-1] if self.toks else _Token("", "", 1, 1))
            raise GasmError(f"expected {want}, got {got}", where.line, where.col)
        return self.take()

    # -- item grammar --------------------------------------------------

    def parse_register(self) -> Register:
        return reg(self.expect("reg").text)

    def parse_imm(self) -> ImmOperand:
        t = self.expect("num")
        return ImmOperand(int(t.text, 0), t.text)

    def parse_item(self):
        """One comma-separated item: an operand or a power-state token."""
        t = self.peek()
        if t is None:
            raise GasmError("unexpected end of input")
        if t.kind == "reg":
            first = self.parse_register()
            if self.at("punct", "/"):
                self.take()
                second = self.parse_register()
                return ("dual", RegOperand(first), RegOperand(second))
            return ("operand", RegOperand(first))
        if t.kind == "num":
            return ("operand", self.parse_imm())
        if t.kind == "punct" and t.text == "[":
            self.take()
            base = self.parse_register()
            offset, offset_text = 0, None
            if self.at("punct", "+"):
                self.take()
                imm = self.parse_imm()
                offset, offset_text = imm.value, imm.text
            self.expect("punct", "]")
            return ("operand", MemRegOperand(base, offset, offset_text))
        if t.kind == "id" and t.text == "s" and self.at("punct", "[", offset=1):
            self.take()
            self.take()
            if self.at("reg"):
                base = self.parse_register()
                offset, offset_text = 0, None
                if self.at("punct", "+"):
                    self.take()
                    imm = self.parse_imm()
                    offset, offset_text = imm.value, imm.text
                self.expect("punct", "]")
                return ("operand", SharedIndexedOperand(base, offset, offset_text))
            imm = self.parse_imm()
            self.expect("punct", "]")
            return ("operand", SharedOperand(imm.value, imm.text))
        if t.kind == "id":
            self.take()
            if t.text in POWER_STATES:
                return ("power", t.text)
            return ("operand", LabelOperand(t.text))
        raise GasmError(f"unexpected token {t.text!r}", t.line, t.col)

    # -- instruction ---------------------------------------------------

    def parse_instruction(self, instr_id: int) -> Instruction:
        start = self.peek()
        assert start is not None
        label = None
        if self.at("id") and self.at("punct", ":", offset=1) and start.text not in POWER_STATES:
            label = self.take().text
            self.take()

        guard = None
        if self.at("punct", "@"):
            self.take()
            greg = self.parse_register()
            self.expect("punct", ".")
            cond = self.expect("id").text
            guard = (greg, cond)

        opcode_tok = self.expect("id")
        opcode = opcode_tok.text
        options = []
        while self.at("punct", "."):
            self.take()
            options.append(self.expect("id").text)

        items = []
        if not self.at("punct", ";"):
            while True:
                items.append(self.parse_item())
                if self.at("punct", ","):
                    self.take()
                    continue
                break
        self.expect("punct", ";")

        power: list[str] = []
        operands = []
        for item in items:
            if item[0] == "power":
                power.append(item[1])
            else:
                if power:
                    raise GasmError(
                        "operand after power-state token", opcode_tok.line, opcode_tok.col
                    )
                operands.append(item)

        destinations: tuple[Operand, ...] = ()
        sources: tuple[Operand, ...] = ()
        if opcode == BRANCH_OPCODE:
            if len(operands) != 1 or not isinstance(operands[0][1], LabelOperand):
                raise GasmError("bra expects a single label", opcode_tok.line, opcode_tok.col)
            sources = (operands[0][1],)
        elif opcode == EXIT_OPCODE:
            if operands:
                raise GasmError("exit takes no operands", opcode_tok.line, opcode_tok.col)
        elif opcode in NOOP_OPCODES:
            sources = tuple(op for item in operands for op in item[1:])
        elif operands:
            first = operands[0]
            destinations = tuple(first[1:])  # dual carries two operands
            for item in operands[1:]:
                if item[0] == "dual":
                    raise GasmError(
                        "dual register only allowed as destination",
                        opcode_tok.line,
                        opcode_tok.col,
                    )
            sources = tuple(item[1] for item in operands[1:])

        return Instruction(
            id=instr_id,
            opcode=opcode,
            options=tuple(options),
            destinations=destinations,
            sources=sources,
            guard=guard,
            label=label,
            power_list=tuple(power) if power else None,
            line=opcode_tok.line,
        )


def parse_program(text: str) -> Program:
    """Parse GASM source into a Program.

    Raises GasmError on syntax errors, malformed registers, unresolved
    branch labels, duplicate labels, and power-list length mismatches.
    """
    parser = _Parser(_tokenize(text))
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    while parser.peek() is not None:
        ins = parser.parse_instruction(len(instructions))
        if ins.label is not None:
            if ins.label in labels:
                raise GasmError(f"duplicate label {ins.label!r}", ins.line)
            labels[ins.label] = ins.id
        instructions.append(ins)

    program = Program(tuple(instructions), labels)
    for ins in instructions:
        if ins.is_branch and ins.branch_target() not in labels:
            raise GasmError(f"unresolved label {ins.branch_target()!r}", ins.line)
        if ins.power_list is not None:
            if ins.is_control:
                raise GasmError(
                    f"{ins.opcode} instructions carry no power list", ins.line
                )
            want = len(encodable_slots(ins))
            if len(ins.power_list) != want:
                raise GasmError(
                    f"power list has {len(ins.power_list)} states, "
                    f"instruction encodes {want} register slots",
                    ins.line,
                )
    return program


# ---------------------------------------------------------------------------
# Serializer

def _fmt_operand(op: Operand) -> str:
    if isinstance(op, RegOperand):
        return str(op.reg)
    if isinstance(op, ImmOperand):
        return op.text
    if isinstance(op, MemRegOperand):
        if op.offset_text is not None:
            return f"[{op.base}+{op.offset_text}]"
        return f"[{op.base}]"
    if isinstance(op, SharedOperand):
        return f"s[{op.text}]"
    if isinstance(op, SharedIndexedOperand):
        if op.offset_text is not None:
            return f"s[{op.base}+{op.offset_text}]"
        return f"s[{op.base}]"
    if isinstance(op, LabelOperand):
        return op.name
    raise TypeError(f"unknown operand {op!r}")


def format_instruction(ins: Instruction, with_power: bool = True) -> str:
    parts = []
    if ins.label is not None:
        parts.append(f"{ins.label}:")
    if ins.guard is not None:
        parts.append(f"@{ins.guard[0]}.{ins.guard[1]}")
    head = ins.opcode + "".join("." + o for o in ins.options)
    fields: list[str] = []
    if ins.destinations:
        if len(ins.destinations) > 1:
            fields.append("/".join(_fmt_operand(d) for d in ins.destinations))
        else:
            fields.append(_fmt_operand(ins.destinations[0]))
    fields.extend(_fmt_operand(s) for s in ins.sources)
    if with_power and ins.power_list:
        fields.extend(ins.power_list)
    parts.append(head + (" " + ", ".join(fields) if fields else ""))
    return " ".join(parts) + ";"


def serialize_program(program: Program, with_power: bool = True) -> str:
    """Render a Program back to GASM text, one instruction per line.

    With ``with_power=False`` the power-state lists are dropped; parsing
    the output yields the input program stripped of its annotations.
    """
    lines = [format_instruction(i, with_power) for i in program.instructions]
    return "\n".join(lines) + ("\n" if lines else "")


def strip_power(program: Program) -> Program:
    """Copy of the program with all power-state lists removed."""
    stripped = tuple(
        Instruction(
            id=i.id,
            opcode=i.opcode,
            options=i.options,
            destinations=i.destinations,
            sources=i.sources,
            guard=i.guard,
            label=i.label,
            power_list=None,
            line=i.line,
        )
        for i in program.instructions
    )
    return Program(stripped, dict(program.labels))


# ---------------------------------------------------------------------------
# Register classification

def _dedupe(regs: list[Register]) -> list[Register]:
    seen = set()
    out = []
    for r in regs:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


def register_uses(ins: Instruction) -> list[Register]:
    """Registers read by the instruction, in order: guard predicate,
    memory base registers (destination and source operands), then plain
    register sources.  Duplicates collapse to their first occurrence."""
    uses: list[Register] = []
    if ins.guard is not None:
        uses.append(ins.guard[0])
    for op in ins.destinations + ins.sources:
        if isinstance(op, (MemRegOperand, SharedIndexedOperand)):
            uses.append(op.base)
    for op in ins.sources:
        if isinstance(op, RegOperand):
            uses.append(op.reg)
    return _dedupe(uses)


def register_defs(ins: Instruction) -> list[Register]:
    """Registers written by the instruction: plain register destinations.
    Memory destinations define no register."""
    return _dedupe(
        [op.reg for op in ins.destinations if isinstance(op, RegOperand)]
    )


def accessed_registers(ins: Instruction) -> list[Register]:
    """All registers the instruction touches (reads or writes)."""
    return _dedupe(register_uses(ins) + register_defs(ins))


def encodable_slots(ins: Instruction) -> list[Register]:
    """Register slots that receive an encoded power state, in encoding
    order: the first plain-register destination, then the first two
    plain-register sources.  Guard predicates, memory base registers,
    immediates, and destinations beyond the first are never encoded.
    Branch and exit instructions have no slots."""
    if ins.is_control:
        return []
    slots: list[Register] = []
    dests = [op.reg for op in ins.destinations if isinstance(op, RegOperand)]
    if dests:
        slots.append(dests[0])
    srcs = [op.reg for op in ins.sources if isinstance(op, RegOperand)]
    slots.extend(srcs[:2])
    return slots
