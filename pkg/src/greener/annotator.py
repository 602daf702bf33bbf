"""Inject computed power states into instructions.

Each non-control instruction gets one power token per encodable slot
(first register destination, first two register sources).  Registers the
instruction accesses outside those slots — extra destinations, memory
base registers, guard predicates — carry no token; the simulator drops
them to the default unencoded state after the access.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataflow import AnalysisResult
from .gasm import (
    SLEEP,
    Instruction,
    Program,
    Register,
    accessed_registers,
    encodable_slots,
)


@dataclass(frozen=True)
class EncodingPolicy:
    max_dest_slots: int = 1
    max_src_slots: int = 2
    default_state_for_unencoded: str = SLEEP


ENCODING = EncodingPolicy()


class AnnotationError(RuntimeError):
    """Analysis facts missing for an encodable slot."""


def unencoded_accesses(ins: Instruction) -> list[Register]:
    """Registers the instruction accesses that receive no encoded state."""
    slots = set(encodable_slots(ins))
    return [r for r in accessed_registers(ins) if r not in slots]


def annotate(program: Program, analysis: AnalysisResult) -> Program:
    """Return a copy of the program with power lists filled in from the
    analysis.  Branch and exit instructions are left untouched."""
    annotated = []
    for ins in program.instructions:
        if ins.is_control:
            annotated.append(ins)
            continue
        slots = encodable_slots(ins)
        states = []
        for r in slots:
            key = (("out", ins.id), r)
            if key not in analysis.power:
                raise AnnotationError(
                    f"no power fact for {r} at instruction {ins.id}"
                )
            states.append(analysis.power[key])
        annotated.append(
            Instruction(
                id=ins.id,
                opcode=ins.opcode,
                options=ins.options,
                destinations=ins.destinations,
                sources=ins.sources,
                guard=ins.guard,
                label=ins.label,
                power_list=tuple(states) if states else None,
                line=ins.line,
            )
        )
    return Program(tuple(annotated), dict(program.labels))
