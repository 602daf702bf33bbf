import pytest

from greener import parse_program, strip_power

# The worked-example snippet: an outer loop B4..B9 whose inner loop B6
# streams products, annotated at window W=7.  The epilogue past B9's
# backward branch redefines r8/r0 once the window has lapsed and then
# exits, closing the outer loop the way the surrounding kernel does.
LOOP_KERNEL_ANNOTATED = """\
B4: set.le.s32.s32 $p2/$o127, $r8, $r0, ON, SLEEP, ON;
ssy 0x00000110;
mov.u32 $r1, $r0, SLEEP, ON;
@$p2.ne bra B8;
B5: shl.u32 $r10, $r0, 0x00000002, ON, SLEEP;
mov.u32 $r12, $r124, ON, SLEEP;
add.half.u32 $r11, s[0x0018], $r10, ON, ON;
add.half.u32 $r10, s[0x0020], $r10, ON, ON;
B6: ld.global.u32 $r14, [$r11], ON;
ld.global.u32 $r13, [$r10], ON;
mad.f32 $r12, $r14, $r13, $r12, SLEEP, OFF, OFF;
add.u32 $r1, $r1, 0x00000400, ON, ON;
set.gt.s32.s32 $p2/$o127, $r8, $r1, ON, SLEEP, SLEEP;
add.u32 $r10, $r10, 0x00001000, SLEEP, SLEEP;
add.u32 $r11, $r11, 0x00001000, SLEEP, SLEEP;
@$p2.ne bra B6;
B7: bra B9;
B8: mov.u32 $r12, $r124, ON, SLEEP;
B9: add.u32 $r0, $r0, $r5, ON, ON, SLEEP;
shl.b32 $ofs1, $r9, 0x0, ON, ON;
set.le.s32.s32 $p2/$o127, $r0, $r6, ON, SLEEP, SLEEP;
mov.u32 s[$ofs1+0x0000], $r12, OFF;
add.u32 $r9, $r9, $r7, SLEEP, SLEEP, SLEEP;
@$p2.ne bra B4;
"""

LOOP_KERNEL_EPILOGUE = (
    "B10: mov.u32 $r2, 0x00000000;\n"
    + "mov.u32 $r2, 0x00000000;\n" * 6
    + "mov.u32 $r8, 0x00000000;\n"
    + "mov.u32 $r0, 0x00000000;\n"
    + "exit;\n"
)

LOOP_KERNEL_W = 7

# Divergence fixture: a long-latency producer of r0, one path that reuses
# it immediately (B10) and one that reuses it past the window.  With
# W=7 the analysis marks r0 SLEEP at the producer, which the short path
# then has to correct at run time.
DIVERGE_SRC = """\
S0: ld.global.u32 $r0, [$r2];
@$p0.ne bra B10;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r1, $r1, 0x00000001;
add.u32 $r3, $r0, 0x00000001;
exit;
B10: add.u32 $r4, $r0, 0x00000001;
exit;
"""
DIVERGE_SHORT_PATH_PC = 12  # the B10 add that consumes r0


@pytest.fixture
def loop_kernel_annotated_lines() -> list[str]:
    return LOOP_KERNEL_ANNOTATED.splitlines()


@pytest.fixture
def loop_kernel_text() -> str:
    return LOOP_KERNEL_ANNOTATED + LOOP_KERNEL_EPILOGUE


@pytest.fixture
def loop_kernel_plain(loop_kernel_text):
    """The fixture program with annotations stripped, ready for analyze."""
    return strip_power(parse_program(loop_kernel_text))


@pytest.fixture
def diverge_plain():
    return parse_program(DIVERGE_SRC)
