import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpus import random_analysis_program
from greener import (
    INF,
    OFF,
    ON,
    SLEEP,
    analyze,
    build_cfg,
    classify,
    distance,
    distance_oracle,
    inc,
    liveness,
    liveness_oracle,
    parse_program,
    sleep_off,
)
from greener.cfg import ENTRY, EXIT, Cfg, program_points
from greener.dataflow import analyze_cfg, program_registers
from greener.gasm import reg


class TestInc:
    @given(st.integers(1, 8), st.integers(1, 8))
    def test_saturation(self, w, k):
        if k < w:
            assert inc(k, w) == k + 1
        else:
            assert inc(k, w) == INF

    def test_at_threshold(self):
        assert inc(7, 7) == INF
        assert inc(INF, 7) == INF
        assert inc(1, 7) == 2


class TestClassify:
    @pytest.mark.parametrize(
        "live,sleepoff,expect",
        [(True, True, SLEEP), (True, False, ON), (False, True, OFF), (False, False, ON)],
    )
    def test_matrix(self, live, sleepoff, expect):
        assert classify(live, sleepoff) == expect


class TestSleepOff:
    def test_true_exactly_at_saturation(self):
        point = ("out", 0)
        r = reg("r1")
        table = sleep_off({(point, r): 2, (point, reg("r2")): INF, (point, reg("r3")): 7})
        assert table[(point, r)] is False
        assert table[(point, reg("r2"))] is True
        assert table[(point, reg("r3"))] is False  # at the window, not past it


class TestLiveness:
    def test_single_move(self):
        cfg = build_cfg(parse_program("mov $r1, $r2;\nexit;"))
        live = liveness(cfg)
        assert live[(("in", 0), reg("r2"))] is True
        assert live[(("out", 0), reg("r1"))] is False

    def test_loop_kernel_r13_dead_after_consumer(self, loop_kernel_plain):
        live = liveness(build_cfg(loop_kernel_plain))
        assert live[(("out", 10), reg("r13"))] is False  # mad consumed it

    def test_mem_base_counts_as_use(self):
        cfg = build_cfg(parse_program("mov $r1, 0x1;\nld.global.u32 $r2, [$r1];\nexit;"))
        live = liveness(cfg)
        assert live[(("out", 0), reg("r1"))] is True


class TestDistance:
    def test_adjacent_access(self):
        prog = parse_program("mov $r1, 0x1;\nadd $r2, $r1, $r1;\nexit;")
        dist = distance(build_cfg(prog), 3)
        assert dist[(("out", 0), reg("r1"))] == 1
        assert dist[(("in", 1), reg("r1"))] == 1

    def test_loop_kernel_r0_and_r8_at_top(self, loop_kernel_plain):
        dist = distance(build_cfg(loop_kernel_plain), 7)
        assert dist[(("out", 0), reg("r0"))] == 2
        assert dist[(("out", 0), reg("r8"))] == INF

    def test_in_point_is_one_iff_accessed(self, loop_kernel_plain):
        cfg = build_cfg(loop_kernel_plain)
        dist = distance(cfg, 7)
        from greener.gasm import accessed_registers

        for ins in loop_kernel_plain.instructions:
            touched = set(accessed_registers(ins))
            for r in program_registers(loop_kernel_plain):
                if r in touched:
                    assert dist[(("in", ins.id), r)] == 1
                else:
                    assert dist[(("in", ins.id), r)] != 1

    def test_loop_without_access_saturates(self):
        prog = parse_program(
            "mov $r1, 0x1;\nL: add $r2, $r2, 0x1;\n@$p0.ne bra L;\nadd $r3, $r1, 0x1;\nexit;"
        )
        dist = distance(build_cfg(prog), 3)
        # r1's reuse sits past a loop that can iterate arbitrarily long
        assert dist[(("out", 0), reg("r1"))] == INF


def _divergence_shape():
    """The divergence example as a literal CFG: the defining node has two
    direct successors, a near reuse (distance 2) and a far one."""
    text = (
        "mov.u32 $r0, 0x1;"      # 0: S0 defines r0
        + "add.u32 $r1, $r1, 0x1;" * 8  # 1..8: S1..S8
        + "add.u32 $r2, $r0, 0x1;"      # 9: S9 uses r0 (far)
        + "mov.u32 $r3, 0x0;"           # 10: S10
        + "add.u32 $r4, $r0, 0x1;"      # 11: S11 uses r0 (near)
        + "exit;"                        # 12
    )
    prog = parse_program(text)
    succ = {ENTRY: {0}, 0: {1, 10}}
    for i in range(1, 9):
        succ[i] = {i + 1}
    succ[9] = {12}
    succ[10] = {11}
    succ[11] = {12}
    succ[12] = {EXIT}
    return Cfg.from_successors(prog, succ)


class TestDivergenceShape:
    def test_max_of_two_and_inf(self):
        cfg = _divergence_shape()
        dist = distance(cfg, 7)
        r0 = reg("r0")
        assert dist[(("in", 10), r0)] == 2   # near side
        assert dist[(("in", 1), r0)] == INF  # far side saturates
        assert dist[(("out", 0), r0)] == INF

    def test_power_is_sleep(self):
        cfg = _divergence_shape()
        result = analyze_cfg(cfg, 7)
        assert result.power[(("out", 0), reg("r0"))] == SLEEP


class TestAnalyze:
    def test_loop_kernel_examples(self, loop_kernel_plain):
        result = analyze(loop_kernel_plain, 7)
        assert result.power[(("out", 10), reg("r13"))] == OFF
        assert result.power[(("out", 13), reg("r10"))] == SLEEP
        assert result.power[(("out", 0), reg("r8"))] == SLEEP
        assert result.power[(("out", 0), reg("r0"))] == ON

    def test_power_defined_exactly_for_accessed(self, loop_kernel_plain):
        from greener.gasm import accessed_registers

        result = analyze(loop_kernel_plain, 7)
        keys = set(result.power)
        expected = {
            (("out", i.id), r)
            for i in loop_kernel_plain.instructions
            for r in accessed_registers(i)
        }
        assert keys == expected

    def test_adjacent_reuse_stays_on_tiny_window(self):
        prog = parse_program("mov $r1, 0x1;\nadd $r2, $r1, $r1;\nexit;")
        result = analyze(prog, 1)
        assert result.power[(("out", 0), reg("r1"))] == ON

    def test_facts_csv_shape(self):
        prog = parse_program("mov $r1, $r2;\nexit;")
        csv = analyze(prog, 3).facts_csv()
        lines = csv.strip().splitlines()
        assert lines[0] == "point,reg,live,dist,power"
        assert "in:0,$r1,false,1," in csv
        assert "out:0,$r1,false,inf,OFF" in csv


class TestOracles:
    def test_straight_line_access_at_three(self):
        prog = parse_program(
            "mov $r9, 0x0;\nmov $r2, 0x0;\nmov $r3, 0x0;\nadd $r4, $r9, 0x1;\nexit;"
        )
        cfg = build_cfg(prog)
        assert distance_oracle(cfg, 7, ("out", 0), reg("r9")) == 3

    def test_diamond_takes_path_maximum(self):
        # two arms reuse the register at different depths; max wins
        prog = parse_program(
            "mov $r1, 0x1;\n"          # 0
            "@$p0.ne bra FAR;\n"       # 1
            "add $r2, $r1, 0x1;\n"     # 2: near use, depth 2 from out(0)
            "exit;\n"                   # 3
            "FAR: mov $r3, 0x0;\n"     # 4
            "mov $r3, 0x0;\n"          # 5
            "mov $r3, 0x0;\n"          # 6
            "add $r2, $r1, 0x1;\n"     # 7: far use, depth 5 from out(0)
            "exit;\n"                   # 8
        )
        cfg = build_cfg(prog)
        assert distance_oracle(cfg, 7, ("out", 0), reg("r1")) == 5
        assert distance(cfg, 7)[(("out", 0), reg("r1"))] == 5

    def test_loop_without_access_is_inf(self):
        prog = parse_program(
            "mov $r1, 0x1;\nL: add $r2, $r2, 0x1;\n@$p0.ne bra L;\nadd $r3, $r1, 0x1;\nexit;"
        )
        cfg = build_cfg(prog)
        assert distance_oracle(cfg, 3, ("out", 0), reg("r1")) == INF

    def test_liveness_oracle_basics(self):
        prog = parse_program("mov $r1, $r2;\nadd $r3, $r1, 0x1;\nexit;")
        cfg = build_cfg(prog)
        assert liveness_oracle(cfg, ("out", 0), reg("r1")) is True
        assert liveness_oracle(cfg, ("out", 1), reg("r1")) is False
        assert liveness_oracle(cfg, ("in", 0), reg("r2")) is True

    def test_oracle_equivalence_sample(self):
        rng = random.Random(1234)
        for _ in range(60):
            prog = random_analysis_program(rng, max_instr=24)
            cfg = build_cfg(prog)
            w = rng.randint(1, 8)
            dist = distance(cfg, w)
            live = liveness(cfg)
            for point in program_points(cfg):
                for r in program_registers(prog):
                    assert dist[(point, r)] == distance_oracle(cfg, w, point, r)
                    assert live[(point, r)] == liveness_oracle(cfg, point, r)


class TestMonotonicityInW:
    def test_finite_distances_survive_larger_windows(self):
        rng = random.Random(77)
        for _ in range(40):
            prog = random_analysis_program(rng, max_instr=20)
            cfg = build_cfg(prog)
            w = rng.randint(1, 6)
            lo = distance(cfg, w)
            hi = distance(cfg, w + rng.randint(1, 3))
            for key, value in lo.items():
                if value != INF:
                    assert hi[key] == value
