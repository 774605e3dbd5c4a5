import itertools

import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_decode, naive_run
from uind.enumeration import programs_of_length
from uind.machine import (
    DUP, ENDLOOP, HALT, INC, LOOP, OUT, READ, ZERO,
    FaultKind, IncompleteProgram, Status, UnmatchedBracket,
    assemble, canonical_order_key, decode_program, run,
)


def test_decode_halt():
    p = decode_program("111")
    assert p.ops == (HALT,) and p.code_len == 3


def test_decode_zero_out_halt():
    p = decode_program("000100111")
    assert p.mnemonics == ["ZERO", "OUT", "HALT"]
    assert p.code_len == 9


def test_decode_incomplete():
    with pytest.raises(IncompleteProgram):
        decode_program("000")
    with pytest.raises(IncompleteProgram):
        decode_program("0001")


def test_decode_unmatched():
    with pytest.raises(UnmatchedBracket):
        decode_program("101111")
    with pytest.raises(UnmatchedBracket):
        decode_program("110111")


def test_trailing_bits_not_consumed():
    p = decode_program("000100111" + "0101")
    assert p.code == "000100111"


def test_bracket_map():
    p = assemble([ZERO, LOOP, INC, ENDLOOP])
    assert p.bracket_map == {1: 3, 3: 1}


def test_run_halt():
    r = run(assemble([]), "", 10, 8)
    assert (r.status, r.output, r.steps_used) == (Status.HALTED, "", 1)


def test_run_zero_out():
    r = run(assemble([ZERO, OUT]), "", 10, 8)
    assert (r.status, r.output, r.steps_used) == (Status.HALTED, "0", 3)


def test_run_empty_pop():
    r = run(assemble([OUT]), "", 10, 8)
    assert r.status is Status.FAULT
    assert r.fault_kind is FaultKind.EMPTY_STACK_POP
    assert (r.output, r.steps_used) == ("", 1)


def test_run_input_exhausted():
    r = run(assemble([READ, OUT, READ]), "1", 10, 8)
    assert r.status is Status.FAULT and r.fault_kind is FaultKind.INPUT_EXHAUSTED
    assert r.output == "1"


def test_run_loop_output_limit():
    # hand trace: ZERO INC leaves 1 on the stack; the loop body pushes 1 and emits it forever
    p = assemble([ZERO, INC, LOOP, ZERO, INC, OUT, ENDLOOP])
    r = run(p, "", 100, 5)
    assert r.status is Status.OUTPUT_LIMIT and r.output == "11111"


def test_loop_skips_on_zero():
    r = run(assemble([ZERO, LOOP, INC, OUT, ENDLOOP, OUT]), "", 50, 8)
    assert r.status is Status.HALTED and r.output == "0"


def test_budget_exhausted():
    p = assemble([ZERO, INC, LOOP, ENDLOOP])
    r = run(p, "", 7, 8)
    assert r.status is Status.BUDGET_EXHAUSTED and r.steps_used == 7


def test_dup_parity():
    r = run(assemble([ZERO, INC, DUP, OUT, INC, OUT]), "", 20, 8)
    assert r.output == "10"


def test_canonical_order():
    a, b, c = assemble([]), assemble([ZERO]), assemble([INC])
    assert canonical_order_key(a) < canonical_order_key(b) < canonical_order_key(c)
    assert canonical_order_key(b) == canonical_order_key(assemble([ZERO]))


def test_bad_budget():
    with pytest.raises(ValueError):
        run(assemble([]), "", 0, 8)


def test_prefix_free_upto_15():
    codes = {p.code for n in range(3, 16, 3) for p in programs_of_length(n)}
    for code in codes:
        for cut in range(3, len(code), 3):
            assert code[:cut] not in codes


@pytest.mark.parametrize("k", range(5))
def test_count_matches_brute_decode(k):
    syntactic = 0
    valid = 0
    for body in itertools.product(range(7), repeat=k):
        syntactic += 1
        bits = "".join(format(op, "03b") for op in body) + "111"
        try:
            decode_program(bits)
            valid += 1
        except UnmatchedBracket:
            pass
    assert syntactic == 7 ** k
    assert valid == len(programs_of_length(3 * (k + 1)))


# -- properties against the independent interpreter --------------------------

bodies = st.lists(st.integers(0, 6), max_size=10).filter(
    lambda b: naive_decode("".join(format(o, "03b") for o in b) + "111") is not None)


@settings(max_examples=300, deadline=None)
@given(bodies, st.text("01", max_size=6), st.integers(1, 60), st.integers(0, 6))
def test_matches_reference_interpreter(body, inp, budget, limit):
    p = assemble(body)
    r = run(p, inp, budget, limit)
    status, out, steps = naive_run(p.mnemonics, inp, budget, limit)
    assert (r.status.value, r.output, r.steps_used) == (status, out, steps)
    assert r.steps_used <= budget and len(r.output) <= limit


@settings(max_examples=200, deadline=None)
@given(bodies, st.integers(1, 40), st.integers(1, 40))
def test_budget_monotone_output(body, b1, extra):
    p = assemble(body)
    short = run(p, "", b1, 16).output
    longer = run(p, "", b1 + extra, 16).output
    assert longer.startswith(short)


@settings(max_examples=100, deadline=None)
@given(bodies, st.text("01", max_size=4))
def test_deterministic(body, inp):
    p = assemble(body)
    assert run(p, inp, 50, 8) == run(p, inp, 50, 8)
