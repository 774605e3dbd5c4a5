"""Prefix-free reference stack machine.

Programs are strings of 3-bit opcodes (most significant bit first) terminated
by the single HALT opcode ``111``. Because HALT ends decoding, no valid code is
a proper prefix of another, so the prior weights ``2**-code_len`` form a
semimeasure.

==========  =====  ===========================================================
mnemonic    code   effect
==========  =====  ===========================================================
ZERO        000    push 0
INC         001    top += 1
READ        010    push the next input bit
DUP         011    duplicate top
OUT         100    pop top, emit ``top % 2``
LOOP        101    peek top; if 0 jump past the matching ENDLOOP
ENDLOOP     110    jump back to the matching LOOP
HALT        111    stop
==========  =====  ===========================================================

Every executed instruction costs one step. Popping or peeking an empty stack
and reading past the end of the input are faults; a faulted run keeps the
output it emitted before the fault.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

ZERO, INC, READ, DUP, OUT, LOOP, ENDLOOP, HALT = range(8)
MNEMONICS = ("ZERO", "INC", "READ", "DUP", "OUT", "LOOP", "ENDLOOP", "HALT")
OPCODE_BITS = 3
_CODES = tuple(format(op, "03b") for op in range(8))


class DecodeError(ValueError):
    pass


class IncompleteProgram(DecodeError):
    """The bit stream ended before a HALT opcode."""


class UnmatchedBracket(DecodeError):
    """LOOP/ENDLOOP pairing failed."""


class Status(enum.Enum):
    HALTED = "Halted"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    OUTPUT_LIMIT = "OutputLimitReached"
    FAULT = "Fault"


class FaultKind(enum.Enum):
    EMPTY_STACK_POP = "EmptyStackPop"
    INPUT_EXHAUSTED = "InputExhausted"


@dataclass(frozen=True)
class Program:
    """A decoded program.

    ``jumps[i]`` holds the index of the matching bracket for LOOP/ENDLOOP
    instructions and -1 elsewhere.
    """

    code: str
    ops: tuple[int, ...]
    jumps: tuple[int, ...] = field(repr=False, compare=False)

    @property
    def code_len(self) -> int:
        return len(self.code)

    @property
    def bracket_map(self) -> dict[int, int]:
        return {i: j for i, j in enumerate(self.jumps) if j >= 0}

    @property
    def mnemonics(self) -> list[str]:
        return [MNEMONICS[op] for op in self.ops]

    def __str__(self) -> str:
        return self.code


@dataclass(frozen=True)
class RunResult:
    status: Status
    output: str
    steps_used: int
    fault_kind: FaultKind | None = None

    @property
    def halted(self) -> bool:
        return self.status is Status.HALTED


def _match_brackets(ops) -> tuple[int, ...]:
    jumps = [-1] * len(ops)
    open_loops = []
    for i, op in enumerate(ops):
        if op == LOOP:
            open_loops.append(i)
        elif op == ENDLOOP:
            if not open_loops:
                raise UnmatchedBracket(f"ENDLOOP at instruction {i} has no LOOP")
            j = open_loops.pop()
            jumps[i] = j
            jumps[j] = i
    if open_loops:
        raise UnmatchedBracket(f"LOOP at instruction {open_loops[-1]} has no ENDLOOP")
    return tuple(jumps)


def decode_program(bits: str) -> Program:
    """Decode the program at the start of ``bits``.

    Opcodes are consumed up to and including the first HALT; anything after
    it is not part of the program.
    """
    ops = []
    pos = 0
    while True:
        chunk = bits[pos:pos + OPCODE_BITS]
        if len(chunk) < OPCODE_BITS:
            raise IncompleteProgram(f"no HALT within {len(bits)} bits")
        try:
            op = int(chunk, 2)
        except ValueError:
            raise DecodeError(f"non-binary character in {chunk!r}") from None
        ops.append(op)
        pos += OPCODE_BITS
        if op == HALT:
            break
    return Program(bits[:pos], tuple(ops), _match_brackets(ops))


def assemble(ops) -> Program:
    """Build a program from opcodes or mnemonics; HALT is appended if missing."""
    ops = [MNEMONICS.index(op) if isinstance(op, str) else int(op) for op in ops]
    if not ops or ops[-1] != HALT:
        ops.append(HALT)
    return decode_program("".join(_CODES[op] for op in ops))


def program_from_body(body: tuple[int, ...]) -> Program:
    """Program for a tuple of non-HALT opcodes, or raise UnmatchedBracket."""
    ops = body + (HALT,)
    return Program("".join(_CODES[op] for op in ops), ops, _match_brackets(ops))


def canonical_order_key(p: Program) -> tuple[int, str]:
    """Shorter code first, then lexicographic on the code bits."""
    return (len(p.code), p.code)


def run(p: Program, input_bits: str = "", step_budget: int = 1000,
        output_limit: int = 64) -> RunResult:
    """Execute ``p`` on ``input_bits`` under a step budget and output limit.

    The run stops at HALT, when the budget is spent, once ``output_limit``
    bits have been emitted, or at a fault. An OUT reached with the output
    already at the limit stops the run without consuming a step.
    """
    if step_budget < 1:
        raise ValueError("step_budget must be >= 1")
    if output_limit < 0:
        raise ValueError("output_limit must be >= 0")
    ops = p.ops
    jumps = p.jumps
    n_in = len(input_bits)
    stack: list[int] = []
    out: list[str] = []
    pc = 0
    steps = 0
    in_pos = 0
    fault = None
    status = Status.BUDGET_EXHAUSTED
    while steps < step_budget:
        op = ops[pc]
        if op == OUT:
            if len(out) >= output_limit:
                status = Status.OUTPUT_LIMIT
                break
            steps += 1
            if not stack:
                fault = FaultKind.EMPTY_STACK_POP
                break
            out.append("1" if stack.pop() & 1 else "0")
            pc += 1
            if len(out) >= output_limit:
                status = Status.OUTPUT_LIMIT
                break
            continue
        steps += 1
        if op == LOOP:
            if not stack:
                fault = FaultKind.EMPTY_STACK_POP
                break
            pc = pc + 1 if stack[-1] else jumps[pc] + 1
        elif op == ENDLOOP:
            pc = jumps[pc]
        elif op == INC:
            if not stack:
                fault = FaultKind.EMPTY_STACK_POP
                break
            stack[-1] += 1
            pc += 1
        elif op == DUP:
            if not stack:
                fault = FaultKind.EMPTY_STACK_POP
                break
            stack.append(stack[-1])
            pc += 1
        elif op == ZERO:
            stack.append(0)
            pc += 1
        elif op == READ:
            if in_pos >= n_in:
                fault = FaultKind.INPUT_EXHAUSTED
                break
            stack.append(1 if input_bits[in_pos] == "1" else 0)
            in_pos += 1
            pc += 1
        else:
            status = Status.HALTED
            break
    if fault is not None:
        status = Status.FAULT
    return RunResult(status, "".join(out), steps, fault)
