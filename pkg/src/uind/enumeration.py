"""Program enumeration, algorithmic probability/complexity and Levin search.

Estimates are exact dyadic rationals: every counted program adds
``2**-code_len``, so values are held as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import functools
import hashlib
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

from .machine import ENDLOOP, HALT, LOOP, OPCODE_BITS, Program, RunResult, Status, run

_CODES = tuple(format(op, "03b") for op in range(8))


@dataclass(frozen=True)
class EnumBudget:
    max_code_len: int
    step_budget: int
    output_limit: int = 64

    def __post_init__(self):
        if self.max_code_len <= 0 or self.max_code_len % OPCODE_BITS:
            raise ValueError(f"max_code_len must be a positive multiple of 3, got {self.max_code_len}")
        if self.step_budget <= 0 or self.output_limit <= 0:
            raise ValueError("step_budget and output_limit must be positive")

    def astuple(self) -> tuple[int, int, int]:
        return (self.max_code_len, self.step_budget, self.output_limit)


@dataclass(frozen=True)
class ProbEstimate:
    value: Fraction
    programs_counted: int
    budget: EnumBudget
    counted_digest: bytes = b""

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class ComplexityEstimate:
    h: int | None
    h_star: float | None
    witness: Program | None


class NotFound(Exception):
    """Levin search spent its budget without satisfying the goal."""


# -- program stream ---------------------------------------------------------

def _bodies(k: int) -> Iterator[tuple[int, ...]]:
    """Bracket-balanced opcode bodies of length ``k`` in lexicographic order."""
    body = [0] * k

    def rec(pos: int, depth: int):
        if pos == k:
            if depth == 0:
                yield tuple(body)
            return
        remaining = k - pos - 1
        for op in range(HALT):
            if op == LOOP:
                nd = depth + 1
            elif op == ENDLOOP:
                if depth == 0:
                    continue
                nd = depth - 1
            else:
                nd = depth
            if nd > remaining:
                continue
            body[pos] = op
            yield from rec(pos + 1, nd)

    yield from rec(0, 0)


def _jumps(ops: tuple[int, ...]) -> tuple[int, ...]:
    jumps = [-1] * len(ops)
    stack = []
    for i, op in enumerate(ops):
        if op == LOOP:
            stack.append(i)
        elif op == ENDLOOP:
            j = stack.pop()
            jumps[i], jumps[j] = j, i
    return tuple(jumps)


@functools.lru_cache(maxsize=None)
def programs_of_length(code_len: int) -> tuple[Program, ...]:
    """All valid programs with exactly ``code_len`` bits, canonical order."""
    if code_len < OPCODE_BITS or code_len % OPCODE_BITS:
        return ()
    k = code_len // OPCODE_BITS - 1
    out = []
    for body in _bodies(k):
        ops = body + (HALT,)
        out.append(Program("".join(_CODES[op] for op in ops), ops, _jumps(ops)))
    return tuple(out)


def code_lengths(max_code_len: int) -> range:
    return range(OPCODE_BITS, max_code_len + 1, OPCODE_BITS)


def enumerate_programs(budget: EnumBudget | int) -> Iterator[Program]:
    """Yield every valid program with code_len <= max_code_len in canonical order."""
    max_len = budget.max_code_len if isinstance(budget, EnumBudget) else budget
    for n in code_lengths(max_len):
        yield from programs_of_length(n)


def map_shards(fn: Callable, shards: Sequence, jobs: int = 1) -> list:
    """Apply ``fn`` to each shard and return results in shard order."""
    if jobs <= 1 or len(shards) <= 1:
        return [fn(s) for s in shards]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, shards))


def _run_shard(args) -> tuple[RunResult, ...]:
    code_len, input_bits, step_budget, output_limit = args
    return tuple(run(p, input_bits, step_budget, output_limit) for p in programs_of_length(code_len))


@functools.lru_cache(maxsize=32)
def _run_all(max_code_len: int, input_bits: str, step_budget: int, output_limit: int,
             jobs: int) -> tuple[tuple[Program, RunResult], ...]:
    lens = list(code_lengths(max_code_len))
    shards = map_shards(_run_shard, [(n, input_bits, step_budget, output_limit) for n in lens], jobs)
    return tuple(pair for n, results in zip(lens, shards)
                 for pair in zip(programs_of_length(n), results))


def run_all(budget: EnumBudget, input_bits: str = "", output_limit: int | None = None,
            jobs: int = 1) -> tuple[tuple[Program, RunResult], ...]:
    """Run every enumerated program once; results in canonical order."""
    limit = budget.output_limit if output_limit is None else output_limit
    return _run_all(budget.max_code_len, input_bits, budget.step_budget, limit, max(1, jobs))


def _digest(programs) -> bytes:
    h = hashlib.blake2b(digest_size=32)
    for p in programs:
        h.update(p.code.encode())
        h.update(b",")
    return h.digest()


def dyadic_mass(programs, max_code_len: int) -> Fraction:
    num = sum(1 << (max_code_len - p.code_len) for p in programs)
    return Fraction(num, 1 << max_code_len)


# -- algorithmic probability and complexity ----------------------------------

def algorithmic_probability(x: str, budget: EnumBudget, input_bits: str = "", *,
                            cache: "EnumCache | None" = None, jobs: int = 1) -> ProbEstimate:
    """Budgeted prior mass of programs whose output begins with ``x``.

    A program counts once it has emitted ``len(x)`` bits equal to ``x``,
    whatever happens afterwards (halt, fault or budget exhaustion).
    """
    if budget.output_limit < len(x):
        raise ValueError(f"output_limit {budget.output_limit} < |x| = {len(x)}")
    key = ("prob", x, input_bits)
    if cache is not None:
        hit = cache.get(budget, key)
        if hit is not None:
            return hit
    if x:
        counted = [p for p, r in run_all(budget, input_bits, len(x), jobs) if r.output == x]
    else:
        counted = list(enumerate_programs(budget))
    est = ProbEstimate(dyadic_mass(counted, budget.max_code_len), len(counted), budget,
                       _digest(counted))
    if cache is not None:
        cache.put(budget, key, est)
    return est


def log2_fraction(v: Fraction) -> float:
    return math.log2(v.numerator) - math.log2(v.denominator)


def algorithmic_complexity(x: str, budget: EnumBudget, *, jobs: int = 1) -> ComplexityEstimate:
    """Shortest clean-halting program with output exactly ``x``, plus -log2 P(x).

    Faulted runs never witness; runs are given ``len(x) + 1`` output bits so
    an over-long output is visible.
    """
    witness = None
    for p, r in run_all(budget, "", len(x) + 1, jobs):
        if r.status is Status.HALTED and r.output == x:
            witness = p
            break
    prob_budget = budget if budget.output_limit >= len(x) else EnumBudget(
        budget.max_code_len, budget.step_budget, len(x))
    prob = algorithmic_probability(x, prob_budget, jobs=jobs)
    h_star = -log2_fraction(prob.value) if prob.value > 0 else None
    return ComplexityEstimate(witness.code_len if witness else None, h_star, witness)


# -- Levin search -------------------------------------------------------------

def _levin_phase(args) -> tuple[RunResult, ...]:
    code_len, phase, input_bits, output_limit = args
    steps = 1 << (phase - code_len)
    return tuple(run(p, input_bits, steps, output_limit) for p in programs_of_length(code_len))


def levin_search(goal: Callable[[Program, RunResult], bool], input_bits: str = "",
                 total_budget: int = 10_000, output_limit: int = 64,
                 jobs: int = 1) -> tuple[Program, RunResult]:
    """Phased universal search.

    Phase ``k`` gives each program ``floor(2**k * 2**-code_len)`` steps, re-run
    from scratch, so only programs with ``code_len <= k`` run at all. The
    first goal-satisfying program in canonical order wins. Raises NotFound
    before any run that would push cumulative steps past ``total_budget``.
    """
    if total_budget < 1:
        raise ValueError("total_budget must be >= 1")
    spent = 0
    phase = 0
    while True:
        phase += 1
        lens = [n for n in code_lengths(phase) if n <= phase]
        if not lens:
            continue
        phase_results = map_shards(
            _levin_phase, [(n, phase, input_bits, output_limit) for n in lens], jobs)
        for n, results in zip(lens, phase_results):
            allotted = 1 << (phase - n)
            for p, r in zip(programs_of_length(n), results):
                if spent + allotted > total_budget:
                    raise NotFound(f"no program found within {total_budget} steps (phase {phase})")
                spent += r.steps_used
                if goal(p, r):
                    return p, r


# -- persistent cache ---------------------------------------------------------

CACHE_MAGIC = b"UINDCACHE1"


class CacheError(Exception):
    pass


class VersionMismatch(CacheError):
    pass


class CorruptCache(CacheError):
    pass


def key_digest(key) -> bytes:
    return hashlib.blake2b(repr(key).encode(), digest_size=32).digest()


_REC_HEAD = struct.Struct("<HII32s32sIH")


class EnumCache:
    """Records of (budget, key digest) -> ProbEstimate, persisted as a binary file.

    File layout: ``UINDCACHE1``, u32 record count, then records each prefixed
    by a u32 byte length, then a u64 checksum (blake2b-64 of all prior bytes).
    Integers are little-endian.
    """

    def __init__(self):
        self.records: dict[tuple[tuple[int, int, int], bytes], tuple[bytes, int, int, int]] = {}

    def __len__(self):
        return len(self.records)

    def get(self, budget: EnumBudget, key) -> ProbEstimate | None:
        rec = self.records.get((budget.astuple(), key_digest(key)))
        if rec is None:
            return None
        counted_digest, counted, num, exp = rec
        return ProbEstimate(Fraction(num, 1 << exp), counted, budget, counted_digest)

    def put(self, budget: EnumBudget, key, est: ProbEstimate) -> None:
        den = est.value.denominator
        exp = den.bit_length() - 1
        if den != 1 << exp:
            raise ValueError("cache holds dyadic values only")
        self.records[(budget.astuple(), key_digest(key))] = (
            est.counted_digest.ljust(32, b"\0"), est.programs_counted, est.value.numerator, exp)

    def to_bytes(self) -> bytes:
        body = [CACHE_MAGIC, struct.pack("<I", len(self.records))]
        for (budget, kd), (cd, counted, num, exp) in sorted(self.records.items()):
            num_bytes = num.to_bytes(max(1, (num.bit_length() + 7) // 8), "little")
            rec = _REC_HEAD.pack(*budget, kd, cd, counted, exp) + struct.pack("<I", len(num_bytes)) + num_bytes
            body.append(struct.pack("<I", len(rec)) + rec)
        blob = b"".join(body)
        return blob + hashlib.blake2b(blob, digest_size=8).digest()

    @classmethod
    def from_bytes(cls, data: bytes) -> "EnumCache":
        if not data.startswith(CACHE_MAGIC):
            if data[:9] == CACHE_MAGIC[:9]:
                raise VersionMismatch(f"cache version {data[:len(CACHE_MAGIC)]!r}")
            raise CorruptCache("missing cache header")
        if len(data) < len(CACHE_MAGIC) + 12:
            raise CorruptCache("truncated cache")
        blob, checksum = data[:-8], data[-8:]
        if hashlib.blake2b(blob, digest_size=8).digest() != checksum:
            raise CorruptCache("checksum mismatch")
        cache = cls()
        pos = len(CACHE_MAGIC)
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        try:
            for _ in range(count):
                (size,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                rec = blob[pos:pos + size]
                pos += size
                *budget, kd, cd, counted, exp = _REC_HEAD.unpack_from(rec, 0)
                (nlen,) = struct.unpack_from("<I", rec, _REC_HEAD.size)
                num = int.from_bytes(rec[_REC_HEAD.size + 4:_REC_HEAD.size + 4 + nlen], "little")
                cache.records[(tuple(budget), kd)] = (cd, counted, num, exp)
        except struct.error as exc:
            raise CorruptCache(str(exc)) from None
        if pos != len(blob):
            raise CorruptCache("trailing bytes in cache")
        return cache


def cache_store(cache: EnumCache, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(cache.to_bytes())
    os.replace(tmp, path)


def cache_load(path) -> EnumCache:
    with open(path, "rb") as fh:
        return EnumCache.from_bytes(fh.read())
