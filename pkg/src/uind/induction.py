"""Operator, set and sequence induction over the reference machine.

An operator is a program read as a conditional distribution: on question
``q`` it must emit ``k * w`` bits, which are taken as ``k`` unsigned w-bit
weights (MSB first) and normalized. Scores are exact rationals.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .coding import encode_set
from .enumeration import (
    EnumBudget,
    algorithmic_probability,
    code_lengths,
    log2_fraction,
    map_shards,
    programs_of_length,
)
from .machine import LOOP, OUT, READ, Program, run


class InductionError(Exception):
    pass


class EmptyEnsemble(InductionError):
    """No valid operator exists within the budget."""


class NoOperatorApplies(InductionError):
    """Every operator in the ensemble fails on the query question."""


class ZeroDenominator(InductionError):
    pass


class ZeroMass(InductionError):
    pass


class DatasetFormatError(ValueError):
    def __init__(self, msg, path=None, line=None):
        where = f"{path}:{line}: " if path is not None else ""
        super().__init__(where + msg)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class QADataset:
    pairs: tuple[tuple[str, int], ...]
    k: int
    w: int = 4

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(q), int(a)) for q, a in self.pairs))
        if self.k < 1 or self.w < 1:
            raise ValueError("alphabet size k and weight width w must be >= 1")
        if not self.pairs:
            raise ValueError("a dataset needs at least one pair")
        for q, a in self.pairs:
            if not 0 <= a < self.k:
                raise ValueError(f"answer {a} outside alphabet of size {self.k}")
            if q.strip("01"):
                raise ValueError(f"question {q!r} is not a bit string")

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def questions(self) -> tuple[str, ...]:
        """Distinct questions in order of first appearance."""
        return tuple(dict.fromkeys(q for q, _ in self.pairs))

    def to_text(self) -> str:
        lines = [f"k={self.k} w={self.w}"]
        lines += [f"{q}\t{a}" for q, a in self.pairs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path=None) -> "QADataset":
        lines = text.splitlines()
        if not lines:
            raise DatasetFormatError("empty dataset file", path, 1)
        header = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
        try:
            k = int(header["k"])
            w = int(header.get("w", 4))
        except (KeyError, ValueError):
            raise DatasetFormatError("header must read 'k=<int> w=<int>'", path, 1) from None
        pairs = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0].strip("01") or not parts[1].strip().isdigit():
                raise DatasetFormatError(f"expected 'bits<TAB>answer', got {line!r}", path, lineno)
            a = int(parts[1])
            if a >= k:
                raise DatasetFormatError(f"answer {a} outside alphabet k={k}", path, lineno)
            pairs.append((parts[0], a))
        if not pairs:
            raise DatasetFormatError("dataset has no pairs", path, len(lines))
        return cls(tuple(pairs), k, w)


@dataclass(frozen=True)
class Operator:
    program: Program
    cpdf_table: tuple[tuple[Fraction, ...], ...]
    questions: tuple[str, ...] = field(repr=False)
    psi: Fraction = Fraction(0)

    @property
    def code_len(self) -> int:
        return self.program.code_len

    def cpdf(self, q: str) -> tuple[Fraction, ...]:
        return self.cpdf_table[self.questions.index(q)]

    def neg_log2_psi(self) -> float:
        return -log2_fraction(self.psi)


@dataclass(frozen=True)
class OperatorEnsemble:
    operators: tuple[Operator, ...]
    dataset: QADataset
    budget: EnumBudget
    programs_evaluated: int = 0

    @property
    def Psi(self) -> Fraction:
        return sum((op.psi for op in self.operators), Fraction(0))

    def __len__(self):
        return len(self.operators)

    def rescaled(self, c) -> "OperatorEnsemble":
        """Copy with every psi multiplied by ``c`` (used for invariance checks)."""
        ops = tuple(Operator(o.program, o.cpdf_table, o.questions, o.psi * c) for o in self.operators)
        return OperatorEnsemble(ops, self.dataset, self.budget, self.programs_evaluated)


def weights_from_bits(bits: str, k: int, w: int) -> tuple[int, ...]:
    return tuple(int(bits[i * w:(i + 1) * w], 2) for i in range(k))


def cpdf_row(p: Program, q: str, k: int, w: int, step_budget: int) -> tuple[Fraction, ...] | None:
    """Distribution the program assigns on question ``q``; None if invalid there."""
    out = run(p, q, step_budget, k * w).output
    if len(out) < k * w:
        return None
    weights = weights_from_bits(out, k, w)
    total = sum(weights)
    if total == 0:
        return None
    return tuple(Fraction(x, total) for x in weights)


def _can_emit(p: Program, nbits: int) -> bool:
    """Static check: a loop-free program emits at most one bit per OUT."""
    ops = p.ops
    if OUT not in ops:
        return False
    return LOOP in ops or ops.count(OUT) >= nbits


@functools.lru_cache(maxsize=200_000)
def _input_free_row(p: Program, k: int, w: int, step_budget: int):
    return cpdf_row(p, "", k, w, step_budget)


def _table(p: Program, questions: Sequence[str], k: int, w: int, step_budget: int):
    if not _can_emit(p, k * w):
        return None
    if READ not in p.ops:
        row = _input_free_row(p, k, w, step_budget)
        return None if row is None else (row,) * len(questions)
    rows = []
    for q in questions:
        row = cpdf_row(p, q, k, w, step_budget)
        if row is None:
            return None
        rows.append(row)
    return tuple(rows)


def _psi(code_len: int, table, questions: Sequence[str], pairs) -> Fraction:
    index = {q: i for i, q in enumerate(questions)}
    num, den = 1, 1 << code_len
    for q, a in pairs:
        prob = table[index[q]][a]
        num *= prob.numerator
        den *= prob.denominator
    return Fraction(num, den)


def eval_operator(p: Program, D: QADataset, step_budget: int) -> Operator | None:
    """Score ``p`` as an operator on ``D``; None when it is invalid on any question."""
    questions = D.questions
    table = _table(p, questions, D.k, D.w, step_budget)
    if table is None:
        return None
    return Operator(p, table, questions, _psi(p.code_len, table, questions, D.pairs))


def _operator_shard(args):
    code_len, questions, k, w, step_budget = args
    found = []
    for idx, p in enumerate(programs_of_length(code_len)):
        table = _table(p, questions, k, w, step_budget)
        if table is not None:
            found.append((idx, table))
    return found


def find_operators(D: QADataset, budget: EnumBudget, jobs: int = 1) -> OperatorEnsemble:
    """Evaluate every enumerated program as an operator on ``D``.

    Programs producing an identical table on the dataset questions are
    deduplicated in favour of the canonical-order-first, hence shortest, one.
    """
    questions = D.questions
    lens = list(code_lengths(budget.max_code_len))
    shards = map_shards(_operator_shard,
                        [(n, questions, D.k, D.w, budget.step_budget) for n in lens], jobs)
    seen = set()
    operators = []
    evaluated = 0
    for n, found in zip(lens, shards):
        progs = programs_of_length(n)
        evaluated += len(progs)
        for idx, table in found:
            if table in seen:
                continue
            seen.add(table)
            operators.append(Operator(progs[idx], table, questions, _psi(n, table, questions, D.pairs)))
    if not operators:
        raise EmptyEnsemble(f"no valid operator with code_len <= {budget.max_code_len}")
    return OperatorEnsemble(tuple(operators), D, budget, evaluated)


def predict(ens: OperatorEnsemble, q: str) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Mixture prediction on question ``q``: (raw masses, normalized distribution).

    Operators that fail on ``q`` contribute nothing.
    """
    k, w = ens.dataset.k, ens.dataset.w
    raw = [Fraction(0)] * k
    applied = False
    for op in ens.operators:
        if q in op.questions:
            row = op.cpdf(q)
        else:
            row = cpdf_row(op.program, q, k, w, ens.budget.step_budget)
            if row is None:
                continue
        applied = True
        for a in range(k):
            raw[a] += op.psi * row[a]
    total = sum(raw)
    if not applied or total == 0:
        raise NoOperatorApplies(f"no operator is valid on question {q!r}")
    return tuple(raw), tuple(r / total for r in raw)


def set_induction(D: Iterable[str], d_new: str, budget: EnumBudget, *, jobs: int = 1) -> Fraction:
    """Ratio P(enc(D + {d_new})) / P(enc(D)) of set-encoding probabilities."""
    base = set(D)
    enc_old = encode_set(base)
    enc_new = encode_set(base | {d_new})
    limit = max(budget.output_limit, len(enc_new))
    b = EnumBudget(budget.max_code_len, budget.step_budget, limit)
    den = algorithmic_probability(enc_old, b, jobs=jobs).value
    if den == 0:
        raise ZeroDenominator(f"P(enc(D)) is 0 at code_len <= {budget.max_code_len}")
    if enc_new == enc_old:
        return Fraction(1)
    return algorithmic_probability(enc_new, b, jobs=jobs).value / den


def sequence_predict(x: str, budget: EnumBudget, *, jobs: int = 1) -> Fraction:
    """Probability that the next bit after ``x`` is 1."""
    b = budget if budget.output_limit > len(x) else EnumBudget(
        budget.max_code_len, budget.step_budget, len(x) + 1)
    p0 = algorithmic_probability(x + "0", b, jobs=jobs).value
    p1 = algorithmic_probability(x + "1", b, jobs=jobs).value
    if p0 + p1 == 0:
        raise ZeroMass(f"no program extends {x!r} within budget")
    return p1 / (p0 + p1)


def two_part_length(op: Operator, pairs) -> float:
    """code_len + sum of -log2 O(a|q): the entropy form of psi."""
    index = {q: i for i, q in enumerate(op.questions)}
    total = float(op.code_len)
    for q, a in pairs:
        prob = op.cpdf_table[index[q]][a]
        if prob == 0:
            return math.inf
        total -= log2_fraction(prob)
    return total


def psi_identity_residual(op: Operator, pairs) -> float:
    """|-log2 psi - two-part length|; both sides are infinite when psi is 0."""
    lhs = op.neg_log2_psi() if op.psi > 0 else math.inf
    rhs = two_part_length(op, pairs)
    if math.isinf(lhs) and math.isinf(rhs):
        return 0.0
    return abs(lhs - rhs)
