"""Reinforcement learning reduced to operator induction.

For a chronology of (sensation, reward, action) triples, every index pair
``1 < i <= j <= n`` becomes a question built from ``history(1..i-1)``,
``a_i``, ``i`` and ``j`` whose answer is the reward accumulated from step
``i`` to ``j``. Actions are chosen by the expected cumulative reward the
induced mixture predicts.

Two field layouts exist. ``action-first`` (default) writes ``a_i`` before the
history; ``history-first`` writes ``history | a_i | i | j``. The machine reads
its input front to back, and with history first no program short enough to
enumerate reaches the action field, so every candidate action gets the same
prediction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .coding import encode_nat, encode_symbol
from .enumeration import EnumBudget
from .environments import CounterRNG, EnvironmentSpec, env_step
from .induction import OperatorEnsemble, QADataset, find_operators, predict

log = logging.getLogger(__name__)

WARMUP = 2
ACTION_FIRST = "action-first"
HISTORY_FIRST = "history-first"
LAYOUTS = (ACTION_FIRST, HISTORY_FIRST)


class ReductionError(Exception):
    pass


class ChronologyTooShort(ReductionError):
    pass


class IndexOutOfRange(ReductionError):
    pass


class ChronologyFormatError(ValueError):
    def __init__(self, msg, path=None, line=None):
        where = f"{path}:{line}: " if path is not None else ""
        super().__init__(where + msg)


@dataclass
class Chronology:
    """Interaction record; ``steps[t - 1]`` is the 1-based step ``t``."""

    n_sensory: int = 1
    n_actions: int = 2
    r_max: int = 1
    steps: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.steps)

    def append(self, s: int, r: int, a: int) -> None:
        if not (0 <= s < self.n_sensory and 0 <= r <= self.r_max and 0 <= a < self.n_actions):
            raise ValueError(f"step ({s}, {r}, {a}) outside the chronology alphabets")
        self.steps.append((s, r, a))

    def prefix(self, m: int) -> "Chronology":
        return Chronology(self.n_sensory, self.n_actions, self.r_max, self.steps[:m])

    def rewards(self) -> list[int]:
        return [r for _, r, _ in self.steps]

    def to_text(self) -> str:
        lines = [f"sensory={self.n_sensory} actions={self.n_actions} r_max={self.r_max}"]
        lines += ["\t".join(map(str, step)) for step in self.steps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path=None) -> "Chronology":
        lines = text.splitlines()
        try:
            header = dict(tok.split("=", 1) for tok in lines[0].split())
            chron = cls(int(header["sensory"]), int(header["actions"]), int(header["r_max"]))
        except (IndexError, KeyError, ValueError):
            raise ChronologyFormatError("header must read 'sensory=<int> actions=<int> r_max=<int>'",
                                        path, 1) from None
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                s, r, a = (int(v) for v in line.split("\t"))
                chron.append(s, r, a)
            except ValueError as exc:
                raise ChronologyFormatError(str(exc), path, lineno) from None
        return chron


def encode_step(s: int, r: int, a: int) -> str:
    return encode_symbol(s) + encode_symbol(r) + encode_symbol(a)


def encode_history(steps) -> str:
    return "".join(encode_step(*step) for step in steps)


def make_question(history, action: int, i: int, j: int, layout: str = ACTION_FIRST) -> str:
    """Question string; every field is a prefix-free gamma code."""
    if layout == ACTION_FIRST:
        return encode_symbol(action) + encode_history(history) + encode_nat(i) + encode_nat(j)
    if layout == HISTORY_FIRST:
        return encode_history(history) + encode_symbol(action) + encode_nat(i) + encode_nat(j)
    raise ValueError(f"unknown question layout {layout!r}")


def cumulative_reward(C: Chronology, i: int, j: int) -> int:
    """Sum of r_k for k = i..j (1-based, inclusive)."""
    if not 1 <= i <= j <= C.n:
        raise IndexOutOfRange(f"need 1 <= i <= j <= {C.n}, got i={i}, j={j}")
    return sum(r for _, r, _ in C.steps[i - 1:j])


def reduction_pairs(C: Chronology, layout: str = ACTION_FIRST):
    """Yield (i, j, question, answer) for every 1 < i <= j <= n."""
    for i in range(2, C.n + 1):
        history = C.steps[:i - 1]
        a_i = C.steps[i - 1][2]
        for j in range(i, C.n + 1):
            yield i, j, make_question(history, a_i, i, j, layout), cumulative_reward(C, i, j)


def build_reduction_dataset(C: Chronology, w: int = 4, layout: str = ACTION_FIRST) -> QADataset:
    if C.n < 2:
        raise ChronologyTooShort(f"the reduction needs n >= 2 steps, got {C.n}")
    pairs = tuple((q, ans) for _, _, q, ans in reduction_pairs(C, layout))
    return QADataset(pairs, C.n * C.r_max + 1, w)


def expected_reward(ens: OperatorEnsemble, q: str) -> Fraction:
    _, dist = predict(ens, q)
    return sum((r * p for r, p in enumerate(dist)), Fraction(0))


def select_action(C: Chronology, ens: OperatorEnsemble, horizon: int = 3,
                  layout: str = ACTION_FIRST) -> int:
    """Action with the largest predicted reward over steps n+1 .. n+horizon.

    Ties go to the smallest action index.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = C.n
    best, best_value = 0, None
    for a in range(C.n_actions):
        value = expected_reward(ens, make_question(C.steps, a, n + 1, n + horizon, layout))
        if best_value is None or value > best_value:
            best, best_value = a, value
    return best


@dataclass
class EpisodeResult:
    chronology: Chronology
    total_reward: int
    ensemble_sizes: list[int] = field(default_factory=list)


def rl_episode(env: EnvironmentSpec, steps: int, budget: EnumBudget, horizon: int = 3,
               seed: int = 0, policy: str = "reduction", w: int = 4, stream: int = 0,
               layout: str = ACTION_FIRST, jobs: int = 1) -> EpisodeResult:
    """Run one episode of the reduction agent (or the uniform-random baseline).

    The first two actions are random; afterwards each step rebuilds the
    dataset from the whole chronology, re-induces the ensemble and acts.
    """
    if policy not in ("reduction", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    env_rng = CounterRNG(seed, 2 * stream)
    act_rng = CounterRNG(seed, 2 * stream + 1)
    C = Chronology(env.n_observations, env.n_actions, env.r_max)
    result = EpisodeResult(C, 0)
    obs, state = 0, None
    for t in range(1, steps + 1):
        if policy == "random" or t <= WARMUP:
            action = act_rng.randrange(env.n_actions)
        else:
            ens = find_operators(build_reduction_dataset(C, w, layout), budget, jobs=jobs)
            result.ensemble_sizes.append(len(ens))
            action = select_action(C, ens, horizon, layout)
        next_obs, reward, state = env_step(env, state, action, env_rng)
        C.append(obs, reward, action)
        result.total_reward += reward
        obs = next_obs
        log.debug("t=%d action=%d reward=%d", t, action, reward)
    return result
