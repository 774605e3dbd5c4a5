"""Complexity-weighted performance measures over a finite environment suite.

Both measures weight each environment by ``2**-encoding_len``. The reward
measure averages discounted returns of an agent; the operator-fitness measure
averages the goodness of fit Psi that operator induction reaches on samples
from each source under a given engine budget.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .enumeration import EnumBudget
from .environments import CounterRNG, EnvironmentSpec, env_step, sample_qa
from .induction import EmptyEnsemble, find_operators
from .reduction import (
    ACTION_FIRST,
    WARMUP,
    Chronology,
    build_reduction_dataset,
    select_action,
)


class EmptySuite(ValueError):
    pass


@dataclass(frozen=True)
class MeasureRow:
    env: EnvironmentSpec
    weight: Fraction
    value: float | Fraction
    stderr: float
    samples: int

    @property
    def encoding_len(self) -> int:
        return self.env.encoding_len


@dataclass(frozen=True)
class MeasureReport:
    kind: str
    rows: tuple[MeasureRow, ...]
    total: float | Fraction
    config: dict = field(default_factory=dict)

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            out.append({"record": "row", "env": row.env.short, "encoding_len": row.encoding_len,
                        "weight": row.weight, "value": row.value, "stderr": row.stderr,
                        "samples": row.samples})
        out.append({"record": "TOTAL", "kind": self.kind, "total": self.total,
                    "weight_sum": sum((r.weight for r in self.rows), Fraction(0))})
        return out


def _stderr(values) -> float:
    values = [float(v) for v in values]
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / math.sqrt(len(values))


# -- agents ---------------------------------------------------------------------

Policy = Callable[[Chronology, CounterRNG], int]


class AlwaysArm:
    def __init__(self, arm: int):
        self.arm = arm
        self.name = f"always{arm}"

    def __call__(self, C, rng):
        return self.arm


class UniformRandom:
    name = "random"

    def __call__(self, C, rng):
        return rng.randrange(C.n_actions)


class ReductionPolicy:
    """Reduction agent as a policy: random warm-up, then induce-and-act."""

    name = "reduction"

    def __init__(self, budget: EnumBudget, horizon: int = 3, w: int = 4,
                 layout: str = ACTION_FIRST, jobs: int = 1):
        self.budget = budget
        self.horizon = horizon
        self.w = w
        self.layout = layout
        self.jobs = jobs

    def __call__(self, C, rng):
        if C.n < WARMUP:
            return rng.randrange(C.n_actions)
        ens = find_operators(build_reduction_dataset(C, self.w, self.layout), self.budget, self.jobs)
        return select_action(C, ens, self.horizon, self.layout)


def discounted_return(agent: Policy, env: EnvironmentSpec, gamma: float, horizon: int,
                      seed: int, stream: int) -> float:
    """sum_{t=1..T} gamma**t r_t for one episode."""
    env_rng = CounterRNG(seed, 2 * stream)
    act_rng = CounterRNG(seed, 2 * stream + 1)
    C = Chronology(env.n_observations, env.n_actions, env.r_max)
    obs, state = 0, None
    total = 0.0
    for t in range(1, horizon + 1):
        a = agent(C, act_rng)
        obs_next, r, state = env_step(env, state, a, env_rng)
        C.append(obs, r, a)
        total += gamma ** t * r
        obs = obs_next
    return total


def legg_hutter(agent: Policy, suite, gamma: float = 0.9, horizon: int = 200,
                episodes: int = 100, seed: int = 0) -> MeasureReport:
    """Complexity-weighted sum of Monte Carlo value estimates over the mdp suite."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if horizon < 1 or episodes < 1:
        raise ValueError("horizon and episodes must be >= 1")
    envs = [env for env in suite if env.kind == "mdp"]
    if not envs:
        raise EmptySuite("no mdp environments in the suite")
    rows = []
    for env in envs:
        returns = [discounted_return(agent, env, gamma, horizon, seed, ep) for ep in range(episodes)]
        rows.append(MeasureRow(env, Fraction(1, 2 ** env.encoding_len), statistics.fmean(returns),
                               _stderr(returns), episodes))
    total = math.fsum(float(r.weight) * r.value for r in rows)
    config = {"agent": getattr(agent, "name", repr(agent)), "gamma": gamma, "horizon": horizon,
              "episodes": episodes, "seed": seed,
              "truncation_bound": gamma ** (horizon + 1) / (1 - gamma)}
    return MeasureReport("legg", tuple(rows), total, config)


def mean_psi(source: EnvironmentSpec, n: int, seeds, budget: EnumBudget, w: int = 4,
             jobs: int = 1) -> tuple[Fraction, list[Fraction]]:
    """Mean Psi over seeded samples; an empty ensemble scores 0."""
    values = []
    for seed in seeds:
        D = sample_qa(source, n, seed, w=w)
        try:
            values.append(find_operators(D, budget, jobs).Psi)
        except EmptyEnsemble:
            values.append(Fraction(0))
    return sum(values, Fraction(0)) / len(values), values


def operator_fitness(budget: EnumBudget, suite, n: int = 8, seeds=range(5), w: int = 4,
                     jobs: int = 1) -> MeasureReport:
    """Complexity-weighted mean Psi over the question/answer sources of the suite."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    sources = [env for env in suite if env.kind == "qa_source"]
    if not sources:
        raise EmptySuite("no qa_source environments in the suite")
    rows = []
    for src in sources:
        mean, values = mean_psi(src, n, seeds, budget, w, jobs)
        rows.append(MeasureRow(src, Fraction(1, 2 ** src.encoding_len), mean, _stderr(values), len(values)))
    total = sum((r.weight * r.value for r in rows), Fraction(0))
    config = {"max_code_len": budget.max_code_len, "step_budget": budget.step_budget, "n": n,
              "seeds": seeds, "w": w}
    return MeasureReport("opfit", tuple(rows), total, config)
