import math
from fractions import Fraction

import pytest

from uind.enumeration import EnumBudget
from uind.environments import (
    bernoulli_answer,
    coin_bandit,
    copy_source,
    deterministic_bandit,
    load_suite,
    periodic_answer,
)
from uind.measure import (
    AlwaysArm,
    EmptySuite,
    UniformRandom,
    discounted_return,
    legg_hutter,
    mean_psi,
    operator_fitness,
)


def test_constant_reward_geometric_series():
    v = discounted_return(AlwaysArm(1), deterministic_bandit(), 0.9, 200, seed=0, stream=0)
    assert abs(v - 9.0) < 1e-6
    assert abs(v - 0.9 * (1 - 0.9 ** 200) / 0.1) < 1e-12


def test_zero_reward_contributes_nothing():
    rep = legg_hutter(AlwaysArm(0), [deterministic_bandit()], episodes=3)
    assert rep.rows[0].value == 0 and rep.total == 0


def test_total_is_weighted_sum():
    suite = [deterministic_bandit(), coin_bandit("1/5", "4/5")]
    rep = legg_hutter(UniformRandom(), suite, horizon=50, episodes=20)
    assert abs(rep.total - sum(float(r.weight) * r.value for r in rep.rows)) < 1e-9
    for r in rep.rows:
        assert 0 < r.weight <= 1 and r.weight == Fraction(1, 2 ** r.encoding_len)


def test_best_arm_beats_worst_arm():
    suite = [coin_bandit("1/5", "4/5")]
    best = legg_hutter(AlwaysArm(1), suite, episodes=1000, horizon=50)
    worst = legg_hutter(AlwaysArm(0), suite, episodes=1000, horizon=50)
    assert best.total > worst.total


def test_random_between_extremes():
    suite = [coin_bandit("1/5", "4/5"), deterministic_bandit()]
    reps = {name: legg_hutter(agent, suite, episodes=300, horizon=50)
            for name, agent in (("lo", AlwaysArm(0)), ("mid", UniformRandom()), ("hi", AlwaysArm(1)))}
    for i in range(len(suite)):
        lo, mid, hi = (reps[k].rows[i] for k in ("lo", "mid", "hi"))
        assert mid.value > lo.value - 3 * math.hypot(mid.stderr, lo.stderr)
        assert mid.value < hi.value + 3 * math.hypot(mid.stderr, hi.stderr)


def test_legg_errors():
    with pytest.raises(EmptySuite):
        legg_hutter(UniformRandom(), [])
    with pytest.raises(EmptySuite):
        legg_hutter(UniformRandom(), [copy_source()])
    with pytest.raises(ValueError):
        legg_hutter(UniformRandom(), [deterministic_bandit()], gamma=1.0)


def test_weighting_arithmetic():
    # encoding lengths 7 and 12 give weights 1/128 and 1/4096
    suite = [copy_source(2), bernoulli_answer("3/4")]
    assert [s.encoding_len for s in suite] == [7, 12]
    rep = operator_fitness(EnumBudget(21, 200), suite, n=3, seeds=range(2))
    x, y = rep.rows[0].value, rep.rows[1].value
    assert rep.total == x / 128 + y / 4096
    assert isinstance(rep.total, Fraction)


def test_smallest_budget_scores_zero():
    rep = operator_fitness(EnumBudget(3, 10), [copy_source(), bernoulli_answer("1/2")], n=2, seeds=[0])
    assert rep.total == 0


def test_opfit_monotone_in_budget():
    suite = [bernoulli_answer("3/4"), periodic_answer([0, 1])]
    a = operator_fitness(EnumBudget(21, 200), suite, n=3, seeds=range(2))
    b = operator_fitness(EnumBudget(24, 200), suite, n=3, seeds=range(2))
    assert a.total <= b.total
    for ra, rb in zip(a.rows, b.rows):
        assert ra.value <= rb.value


def test_opfit_errors():
    with pytest.raises(EmptySuite):
        operator_fitness(EnumBudget(9, 10), [deterministic_bandit()])
    with pytest.raises(ValueError):
        operator_fitness(EnumBudget(9, 10), [copy_source()], n=0)


def test_mean_psi_empty_counts_zero():
    mean, values = mean_psi(copy_source(), 2, [0, 1], EnumBudget(15, 50))
    assert mean == 0 and values == [0, 0]


def test_records_end_with_total():
    rep = legg_hutter(AlwaysArm(1), load_suite("mdp name=DeterministicBandit\n"), episodes=2, horizon=5)
    recs = rep.records()
    assert recs[-1]["record"] == "TOTAL"
    assert recs[-1]["weight_sum"] < 1
