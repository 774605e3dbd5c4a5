import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import direct_entropy, direct_free_energy, direct_mi, direct_surprise_plus_kl
from uind.enumeration import EnumBudget
from uind.environments import thermo8
from uind.free_energy import (
    BlanketModel,
    JointTable,
    ModelFormatError,
    SupportViolation,
    ZeroEvidence,
    active_step,
    blanket_dataset,
    bottleneck,
    dump_model,
    expected_free_energy,
    free_energy,
    homeostasis_episode,
    homeostatic_model,
    load_model,
    mml_score,
    occupancy_entropy,
    perceptual_step,
    theorem_check,
)
from uind.induction import Operator, OperatorEnsemble, QADataset, find_operators, two_part_length
from uind.machine import assemble


def random_model(rng, nf=3, ns=3, nl=2, na=0):
    joint = rng.dirichlet(np.ones(nf * ns)).reshape(ns, nf)
    rec = rng.dirichlet(np.ones(nf), size=nl)
    lik = rng.dirichlet(np.ones(ns), size=(na, nf)) if na else None
    return BlanketModel(joint, rec, lik)


def test_posterior_recognition_gives_surprise():
    rng = np.random.default_rng(0)
    m = random_model(rng)
    s = 1
    m2 = BlanketModel(m.joint, np.vstack([m.recognition, m.posterior(s)]))
    rep = free_energy(m2, 2, s)
    assert rep.kl_recognition == pytest.approx(0, abs=1e-12)
    assert rep.F_value == pytest.approx(rep.surprise, abs=1e-12)
    assert perceptual_step(m2, s) == 2


def test_deterministic_model_zero():
    m = BlanketModel(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert free_energy(m, 0, 0).F_value == 0


def test_decompositions_match_oracle():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = random_model(rng, 3, 3, 2)
        for lam in range(2):
            for s in range(3):
                rep = free_energy(m, lam, s)
                assert rep.residual() < 1e-9
                q = m.recognition[lam]
                assert abs(rep.F_value - direct_free_energy(m.joint, q, s)) < 1e-9
                assert abs(rep.F_value - direct_surprise_plus_kl(m.joint, q, s)) < 1e-9
                assert rep.F_value >= rep.surprise - 1e-12


def test_free_energy_strictly_above_surprise_off_posterior():
    rng = np.random.default_rng(2)
    m = random_model(rng)
    for lam in range(m.n_internal):
        for s in range(m.n_sensory):
            rep = free_energy(m, lam, s)
            assert not np.allclose(m.recognition[lam], m.posterior(s))
            assert rep.F_value > rep.surprise


def test_zero_evidence_and_support():
    joint = np.array([[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(ZeroEvidence):
        free_energy(BlanketModel(joint, np.array([[0.5, 0.5]])), 0, 1)
    joint = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SupportViolation):
        free_energy(BlanketModel(joint, np.array([[0.5, 0.5]])), 0, 0)


def test_model_validation():
    with pytest.raises(ValueError):
        BlanketModel(np.array([[0.5, 0.6]]), np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        BlanketModel(np.array([[0.5, 0.5]]), np.array([[0.7, 0.7]]))


def test_perceptual_single_element():
    m = random_model(np.random.default_rng(3), nl=1)
    assert perceptual_step(m, 0) == 0


def test_perceptual_matches_scan():
    rng = np.random.default_rng(4)
    for _ in range(50):
        m = random_model(rng, 3, 3, 5)
        for s in range(3):
            values = [direct_free_energy(m.joint, m.recognition[lam], s) for lam in range(5)]
            assert perceptual_step(m, s) == int(np.argmin(values))


def test_perceptual_relabel_invariant():
    rng = np.random.default_rng(5)
    m = random_model(rng, 3, 3, 4)
    perm = np.array([2, 0, 3, 1])
    m2 = BlanketModel(m.joint, m.recognition[perm])
    for s in range(3):
        assert perm[perceptual_step(m2, s)] == perceptual_step(m, s)


def _two_action_model(lik1):
    joint = np.array([[0.4, 0.3], [0.1, 0.2]])
    lik = np.array([[[0.5, 0.5], [0.5, 0.5]], lik1])
    return BlanketModel(joint, np.array([[0.6, 0.4]]), lik)


def test_active_prefers_confident_sensation():
    m = _two_action_model([[0.99, 0.01], [0.99, 0.01]])
    # s = 0 carries the larger evidence p(s | m)
    assert m.evidence(0) > m.evidence(1)
    q = m.recognition[0]
    oracle = []
    for a in range(2):
        total = 0.0
        for s in range(2):
            ps = sum(q[f] * m.action_lik[a, f, s] for f in range(2))
            total += ps * -sum(q[f] * math.log(m.action_lik[a, f, s]) for f in range(2))
        oracle.append(total)
    for a in range(2):
        kl = sum(q[f] * math.log(q[f] / m.prior_hidden()[f]) for f in range(2))
        assert expected_free_energy(m, 0, a) == pytest.approx(oracle[a] + kl, abs=1e-12)
    assert active_step(m, 0) == 1


def test_active_tie_and_single_action():
    m = _two_action_model([[0.5, 0.5], [0.5, 0.5]])
    assert active_step(m, 0) == 0
    single = BlanketModel(m.joint, m.recognition, m.action_lik[:1])
    assert active_step(single, 0) == 0


# -- bottleneck -------------------------------------------------------------

def random_joint(rng, shape=(2, 2, 2)):
    return JointTable(rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))


def test_bottleneck_independent_lambda():
    pf = np.array([0.3, 0.7])
    ps = np.array([0.6, 0.4])
    pl = np.array([0.5, 0.25, 0.25])
    rep = bottleneck(JointTable(np.einsum("f,s,l->fsl", pf, ps, pl)))
    assert rep.S_B == pytest.approx(0, abs=1e-12)


def test_bottleneck_bijection():
    pf = np.array([0.2, 0.3, 0.5])
    ps = np.array([0.5, 0.5])
    p = np.einsum("f,s,fl->fsl", pf, ps, np.eye(3))
    rep = bottleneck(JointTable(p))
    assert rep.S_B == pytest.approx(direct_entropy(pf), abs=1e-12)


def test_bottleneck_against_oracle():
    rng = np.random.default_rng(6)
    for _ in range(100):
        J = random_joint(rng)
        rep = bottleneck(J)
        p = J.p
        i_lf = direct_mi(p.sum(axis=1).T)
        i_sl = direct_mi(p.sum(axis=0))
        assert abs(rep.S_B - (i_lf - i_sl)) < 1e-9
        assert abs(rep.S_B - rep.S_B_expanded) < 1e-9
        assert abs(rep.S_B_star - rep.S_B - (rep.H_lambda_given_F + rep.H_S)) < 1e-9


# -- MML and the theorem check -------------------------------------------------

def _hand_ensemble():
    D = QADataset((("1", 0), ("1", 1), ("01", 1), ("01", 1)), 2)
    qs = D.questions
    t1 = ((Fraction(1, 2), Fraction(1, 2)),) * 2
    t2 = ((Fraction(1, 4), Fraction(3, 4)), (Fraction(1, 8), Fraction(7, 8)))
    p1, p2 = assemble([0] * 5), assemble([0] * 6)
    o1 = Operator(p1, t1, qs, Fraction(1, 2 ** 18) * Fraction(1, 16))
    o2 = Operator(p2, t2, qs, Fraction(1, 2 ** 21) * Fraction(1, 4) * Fraction(3, 4) * Fraction(49, 64))
    return OperatorEnsemble((o1, o2), D, EnumBudget(21, 10))


def test_mml_hand_lengths():
    ens = _hand_ensemble()
    rep = mml_score(ens)
    assert rep.lengths[0] == pytest.approx(18 + 4, abs=1e-12)
    assert rep.lengths[1] == pytest.approx(21 + 2 - math.log2(3 / 4) - 2 * math.log2(7 / 8), abs=1e-12)
    assert rep.best == 0
    assert rep.model_bits == 39


def test_mml_single_operator():
    ens = _hand_ensemble()
    one = OperatorEnsemble(ens.operators[1:], ens.dataset, ens.budget)
    rep = mml_score(one)
    assert rep.best == 0
    assert rep.lengths[0] == pytest.approx(-math.log2(one.operators[0].psi), abs=1e-12)


def test_theorem_passes_on_found_ensemble():
    D = blanket_dataset([(0, 1), (1, 0), (1, 0), (0, 1)], 2)
    rep = theorem_check(find_operators(D, EnumBudget(21, 200)))
    assert rep.passed and rep.worst_residual < 1e-9
    assert rep.argmax_psi == rep.argmin_length


def test_theorem_detects_perturbation():
    ens = _hand_ensemble()
    assert theorem_check(ens).passed
    bad = ens.operators[0]
    bad = Operator(bad.program, bad.cpdf_table, bad.questions, bad.psi * Fraction(1001, 1000))
    assert not theorem_check(OperatorEnsemble((bad,) + ens.operators[1:], ens.dataset, ens.budget)).passed


def test_mml_rejects_empty_pairs():
    ens = _hand_ensemble()
    empty = type("Empty", (), {"pairs": ()})()
    with pytest.raises(ValueError):
        mml_score(ens, empty)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=5))
def test_argmin_length_is_argmax_psi(pairs):
    ens = find_operators(blanket_dataset(pairs, 2), EnumBudget(21, 200))
    lengths = [two_part_length(op, ens.dataset.pairs) for op in ens.operators]
    psis = [op.psi for op in ens.operators]
    assert psis[int(np.argmin(lengths))] == max(psis)


# -- model file -------------------------------------------------------------------

def test_model_file_roundtrip():
    m = random_model(np.random.default_rng(8), 2, 3, 2, 2)
    back = load_model(dump_model(m))
    assert np.allclose(back.joint, m.joint) and np.allclose(back.action_lik, m.action_lik)


def test_model_file_errors():
    text = "[F]\n2\n[S]\n1\n[A]\n0\n[LAMBDA]\n1\n[JOINT]\n0.5 0.5\n[RECOGNITION]\n1 x\n"
    with pytest.raises(ModelFormatError, match=r"m\.txt:12"):
        load_model(text, "m.txt")
    with pytest.raises(ModelFormatError, match="RECOGNITION"):
        load_model(text.replace("1 x\n", ""), "m.txt")


# -- homeostasis ------------------------------------------------------------------

def test_homeostasis_zero_steps():
    res = homeostasis_episode(thermo8(), 0)
    assert res.trajectory == [] and res.occupancy_entropy == 0


def test_occupancy_entropy_uniform():
    assert occupancy_entropy(range(8), 8) == pytest.approx(3.0)


def test_homeostatic_model_valid():
    w = thermo8()
    m = homeostatic_model(w)
    assert m.n_sensory == 8 and m.n_actions == 3
    actions = [active_step(m, perceptual_step(m, s)) for s in range(8)]
    # heat when reading cold, cool when reading hot
    assert actions[0] == 1 and actions[7] == 2


def test_homeostasis_active_below_random():
    w = thermo8()
    act = [homeostasis_episode(w, 2000, "active", seed=s).occupancy_entropy for s in range(3)]
    rnd = [homeostasis_episode(w, 2000, "random", seed=s).occupancy_entropy for s in range(3)]
    assert max(act) < min(rnd)


def test_homeostasis_deterministic():
    w = thermo8()
    a = homeostasis_episode(w, 500, "random", seed=4)
    b = homeostasis_episode(w, 500, "random", seed=4)
    assert a.trajectory == b.trajectory
