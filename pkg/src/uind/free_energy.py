"""Discrete variational free energy, bottleneck quantities and the MML view.

Free energies are in nats, code lengths in bits. ``0 * ln 0`` is taken as 0;
a recognition density that puts mass where the posterior has none raises
SupportViolation instead of returning infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coding import encode_symbol
from .environments import BlanketWorld, CounterRNG, blanket_step, sense
from .induction import OperatorEnsemble, QADataset, psi_identity_residual, two_part_length

TOL = 1e-9


class FreeEnergyError(ValueError):
    pass


class SupportViolation(FreeEnergyError):
    pass


class ZeroEvidence(FreeEnergyError):
    pass


def _check_rows(name, table, axis=-1):
    table = np.asarray(table, dtype=float)
    if (table < 0).any():
        raise ValueError(f"{name} has negative entries")
    if not np.allclose(table.sum(axis=axis), 1.0, atol=TOL, rtol=0):
        raise ValueError(f"{name} does not sum to 1")
    return table


@dataclass(frozen=True)
class BlanketModel:
    """Generative and recognition tables of an agent.

    ``joint[s, f]`` is p(s, f | m); ``recognition[lam, f]`` is q(f | lam);
    ``action_lik[a, f, s]`` (optional) is p(s | f, a, m). Marginals and
    conditionals are derived, never stored.
    """

    joint: np.ndarray
    recognition: np.ndarray
    action_lik: np.ndarray | None = None

    def __post_init__(self):
        joint = np.asarray(self.joint, dtype=float)
        if (joint < 0).any() or abs(joint.sum() - 1.0) > TOL:
            raise ValueError("joint p(s, f | m) must be a probability table")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "recognition", _check_rows("recognition q(f | lambda)", self.recognition))
        if self.recognition.shape[1] != joint.shape[1]:
            raise ValueError("recognition and joint disagree on the hidden set size")
        if self.action_lik is not None:
            lik = _check_rows("action likelihood p(s | f, a, m)", self.action_lik)
            if lik.shape[1:] != (joint.shape[1], joint.shape[0]):
                raise ValueError("action likelihood must have shape (A, F, S)")
            object.__setattr__(self, "action_lik", lik)

    @property
    def n_sensory(self) -> int:
        return self.joint.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.joint.shape[1]

    @property
    def n_internal(self) -> int:
        return self.recognition.shape[0]

    @property
    def n_actions(self) -> int:
        return 0 if self.action_lik is None else self.action_lik.shape[0]

    def prior_hidden(self) -> np.ndarray:
        """p(f | m)."""
        return self.joint.sum(axis=0)

    def evidence(self, s: int) -> float:
        """p(s | m)."""
        return float(self.joint[s].sum())

    def posterior(self, s: int) -> np.ndarray:
        """p(f | s, m)."""
        ev = self.evidence(s)
        if ev <= 0:
            raise ZeroEvidence(f"p(s={s} | m) = 0")
        return self.joint[s] / ev

    def likelihood(self, s: int) -> np.ndarray:
        """p(s | f, m) for every f (0 where p(f | m) = 0)."""
        prior = self.prior_hidden()
        out = np.zeros_like(prior)
        np.divide(self.joint[s], prior, out=out, where=prior > 0)
        return out


@dataclass(frozen=True)
class FEReport:
    F_value: float
    energy_term: float
    entropy_term: float
    surprise: float
    kl_recognition: float
    complexity_term: float
    accuracy_term: float

    def residual(self) -> float:
        """Largest disagreement between the three decompositions."""
        a = self.energy_term - self.entropy_term
        b = self.surprise + self.kl_recognition
        c = self.accuracy_term + self.complexity_term
        return max(abs(a - b), abs(a - c), abs(b - c))


def _xlogy_neg(q: np.ndarray, p: np.ndarray) -> float:
    """-sum q ln p over the support of q."""
    mask = q > 0
    return float(-(q[mask] * np.log(p[mask])).sum())


def entropy_nats(q) -> float:
    q = np.asarray(q, dtype=float)
    return _xlogy_neg(q, q)


def kl_nats(q, p) -> float:
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    mask = q > 0
    if (p[mask] <= 0).any():
        raise SupportViolation("q puts mass where p has none")
    return float((q[mask] * (np.log(q[mask]) - np.log(p[mask]))).sum())


def free_energy(model: BlanketModel, lam: int, s: int) -> FEReport:
    """F(s, lam) with its three decompositions populated."""
    q = model.recognition[lam]
    p_sf = model.joint[s]
    ev = float(p_sf.sum())
    if ev <= 0:
        raise ZeroEvidence(f"p(s={s} | m) = 0")
    post = p_sf / ev
    if (post[q > 0] <= 0).any():
        raise SupportViolation(f"q(. | lambda={lam}) is not absolutely continuous w.r.t. p(. | s={s}, m)")
    energy = _xlogy_neg(q, p_sf)
    ent = entropy_nats(q)
    kl_rec = kl_nats(q, post)
    complexity = kl_nats(q, model.prior_hidden())
    accuracy = _xlogy_neg(q, model.likelihood(s))
    return FEReport(energy - ent, energy, ent, -math.log(ev), kl_rec, complexity, accuracy)


def _argmin(values, tol: float = 1e-12) -> int:
    best = None
    for i, v in enumerate(values):
        if math.isinf(v):
            continue
        if best is None or v < values[best] - tol:
            best = i
    if best is None:
        raise SupportViolation("every candidate has infinite free energy")
    return best


def perceptual_step(model: BlanketModel, s: int) -> int:
    """Internal state minimizing F(s, lam); ties go to the smallest index.

    States whose recognition density violates the posterior support are
    skipped as having infinite free energy.
    """
    values = []
    for lam in range(model.n_internal):
        try:
            values.append(free_energy(model, lam, s).F_value)
        except SupportViolation:
            values.append(math.inf)
    return _argmin(values)


def predicted_sensation(model: BlanketModel, lam: int, a: int) -> np.ndarray:
    """sum_f q(f | lam) p(s | f, a, m)."""
    return model.recognition[lam] @ model.action_lik[a]


def expected_free_energy(model: BlanketModel, lam: int, a: int) -> float:
    """E over predicted s of the action-dependent accuracy term plus the
    (action-independent) complexity of the current belief."""
    q = model.recognition[lam]
    lik = model.action_lik[a]
    pred = q @ lik
    total = 0.0
    support = q > 0
    for s, ps in enumerate(pred):
        if ps <= 0:
            continue
        col = lik[support, s]
        if (col <= 0).any():
            return math.inf
        total += ps * float(-(q[support] * np.log(col)).sum())
    return total + kl_nats(q, model.prior_hidden())


def active_step(model: BlanketModel, lam: int) -> int:
    """One-step lookahead action minimizing expected free energy."""
    if model.action_lik is None:
        raise ValueError("model has no action-conditional likelihood")
    return _argmin([expected_free_energy(model, lam, a) for a in range(model.n_actions)])


# -- information bottleneck ---------------------------------------------------

def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class JointTable:
    """Joint distribution over (hidden F, sensory S, internal Lambda)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 3 or (p < 0).any() or abs(p.sum() - 1.0) > TOL:
            raise ValueError("joint table must be a 3-d probability array over (F, S, Lambda)")
        object.__setattr__(self, "p", p)

    def H(self, *axes) -> float:
        """Joint entropy (bits) of the marginal over the named axes (0=F, 1=S, 2=Lambda)."""
        drop = tuple(ax for ax in range(3) if ax not in axes)
        return entropy_bits(self.p.sum(axis=drop))

    def H_cond(self, target: int, given: int) -> float:
        return self.H(target, given) - self.H(given)

    def I(self, a: int, b: int) -> float:
        return self.H(a) + self.H(b) - self.H(a, b)


F_AX, S_AX, L_AX = 0, 1, 2


@dataclass(frozen=True)
class BottleneckReport:
    S_B: float
    S_B_expanded: float
    S_B_star: float
    H_lambda: float
    H_lambda_given_F: float
    H_S: float
    H_S_given_lambda: float


def bottleneck(joint: JointTable) -> BottleneckReport:
    """Bottleneck objective from mutual informations, its entropy expansion,
    and the reduced form H(lambda) + H(S | lambda), all in bits."""
    s_b = joint.I(L_AX, F_AX) - joint.I(S_AX, L_AX)
    h_l = joint.H(L_AX)
    h_l_f = joint.H_cond(L_AX, F_AX)
    h_s = joint.H(S_AX)
    h_s_l = joint.H_cond(S_AX, L_AX)
    return BottleneckReport(s_b, h_l - h_l_f - h_s + h_s_l, h_l + h_s_l, h_l, h_l_f, h_s, h_s_l)


# -- MML and the operator-induction correspondence -----------------------------

def blanket_dataset(pairs, n_sensory: int, w: int = 4) -> QADataset:
    """(internal state, sensation) pairs as a QA dataset; questions are the
    gamma-coded internal state."""
    return QADataset(tuple((encode_symbol(lam), s) for lam, s in pairs), n_sensory, w)


@dataclass(frozen=True)
class MMLReport:
    lengths: tuple[float, ...]
    best: int
    model_bits: int
    data_bits: float


def mml_score(ens: OperatorEnsemble, D: QADataset | None = None) -> MMLReport:
    """Two-part message length code_len + sum(-log2 O(s|lam)) per operator."""
    pairs = (ens.dataset if D is None else D).pairs
    if not pairs:
        raise ValueError("mml_score needs a non-empty dataset")
    lengths = tuple(two_part_length(op, pairs) for op in ens.operators)
    best = min(range(len(lengths)), key=lambda j: (lengths[j], j))
    model_bits = sum(op.code_len for op in ens.operators)
    data_bits = sum(length - op.code_len for length, op in zip(lengths, ens.operators))
    return MMLReport(lengths, best, model_bits, data_bits)


@dataclass(frozen=True)
class TheoremReport:
    passed: bool
    worst_residual: float
    argmax_psi: int
    argmin_length: int
    residuals: tuple[float, ...] = field(repr=False, default=())


def theorem_check(ens: OperatorEnsemble, D: QADataset | None = None, tol: float = TOL) -> TheoremReport:
    """Check -log2 psi = code_len + sum(-log2 O(a|q)) for every operator and
    that the largest psi has the shortest two-part length."""
    pairs = (ens.dataset if D is None else D).pairs
    residuals = tuple(psi_identity_residual(op, pairs) for op in ens.operators)
    worst = max(residuals, default=0.0)
    mml = mml_score(ens, D)
    psis = [op.psi for op in ens.operators]
    argmax_psi = max(range(len(psis)), key=lambda j: (psis[j], -j))
    agree = psis[mml.best] == psis[argmax_psi]
    return TheoremReport(worst < tol and agree, worst, argmax_psi, mml.best, residuals)


# -- homeostasis agent ---------------------------------------------------------

def homeostatic_model(world: BlanketWorld, setpoint: float | None = None, width: float = 1.0,
                      eps: float = 1e-3) -> BlanketModel:
    """Agent model of a blanket world with a prior peaked at ``setpoint``.

    Hidden states mirror external states; the agent knows its sensor. Each
    internal state holds the posterior after one sensation. The action
    likelihood is the world's predicted sensation reweighted by the prior
    evidence p(s | m) and smoothed by ``eps`` so every sensation stays
    possible under the model.
    """
    n = world.n_external
    c = (n - 1) / 2 if setpoint is None else setpoint
    prior = np.exp(-0.5 * ((np.arange(n) - c) / width) ** 2)
    prior /= prior.sum()
    joint = (prior[:, None] * world.sensor).T
    evidence = joint.sum(axis=1)
    recognition = np.array([joint[s] / evidence[s] for s in range(world.n_sensory)])
    lik = np.einsum("afe,es->afs", world.kernel, world.sensor) * evidence[None, None, :] + eps
    lik /= lik.sum(axis=2, keepdims=True)
    return BlanketModel(joint, recognition, lik)


@dataclass
class HomeostasisResult:
    trajectory: list[tuple[int, int, int, int]]
    occupancy_entropy: float


def occupancy_entropy(states, n_states: int) -> float:
    """Shannon entropy (bits) of the visit histogram; 0 for no visits."""
    counts = np.bincount(np.asarray(states, dtype=int), minlength=n_states)
    if counts.sum() == 0:
        return 0.0
    return entropy_bits(counts / counts.sum())


def homeostasis_episode(world: BlanketWorld, steps: int, policy: str = "active", seed: int = 0,
                        model: BlanketModel | None = None, stream: int = 0) -> HomeostasisResult:
    """Sense, infer, act, transition; entropy of the external-state occupancy.

    Trajectory rows are (e, s, lam, a). The external state is used for
    measurement only.
    """
    if policy not in ("active", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    model = model or homeostatic_model(world)
    world_rng = CounterRNG(seed, 2 * stream)
    act_rng = CounterRNG(seed, 2 * stream + 1)
    e = world_rng.randrange(world.n_external)
    s = sense(world, e, world_rng)
    # both caches are keyed on the sensation, which determines the choice
    lam_cache: dict[int, int] = {}
    act_cache: dict[int, int] = {}
    trajectory = []
    for _ in range(steps):
        if s not in lam_cache:
            lam_cache[s] = perceptual_step(model, s)
        lam = lam_cache[s]
        if policy == "active":
            if lam not in act_cache:
                act_cache[lam] = active_step(model, lam)
            a = act_cache[lam]
        else:
            a = act_rng.randrange(world.n_actions)
        trajectory.append((e, s, lam, a))
        s, e = blanket_step(world, e, a, world_rng)
    return HomeostasisResult(trajectory, occupancy_entropy([row[0] for row in trajectory], world.n_external))


# -- model file ------------------------------------------------------------------

class ModelFormatError(ValueError):
    def __init__(self, msg, path=None, line=None):
        where = "" if path is None else f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + msg)
        self.path = path
        self.line = line


_SIZE_SECTIONS = ("F", "S", "A", "LAMBDA")


def load_model(text: str, path=None) -> BlanketModel:
    """Parse a model file.

    Sections ``[F] [S] [A] [LAMBDA]`` each hold one size. Tables follow as
    ``[JOINT]`` (S rows of F), ``[RECOGNITION]`` (LAMBDA rows of F) and, when
    A > 0, ``[ACTION]`` (A*F rows of S, action-major). Entries are decimal
    literals separated by whitespace; ``#`` starts a comment.
    """
    sections: dict[str, list[tuple[int, list[float]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().upper()
            if current in sections:
                raise ModelFormatError(f"duplicate section [{current}]", path, lineno)
            sections[current] = []
            continue
        if current is None:
            raise ModelFormatError("data before the first section", path, lineno)
        try:
            sections[current].append((lineno, [float(tok) for tok in line.split()]))
        except ValueError:
            raise ModelFormatError(f"non-numeric entry in {line!r}", path, lineno) from None

    def size(name):
        rows = sections.get(name)
        if not rows or len(rows) != 1 or len(rows[0][1]) != 1 or rows[0][1][0] != int(rows[0][1][0]):
            raise ModelFormatError(f"section [{name}] must hold one integer size", path,
                                   rows[0][0] if rows else None)
        return int(rows[0][1][0])

    nf, ns, na, nl = (size(name) for name in _SIZE_SECTIONS)

    def table(name, n_rows, n_cols):
        rows = sections.get(name)
        if rows is None:
            raise ModelFormatError(f"missing section [{name}]", path, None)
        if len(rows) != n_rows:
            raise ModelFormatError(f"[{name}] needs {n_rows} rows, got {len(rows)}", path,
                                   rows[-1][0] if rows else None)
        for lineno, row in rows:
            if len(row) != n_cols:
                raise ModelFormatError(f"[{name}] rows need {n_cols} entries", path, lineno)
        return np.array([row for _, row in rows])

    joint = table("JOINT", ns, nf)
    recognition = table("RECOGNITION", nl, nf)
    lik = table("ACTION", na * nf, ns).reshape(na, nf, ns) if na else None
    try:
        return BlanketModel(joint, recognition, lik)
    except ValueError as exc:
        raise ModelFormatError(str(exc), path, None) from None


def dump_model(model: BlanketModel) -> str:
    lines = [f"[F]\n{model.n_hidden}", f"[S]\n{model.n_sensory}", f"[A]\n{model.n_actions}",
             f"[LAMBDA]\n{model.n_internal}", "[JOINT]"]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.joint]
    lines.append("[RECOGNITION]")
    lines += [" ".join(repr(float(v)) for v in row) for row in model.recognition]
    if model.action_lik is not None:
        lines.append("[ACTION]")
        lines += [" ".join(repr(float(v)) for v in row)
                  for row in model.action_lik.reshape(-1, model.n_sensory)]
    return "\n".join(lines) + "\n"
