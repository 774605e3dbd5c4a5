"""Computable sources, bandit MDPs and blanket worlds with canonical encodings.

``encoding_len`` of a spec is the length of a declared prefix code over the
shipped families (kind tag, family tag, gamma-coded parameters). It is the
stand-in for the complexity of an environment in the 2**-H weights.

Randomness is counter based: draw ``t`` of stream ``s`` under seed ``x`` is a
hash of ``(x, s, t)``, so results do not depend on how work is sharded.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coding import encode_nat, encode_symbol
from .induction import QADataset

KINDS = ("qa_source", "mdp", "blanket_world")
FAMILIES = {
    "qa_source": ("BernoulliAnswer", "PeriodicAnswer", "CopySource"),
    "mdp": ("CoinBandit", "DeterministicBandit"),
    "blanket_world": ("Thermo8",),
}
# parameter order and defaults per family
_PARAMS = {
    "BernoulliAnswer": (("p", None),),
    "PeriodicAnswer": (("pattern", None),),
    "CopySource": (("length", 4),),
    "CoinBandit": (("p0", None), ("p1", None)),
    "DeterministicBandit": (),
    "Thermo8": (),
}


class EnvironmentSpecError(ValueError):
    pass


class BadKind(EnvironmentSpecError):
    pass


class BadAction(EnvironmentSpecError):
    pass


class SuiteFormatError(EnvironmentSpecError):
    def __init__(self, msg, path=None, line=None):
        where = f"{path}:{line}: " if path is not None else ""
        super().__init__(where + msg)


class CounterRNG:
    """Deterministic uniform draws keyed by (seed, stream, counter)."""

    def __init__(self, seed: int = 0, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = 0

    def uniform_at(self, counter: int) -> float:
        key = struct.pack("<QQQ", self.seed & (2**64 - 1), self.stream & (2**64 - 1), counter)
        word = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
        return (word >> 11) / float(1 << 53)

    def random(self) -> float:
        u = self.uniform_at(self.counter)
        self.counter += 1
        return u

    def randrange(self, n: int) -> int:
        return min(int(self.random() * n), n - 1)

    def choice(self, probs) -> int:
        u = self.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return len(probs) - 1


def _as_param(name, value):
    if name == "pattern":
        if isinstance(value, str):
            value = [int(v) for v in value.split(",") if v.strip()]
        value = tuple(int(v) for v in value)
        if not value or min(value) < 0:
            raise ValueError("pattern must be a non-empty list of symbols")
        return value
    if name.startswith("p"):
        value = Fraction(value).limit_denominator(10**6)
        if not 0 <= value <= 1:
            raise ValueError(f"probability {name}={value} outside [0, 1]")
        return value
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be >= 1")
    return value


def _encode_param(value) -> str:
    if isinstance(value, tuple):
        return encode_nat(len(value)) + "".join(encode_symbol(v) for v in value)
    if isinstance(value, Fraction):
        return encode_symbol(value.numerator) + encode_nat(value.denominator)
    return encode_symbol(value)


@dataclass(frozen=True)
class EnvironmentSpec:
    kind: str
    name: str
    params: tuple[tuple[str, object], ...] = ()

    @classmethod
    def make(cls, kind: str, name: str, **params) -> "EnvironmentSpec":
        if kind not in KINDS:
            raise BadKind(f"unknown kind {kind!r}")
        if name not in FAMILIES[kind]:
            raise BadKind(f"{name!r} is not a {kind} family")
        resolved = []
        for key, default in _PARAMS[name]:
            value = params.pop(key, default)
            if value is None:
                raise ValueError(f"{name} needs parameter {key!r}")
            resolved.append((key, _as_param(key, value)))
        if params:
            raise ValueError(f"unknown parameter(s) for {name}: {', '.join(sorted(params))}")
        return cls(kind, name, tuple(resolved))

    def param(self, key):
        return dict(self.params)[key]

    @property
    def canonical_encoding(self) -> str:
        bits = encode_nat(KINDS.index(self.kind) + 1)
        bits += encode_nat(FAMILIES[self.kind].index(self.name) + 1)
        return bits + "".join(_encode_param(v) for _, v in self.params)

    @property
    def encoding_len(self) -> int:
        return len(self.canonical_encoding)

    @property
    def label(self) -> str:
        args = []
        for key, value in self.params:
            if isinstance(value, tuple):
                value = ",".join(map(str, value))
            args.append(f"{key}={value}")
        return " ".join([self.name, *args])

    @property
    def short(self) -> str:
        """Space- and '='-free label for key=value reports."""
        args = [".".join(map(str, v)) if isinstance(v, tuple) else str(v) for _, v in self.params]
        return f"{self.name}({','.join(args)})" if args else self.name

    def to_line(self) -> str:
        return " ".join([self.kind, f"name={self.name}", *self.label.split()[1:]])

    # MDP / source metadata
    @property
    def n_actions(self) -> int:
        if self.kind == "mdp":
            return 2
        if self.kind == "blanket_world":
            return 3
        raise BadKind(f"{self.kind} has no actions")

    @property
    def r_max(self) -> int:
        if self.kind != "mdp":
            raise BadKind(f"{self.kind} has no rewards")
        return 1

    @property
    def n_observations(self) -> int:
        return 1

    @property
    def alphabet_size(self) -> int:
        if self.kind != "qa_source":
            raise BadKind(f"{self.kind} is not a question/answer source")
        if self.name == "PeriodicAnswer":
            return max(self.param("pattern")) + 1
        return 2


def bernoulli_answer(p) -> EnvironmentSpec:
    return EnvironmentSpec.make("qa_source", "BernoulliAnswer", p=p)


def periodic_answer(pattern) -> EnvironmentSpec:
    return EnvironmentSpec.make("qa_source", "PeriodicAnswer", pattern=pattern)


def copy_source(length: int = 4) -> EnvironmentSpec:
    return EnvironmentSpec.make("qa_source", "CopySource", length=length)


def coin_bandit(p0, p1) -> EnvironmentSpec:
    return EnvironmentSpec.make("mdp", "CoinBandit", p0=p0, p1=p1)


def deterministic_bandit() -> EnvironmentSpec:
    return EnvironmentSpec.make("mdp", "DeterministicBandit")


def thermo8_spec() -> EnvironmentSpec:
    return EnvironmentSpec.make("blanket_world", "Thermo8")


def env_complexity(env: EnvironmentSpec) -> int:
    return env.encoding_len


def parse_spec_line(line: str) -> EnvironmentSpec:
    """Parse ``kind name=Family key=value ...``."""
    tokens = line.split()
    if not tokens:
        raise ValueError("empty environment line")
    kind, rest = tokens[0], tokens[1:]
    params = {}
    for tok in rest:
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        params[key] = value
    name = params.pop("name", None)
    if name is None:
        raise ValueError("missing name=<Family>")
    return EnvironmentSpec.make(kind, name, **params)


def load_suite(text: str, path=None) -> list[EnvironmentSpec]:
    suite = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            suite.append(parse_spec_line(line))
        except ValueError as exc:
            raise SuiteFormatError(str(exc), path, lineno) from None
    return suite


# -- question/answer sources --------------------------------------------------

def sample_qa(source: EnvironmentSpec, n: int, seed: int = 0, stream: int = 0,
              w: int = 4) -> QADataset:
    """Draw ``n`` pairs from a question/answer source.

    BernoulliAnswer uses the empty question throughout, PeriodicAnswer asks
    the gamma-coded position (starting at a seeded offset) and CopySource
    asks random bit strings whose last bit is the answer.
    """
    if source.kind != "qa_source":
        raise BadKind(f"sample_qa needs a qa_source, got {source.kind}")
    rng = CounterRNG(seed, stream)
    pairs = []
    if source.name == "BernoulliAnswer":
        p = float(source.param("p"))
        pairs = [("", 1 if rng.random() < p else 0) for _ in range(n)]
    elif source.name == "PeriodicAnswer":
        pattern = source.param("pattern")
        offset = rng.randrange(len(pattern))
        pairs = [(encode_nat(t + 1), pattern[t % len(pattern)]) for t in range(offset, offset + n)]
    else:
        length = source.param("length")
        for _ in range(n):
            q = "".join("1" if rng.random() < 0.5 else "0" for _ in range(length))
            pairs.append((q, int(q[-1])))
    return QADataset(tuple(pairs), source.alphabet_size, w)


# -- bandits ------------------------------------------------------------------

def env_step(env: EnvironmentSpec, state, action: int, rng: CounterRNG):
    """One bandit pull: returns (observation, reward, next state)."""
    if env.kind != "mdp":
        raise BadKind(f"env_step needs an mdp, got {env.kind}")
    if action not in (0, 1):
        raise BadAction(f"action {action!r} is not an arm of {env.name}")
    if env.name == "DeterministicBandit":
        reward = action
    else:
        p = float(env.param("p1" if action else "p0"))
        reward = 1 if rng.random() < p else 0
    return 0, reward, state


def arm_means(env: EnvironmentSpec) -> tuple[float, float]:
    if env.name == "DeterministicBandit":
        return (0.0, 1.0)
    return (float(env.param("p0")), float(env.param("p1")))


# -- blanket worlds -----------------------------------------------------------

THERMO_ACTIONS = ("idle", "heat", "cool")
THERMO_EFFECT = (0, 1, -1)
THERMO_DRIFT = ((-1, 0.25), (0, 0.5), (1, 0.25))


@dataclass(frozen=True)
class BlanketWorld:
    """Discrete external dynamics seen through a sensory channel.

    ``sensor[e, s]`` is p(s | e) and ``kernel[a, e, e2]`` is p(e2 | e, a).
    External states are hidden from the agent; only sensations cross the
    blanket.
    """

    sensor: np.ndarray
    kernel: np.ndarray
    action_names: tuple[str, ...]
    name: str = "world"

    def __post_init__(self):
        for label, table in (("sensor", self.sensor), ("kernel", self.kernel)):
            if (table < 0).any() or not np.allclose(table.sum(axis=-1), 1.0, atol=1e-9):
                raise ValueError(f"{label} rows must be probability vectors")

    @property
    def n_external(self) -> int:
        return self.sensor.shape[0]

    @property
    def n_sensory(self) -> int:
        return self.sensor.shape[1]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[0]


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def thermo_next(e: int, action: int, delta: int, n: int = 8) -> int:
    return _clamp(e + delta + THERMO_EFFECT[action], 0, n - 1)


def thermo8(n: int = 8, accuracy: float = 0.8) -> BlanketWorld:
    sensor = np.zeros((n, n))
    for e in range(n):
        sensor[e, e] += accuracy
        for nb in (e - 1, e + 1):
            sensor[e, _clamp(nb, 0, n - 1)] += (1 - accuracy) / 2
    kernel = np.zeros((len(THERMO_ACTIONS), n, n))
    for a in range(len(THERMO_ACTIONS)):
        for e in range(n):
            for delta, p in THERMO_DRIFT:
                kernel[a, e, thermo_next(e, a, delta, n)] += p
    return BlanketWorld(sensor, kernel, THERMO_ACTIONS, "Thermo8")


def world_from_spec(spec: EnvironmentSpec) -> BlanketWorld:
    if spec.kind != "blanket_world":
        raise BadKind(f"expected a blanket_world, got {spec.kind}")
    return thermo8()


def sense(world: BlanketWorld, e: int, rng: CounterRNG) -> int:
    return rng.choice(world.sensor[e])


def blanket_step(world: BlanketWorld, e: int, a: int, rng: CounterRNG) -> tuple[int, int]:
    """Apply action ``a`` in external state ``e``; return (sensation of e2, e2)."""
    if not 0 <= a < world.n_actions:
        raise BadAction(f"action {a} outside 0..{world.n_actions - 1}")
    e2 = rng.choice(world.kernel[a, e])
    return sense(world, e2, rng), e2


def stationary_distribution(kernel: np.ndarray, iters: int = 10_000, tol: float = 1e-14) -> np.ndarray:
    """Power iteration for the stationary row vector of a stochastic matrix."""
    pi = np.full(kernel.shape[0], 1.0 / kernel.shape[0])
    for _ in range(iters):
        nxt = pi @ kernel
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi
