"""Meta-path sampling strategies over an importance vector.

Strategy names follow the short forms used in reports and config files:

========  ==========================================
random    uniform over paths
mds       multinomial on the importance weights
o-eps     epsilon-greedy with constant epsilon
d-eps     epsilon-greedy with epsilon_t = eps0 * beta**t
m-eps     multinomial epsilon-greedy (decayed)
me-eps    multinomial encouraged epsilon-greedy (decayed)
========  ==========================================
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


class SamplerStrategy(str, enum.Enum):
    Random = "random"
    Multinomial = "mds"
    OrdinaryEpsilonGreedy = "o-eps"
    DecayedEpsilonGreedy = "d-eps"
    MultinomialEpsilonGreedy = "m-eps"
    MultinomialEncouragedEpsilonGreedy = "me-eps"

    @classmethod
    def parse(cls, name: "str | SamplerStrategy") -> "SamplerStrategy":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {name!r}; choose from {choices}") from None


_EPS_STRATEGIES = {
    SamplerStrategy.OrdinaryEpsilonGreedy,
    SamplerStrategy.DecayedEpsilonGreedy,
    SamplerStrategy.MultinomialEpsilonGreedy,
    SamplerStrategy.MultinomialEncouragedEpsilonGreedy,
}


@dataclass
class SamplerState:
    """Strategy, epsilon schedule and the generator that drives every draw.

    ``t`` counts outer training iterations; the trainer advances it once per
    importance update.  The ordinary epsilon-greedy strategy ignores ``beta``
    (it is the decayed variant with ``beta = 1``).
    """

    strategy: SamplerStrategy = SamplerStrategy.MultinomialEpsilonGreedy
    epsilon0: float = 0.5
    beta: float = 0.99
    t: int = 0
    rng_seed: int = 666
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        self.strategy = SamplerStrategy.parse(self.strategy)
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ValueError("epsilon0 must lie in [0, 1]")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)

    @property
    def effective_beta(self) -> float:
        return 1.0 if self.strategy == SamplerStrategy.OrdinaryEpsilonGreedy else self.beta

    def advance(self) -> None:
        self.t += 1

    def get_rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def set_rng_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state


def epsilon_at(state: SamplerState, t: int | None = None) -> float:
    """``eps0 * beta**t`` (``beta`` forced to 1 for ordinary epsilon-greedy)."""
    t = state.t if t is None else t
    return state.epsilon0 * state.effective_beta ** t


def _weighted(rng: np.random.Generator, weights: np.ndarray, avail: np.ndarray) -> int:
    w = np.clip(weights[avail], 0.0, None)
    total = w.sum()
    if not total > 0:
        return int(avail[rng.integers(len(avail))])
    cum = np.cumsum(w)
    u = rng.random() * cum[-1]
    j = int(np.searchsorted(cum, u, side="right"))
    return int(avail[min(j, len(avail) - 1)])


def _uniform(rng: np.random.Generator, avail: np.ndarray) -> int:
    return int(avail[rng.integers(len(avail))])


def _argmax(weights: np.ndarray, avail: np.ndarray) -> int:
    # np.argmax returns the first maximum: lowest index among ties
    return int(avail[int(np.argmax(weights[avail]))])


def sample_one(mu, state: SamplerState, exclude: Iterable[int] = ()) -> int:
    """Draw one path index.

    Indices in ``exclude`` are removed and the remaining weights renormalized.
    Multinomial branches whose weights are all zero fall back to uniform.
    """
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    M = len(mu)
    excl = set(int(i) for i in exclude)
    avail = np.array([i for i in range(M) if i not in excl], dtype=np.int64)
    if len(avail) == 0:
        raise ValueError("no path left to sample")
    rng = state.rng
    s = state.strategy

    if s == SamplerStrategy.Random:
        return _uniform(rng, avail)
    if s == SamplerStrategy.Multinomial:
        return _weighted(rng, mu, avail)

    explore = rng.random() < epsilon_at(state)
    if s in (SamplerStrategy.OrdinaryEpsilonGreedy, SamplerStrategy.DecayedEpsilonGreedy):
        return _uniform(rng, avail) if explore else _argmax(mu, avail)
    if s == SamplerStrategy.MultinomialEpsilonGreedy:
        return _uniform(rng, avail) if explore else _weighted(rng, mu, avail)
    if s == SamplerStrategy.MultinomialEncouragedEpsilonGreedy:
        return _weighted(rng, 1.0 - mu, avail) if explore else _weighted(rng, mu, avail)
    raise AssertionError(s)


def sample_k(mu, k: int, state: SamplerState) -> list[int]:
    """``k`` distinct indices by sequential draws without replacement, sorted."""
    M = len(getattr(mu, "mu", mu))
    if not 1 <= k <= M:
        raise ValueError(f"k must lie in [1, {M}], got {k}")
    chosen: list[int] = []
    for _ in range(k):
        chosen.append(sample_one(mu, state, exclude=chosen))
    return sorted(chosen)


def single_draw_distribution(mu, state: SamplerState) -> np.ndarray:
    """Exact probability of each index under one ``sample_one`` call."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    M = len(mu)
    uniform = np.full(M, 1.0 / M)

    def mult(w):
        w = np.clip(w, 0.0, None)
        return w / w.sum() if w.sum() > 0 else uniform

    s = state.strategy
    if s == SamplerStrategy.Random:
        return uniform
    if s == SamplerStrategy.Multinomial:
        return mult(mu)
    eps = epsilon_at(state)
    if s in (SamplerStrategy.OrdinaryEpsilonGreedy, SamplerStrategy.DecayedEpsilonGreedy):
        greedy = np.zeros(M)
        greedy[int(np.argmax(mu))] = 1.0
        return eps * uniform + (1 - eps) * greedy
    if s == SamplerStrategy.MultinomialEpsilonGreedy:
        return eps * uniform + (1 - eps) * mult(mu)
    return eps * mult(1.0 - mu) + (1 - eps) * mult(mu)


def draw_sequence(mu, state: SamplerState, n: int) -> np.ndarray:
    """``n`` consecutive single draws with epsilon decaying per draw.

    Draw ``i`` uses ``epsilon_at(state, state.t + i)``.  Vectorized; used by the
    convergence experiments where ``t`` indexes individual draws.  ``state.t``
    is advanced by ``n``.
    """
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    M = len(mu)
    rng = state.rng
    s = state.strategy
    steps = state.t + np.arange(n)
    eps = state.epsilon0 * state.effective_beta ** steps

    def mult(w, size):
        w = np.clip(w, 0.0, None)
        if not w.sum() > 0:
            return rng.integers(M, size=size)
        cum = np.cumsum(w)
        idx = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
        return np.minimum(idx, M - 1)

    if s == SamplerStrategy.Random:
        out = rng.integers(M, size=n)
    elif s == SamplerStrategy.Multinomial:
        out = mult(mu, n)
    else:
        explore = rng.random(n) < eps
        if s in (SamplerStrategy.OrdinaryEpsilonGreedy, SamplerStrategy.DecayedEpsilonGreedy):
            exploit = np.full(n, int(np.argmax(mu)))
            alt = rng.integers(M, size=n)
        elif s == SamplerStrategy.MultinomialEpsilonGreedy:
            exploit = mult(mu, n)
            alt = rng.integers(M, size=n)
        else:
            exploit = mult(mu, n)
            alt = mult(1.0 - mu, n)
        out = np.where(explore, alt, exploit)
    state.t += n
    return out.astype(np.int64)
