"""Monte Carlo checks of the two sampling results.

* Weighted (multinomial) selection has expected accuracy at least that of
  uniform selection when weights are ordered like accuracies (Chebyshev's
  sum inequality).
* Under multinomial epsilon-greedy with a decaying epsilon, the empirical
  selection frequency of each path converges to its weight.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lts.sampling import SamplerState, SamplerStrategy, draw_sequence


@dataclass
class Theorem1Report:
    trials: int
    M: int
    violations: int
    min_margin: float
    counterexample_margin: float
    anti_violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.counterexample_margin < 0


@dataclass
class McReport:
    trials: int
    draws: int
    mu: np.ndarray
    frequencies: np.ndarray
    max_deviation: float
    tolerance: float
    expected: np.ndarray = field(default=None)

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance


def expectation_gap(acc, mu) -> float:
    """``sum(mu * acc) - mean(acc)``: weighted minus uniform expected accuracy."""
    acc = np.asarray(acc, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return float(mu @ acc - acc.mean())


def verify_theorem1(trials: int = 1000, M: int = 10, seed: int = 666, tol: float = 1e-12) -> Theorem1Report:
    """Comonotone draws must never give weighted < uniform expectation.

    Accuracies are uniform on [0, 1]^M and weights a symmetric Dirichlet draw,
    both sorted ascending.  Reversing the weights (anti-comonotone) should
    produce the opposite inequality, which is reported as well.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    margins = np.empty(trials)
    anti = np.empty(trials)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        acc = np.sort(rng.uniform(size=M))
        mu = np.sort(rng.dirichlet(np.ones(M)))
        margins[i] = expectation_gap(acc, mu)
        anti[i] = expectation_gap(acc, mu[::-1])
    return Theorem1Report(
        trials=trials,
        M=M,
        violations=int(np.sum(margins < -tol)),
        min_margin=float(margins.min()),
        counterexample_margin=float(anti[0]),
        anti_violations=int(np.sum(anti < -tol)),
    )


def expected_frequencies(mu, epsilon0: float, beta: float, draws: int) -> np.ndarray:
    """Mean selection frequency over ``draws`` draws with epsilon_t = eps0 * beta**t."""
    mu = np.asarray(mu, dtype=float)
    mean_eps = float(np.mean(epsilon0 * beta ** np.arange(draws)))
    return mean_eps / len(mu) + (1 - mean_eps) * mu


def _simulate(mu, epsilon0, beta, draws, seed):
    state = SamplerState(SamplerStrategy.MultinomialEpsilonGreedy, epsilon0, beta, rng_seed=seed)
    return draw_sequence(mu, state, draws)


def verify_theorem2(mu, epsilon0: float = 0.5, beta: float = 0.99, draws: int = 100_000,
                    seed: int = 666, tolerance: float = 0.01) -> McReport:
    """Empirical frequencies after ``draws`` single draws; deviation is ``max |N_j/t - mu_j|``.

    ``beta = 1`` is accepted to show the non-vanishing exploration bias.
    """
    mu = np.asarray(mu, dtype=float)
    if abs(mu.sum() - 1.0) > 1e-9:
        raise ValueError("mu must sum to 1")
    picks = _simulate(mu, epsilon0, beta, draws, seed)
    freq = np.bincount(picks, minlength=len(mu)) / draws
    return McReport(1, draws, mu, freq, float(np.abs(freq - mu).max()), tolerance,
                    expected_frequencies(mu, epsilon0, beta, draws))


def deviation_trend(mu, epsilon0: float = 0.5, beta: float = 0.99, short: int = 1000,
                    long: int = 100_000, trials: int = 100, seed: int = 666) -> dict:
    """Per trial, compare the deviation after ``short`` and after ``long`` draws
    of the same sequence.  Returns the fraction of trials where it did not grow.
    """
    mu = np.asarray(mu, dtype=float)
    short_dev = np.empty(trials)
    long_dev = np.empty(trials)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        sub_seed = int(child.generate_state(1)[0])
        picks = _simulate(mu, epsilon0, beta, long, sub_seed)
        short_dev[i] = np.abs(np.bincount(picks[:short], minlength=len(mu)) / short - mu).max()
        long_dev[i] = np.abs(np.bincount(picks, minlength=len(mu)) / long - mu).max()
    return {
        "trials": trials,
        "short": short,
        "long": long,
        "fraction_non_increasing": float(np.mean(long_dev <= short_dev)),
        "short_deviation": short_dev,
        "long_deviation": long_dev,
    }


def write_report(path: str | Path, report) -> None:
    """Append-free CSV dump of a report's scalar fields (and per-path frequencies)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field", "value"])
        if isinstance(report, McReport):
            w.writerow(["trials", report.trials])
            w.writerow(["draws", report.draws])
            for j, (m, f) in enumerate(zip(report.mu, report.frequencies)):
                w.writerow([f"mu_{j}", repr(float(m))])
                w.writerow([f"frequency_{j}", repr(float(f))])
            w.writerow(["max_deviation", repr(report.max_deviation)])
            w.writerow(["tolerance", repr(report.tolerance)])
            w.writerow(["passed", int(report.passed)])
        else:
            for name in ("trials", "M", "violations", "min_margin", "counterexample_margin",
                         "anti_violations"):
                v = getattr(report, name)
                w.writerow([name, repr(v) if isinstance(v, float) else v])
            w.writerow(["passed", int(report.passed)])
