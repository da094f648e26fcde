"""Exact stochastic simulation of the informed-count jump process.

From ``n`` informed robots the swarm jumps to ``n + 1`` at rate

    W(n) = lam * (n / tau) * ln(N / n) + (1 - lam) * (n / tau) * (N - n) / N

(``lam = 0`` logistic, ``lam = 1`` Gompertz). Both terms vanish at ``n = N``.
Because ``W`` depends on ``n`` only, a trajectory is a pure birth process
whose holding times are independent exponentials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

Regime = Union[str, float]


def _regime_weight(regime: Regime) -> float:
    if isinstance(regime, str):
        if regime == "logistic":
            return 0.0
        if regime == "gompertz":
            return 1.0
        raise ValueError(f"unknown regime {regime!r}")
    lam = float(regime)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"blend weight must lie in [0, 1], got {lam}")
    return lam


def transition_rates(N: int, tau: float, regime: Regime) -> np.ndarray:
    """``W(n)`` for ``n = 0 .. N``."""
    lam = _regime_weight(regime)
    n = np.arange(N + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        surprise = np.where(n > 0, n * np.log(N / np.where(n > 0, n, 1)), 0.0)
    logistic = n * (N - n) / N
    return (lam * surprise + (1 - lam) * logistic) / tau


@dataclass
class JumpTrajectory:
    """Jump times and post-jump counts; the process starts at n = 1, t = 0."""

    times: np.ndarray
    counts: np.ndarray
    N: int

    @property
    def jumps(self) -> list[tuple[float, int]]:
        return [(float(t), int(n)) for t, n in zip(self.times, self.counts)]

    def count_at(self, t) -> np.ndarray:
        return 1 + np.searchsorted(self.times, t, side="right")


def _jump_times(N, tau, regime, rng, size=None):
    rates = transition_rates(N, tau, regime)[1:N]  # n = 1 .. N-1, all positive
    shape = (N - 1,) if size is None else (size, N - 1)
    waits = rng.standard_exponential(shape) / rates
    return np.cumsum(waits, axis=-1)


def gillespie_run(N: int, tau: float, regime: Regime, seed) -> JumpTrajectory:
    if N < 2 or not tau > 0:
        raise ValueError("need N >= 2 and tau > 0")
    rng = np.random.default_rng(seed)
    times = _jump_times(N, tau, regime, rng)
    return JumpTrajectory(times, np.arange(2, N + 1), N)


def gillespie_ensemble(N: int, tau: float, regime: Regime, runs: int, seed) -> list[JumpTrajectory]:
    """``runs`` independent trajectories drawn from one seeded stream."""
    if N < 2 or not tau > 0:
        raise ValueError("need N >= 2 and tau > 0")
    rng = np.random.default_rng(seed)
    block = _jump_times(N, tau, regime, rng, size=runs)
    counts = np.arange(2, N + 1)
    return [JumpTrajectory(row, counts, N) for row in block]


def sample_counts(trajectories: Sequence[JumpTrajectory], grid) -> np.ndarray:
    """Counts of every trajectory on ``grid``, shape (runs, len(grid))."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    N = trajectories[0].N
    if any(tr.N != N for tr in trajectories):
        raise ValueError("trajectories must share N")
    grid = np.asarray(grid, dtype=float)
    return np.stack([tr.count_at(grid) for tr in trajectories])


def ensemble_mean(trajectories: Sequence[JumpTrajectory], grid) -> tuple[np.ndarray, np.ndarray]:
    """Mean informed fraction on ``grid`` and its standard error."""
    counts = sample_counts(trajectories, grid)
    N = trajectories[0].N
    frac = counts / N
    mean = np.sum(frac, axis=0) / len(frac)  # numpy sums pairwise
    if len(frac) > 1:
        se = np.std(frac, axis=0, ddof=1) / np.sqrt(len(frac))
    else:
        se = np.zeros_like(mean)
    return mean, se


def occupancy(trajectories: Sequence[JumpTrajectory], t: float) -> np.ndarray:
    """Empirical ``P_n(t)`` for ``n = 0 .. N`` as a normalised histogram."""
    counts = sample_counts(trajectories, [t])[:, 0]
    N = trajectories[0].N
    return np.bincount(counts, minlength=N + 1) / len(counts)


def ensemble_csv(grid, mean, se) -> str:
    lines = ["t,mean_I,stderr"]
    lines += [f"{t:.3f},{m!r},{s!r}" for t, m, s in
              zip(np.asarray(grid, float), np.asarray(mean).tolist(), np.asarray(se).tolist())]
    return "\r\n".join(lines) + "\r\n"
