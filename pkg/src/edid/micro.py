"""Mean free time between encounters: kinetic prediction, empirical estimate,
and the through-origin regression that relates the two."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .sim import EncounterEvent, EncounterLog, SimOutput


class EstimateUnavailable(Exception):
    """The log holds no complete inter-encounter gap."""


class DegenerateRegression(ValueError):
    pass


@dataclass
class MicroEstimate:
    tau_ideal: float
    tau_empirical: float
    n_gaps: int
    iqr: tuple[float, float]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BetaFit:
    beta: float
    r_squared: float
    points: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "r_squared": self.r_squared,
                "points": [list(p) for p in self.points]}


def tau_ideal(L: float, C: float, N: int, V: float) -> float:
    """Kinetic mean free time ``L**2 / (C (N - 1) V)`` in seconds."""
    if N < 2:
        raise ValueError(f"need N >= 2 robots to have an encounter, got {N}")
    if not (L > 0 and C > 0 and V > 0):
        raise ValueError("L, C and V must be positive")
    return L * L / (C * (N - 1) * V)


def mean_free_path(L: float, C: float, N: int) -> float:
    return L * L / (C * (N - 1))


def encounter_times(log, N: int, debounce: float = 0.0) -> list[np.ndarray]:
    """Per-robot sorted encounter times from rising edges.

    Rising edges of one pair closer than ``debounce`` seconds to that pair's
    previous rising edge are dropped as boundary flicker.
    """
    log = EncounterLog.from_events(log)
    rising = log.rising
    t, a, b = log.t[rising], log.a[rising], log.b[rising]
    order = np.lexsort((t, b, a))
    t, a, b = t[order], a[order], b[order]
    keep = np.ones(len(t), dtype=bool)
    if debounce > 0 and len(t) > 1:
        same_pair = (a[1:] == a[:-1]) & (b[1:] == b[:-1])
        keep[1:] = ~(same_pair & (t[1:] - t[:-1] < debounce))
    t, a, b = t[keep], a[keep], b[keep]
    robots = np.concatenate([a, b])
    times = np.concatenate([t, t])
    out = []
    for r in range(N):
        out.append(np.sort(times[robots == r]))
    return out


def estimate_tau_empirical(
    log: EncounterLog | Sequence[EncounterEvent],
    N: int,
    duration: float,
    *,
    debounce: float = 0.0,
    tau_ideal: float = math.nan,
) -> MicroEstimate:
    """Pool every robot's consecutive encounter gaps and summarise them.

    The censored stretches before a robot's first and after its last
    encounter are not gaps.
    """
    log = EncounterLog.from_events(log)
    if len(log) and log.t.max() > duration + 1e-9:
        raise ValueError("log contains events after the stated duration")
    gaps = [np.diff(ts) for ts in encounter_times(log, N, debounce)]
    pooled = np.concatenate(gaps) if gaps else np.zeros(0)
    if len(pooled) == 0:
        raise EstimateUnavailable("no robot has two encounters in the log")
    q1, q3 = np.percentile(pooled, [25, 75])
    return MicroEstimate(tau_ideal, float(pooled.mean()), int(len(pooled)),
                         (float(q1), float(q3)))


def estimate_from_output(output: SimOutput) -> MicroEstimate:
    """Estimate with the run's ideal value and a ``2 C / V`` debounce window."""
    cfg = output.config
    debounce = 2 * cfg.C / cfg.V if cfg.V > 0 else 0.0
    return estimate_tau_empirical(
        output.log, cfg.N, cfg.duration,
        debounce=debounce, tau_ideal=tau_ideal(cfg.L, cfg.C, cfg.N, cfg.V),
    )


def fit_beta(points: Sequence[tuple[float, float]]) -> BetaFit:
    """Least squares of ``tau_empirical = beta * tau_ideal`` through the origin.

    ``r_squared`` is the uncentred coefficient of determination that goes
    with a no-intercept model, ``1 - SS_res / sum(y**2)``.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise DegenerateRegression("no points to regress")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise DegenerateRegression("all tau_ideal values are zero")
    beta = float(np.dot(x, y)) / sxx
    syy = float(np.dot(y, y))
    ss_res = float(np.sum((y - beta * x) ** 2))
    r2 = 1.0 - ss_res / syy if syy > 0 else 1.0
    return BetaFit(beta, min(max(r2, 0.0), 1.0), pts)


def report_json(estimates: dict, betas: dict) -> str:
    """Serialise micro estimates and beta fits for the validation report."""
    return json.dumps(
        {"estimates": {str(k): v.to_dict() for k, v in estimates.items()},
         "beta": {str(k): v.to_dict() for k, v in betas.items()}},
        indent=2, sort_keys=True,
    )
