"""Mean-field diffusion laws for the informed fraction ``I(t)``.

The logistic law ``dI/dt = I (1 - I) / tau`` describes a sparse, well-mixed
swarm; the Gompertz law ``dI/dt = I ln(1/I) / tau`` a dense swarm in which
messages lose their surprise. ``combined_rate`` mixes the two with weight
``lam`` on the Gompertz term. Only the two pure laws integrate in closed form;
``mdl_blend`` approximates the mixture by blending those closed forms, and
``integrate_combined`` solves the mixed ODE numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

# Lower clamp for I inside the integrator; keeps ln(1/I) finite.
I_FLOOR = 1e-12


@dataclass(frozen=True)
class MacroParams:
    lam: float
    tau: float
    t0: float = 0.0
    I0: float = 0.05
    N: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 < self.I0 < 1.0:
            raise ValueError(f"I0 must lie in (0, 1), got {self.I0}")

    @classmethod
    def for_swarm(cls, lam: float, tau: float, t0: float, N: int) -> "MacroParams":
        """Parameters with the single-source start ``I0 = 1/N``."""
        return cls(lam, tau, t0, 1.0 / N, N)


def logistic_rate(I, tau):
    I = np.asarray(I, dtype=float)
    return I * (1.0 - I) / tau


def gompertz_rate(I, tau):
    """``I ln(1/I) / tau``, continued by 0 at ``I = 0``."""
    I = np.asarray(I, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -I * np.log(I) / tau
    return np.where(I > 0, r, 0.0)


def combined_rate(I, params: MacroParams):
    return (params.lam * gompertz_rate(I, params.tau)
            + (1.0 - params.lam) * logistic_rate(I, params.tau))


def logistic_closed(t, params: MacroParams):
    t = np.asarray(t, dtype=float)
    I0 = params.I0
    return I0 / (I0 + (1.0 - I0) * np.exp(-(t - params.t0) / params.tau))


def gompertz_closed(t, params: MacroParams):
    # exp(ln I0 * e^{-s}): equals I0 at t0 and tends to 1.
    t = np.asarray(t, dtype=float)
    return np.exp(math.log(params.I0) * np.exp(-(t - params.t0) / params.tau))


def mdl_blend(t, params: MacroParams):
    """Blend of the closed forms: ``lam * Gompertz + (1 - lam) * logistic``."""
    return (params.lam * gompertz_closed(t, params)
            + (1.0 - params.lam) * logistic_closed(t, params))


@numba.njit(cache=True)
def _rate(I, lam, tau):
    if I < I_FLOOR:
        I = I_FLOOR
    elif I > 1.0:
        I = 1.0
    return (lam * I * math.log(1.0 / I) + (1.0 - lam) * I * (1.0 - I)) / tau


@numba.njit(cache=True)
def _rk4_grid(grid, I0, lam, tau, h_max):
    out = np.empty(grid.shape[0])
    I = I0
    out[0] = I
    for k in range(1, grid.shape[0]):
        span = grid[k] - grid[k - 1]
        n = max(1, int(math.ceil(span / h_max - 1e-12)))
        h = span / n
        for _ in range(n):
            k1 = _rate(I, lam, tau)
            k2 = _rate(I + 0.5 * h * k1, lam, tau)
            k3 = _rate(I + 0.5 * h * k2, lam, tau)
            k4 = _rate(I + h * k3, lam, tau)
            I = I + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            I = min(max(I, I_FLOOR), 1.0)
        out[k] = I
    return out


def integrate_combined(params: MacroParams, grid, h_max: float | None = None) -> np.ndarray:
    """Fixed-step RK4 solution of the combined ODE sampled on ``grid``.

    ``grid[0]`` must equal ``params.t0``; the internal step never exceeds
    ``tau / 1000`` or ``h_max`` when given.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D sequence of times")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if not math.isclose(grid[0], params.t0, rel_tol=0, abs_tol=1e-9 * max(1.0, abs(params.t0))):
        raise ValueError(f"grid must start at t0={params.t0}, starts at {grid[0]}")
    h = params.tau / 1000.0
    if h_max is not None:
        h = min(h, h_max)
    return _rk4_grid(grid, params.I0, params.lam, params.tau, h)


def curve_csv(t, I) -> str:
    """Model curve as CSV ``t,I_model``."""
    lines = ["t,I_model"]
    lines += [f"{ti:.3f},{Ii!r}" for ti, Ii in zip(np.asarray(t, float), np.asarray(I, float).tolist())]
    return "\r\n".join(lines) + "\r\n"
