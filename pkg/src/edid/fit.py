"""Least-squares fit of the blended logistic/Gompertz model to diffusion curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .macro import MacroParams, mdl_blend
from .sim import DiffusionCurve

GRID_POINTS = 1000


@dataclass
class FitResult:
    params: MacroParams
    rmse: float
    n_points: int
    converged: bool
    iterations: int


@dataclass
class TrendResult:
    """Spearman correlation of fitted lambda against a swept variable."""

    rho: float
    p_increasing: float
    p_decreasing: float
    n_points: int

    @property
    def defined(self) -> bool:
        return not math.isnan(self.rho)


def rmse(curve: DiffusionCurve, model: Callable, N: int | None = None) -> float:
    """RMS residual of ``model(t)`` against the curve's own samples.

    ``N`` normalises counts to fractions; omit it when ``curve.informed``
    already holds fractions.
    """
    if len(curve.times) == 0:
        raise ValueError("curve has no samples")
    observed = np.asarray(curve.informed, float) / (N or 1)
    resid = observed - np.asarray(model(np.asarray(curve.times, float)), float)
    return float(np.sqrt(np.mean(resid**2)))


def resample(curve: DiffusionCurve, N: int, points: int = GRID_POINTS):
    """Uniform grid over ``[t0, t_end]`` and the curve's fraction on it."""
    t_end = max(curve.t_end, curve.times[-1])
    grid = np.linspace(curve.t0, t_end, points)
    return grid, curve.count_at(grid) / N


def _rough_tau(grid, frac, I0):
    """Half-rise time over the logistic midpoint factor, as a start scale."""
    target = I0 + 0.5 * (frac[-1] - I0)
    idx = np.argmax(frac >= target)
    half = grid[idx] - grid[0]
    return max(half, grid[1] - grid[0]) / max(math.log((1 - I0) / I0), 1.0)


def fit_mdl(
    curve: DiffusionCurve,
    N: int,
    *,
    tau_ref: float | None = None,
    tau_bounds: tuple[float, float] | None = None,
    dt: float = 1.0,
) -> FitResult:
    """Fit ``(lam, tau, t0)`` of :func:`~edid.macro.mdl_blend` with ``I0 = 1/N``.

    ``tau_ref`` is the expected mean free time (beta * tau_ideal); it centres
    the start grid and sets the t0 window to emission +- tau_ref. Without it
    a scale is read off the curve's half-rise time. The default tau bounds
    are ``[10 dt, 100 tau_ref]``.
    """
    if len(curve.times) < 5:
        raise ValueError("need at least 5 samples to fit")
    I0 = 1.0 / N
    grid, frac = resample(curve, N)
    emission = float(curve.t0)
    degenerate = frac.max() <= I0
    if tau_ref is None:
        tau_ref = _rough_tau(grid, frac, I0) if not degenerate else grid[-1] - grid[0]
    lo, hi = tau_bounds if tau_bounds is not None else (10 * dt, 100 * tau_ref)
    lo = min(lo, hi)

    if degenerate:
        params = MacroParams(0.0, hi, emission, I0, N)
        err = float(np.sqrt(np.mean((frac - mdl_blend(grid, params)) ** 2)))
        return FitResult(params, err, len(grid), False, 0)

    # Optimise in units of tau_ref so the simplex is well scaled and the
    # problem is invariant under shifting the curve in time.
    rel = grid - emission

    def unpack(z):
        return z[0], z[1] * tau_ref, emission + z[2] * tau_ref

    def objective(z):
        p = MacroParams(z[0], z[1] * tau_ref, z[2] * tau_ref, I0)
        return float(np.sqrt(np.mean((frac - mdl_blend(rel, p)) ** 2)))

    bounds = [(0.0, 1.0), (lo / tau_ref, hi / tau_ref), (-1.0, 1.0)]
    starts = [
        (lam, t_scale, shift)
        for lam in (0.0, 0.5, 1.0)
        for t_scale in (1 / 3, 1.0, 3.0)
        for shift in (-0.5, 0.0, 0.5)
    ]
    best = None
    for z0 in starts:
        z0 = np.clip(z0, [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(
            objective, z0, method="Nelder-Mead", bounds=bounds,
            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 4000, "maxfev": 8000},
        )
        if best is None or res.fun < best.fun:
            best = res
    lam, tau, t0 = unpack(best.x)
    params = MacroParams(float(lam), float(tau), float(t0), I0, N)
    return FitResult(params, float(best.fun), len(grid), bool(best.success), int(best.nit))


def lambda_trend(results: Sequence[tuple[float, FitResult]]) -> TrendResult:
    """Spearman rank correlation between a sweep variable and median lambda."""
    by_value: dict[float, list[float]] = {}
    for value, fr in results:
        by_value.setdefault(float(value), []).append(fr.params.lam)
    if len(by_value) < 4:
        raise ValueError("need at least 4 sweep points")
    xs = sorted(by_value)
    lams = [float(np.median(by_value[x])) for x in xs]
    return spearman_trend(xs, lams)


def spearman_trend(xs, ys) -> TrendResult:
    if len(set(ys)) < 2:
        return TrendResult(math.nan, math.nan, math.nan, len(xs))
    up = stats.spearmanr(xs, ys, alternative="greater")
    down = stats.spearmanr(xs, ys, alternative="less")
    return TrendResult(float(up.statistic), float(up.pvalue), float(down.pvalue), len(xs))


def fits_csv(rows) -> str:
    """``rows``: iterable of ``(config_id, msg_id, FitResult)``."""
    lines = ["config_id,msg_id,lambda,tau,t0,rmse,converged"]
    for config_id, msg_id, fr in rows:
        p = fr.params
        lines.append(f"{config_id},{msg_id},{p.lam!r},{p.tau!r},{p.t0!r},{fr.rmse!r},"
                     f"{'true' if fr.converged else 'false'}")
    return "\r\n".join(lines) + "\r\n"
