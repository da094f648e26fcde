"""Desk-scale validation campaign.

Every check returns a :class:`Verdict`. The simulation sweeps are computed
lazily and shared between checks through :class:`Campaign`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import stats

from . import macro, master
from .fit import fit_mdl
from .macro import MacroParams
from .micro import fit_beta
from .sim import DiffusionCurve, SimConfig, detect_encounters, run, curves_to_csv
from .sweep import TABLE_VALUES, SweepPlan, SweepResult, run_sweep, walk_values


@dataclass
class Verdict:
    key: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key}: {self.title}"

    def to_dict(self) -> dict:
        return {"title": self.title, "passed": self.passed, "details": _clean(self.details)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Campaign:
    """Sweeps used by the simulation-backed checks, built on first use."""

    N_VALUES = (6, 14, 22, 30, 38, 46)

    def __init__(self, base: SimConfig | None = None, reps: int = 5, seed_base: int = 0,
                 workers: int | None = None):
        self.base = base or SimConfig()
        self.reps = reps
        self.seed_base = seed_base
        self.workers = workers

    def _sweep(self, variable, values) -> SweepResult:
        plan = SweepPlan(variable, tuple(values), self.base, self.reps, self.seed_base)
        return run_sweep(plan, self.workers)

    @cached_property
    def n_sweep(self) -> SweepResult:
        return self._sweep("N", self.N_VALUES)

    @cached_property
    def c_sweep(self) -> SweepResult:
        return self._sweep("C", TABLE_VALUES["C"])

    @cached_property
    def l_sweep(self) -> SweepResult:
        return self._sweep("L", TABLE_VALUES["L"])

    @cached_property
    def crw_sweep(self) -> SweepResult:
        return self._sweep("walk", walk_values("crw"))

    @cached_property
    def defaults(self) -> SweepResult:
        return self._sweep("N", (self.base.N,))


def _strict(values, direction: int) -> bool:
    diffs = np.diff(np.asarray(values, float))
    return bool(np.all(diffs * direction > 0))


# --------------------------------------------------------------------------
# checks


def micro_validation(c: Campaign) -> Verdict:
    beta = c.n_sweep.beta_fit()
    pooled = fit_beta([pt for sw in (c.n_sweep, c.c_sweep, c.l_sweep) for pt in sw.beta_fit().points])
    n_tau = [p.tau_empirical for p in c.n_sweep.points]
    c_tau = [p.tau_empirical for p in c.c_sweep.points]
    l_tau = [p.tau_empirical for p in c.l_sweep.points]
    checks = {
        "r_squared>=0.9": beta.r_squared >= 0.9,
        "beta_in[0.5,2.0]": 0.5 <= beta.beta <= 2.0,
        "tau_decreasing_in_N": _strict(n_tau, -1),
        "tau_decreasing_in_C": _strict(c_tau, -1),
        "tau_increasing_in_L": _strict(l_tau, +1),
    }
    return Verdict("1", "micro model: tau_empirical vs tau_ideal", all(checks.values()), {
        "checks": checks, "beta": beta.beta, "r_squared": beta.r_squared,
        "beta_C": c.c_sweep.beta_fit().beta, "beta_L": c.l_sweep.beta_fit().beta,
        "beta_pooled": pooled.beta, "r_squared_pooled": pooled.r_squared,
        "tau_ideal_N": [p.tau_ideal for p in c.n_sweep.points], "tau_empirical_N": n_tau,
        "tau_empirical_C": c_tau, "tau_empirical_L": l_tau,
        "spearman_N": c.n_sweep.tau_trend().rho, "spearman_C": c.c_sweep.tau_trend().rho,
        "spearman_L": c.l_sweep.tau_trend().rho,
    })


def closed_form_equivalence(tau: float = 1000.0, N: int = 20) -> Verdict:
    grid = np.linspace(0.0, 10 * tau, 2001)
    errs = {}
    for lam, closed in ((0.0, macro.logistic_closed), (1.0, macro.gompertz_closed)):
        p = MacroParams.for_swarm(lam, tau, 0.0, N)
        errs[lam] = float(np.max(np.abs(macro.integrate_combined(p, grid) - closed(grid, p))))
    return Verdict("2", "ODE integration matches closed forms (sup <= 1e-6)",
                   all(e <= 1e-6 for e in errs.values()),
                   {"sup_error_lambda0": errs[0.0], "sup_error_lambda1": errs[1.0]})


def blend_quality(tau: float = 1000.0, N: int = 20) -> Verdict:
    grid = np.linspace(0.0, 10 * tau, 1000)
    errs = {}
    for lam in (0.25, 0.5, 0.75):
        p = MacroParams.for_swarm(lam, tau, 0.0, N)
        diff = macro.mdl_blend(grid, p) - macro.integrate_combined(p, grid)
        errs[lam] = float(np.sqrt(np.mean(diff**2)))
    return Verdict("3", "blended closed forms approximate the combined ODE (RMSE <= 0.03)",
                   all(e <= 0.03 for e in errs.values()),
                   {"grid": "[t0, t0 + 10 tau], 1000 points",
                    "rmse": {str(k): v for k, v in errs.items()}})


def mean_field_oracle(runs: int = 2000, N: int = 200, tau: float = 1.0, seed: int = 0) -> Verdict:
    grid = np.linspace(0.0, 10 * tau, 101)
    details = {}
    ok = True
    for name, lam in (("logistic", 0.0), ("gompertz", 1.0), ("blend_0.5", 0.5)):
        trajs = master.gillespie_ensemble(N, tau, lam, runs, seed)
        mean, se = master.ensemble_mean(trajs, grid)
        ode = macro.integrate_combined(MacroParams.for_swarm(lam, tau, 0.0, N), grid)
        dev = np.abs(mean - ode)
        inside = dev <= 3 * se
        ok &= bool(inside.all())
        worst = int(np.argmax(dev - 3 * se))
        details[name] = {
            "points_outside": int((~inside).sum()), "grid_points": len(grid),
            "max_abs_deviation": float(dev.max()),
            "worst_t": float(grid[worst]), "worst_dev": float(dev[worst]),
            "worst_se": float(se[worst]),
        }
    return Verdict("4", "Gillespie ensemble mean within 3 SE of the mean-field ODE", ok, details)


def parameter_recovery(N: int = 20, seed: int = 0) -> Verdict:
    details = {}
    ok = True
    rng = np.random.default_rng(seed)
    for lam, tau in itertools.product((0.0, 0.5, 1.0), (500.0, 4000.0)):
        p = MacroParams.for_swarm(lam, tau, 0.0, N)
        grid = np.linspace(0.0, 12 * tau, 1000)
        clean = macro.mdl_blend(grid, p)
        noisy = clean + rng.normal(0.0, 0.01, grid.size)
        f = fit_mdl(DiffusionCurve(0, 0.0, grid, clean * N, grid[-1]), N)
        g = fit_mdl(DiffusionCurve(0, 0.0, grid, noisy * N, grid[-1]), N)
        row = {
            "lambda": f.params.lam, "tau": f.params.tau,
            "lambda_noisy": g.params.lam,
            "lambda_ok": abs(f.params.lam - lam) <= 0.05,
            "tau_ok": abs(f.params.tau - tau) <= 0.02 * tau,
            "noisy_lambda_ok": abs(g.params.lam - lam) <= 0.15,
        }
        ok &= row["lambda_ok"] and row["tau_ok"] and row["noisy_lambda_ok"]
        details[f"lambda={lam},tau={tau:g}"] = row
    return Verdict("5", "fit recovers (lambda, tau) from synthetic curves", ok, details)


def empirical_fit_quality(c: Campaign) -> Verdict:
    rmses = [f.rmse for f in c.defaults.points[0].fits()]
    med = float(np.median(rmses)) if rmses else math.inf
    return Verdict("6", "median fit RMSE on default-config curves <= 0.03", med <= 0.03,
                   {"median_rmse": med, "curves": len(rmses), "max_rmse": max(rmses, default=math.nan)})


def lambda_trends(c: Campaign) -> Verdict:
    tc = c.c_sweep.lambda_trend()
    tl = c.l_sweep.lambda_trend()
    ok_c = tc.defined and tc.rho > 0 and tc.p_increasing < 0.05
    ok_l = tl.defined and tl.rho < 0 and tl.p_decreasing < 0.05
    return Verdict("7", "lambda rises with C and falls with L (one-sided p < 0.05)", ok_c and ok_l, {
        "C": {"spearman": tc.rho, "p_one_sided": tc.p_increasing, "passed": ok_c,
              "median_lambda": [p.median_lambda for p in c.c_sweep.points]},
        "L": {"spearman": tl.rho, "p_one_sided": tl.p_decreasing, "passed": ok_l,
              "median_lambda": [p.median_lambda for p in c.l_sweep.points]},
    })


def walk_ordering(c: Campaign) -> Verdict:
    rhos = c.crw_sweep.numeric_values()
    medians = [float(np.median(p.propagation_times(1.0))) for p in c.crw_sweep.points]
    r = float(stats.spearmanr(rhos, medians).statistic)
    return Verdict("8", "full-propagation time falls as CRW rho grows (Spearman <= -0.8)",
                   r <= -0.8, {"rho": rhos, "median_full_propagation_s": medians, "spearman": r})


def exactness(instances: int = 500, seed: int = 0) -> Verdict:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(instances):
        n = int(rng.integers(2, 120))
        L = float(rng.uniform(20, 300))
        C = float(rng.uniform(0.5, 0.5 * L))
        pos = rng.random((n, 2)) * L
        if detect_encounters(pos, C) != brute_force_pairs(pos, C):
            mismatches += 1
    cfg = SimConfig(duration=2 * 3600.0, msg_window=3600.0, seed=12345)
    a, b = run(cfg), run(cfg)
    identical = (a.log.to_csv() == b.log.to_csv()
                 and curves_to_csv(a.curves) == curves_to_csv(b.curves))
    return Verdict("9", "spatial hash equals brute force; reruns are byte-identical",
                   mismatches == 0 and identical,
                   {"instances": instances, "mismatches": mismatches, "rerun_identical": identical})


def brute_force_pairs(positions, C: float) -> set[tuple[int, int]]:
    pts = [tuple(map(float, p)) for p in positions]
    out = set()
    for i, j in itertools.combinations(range(len(pts)), 2):
        dx = pts[i][0] - pts[j][0]
        dy = pts[i][1] - pts[j][1]
        if dx * dx + dy * dy < C * C:
            out.add((i, j))
    return out


def checks(campaign: Campaign) -> list[tuple[str, Callable[[], Verdict]]]:
    return [
        ("1", lambda: micro_validation(campaign)),
        ("2", closed_form_equivalence),
        ("3", blend_quality),
        ("4", mean_field_oracle),
        ("5", parameter_recovery),
        ("6", lambda: empirical_fit_quality(campaign)),
        ("7", lambda: lambda_trends(campaign)),
        ("8", lambda: walk_ordering(campaign)),
        ("9", exactness),
    ]


def run_all(campaign: Campaign | None = None, echo: Callable[[str], None] | None = None) -> list[Verdict]:
    campaign = campaign or Campaign()
    verdicts = []
    for _, check in checks(campaign):
        v = check()
        verdicts.append(v)
        if echo:
            echo(v.line())
    return verdicts
