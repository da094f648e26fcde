"""One-variable parameter sweeps with repetitions, and their reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import micro
from .fit import FitResult, fit_mdl, lambda_trend, spearman_trend
from .macro import mdl_blend
from .mobility import CRW, LW, Hybrid, WalkPolicy, parse_walk
from .sim import DiffusionCurve, SimConfig, curves_to_csv, run

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("N", "C", "L", "walk")
WORKERS_ENV = "EDID_WORKERS"
MAX_FAILURE_RATE = 0.10

# Parameter values swept for each variable, holding the rest at defaults.
TABLE_VALUES: dict[str, list] = {
    "N": list(range(6, 51, 4)),
    "C": [float(c) for c in range(6, 51, 4)],
    "L": [float(v) for v in range(40, 221, 20)],
}


def _frange(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + k * step, 10) for k in range(n + 1)]


def walk_values(family: str) -> list[WalkPolicy]:
    if family == "crw":
        return [CRW(r) for r in _frange(0.1, 0.9, 0.1)]
    if family == "lw":
        return [LW(a) for a in _frange(1.4, 2.8, 0.1)]
    if family == "hybrid":
        return [Hybrid(r, a) for r in _frange(0.2, 0.8, 0.2) for a in _frange(1.4, 2.4, 0.2)]
    raise ValueError(f"unknown walk family {family!r}")


class SweepError(RuntimeError):
    """Too many runs of a sweep failed."""


@dataclass(frozen=True)
class SweepPlan:
    variable: str
    values: tuple
    base: SimConfig = field(default_factory=SimConfig)
    reps: int = 5
    seed_base: int = 0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if self.reps < 1 or not self.values:
            raise ValueError("a sweep needs at least one value and one repetition")
        object.__setattr__(self, "values", tuple(self.values))

    def seed(self, j: int, i: int) -> int:
        return self.seed_base + j * self.reps + i

    def config(self, j: int, i: int) -> SimConfig:
        value = self.values[j]
        if self.variable == "N":
            value = int(value)
        elif self.variable == "walk" and isinstance(value, str):
            value = parse_walk(value)
        elif self.variable != "walk":
            value = float(value)
        return replace(self.base, **{self.variable: value, "seed": self.seed(j, i)})

    def label(self, j: int) -> str:
        value = self.values[j]
        if isinstance(value, (CRW, LW, Hybrid)):
            return value.encode()
        return f"{value:g}"


@dataclass
class RunRecord:
    value_index: int
    rep: int
    seed: int
    estimate: micro.MicroEstimate | None = None
    gaps: np.ndarray | None = None
    curves: list[DiffusionCurve] = field(default_factory=list)
    fits: dict[int, FitResult] = field(default_factory=dict)
    fit_errors: dict[int, str] = field(default_factory=dict)
    error: str | None = None


@dataclass
class SweepPoint:
    label: str
    value: Any
    N: int
    tau_ideal: float
    runs: list[RunRecord]

    @property
    def ok_runs(self) -> list[RunRecord]:
        return [r for r in self.runs if r.error is None]

    def fits(self) -> list[FitResult]:
        return [f for r in self.ok_runs for f in r.fits.values()]

    @property
    def tau_empirical(self) -> float:
        vals = [r.estimate.tau_empirical for r in self.ok_runs if r.estimate is not None]
        return float(np.median(vals)) if vals else math.nan

    @property
    def gap_iqr(self) -> tuple[float, float]:
        gaps = [r.gaps for r in self.ok_runs if r.gaps is not None and len(r.gaps)]
        if not gaps:
            return (math.nan, math.nan)
        q1, q3 = np.percentile(np.concatenate(gaps), [25, 75])
        return float(q1), float(q3)

    @property
    def median_lambda(self) -> float:
        lams = [f.params.lam for f in self.fits()]
        return float(np.median(lams)) if lams else math.nan

    @property
    def median_tau(self) -> float:
        taus = [f.params.tau for f in self.fits()]
        return float(np.median(taus)) if taus else math.nan

    def propagation_times(self, quantile: float = 1.0) -> list[float]:
        """Per-curve propagation times; ``inf`` where the run ended first."""
        out = []
        for r in self.ok_runs:
            for c in r.curves:
                t = propagation_time(c, quantile, self.N)
                out.append(math.inf if t is None else t)
        return out


@dataclass
class SweepResult:
    plan: SweepPlan
    points: list[SweepPoint]

    def beta_fit(self) -> micro.BetaFit:
        pts = [(p.tau_ideal, p.tau_empirical) for p in self.points
               if not math.isnan(p.tau_empirical)]
        return micro.fit_beta(pts)

    def numeric_values(self) -> list[float]:
        vals = []
        for v in self.plan.values:
            if isinstance(v, str):
                v = parse_walk(v)
            if isinstance(v, CRW):
                vals.append(v.rho)
            elif isinstance(v, LW):
                vals.append(v.alpha)
            elif isinstance(v, Hybrid):
                raise ValueError("hybrid sweeps have no single numeric axis")
            else:
                vals.append(float(v))
        return vals

    def lambda_trend(self):
        rows = [(x, f) for x, p in zip(self.numeric_values(), self.points) for f in p.fits()]
        return lambda_trend(rows)

    def tau_trend(self):
        xs = self.numeric_values()
        return spearman_trend(xs, [p.tau_empirical for p in self.points])


def propagation_time(curve: DiffusionCurve, quantile: float, N: int) -> float | None:
    """Seconds from emission until ``informed / N`` first reaches ``quantile``;
    ``None`` if it never does within the run."""
    if not 0 < quantile <= 1:
        raise ValueError("quantile must lie in (0, 1]")
    reached = np.nonzero(np.asarray(curve.informed) >= quantile * N - 1e-9)[0]
    if len(reached) == 0:
        return None
    return float(curve.times[reached[0]] - curve.t0)


def _execute(plan: SweepPlan, j: int, i: int) -> RunRecord:
    rec = RunRecord(j, i, plan.seed(j, i))
    try:
        cfg = plan.config(j, i)
        out = run(cfg)
        rec.curves = out.curves
        tau_i = micro.tau_ideal(cfg.L, cfg.C, cfg.N, cfg.V)
        try:
            rec.estimate = micro.estimate_from_output(out)
            debounce = 2 * cfg.C / cfg.V if cfg.V > 0 else 0.0
            rec.gaps = np.concatenate(
                [np.diff(ts) for ts in micro.encounter_times(out.log, cfg.N, debounce)]
            )
        except micro.EstimateUnavailable:
            pass
        tau_ref = rec.estimate.tau_empirical if rec.estimate else tau_i
        for c in out.curves:
            try:
                rec.fits[c.msg_id] = fit_mdl(
                    c, cfg.N, tau_ref=tau_ref, tau_bounds=(10 * cfg.dt, 100 * tau_i), dt=cfg.dt
                )
            except ValueError as exc:
                rec.fit_errors[c.msg_id] = str(exc)
    except Exception as exc:  # one bad run must not abort the sweep
        log.warning("run %d/%d of %s sweep failed: %s", j, i, plan.variable, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def run_sweep(plan: SweepPlan, workers: int | None = None) -> SweepResult:
    """Run every (value, repetition) of ``plan`` and aggregate per value.

    Worker count defaults to ``$EDID_WORKERS`` (1). Results are ordered by
    index, so the outcome does not depend on the number of workers.
    """
    jobs = [(j, i) for j in range(len(plan.values)) for i in range(plan.reps)]
    n_workers = _worker_count(workers)
    if n_workers == 1:
        records = [_execute(plan, j, i) for j, i in jobs]
    else:
        with ProcessPoolExecutor(n_workers) as pool:
            records = list(pool.map(_execute, [plan] * len(jobs),
                                    [j for j, _ in jobs], [i for _, i in jobs]))
    failed = sum(r.error is not None for r in records)
    if failed > MAX_FAILURE_RATE * len(records):
        raise SweepError(f"{failed} of {len(records)} runs failed")

    points = []
    for j in range(len(plan.values)):
        cfg = plan.config(j, 0)
        points.append(SweepPoint(
            plan.label(j), plan.values[j], cfg.N,
            micro.tau_ideal(cfg.L, cfg.C, cfg.N, cfg.V),
            [r for r in records if r.value_index == j],
        ))
    return SweepResult(plan, points)


# --------------------------------------------------------------------------
# reports


def _csv(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(rows)
    return buf.getvalue()


def _num(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def summarize(results: SweepResult) -> dict:
    plan = results.plan
    summary: dict[str, Any] = {
        "variable": plan.variable,
        "values": [plan.label(j) for j in range(len(plan.values))],
        "reps": plan.reps,
        "seed_base": plan.seed_base,
        "failed_runs": sum(r.error is not None for p in results.points for r in p.runs),
        "points": [],
    }
    for p in results.points:
        prop = p.propagation_times(1.0)
        with np.errstate(invalid="ignore"):  # inf - inf where runs never finished
            q25, med, q75 = (np.percentile(prop, [25, 50, 75]) if prop else (None,) * 3)
        summary["points"].append({
            "value": p.label,
            "tau_ideal": p.tau_ideal,
            "tau_empirical": _num(p.tau_empirical),
            "median_lambda": _num(p.median_lambda),
            "median_tau": _num(p.median_tau),
            "propagation_time_full": {
                "q25": _num(q25),
                "median": _num(med),
                "q75": _num(q75),
                "not_reached": sum(math.isinf(t) for t in prop),
            },
        })
    try:
        summary["beta"] = results.beta_fit().to_dict()
    except micro.DegenerateRegression:
        summary["beta"] = None
    try:
        tr = results.lambda_trend()
        summary["lambda_trend"] = {"spearman": _num(tr.rho), "p_increasing": _num(tr.p_increasing),
                                   "p_decreasing": _num(tr.p_decreasing), "n_points": tr.n_points}
    except ValueError:
        summary["lambda_trend"] = None
    return summary


def render_reports(results: SweepResult | None, acceptance: dict | None = None) -> dict[str, str]:
    """Report files as ``{relative path: text}``."""
    files: dict[str, str] = {}
    micro_rows = [["value", "tau_ideal", "tau_emp", "iqr_lo", "iqr_hi"]]
    fit_rows = [["config_id", "msg_id", "lambda", "tau", "t0", "rmse", "converged"]]
    summary: dict[str, Any] = {}
    if results is not None:
        plan = results.plan
        for j, p in enumerate(results.points):
            lo, hi = p.gap_iqr
            micro_rows.append([p.label, _fmt(p.tau_ideal), _fmt(p.tau_empirical), _fmt(lo), _fmt(hi)])
            for r in p.runs:
                config_id = f"{plan.variable}={p.label}#{r.rep}"
                for msg_id in sorted(r.fits):
                    f = r.fits[msg_id]
                    fit_rows.append([config_id, msg_id, _fmt(f.params.lam), _fmt(f.params.tau),
                                     _fmt(f.params.t0), _fmt(f.rmse),
                                     "true" if f.converged else "false"])
                stem = f"curves/{j:03d}_rep{r.rep:03d}"
                if r.curves:
                    files[f"{stem}.csv"] = curves_to_csv(r.curves)
                for c in r.curves:
                    if c.msg_id in r.fits:
                        grid = np.linspace(c.t0, c.t_end, 200)
                        model = mdl_blend(grid, r.fits[c.msg_id].params)
                        rows = [["t", "I_model"]] + [[f"{t:.3f}", repr(float(m))]
                                                     for t, m in zip(grid, model)]
                        files[f"{stem}_msg{c.msg_id:03d}_model.csv"] = _csv(rows)
        summary = summarize(results)
    if acceptance is not None:
        summary["acceptance"] = acceptance
    files["micro.csv"] = _csv(micro_rows)
    files["fits.csv"] = _csv(fit_rows)
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"
    return files


def write_atomic(files: dict[str, str], out_dir: str | os.PathLike) -> Path:
    """Write a file set into ``out_dir`` all-or-nothing, replacing the
    directory if it exists."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for rel, text in files.items():
            path = tmp / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="")
        if out.exists():
            old = out.with_name(f".{out.name}.old")
            if old.exists():
                shutil.rmtree(old)
            out.rename(old)
            tmp.rename(out)
            shutil.rmtree(old)
        else:
            tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


def emit_reports(results: SweepResult | None, out_dir, acceptance: dict | None = None) -> list[Path]:
    files = render_reports(results, acceptance)
    root = write_atomic(files, out_dir)
    return sorted(root / rel for rel in files)
