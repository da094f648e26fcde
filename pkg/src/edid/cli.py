"""Command line entry point: ``edid run | sweep | validate``.

Settings come from an optional flat ``key = value`` file (``--config``)
overridden by flags. Exit status: 0 success / all checks pass, 1 runtime
failure, 2 a validation check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import acceptance, micro
from .mobility import parse_walk
from .sim import SimConfig, curves_to_csv, run
from .sweep import TABLE_VALUES, SweepPlan, emit_reports, run_sweep, walk_values, write_atomic

EXIT_OK, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2

# config-file key -> (SimConfig field or plan setting, parser)
_KEYS = {
    "n": ("N", int),
    "c": ("C", float),
    "l": ("L", float),
    "v": ("V", float),
    "dt": ("dt", float),
    "duration": ("duration", float),
    "walk": ("walk", parse_walk),
    "seed": ("seed", int),
    "msg_source": ("msg_source", int),
    "msg_period": ("msg_period", float),
    "msg_window": ("msg_window", float),
    "reps": ("reps", int),
    "out": ("out", str),
}


def read_config(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        if not sep or key not in _KEYS:
            raise ValueError(f"{path}:{lineno}: cannot parse {raw!r}")
        name, conv = _KEYS[key]
        settings[name] = conv(value.strip())
    return settings


def _settings(args) -> tuple[SimConfig, dict]:
    settings = read_config(args.config) if args.config else {}
    for key, (name, conv) in _KEYS.items():
        value = getattr(args, key, None)
        if value is not None:
            settings[name] = conv(value) if isinstance(value, str) else value
    extra = {k: settings.pop(k) for k in ("reps", "out") if k in settings}
    base = SimConfig.full_scale() if args.full_scale else SimConfig()
    if args.full_scale:
        extra.setdefault("reps", 40)
    return replace(base, **settings), extra


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--n", type=int, help="swarm size")
    p.add_argument("--c", type=float, help="communication range (m)")
    p.add_argument("--l", type=float, help="arena side (m)")
    p.add_argument("--v", type=float, help="speed (m/s)")
    p.add_argument("--walk", help="crw:RHO | lw:ALPHA | hybrid:RHO,ALPHA")
    p.add_argument("--dt", type=float, help="tick length (s)")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--msg-period", type=float, help="seconds between message emissions")
    p.add_argument("--msg-window", type=float, help="messages are emitted while t < WINDOW")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                   help="100 h runs, 50 messages, 40 repetitions")
    p.add_argument("--workers", type=int, help="worker processes (default $EDID_WORKERS or 1)")


def _cmd_run(args) -> int:
    cfg, extra = _settings(args)
    out = run(cfg, trajectory_every=args.trajectory_every or 0)
    files = {"encounters.csv": out.log.to_csv(), "curves.csv": curves_to_csv(out.curves)}
    if out.trajectory is not None:
        files["trajectory.csv"] = out.trajectory_csv()
    report = {"tau_ideal": micro.tau_ideal(cfg.L, cfg.C, cfg.N, cfg.V)}
    try:
        report["estimate"] = micro.estimate_from_output(out).to_dict()
    except micro.EstimateUnavailable:
        report["estimate"] = None
    files["micro.json"] = json.dumps(report, indent=2, sort_keys=True) + "\n"
    dest = write_atomic(files, extra.get("out", "edid-run"))
    print(json.dumps(report, sort_keys=True))
    print(f"wrote {dest}")
    return EXIT_OK


def _sweep_values(variable: str, text: str | None):
    if text is None:
        if variable == "walk":
            raise SystemExit("--values is required for walk sweeps (or use --family)")
        return TABLE_VALUES[variable]
    parts = [v.strip() for v in text.split(";" if variable == "walk" else ",") if v.strip()]
    if variable == "walk":
        return [parse_walk(v) for v in parts]
    return [int(v) if variable == "N" else float(v) for v in parts]


def _cmd_sweep(args) -> int:
    cfg, extra = _settings(args)
    if args.family:
        values = walk_values(args.family)
        variable = "walk"
    else:
        variable = args.var
        values = _sweep_values(variable, args.values)
    plan = SweepPlan(variable, tuple(values), cfg, extra.get("reps", 5), cfg.seed)
    result = run_sweep(plan, args.workers)
    paths = emit_reports(result, extra.get("out", f"edid-sweep-{variable}"))
    print(f"wrote {len(paths)} files under {paths[0].parent if paths else '?'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg, extra = _settings(args)
    campaign = acceptance.Campaign(cfg, extra.get("reps", 5), cfg.seed, args.workers)
    verdicts = acceptance.run_all(campaign, echo=print)
    block = {v.key: v.to_dict() for v in verdicts}
    emit_reports(campaign.n_sweep, extra.get("out", "edid-validate"), acceptance=block)
    failed = [v.key for v in verdicts if not v.passed]
    print(f"{len(verdicts) - len(failed)}/{len(verdicts)} checks passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_common(p)
    p.add_argument("--trajectory-every", type=int, metavar="TICKS",
                   help="dump poses every TICKS ticks")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="sweep one variable with repetitions")
    _add_common(p)
    p.add_argument("--var", choices=["N", "C", "L", "walk"], default="N")
    p.add_argument("--values", help="comma list (walk: semicolon list of policies)")
    p.add_argument("--family", choices=["crw", "lw", "hybrid"],
                   help="sweep a whole walk family over its standard grid")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="run the desk-scale validation campaign")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        logging.getLogger("edid").error("%s", exc, exc_info=args.verbose)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
