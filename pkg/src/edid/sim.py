"""Kinematic swarm simulator with encounter detection and message exchange.

Each tick advances every robot, finds the pairs closer than the
communication range with a uniform-grid spatial hash, logs rising/falling
edges of the per-pair in-range state, and merges the message sets of every
in-range pair. Merging reads a snapshot taken before the tick, so a message
moves at most one hop per tick.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numba
import numpy as np

from . import mobility
from .mobility import CRW, WalkPolicy

RISING = 1
FALLING = 0

HOUR = 3600.0

# Cells are slightly wider than C so float rounding in x / cell can never
# separate an in-range pair by more than one cell.
_CELL_PAD = 1.0 + 1e-9


class ConfigError(ValueError):
    """A simulation configuration violates its invariants."""


@dataclass(frozen=True)
class SimConfig:
    N: int = 20
    C: float = 10.0
    L: float = 200.0
    V: float = 0.05
    dt: float = 1.0
    duration: float = 20 * HOUR
    walk: WalkPolicy = field(default_factory=lambda: CRW(0.7))
    seed: int = 0
    msg_source: int = 0
    msg_period: float = HOUR
    msg_window: float = 5 * HOUR

    @classmethod
    def full_scale(cls, **overrides) -> "SimConfig":
        """Full-length schedule: 100 h runs, one message per hour for 50 h."""
        values = dict(duration=100 * HOUR, msg_window=50 * HOUR)
        values.update(overrides)
        return cls(**values)

    def validate(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N}")
        if not (self.C > 0 and self.L > 0):
            raise ConfigError("C and L must be positive")
        if self.V < 0:
            raise ConfigError("V must be non-negative")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.duration < 0 or self.msg_window < 0:
            raise ConfigError("duration and msg_window must be non-negative")
        if self.duration < self.msg_window:
            raise ConfigError("duration must cover the message window")
        if not self.msg_period > 0:
            raise ConfigError("msg_period must be positive")
        if not 0 <= self.msg_source < self.N:
            raise ConfigError(f"msg_source {self.msg_source} is not a robot index")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            mobility.kernel_params(self.walk, self.L)
        except (mobility.ParameterDomainError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.C >= self.L:
            warnings.warn(
                f"communication range C={self.C} is not short relative to L={self.L}",
                stacklevel=2,
            )

    @property
    def n_ticks(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))

    def emission_times(self) -> list[float]:
        times = []
        k = 0
        while k * self.msg_period < self.msg_window - 1e-9 * self.msg_period:
            times.append(k * self.msg_period)
            k += 1
        return times


@dataclass(frozen=True)
class EncounterEvent:
    t: float
    a: int
    b: int
    kind: str  # "rising" | "falling"


@dataclass
class EncounterLog:
    """Columnar encounter log; iterates as :class:`EncounterEvent`."""

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    rising: np.ndarray

    @classmethod
    def empty(cls) -> "EncounterLog":
        return cls(np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64),
                   np.zeros(0, bool))

    @classmethod
    def from_events(cls, events: Sequence[EncounterEvent]) -> "EncounterLog":
        if isinstance(events, EncounterLog):
            return events
        for e in events:
            if e.kind not in ("rising", "falling"):
                raise ValueError(f"unknown event kind {e.kind!r}")
        return cls(
            np.array([e.t for e in events], dtype=float),
            np.array([min(e.a, e.b) for e in events], dtype=np.int64),
            np.array([max(e.a, e.b) for e in events], dtype=np.int64),
            np.array([e.kind == "rising" for e in events], dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[EncounterEvent]:
        for t, a, b, r in zip(self.t, self.a, self.b, self.rising):
            yield EncounterEvent(float(t), int(a), int(b), "rising" if r else "falling")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["t", "a", "b", "kind"])
        for t, a, b, r in zip(self.t, self.a, self.b, self.rising):
            w.writerow([f"{t:.3f}", int(a), int(b), "rising" if r else "falling"])
        return buf.getvalue()


@dataclass
class DiffusionCurve:
    """Informed count of one message over time.

    ``times``/``informed`` hold one sample at emission plus one per change;
    ``t_end`` is when observation stopped, the count being flat after the
    last sample.
    """

    msg_id: int
    t0: float
    times: np.ndarray
    informed: np.ndarray
    t_end: float

    @property
    def samples(self) -> list[tuple[float, int]]:
        return [(float(t), int(n)) for t, n in zip(self.times, self.informed)]

    def fraction(self, N: int) -> np.ndarray:
        return self.informed / N

    def count_at(self, t) -> np.ndarray:
        """Step-function value at time(s) ``t`` (right-continuous)."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.informed[np.clip(idx, 0, None)]


def curves_to_csv(curves: Sequence[DiffusionCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["msg_id", "t", "informed"])
    for c in curves:
        for t, n in zip(c.times, c.informed):
            w.writerow([c.msg_id, f"{t:.3f}", int(n)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# spatial hash


@numba.njit(cache=True)
def _grid_pairs(xs, ys, C, x0, y0, cell, ncx, ncy):
    n = xs.shape[0]
    cx = np.empty(n, np.int64)
    cy = np.empty(n, np.int64)
    cid = np.empty(n, np.int64)
    counts = np.zeros(ncx * ncy + 1, np.int64)
    for i in range(n):
        ix = int((xs[i] - x0) / cell)
        iy = int((ys[i] - y0) / cell)
        ix = min(max(ix, 0), ncx - 1)
        iy = min(max(iy, 0), ncy - 1)
        cx[i] = ix
        cy[i] = iy
        cid[i] = ix * ncy + iy
        counts[cid[i] + 1] += 1
    starts = np.cumsum(counts)
    fill = starts[:-1].copy()
    order = np.empty(n, np.int64)
    for i in range(n):
        order[fill[cid[i]]] = i
        fill[cid[i]] += 1

    C2 = C * C
    cap = 16
    out = np.empty((cap, 2), np.int64)
    k = 0
    for i in range(n):
        for dx in range(-1, 2):
            gx = cx[i] + dx
            if gx < 0 or gx >= ncx:
                continue
            for dy in range(-1, 2):
                gy = cy[i] + dy
                if gy < 0 or gy >= ncy:
                    continue
                c = gx * ncy + gy
                for s in range(starts[c], starts[c + 1]):
                    j = order[s]
                    if j <= i:
                        continue
                    ddx = xs[i] - xs[j]
                    ddy = ys[i] - ys[j]
                    if ddx * ddx + ddy * ddy < C2:
                        if k == cap:
                            cap *= 2
                            grown = np.empty((cap, 2), np.int64)
                            grown[:k] = out[:k]
                            out = grown
                        out[k, 0] = i
                        out[k, 1] = j
                        k += 1
    out = out[:k]
    keys = out[:, 0] * n + out[:, 1]
    return out[np.argsort(keys)]


def _grid_shape(extent_x: float, extent_y: float, C: float) -> tuple[float, int, int]:
    cell = C * _CELL_PAD
    return cell, max(1, int(math.ceil(extent_x / cell))), max(1, int(math.ceil(extent_y / cell)))


def detect_encounters(positions, C: float) -> set[tuple[int, int]]:
    """Pairs ``(a, b)``, ``a < b``, whose Euclidean distance is below ``C``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pos) < 2:
        return set()
    x0, y0 = pos.min(axis=0)
    x1, y1 = pos.max(axis=0)
    cell, ncx, ncy = _grid_shape(x1 - x0, y1 - y0, C)
    pairs = _grid_pairs(pos[:, 0].copy(), pos[:, 1].copy(), float(C), x0, y0, cell, ncx, ncy)
    return {(int(a), int(b)) for a, b in pairs}


# --------------------------------------------------------------------------
# tick loop


@numba.njit(cache=True)
def _push(buf, k, row):
    if k == buf.shape[0]:
        grown = np.empty((2 * buf.shape[0], buf.shape[1]), buf.dtype)
        grown[:k] = buf[:k]
        buf = grown
    for j in range(buf.shape[1]):
        buf[k, j] = row[j]
    return buf


@numba.njit(cache=True)
def _run_ticks(
    xs, ys, hs, rem,
    kind, rho, alpha, lo, hi, step, L,
    C, cell, ncx, ncy,
    informed, counts, emit_ticks, source,
    in_mat, pairs,
    tick, n_ticks, rng, traj_every,
):
    n = xs.shape[0]
    n_msg = informed.shape[0]
    events = np.empty((64, 4), np.int64)
    n_ev = 0
    samples = np.empty((64, 3), np.int64)
    n_s = 0
    n_traj = 0
    if traj_every > 0:
        n_traj = n_ticks // traj_every
    traj = np.empty((n_traj, n, 4))
    k_traj = 0
    row4 = np.empty(4, np.int64)
    row3 = np.empty(3, np.int64)

    for _ in range(n_ticks):
        tick += 1
        for i in range(n):
            xs[i], ys[i], hs[i], rem[i] = mobility._advance(
                xs[i], ys[i], hs[i], rem[i], kind, rho, alpha, lo, hi, step, L, rng
            )
        new_pairs = _grid_pairs(xs, ys, C, 0.0, 0.0, cell, ncx, ncy)

        # falling edges: previously in range, no longer
        for p in range(pairs.shape[0]):
            in_mat[pairs[p, 0], pairs[p, 1]] = False
        for p in range(new_pairs.shape[0]):
            in_mat[new_pairs[p, 0], new_pairs[p, 1]] = True
        for p in range(pairs.shape[0]):
            a = pairs[p, 0]
            b = pairs[p, 1]
            if not in_mat[a, b]:
                row4[0] = tick; row4[1] = a; row4[2] = b; row4[3] = 0
                events = _push(events, n_ev, row4)
                n_ev += 1
        # rising edges: membership test against the previous pair list
        q = 0
        for p in range(new_pairs.shape[0]):
            a = new_pairs[p, 0]
            b = new_pairs[p, 1]
            key = a * n + b
            while q < pairs.shape[0] and pairs[q, 0] * n + pairs[q, 1] < key:
                q += 1
            if q < pairs.shape[0] and pairs[q, 0] == a and pairs[q, 1] == b:
                continue
            row4[0] = tick; row4[1] = a; row4[2] = b; row4[3] = 1
            events = _push(events, n_ev, row4)
            n_ev += 1
        pairs = new_pairs

        if pairs.shape[0] > 0 and n_msg > 0:
            snapshot = informed.copy()
            for p in range(pairs.shape[0]):
                a = pairs[p, 0]
                b = pairs[p, 1]
                for m in range(n_msg):
                    if snapshot[m, b]:
                        informed[m, a] = True
                    if snapshot[m, a]:
                        informed[m, b] = True
            for m in range(n_msg):
                if counts[m] == 0 or counts[m] == n:
                    continue
                c = 0
                for i in range(n):
                    if informed[m, i]:
                        c += 1
                if c != counts[m]:
                    counts[m] = c
                    row3[0] = m; row3[1] = tick; row3[2] = c
                    samples = _push(samples, n_s, row3)
                    n_s += 1

        for m in range(n_msg):
            if emit_ticks[m] == tick:
                informed[m, source] = True
                counts[m] = 1
                row3[0] = m; row3[1] = tick; row3[2] = 1
                samples = _push(samples, n_s, row3)
                n_s += 1

        if traj_every > 0 and tick % traj_every == 0 and k_traj < n_traj:
            for i in range(n):
                traj[k_traj, i, 0] = tick
                traj[k_traj, i, 1] = xs[i]
                traj[k_traj, i, 2] = ys[i]
                traj[k_traj, i, 3] = hs[i]
            k_traj += 1

    return tick, pairs, events[:n_ev], samples[:n_s], traj[:k_traj]


# --------------------------------------------------------------------------
# world state


@dataclass
class World:
    """Mutable simulation state. Build with :func:`init_world`."""

    config: SimConfig
    rng: np.random.Generator
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    remaining: np.ndarray
    informed: np.ndarray  # (messages, robots) bool
    counts: np.ndarray
    emit_ticks: np.ndarray
    in_mat: np.ndarray
    pairs: np.ndarray
    tick: int = 0
    event_chunks: list = field(default_factory=list)
    sample_chunks: list = field(default_factory=list)
    traj_chunks: list = field(default_factory=list)
    traj0: np.ndarray | None = None

    @property
    def t(self) -> float:
        return self.tick * self.config.dt

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def poses(self) -> list[mobility.Pose]:
        return [mobility.Pose(*v) for v in zip(self.x, self.y, self.heading, self.remaining)]


def init_world(config: SimConfig, positions=None, headings=None) -> World:
    """Place robots (uniformly unless ``positions`` is given) and emit the
    messages due at t = 0."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    N = int(config.N)
    if positions is None:
        pos = rng.random((N, 2)) * config.L
    else:
        pos = np.array(positions, dtype=float).reshape(N, 2)
        if pos.min() < 0 or pos.max() > config.L:
            raise ConfigError("initial positions must lie in the arena")
    if headings is None:
        hd = rng.random(N) * 2 * math.pi - math.pi
    else:
        hd = np.array(headings, dtype=float).reshape(N)

    emit_times = config.emission_times()
    emit_ticks = np.array(
        [int(math.ceil(t / config.dt - 1e-9)) for t in emit_times], dtype=np.int64
    )
    informed = np.zeros((len(emit_ticks), N), dtype=bool)
    counts = np.zeros(len(emit_ticks), dtype=np.int64)

    x = pos[:, 0].copy()
    y = pos[:, 1].copy()
    cell, ncx, ncy = _grid_shape(config.L, config.L, config.C)
    pairs = _grid_pairs(x, y, float(config.C), 0.0, 0.0, cell, ncx, ncy)
    in_mat = np.zeros((N, N), dtype=bool)
    in_mat[pairs[:, 0], pairs[:, 1]] = True

    world = World(config, rng, x, y, hd, np.zeros(N), informed, counts,
                  emit_ticks, in_mat, pairs)
    initial = []
    for m, et in enumerate(emit_ticks):
        if et == 0:
            informed[m, config.msg_source] = True
            counts[m] = 1
            initial.append((m, 0, 1))
    world.sample_chunks.append(np.array(initial, dtype=np.int64).reshape(-1, 3))
    return world


def _advance_world(world: World, n_ticks: int, traj_every: int = 0) -> World:
    cfg = world.config
    kind, rho, alpha, lo, hi = mobility.kernel_params(cfg.walk, cfg.L)
    cell, ncx, ncy = _grid_shape(cfg.L, cfg.L, cfg.C)
    tick, pairs, events, samples, traj = _run_ticks(
        world.x, world.y, world.heading, world.remaining,
        kind, rho, alpha, lo, hi, float(cfg.V * cfg.dt), float(cfg.L),
        float(cfg.C), cell, ncx, ncy,
        world.informed, world.counts, world.emit_ticks, int(cfg.msg_source),
        world.in_mat, world.pairs,
        world.tick, int(n_ticks), world.rng, int(traj_every),
    )
    world.tick = tick
    world.pairs = pairs
    world.event_chunks.append(events)
    world.sample_chunks.append(samples)
    if traj_every:
        world.traj_chunks.append(traj)
    return world


def step(world: World) -> World:
    """Advance the world by one tick (in place) and return it."""
    return _advance_world(world, 1)


@dataclass
class SimOutput:
    config: SimConfig
    log: EncounterLog
    curves: list[DiffusionCurve]
    trajectory: np.ndarray | None = None  # (records, robots, [t, x, y, heading])

    def trajectory_csv(self) -> str:
        if self.trajectory is None:
            raise ValueError("trajectory was not recorded")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["t", "robot", "x", "y", "heading"])
        for rec in self.trajectory:
            for i, (t, x, y, h) in enumerate(rec):
                w.writerow([f"{t:.3f}", i, repr(float(x)), repr(float(y)), repr(float(h))])
        return buf.getvalue()


def collect(world: World) -> SimOutput:
    cfg = world.config
    ev = np.concatenate([c.reshape(-1, 4) for c in world.event_chunks]) if world.event_chunks \
        else np.zeros((0, 4), np.int64)
    log = EncounterLog(ev[:, 0] * cfg.dt, ev[:, 1].copy(), ev[:, 2].copy(), ev[:, 3] == RISING)
    samples = np.concatenate([c.reshape(-1, 3) for c in world.sample_chunks])
    curves = []
    t_end = world.t
    for m, et in enumerate(world.emit_ticks):
        rows = samples[samples[:, 0] == m]
        if len(rows) == 0:
            continue  # not yet emitted
        curves.append(DiffusionCurve(m, et * cfg.dt, rows[:, 1] * cfg.dt,
                                     rows[:, 2].copy(), t_end))
    traj = None
    if world.traj_chunks:
        first = np.empty((1, cfg.N, 4))
        first[0, :, 0] = 0
        first[0, :, 1] = world.traj0[:, 0]
        first[0, :, 2] = world.traj0[:, 1]
        first[0, :, 3] = world.traj0[:, 2]
        traj = np.concatenate([first] + world.traj_chunks)
        traj[:, :, 0] *= cfg.dt
    return SimOutput(cfg, log, curves, traj)


def run(config: SimConfig, trajectory_every: int = 0) -> SimOutput:
    """Simulate ``config`` from a seeded uniform start to ``config.duration``.

    ``trajectory_every`` > 0 records poses every that many ticks.
    """
    world = init_world(config)
    if trajectory_every:
        world.traj0 = np.column_stack([world.x, world.y, world.heading]).copy()
    _advance_world(world, config.n_ticks, trajectory_every)
    return collect(world)
