"""Random-walk mobility for point robots in a walled square arena.

Three walk families are supported:

* ``CRW(rho)`` runs straight segments of ``step_length`` meters and turns
  between them by a wrapped-Cauchy angle with mean resultant length
  ``rho``. ``step_length=None`` turns on every tick instead.
* ``LW(alpha)`` travels straight relocations whose lengths follow a
  truncated power law ``s**-alpha``; each relocation starts in a uniformly
  random direction.
* ``Hybrid(rho, alpha)`` uses Levy relocation lengths, but each new
  direction is the previous one plus a CRW turn.

Walls reflect specularly. The numerical kernels are compiled with numba and
take a ``numpy.random.Generator`` directly, so the simulator loop and the
pure-Python entry points consume one and the same random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numba
import numpy as np

TWO_PI = 2.0 * math.pi

KIND_CRW = 0
KIND_LW = 1
KIND_HYBRID = 2

# Lower bound of Levy relocation lengths when none is given, in meters.
DEFAULT_MIN_STEP = 1.0
# Straight run between CRW turns, in meters.
DEFAULT_CRW_SEGMENT = 10.0


class ParameterDomainError(ValueError):
    """A walk parameter lies outside its admissible range."""


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho <= 1.0:
        raise ParameterDomainError(f"rho must lie in [0, 1], got {rho}")


def _check_levy(alpha: float, min_step: float, max_step: float | None) -> None:
    if not alpha > 1.0:
        raise ParameterDomainError(f"alpha must be > 1, got {alpha}")
    if not min_step > 0.0:
        raise ParameterDomainError(f"min_step must be > 0, got {min_step}")
    if max_step is not None and max_step < min_step:
        raise ParameterDomainError(
            f"max_step ({max_step}) must be >= min_step ({min_step})"
        )


@dataclass(frozen=True)
class CRW:
    rho: float = 0.7
    # Straight run between turns, meters; None turns on every tick.
    step_length: float | None = DEFAULT_CRW_SEGMENT

    def __post_init__(self):
        _check_rho(self.rho)
        if self.step_length is not None and not self.step_length > 0:
            raise ParameterDomainError("step_length must be positive")

    def encode(self) -> str:
        return f"crw:{self.rho:g}"


@dataclass(frozen=True)
class LW:
    alpha: float = 2.0
    min_step: float = DEFAULT_MIN_STEP
    max_step: float | None = None  # None means the arena diagonal

    def __post_init__(self):
        _check_levy(self.alpha, self.min_step, self.max_step)

    def encode(self) -> str:
        return f"lw:{self.alpha:g}"


@dataclass(frozen=True)
class Hybrid:
    rho: float = 0.6
    alpha: float = 1.8
    min_step: float = DEFAULT_MIN_STEP
    max_step: float | None = None

    def __post_init__(self):
        _check_rho(self.rho)
        _check_levy(self.alpha, self.min_step, self.max_step)

    def encode(self) -> str:
        return f"hybrid:{self.rho:g},{self.alpha:g}"


WalkPolicy = Union[CRW, LW, Hybrid]


def parse_walk(text: str) -> WalkPolicy:
    """Parse the textual encoding ``crw:0.7``, ``lw:2.0`` or ``hybrid:0.6,1.8``."""
    kind, _, args = text.strip().partition(":")
    kind = kind.lower()
    try:
        values = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"malformed walk policy {text!r}") from None
    if kind == "crw" and len(values) == 1:
        return CRW(values[0])
    if kind == "lw" and len(values) == 1:
        return LW(values[0])
    if kind == "hybrid" and len(values) == 2:
        return Hybrid(values[0], values[1])
    raise ValueError(f"malformed walk policy {text!r}")


def kernel_params(policy: WalkPolicy, L: float) -> tuple[int, float, float, float, float]:
    """Flatten a policy to ``(kind, rho, alpha, min_step, max_step)`` for the kernels."""
    diagonal = L * math.sqrt(2.0)
    if isinstance(policy, CRW):
        seg = 0.0 if policy.step_length is None else policy.step_length
        return KIND_CRW, policy.rho, 2.0, seg, seg
    max_step = diagonal if policy.max_step is None else policy.max_step
    if max_step > diagonal * (1 + 1e-12):
        raise ParameterDomainError(
            f"max_step {max_step} exceeds the arena diagonal {diagonal}"
        )
    if max_step < policy.min_step:
        raise ParameterDomainError("min_step exceeds the arena diagonal")
    if isinstance(policy, LW):
        return KIND_LW, 0.0, policy.alpha, policy.min_step, max_step
    if isinstance(policy, Hybrid):
        return KIND_HYBRID, policy.rho, policy.alpha, policy.min_step, max_step
    raise TypeError(f"unknown walk policy {policy!r}")


@dataclass(frozen=True)
class Pose:
    """Robot pose. ``remaining`` is the unfinished length of the current
    straight run (CRW segment or Levy relocation)."""

    x: float
    y: float
    heading: float
    remaining: float = 0.0


# --------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def wrap_angle(theta):
    return (theta + math.pi) % TWO_PI - math.pi


@numba.njit(cache=True)
def _turn_crw(rho, rng):
    u = rng.random()
    if rho >= 1.0:
        return 0.0
    # Inverse CDF of the wrapped Cauchy; rho=0 reduces to 2*pi*(u - 1/2).
    theta = 2.0 * math.atan((1.0 - rho) / (1.0 + rho) * math.tan(math.pi * (u - 0.5)))
    if theta >= math.pi:
        theta -= TWO_PI
    return theta


@numba.njit(cache=True)
def levy_quantile(u, alpha, min_step, max_step):
    """Inverse CDF of the power law ``s**-alpha`` truncated to [min_step, max_step]."""
    if min_step == max_step:
        return min_step
    e = 1.0 - alpha
    lo = min_step**e
    hi = max_step**e
    s = (lo - u * (lo - hi)) ** (1.0 / e)
    if s < min_step:
        return min_step
    if s > max_step:
        return max_step
    return s


@numba.njit(cache=True)
def _step_levy(alpha, min_step, max_step, rng):
    return levy_quantile(rng.random(), alpha, min_step, max_step)


@numba.njit(cache=True)
def _reflect(x, y, heading, L):
    while x < 0.0 or x > L:
        if x < 0.0:
            x = -x
        else:
            x = 2.0 * L - x
        heading = math.pi - heading
    while y < 0.0 or y > L:
        if y < 0.0:
            y = -y
        else:
            y = 2.0 * L - y
        heading = -heading
    return x, y, wrap_angle(heading)


@numba.njit(cache=True)
def _advance(x, y, heading, remaining, kind, rho, alpha, min_step, max_step, step, L, rng):
    if remaining <= 0.0:
        if kind == KIND_CRW:
            # min_step carries the CRW segment length; 0 means one tick
            heading = heading + _turn_crw(rho, rng)
            remaining = min_step if min_step > 0.0 else step
        elif kind == KIND_LW:
            remaining = _step_levy(alpha, min_step, max_step, rng)
            heading = TWO_PI * rng.random() - math.pi
        else:
            remaining = _step_levy(alpha, min_step, max_step, rng)
            heading = heading + _turn_crw(rho, rng)
    x = x + step * math.cos(heading)
    y = y + step * math.sin(heading)
    x, y, heading = _reflect(x, y, heading, L)
    remaining -= step
    return x, y, heading, remaining


# --------------------------------------------------------------------------
# public entry points


def sample_turn_crw(rho: float, rng: np.random.Generator) -> float:
    """Draw a CRW turn angle in [-pi, pi) from a wrapped Cauchy centred at zero."""
    _check_rho(rho)
    return _turn_crw(float(rho), rng)


def sample_step_levy(
    alpha: float, min_step: float, max_step: float, rng: np.random.Generator
) -> float:
    _check_levy(alpha, min_step, max_step)
    return _step_levy(float(alpha), float(min_step), float(max_step), rng)


def advance(
    pose: Pose,
    policy: WalkPolicy,
    speed: float,
    dt: float,
    L: float,
    rng: np.random.Generator,
) -> Pose:
    """Move one robot by one tick of length ``dt`` and return the new pose."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (0.0 <= pose.x <= L and 0.0 <= pose.y <= L):
        raise ValueError(f"pose {pose} lies outside the arena [0, {L}]^2")
    kind, rho, alpha, lo, hi = kernel_params(policy, L)
    x, y, h, rem = _advance(
        pose.x, pose.y, pose.heading, pose.remaining,
        kind, rho, alpha, lo, hi, speed * dt, L, rng,
    )
    return replace(pose, x=x, y=y, heading=h, remaining=rem)
