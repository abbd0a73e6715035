"""
Generalized Lorenz family and its delayed-feedback closed loop.

The family interpolates Lorenz (alpha=0), Lu (alpha=0.8) and Chen (alpha=1)::

    dx/dt = sigma (y - x)
    dy/dt = r x - x z + gamma y
    dz/dt = x y - b z

with sigma = 25 alpha + 10, r = 28 - 35 alpha, b = (alpha + 8)/3 and
gamma = 29 alpha - 1.  The controller

    u = -r x_d + x_d z_d - gamma y_d - sigma (y_d - x_r)

(subscript d: value at t - tau) is added to the y-equation.  With tau = 0 it
turns the system into a linear cascade that converges to
(x_r, x_r, x_r**2 / b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .errors import DomainError


class State(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class AlphaParams:
    """One member of the family, identified by ``alpha``."""

    alpha: float
    sigma: float
    r: float
    b: float
    gamma: float


@dataclass(frozen=True)
class RegulationTarget:
    """Point (x_r, x_r, z_star) the controller drives the state to."""

    x_r: float
    z_star: float

    @property
    def state(self) -> State:
        return State(self.x_r, self.x_r, self.z_star)


class EquilibriumSet(NamedTuple):
    e0: State
    e_plus: State
    e_minus: State


def params_from_alpha(alpha: float) -> AlphaParams:
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0) or math.isnan(alpha):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    return AlphaParams(
        alpha=alpha,
        sigma=25.0 * alpha + 10.0,
        r=28.0 - 35.0 * alpha,
        b=(alpha + 8.0) / 3.0,
        gamma=29.0 * alpha - 1.0,
    )


def equilibria(params: AlphaParams) -> EquilibriumSet:
    a = params.alpha
    s = math.sqrt((8.0 + a) * (9.0 - 2.0 * a))
    z = 27.0 - 6.0 * a
    return EquilibriumSet(
        e0=State(0.0, 0.0, 0.0),
        e_plus=State(s, s, z),
        e_minus=State(-s, -s, z),
    )


def regulation_target(params: AlphaParams, x_r: Optional[float] = None) -> RegulationTarget:
    """Target point for ``x_r``; defaults to the E+ abscissa of the family member.

    ``z_star`` is always ``x_r**2 / b``, the only value that makes the point a
    fixed point of dz/dt = xy - bz when x = y = x_r.
    """
    if x_r is None:
        x_r = equilibria(params).e_plus.x
    x_r = float(x_r)
    if not math.isfinite(x_r):
        raise DomainError(f"x_r must be finite, got {x_r!r}")
    return RegulationTarget(x_r=x_r, z_star=x_r * x_r / params.b)


def _open_loop(sigma, r, b, gamma, x, y, z):
    return (sigma * (y - x), r * x - x * z + gamma * y, x * y - b * z)


def _closed_loop(sigma, r, b, gamma, x_r, x, y, z, xd, yd, zd):
    # scalar kernel shared with the integrator hot loop
    return (
        sigma * (y - x),
        r * (x - xd) - (x * z - xd * zd) + gamma * (y - yd) - sigma * (yd - x_r),
        x * y - b * z,
    )


def uncontrolled_rhs(params: AlphaParams, s: Sequence[float]) -> State:
    x, y, z = (float(v) for v in s)
    return State(*_open_loop(params.sigma, params.r, params.b, params.gamma, x, y, z))


def controlled_rhs(
    params: AlphaParams,
    target: RegulationTarget,
    now: Sequence[float],
    delayed: Sequence[float],
) -> State:
    """Right-hand side of the delayed closed loop at one instant."""
    x, y, z = (float(v) for v in now)
    xd, yd, zd = (float(v) for v in delayed)
    return State(
        *_closed_loop(params.sigma, params.r, params.b, params.gamma, target.x_r, x, y, z, xd, yd, zd)
    )


def control_signal(params: AlphaParams, target: RegulationTarget, delayed: Sequence[float]) -> float:
    xd, yd, zd = (float(v) for v in delayed)
    return -params.r * xd + xd * zd - params.gamma * yd - params.sigma * (yd - target.x_r)
