"""
Linear stability of E+ under delayed feedback.

The linearization of the closed loop at E+ has the characteristic function

    W(lam, tau) = P(lam) + Q(lam) exp(-lam tau)

with a monic cubic P and a quadratic Q.  Purely imaginary roots lam = i nu
exist exactly when x = nu**2 is a positive root of the auxiliary cubic
F(x) = |P(i nu)|**2 - |Q(i nu)|**2, and each such root yields an arithmetic
sequence of delays at which a root pair sits on the imaginary axis.  The
sign of F' at the root gives the direction in which the pair crosses.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core_model import AlphaParams, RegulationTarget
from .errors import ContradictionError, DegenerateError, RootTrackingError

LEFT_TO_RIGHT = "left-to-right"
RIGHT_TO_LEFT = "right-to-left"


@dataclass(frozen=True)
class CharQuasiPoly:
    """Coefficients of P(lam) = lam^3 + a2 lam^2 + a1 lam + a0 and
    Q(lam) = b2 lam^2 + b1 lam + b0, plus the lumped constants K1, K2."""

    a0: float
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float
    k1: float
    k2: float
    params: AlphaParams
    x_r: float

    @property
    def p_coeffs(self):
        """Highest degree first."""
        return [1.0, self.a2, self.a1, self.a0]

    @property
    def q_coeffs(self):
        return [self.b2, self.b1, self.b0]

    @property
    def scale(self) -> float:
        return 1.0 + max(abs(c) for c in (self.a0, self.a1, self.a2, self.b0, self.b1, self.b2))

    def P(self, lam):
        return ((lam + self.a2) * lam + self.a1) * lam + self.a0

    def Q(self, lam):
        return (self.b2 * lam + self.b1) * lam + self.b0

    def dP(self, lam):
        return (3.0 * lam + 2.0 * self.a2) * lam + self.a1

    def dQ(self, lam):
        return 2.0 * self.b2 * lam + self.b1


def build_char_poly(params: AlphaParams, target: RegulationTarget) -> CharQuasiPoly:
    s, r, b, g, xr = params.sigma, params.r, params.b, params.gamma, target.x_r
    k1 = xr * xr + s * xr * xr / b - s * r - g * (s + b)
    k2 = 3.0 * xr * xr - b * g - b * r
    return CharQuasiPoly(
        a0=s * k2,
        a1=s * b + k1,
        a2=b + s - g,
        b0=s * s * b - s * k2,
        b1=s * b + s * s - k1,
        b2=s + g,
        k1=k1,
        k2=k2,
        params=params,
        x_r=xr,
    )


def eval_W(poly: CharQuasiPoly, lam, tau: float):
    """P(lam) + Q(lam) exp(-lam tau); works on scalars and numpy arrays."""
    return poly.P(lam) + poly.Q(lam) * np.exp(-lam * tau)


def dW_dlambda(poly: CharQuasiPoly, lam, tau: float):
    return poly.dP(lam) + (poly.dQ(lam) - tau * poly.Q(lam)) * np.exp(-lam * tau)


def dlambda_dtau(poly: CharQuasiPoly, lam: complex, tau: float) -> complex:
    """Root velocity from implicit differentiation of W(lam(tau), tau) = 0."""
    e = cmath.exp(-lam * tau)
    return lam * poly.Q(lam) * e / (poly.dP(lam) + (poly.dQ(lam) - tau * poly.Q(lam)) * e)


@dataclass(frozen=True)
class RouthHurwitz:
    stable: bool
    coefficients: tuple  # (b + 2 sigma, 2 sigma b + sigma^2, sigma^2 b)
    margin: float  # (b+2s)(2sb+s^2) - s^2 b
    identity_residual: float  # margin - 2 s (s + b)^2

    @property
    def relative_residual(self) -> float:
        return abs(self.identity_residual) / abs(self.margin) if self.margin else math.inf


def routh_hurwitz_tau0(poly: CharQuasiPoly) -> RouthHurwitz:
    """Routh-Hurwitz test of the delay-free cubic lam^3 + c2 lam^2 + c1 lam + c0.

    The coefficients come from P + Q, so the residual against the closed form
    2 sigma (sigma + b)^2 of the Hurwitz determinant also checks that the K1,
    K2 terms cancel.
    """
    s, b = poly.params.sigma, poly.params.b
    c2 = poly.a2 + poly.b2
    c1 = poly.a1 + poly.b1
    c0 = poly.a0 + poly.b0
    margin = c2 * c1 - c0
    resid = margin - 2.0 * s * (s + b) ** 2
    return RouthHurwitz(
        stable=bool(c2 > 0 and c0 > 0 and margin > 0),
        coefficients=(c2, c1, c0),
        margin=margin,
        identity_residual=resid,
    )


@dataclass(frozen=True)
class AuxCubic:
    """F(x) = x^3 + c2 x^2 + c1 x + c0 and its critical-point data."""

    c2: float
    c1: float
    c0: float
    delta: float
    x_star: Optional[float]
    x_star2: Optional[float]

    @classmethod
    def from_coefficients(cls, c2: float, c1: float, c0: float) -> "AuxCubic":
        delta = c2 * c2 - 3.0 * c1
        if delta > 0:
            sq = math.sqrt(delta)
            xs, xs2 = (-c2 + sq) / 3.0, (-c2 - sq) / 3.0
        else:
            xs = xs2 = None
        return cls(c2, c1, c0, delta, xs, xs2)

    @property
    def coeffs(self):
        return [1.0, self.c2, self.c1, self.c0]

    @property
    def scale(self) -> float:
        return 1.0 + max(abs(self.c2), abs(self.c1), abs(self.c0))

    def F(self, x):
        return ((x + self.c2) * x + self.c1) * x + self.c0

    def dF(self, x):
        return (3.0 * x + 2.0 * self.c2) * x + self.c1

    @property
    def condition_iia(self) -> bool:
        """F(0) < 0: a positive root is guaranteed."""
        return self.c0 < 0

    @property
    def condition_iib(self) -> bool:
        """Delta > 0, x* > 0 and F(x*) < 0."""
        return self.x_star is not None and self.x_star > 0 and self.F(self.x_star) < 0


def build_aux_cubic(poly: CharQuasiPoly) -> AuxCubic:
    p = poly.params
    s, b, g, k1, k2 = p.sigma, p.b, p.gamma, poly.k1, poly.k2
    c2 = b * b - 2 * b * g - 4 * s * g - 2 * k1
    c1 = 2 * s * b * (2 * k1 - k2) + s * s * (2 * b * g + 2 * k1 - 4 * k2 - s * s)
    c0 = b * s ** 3 * (2 * k2 - b * s)
    return AuxCubic.from_coefficients(c2, c1, c0)


@dataclass(frozen=True)
class CubicRoot:
    x: float
    multiple: bool = False


def cubic_positive_roots(aux: AuxCubic, max_newton: int = 50) -> List[CubicRoot]:
    """Positive real roots of F, ascending.

    Roots come from the eigenvalues of the companion matrix and are polished
    by Newton's method on F.  Roots within 1e-6 (1 + |x|) of each other are
    flagged as ``multiple``.
    """
    comp = np.array(
        [[-aux.c2, -aux.c1, -aux.c0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    )
    eig = np.linalg.eigvals(comp)
    tol = 1e-9 * max(1.0, abs(aux.c0))
    real = []
    for z in eig:
        # near-double roots come back as a pair with a tiny imaginary part
        if abs(z.imag) > 1e-6 * (1.0 + abs(z.real)):
            continue
        x = float(z.real)
        for _ in range(max_newton):
            fx = aux.F(x)
            if abs(fx) < tol:
                break
            d = aux.dF(x)
            if d == 0:
                break
            x -= fx / d
        real.append(x)
    real.sort()
    roots = []
    for i, x in enumerate(real):
        close = any(
            j != i and abs(x - y) < 1e-6 * (1.0 + abs(x)) for j, y in enumerate(real)
        )
        if x > 0:
            roots.append(CubicRoot(x, multiple=close))
    # collapse a flagged double root into one entry
    out: List[CubicRoot] = []
    for rt in roots:
        if out and rt.multiple and out[-1].multiple and abs(out[-1].x - rt.x) < 1e-6 * (1.0 + rt.x):
            continue
        out.append(rt)
    return out


def _phase(poly: CharQuasiPoly, nu: float) -> float:
    p = poly.P(1j * nu)
    q = poly.Q(1j * nu)
    pr, pi, qr, qi = p.real, p.imag, q.real, q.imag
    qq = qr * qr + qi * qi
    if qq == 0 or qq < 1e-28 * poly.scale ** 2:
        raise DegenerateError(f"Q(i nu) vanishes at nu={nu!r}")
    sin_t = (-pr * qi + qr * pi) / qq
    cos_t = -(pr * qr + pi * qi) / qq
    return math.atan2(sin_t, cos_t) % (2.0 * math.pi)


def delay_sequence(poly: CharQuasiPoly, nu: float, n_max: int) -> List[float]:
    """Delays tau_n = (theta + 2 n pi) / nu, n = 0..n_max, at which i nu is a root.

    ``theta`` in [0, 2 pi) is recovered from both sin(nu tau) and cos(nu tau),
    so the quadrant is always right.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu!r}")
    theta = _phase(poly, nu)
    taus = [(theta + 2.0 * math.pi * n) / nu for n in range(n_max + 1)]
    return [t for t in taus if t > 0]


@dataclass
class RootSwitch:
    x: float
    nu: float
    fprime: float
    direction: str
    taus: List[float]

    @property
    def fprime_sign(self) -> int:
        return 1 if self.fprime > 0 else -1 if self.fprime < 0 else 0


@dataclass
class SwitchAnalysis:
    roots: List[RootSwitch]
    tau_c: Optional[float]
    nu0: Optional[float]
    schedule: List[dict] = field(default_factory=list)
    eventually_unstable: bool = False
    stable_for_all_tau: bool = False

    def stability_intervals(self):
        """(start, end, stable) pieces of [0, horizon] implied by the schedule."""
        out = []
        start, count = 0.0, 0
        for ev in self.schedule:
            out.append((start, ev["tau"], count == 0))
            start, count = ev["tau"], ev["unstable_roots"]
        out.append((start, math.inf, count == 0))
        return out


def critical_delay(
    params: AlphaParams,
    target: RegulationTarget,
    horizon: Optional[float] = None,
) -> SwitchAnalysis:
    """Critical delay, crossing schedule and related data for E+.

    The schedule lists every crossing up to ``horizon`` (default: four periods
    of the slowest crossing frequency beyond its first delay), with the
    running count of roots in the right half-plane after each crossing.
    """
    poly = build_char_poly(params, target)
    rh = routh_hurwitz_tau0(poly)
    if not rh.stable:
        raise ContradictionError("E+ is not stable at tau = 0; the delay analysis does not apply")
    aux = build_aux_cubic(poly)
    roots = [rt for rt in cubic_positive_roots(aux) if not rt.multiple]
    if not roots:
        return SwitchAnalysis([], None, None, [], False, True)

    nus = [math.sqrt(rt.x) for rt in roots]
    if horizon is None:
        horizon = max(_phase(poly, nu) / nu + 8.0 * math.pi / nu for nu in nus)
    switches = []
    for rt, nu in zip(roots, nus):
        fp = aux.dF(rt.x)
        n_max = max(0, int(math.ceil(horizon * nu / (2.0 * math.pi))) + 1)
        taus = [t for t in delay_sequence(poly, nu, n_max) if t <= horizon]
        direction = LEFT_TO_RIGHT if fp > 0 else RIGHT_TO_LEFT
        switches.append(RootSwitch(rt.x, nu, fp, direction, taus))

    events = sorted(
        (t, sw.direction, sw.nu) for sw in switches for t in sw.taus
    )
    first = min((sw.taus[0], sw) for sw in switches if sw.taus)
    tau_c, sw0 = first[0], first[1]
    if sw0.direction != LEFT_TO_RIGHT:
        raise ContradictionError(
            f"first crossing at tau={tau_c:.6g} is right-to-left although tau=0 is stable"
        )
    schedule = []
    count = 0
    for t, direction, nu in events:
        count += 2 if direction == LEFT_TO_RIGHT else -2
        schedule.append(
            {"tau": t, "crossing": direction, "nu": nu, "unstable_roots": max(count, 0)}
        )
    destab = [sw.nu for sw in switches if sw.direction == LEFT_TO_RIGHT]
    stab = [sw.nu for sw in switches if sw.direction == RIGHT_TO_LEFT]
    eventually = bool(destab) and (not stab or max(destab) > max(stab))
    return SwitchAnalysis(
        roots=switches,
        tau_c=tau_c,
        nu0=sw0.nu,
        schedule=schedule,
        eventually_unstable=eventually,
        stable_for_all_tau=False,
    )


@dataclass(frozen=True)
class Transversality:
    value: float
    sign: int
    degenerate: bool


def transversality(aux: AuxCubic, nu0: float) -> Transversality:
    """F'(nu0^2); its sign is the sign of d Re(lam)/d tau at the crossing."""
    if not nu0 > 0:
        raise ValueError(f"nu0 must be positive, got {nu0!r}")
    v = aux.dF(nu0 * nu0)
    degenerate = abs(v) < 1e-8 * aux.scale
    if degenerate:
        warnings.warn(f"F'(nu0^2) = {v:.3g}: transversality fails", RuntimeWarning, stacklevel=2)
    return Transversality(value=v, sign=int(np.sign(v)), degenerate=degenerate)


def newton_root(
    poly: CharQuasiPoly,
    tau: float,
    guess: complex,
    tol: Optional[float] = None,
    max_iter: int = 50,
) -> complex:
    """Newton iteration on W(., tau) from ``guess``.

    Converged when |W| < tol (default 1e-10 times the coefficient scale).
    """
    if tol is None:
        tol = 1e-10 * poly.scale
    lam = complex(guess)
    for _ in range(max_iter):
        w = complex(eval_W(poly, lam, tau))
        if abs(w) < tol:
            return lam
        d = complex(dW_dlambda(poly, lam, tau))
        if d == 0:
            break
        lam -= w / d
    w = complex(eval_W(poly, lam, tau))
    if abs(w) < tol:
        return lam
    raise RootTrackingError(f"Newton did not converge from {guess!r} at tau={tau!r} (|W|={abs(w):.3g})")


def spectral_report(params: AlphaParams, target: RegulationTarget) -> dict:
    """JSON-ready summary of the linear analysis."""
    poly = build_char_poly(params, target)
    aux = build_aux_cubic(poly)
    sa = critical_delay(params, target)
    rh = routh_hurwitz_tau0(poly)
    return {
        "alpha": params.alpha,
        "x_r": target.x_r,
        "K1": poly.k1,
        "K2": poly.k2,
        "p_coeffs": poly.p_coeffs,
        "q_coeffs": poly.q_coeffs,
        "cubic_coeffs": aux.coeffs,
        "delta": aux.delta,
        "routh_hurwitz_stable": rh.stable,
        "condition_iia": aux.condition_iia,
        "condition_iib": aux.condition_iib,
        "roots": [
            {"x": sw.x, "nu": sw.nu, "fprime_sign": sw.fprime_sign, "tau_seq": sw.taus}
            for sw in sa.roots
        ],
        "tau_c": sa.tau_c,
        "nu0": sa.nu0,
        "stable_for_all_tau": sa.stable_for_all_tau,
        "eventually_unstable": sa.eventually_unstable,
        "schedule": sa.schedule,
    }
