"""
Image of the imaginary axis under omega = W(i nu) for a fixed delay.

For a stable configuration arg W(i nu) increases along the axis, so the
origin of the omega-plane lies to the left of the curve.  At tau_c the curve
passes through the origin and for larger delays the origin sits on its right.
The side is decided globally with the argument principle: for a retarded
quasi-polynomial of degree 3 the total change of arg W(i nu) over the real
line is pi (3 - 2N), N being the number of roots with positive real part.
``OmegaContour.signed_distance`` is the distance from the origin to the
curve, positive while N = 0 and negative once the origin has been passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .dde import write_csv
from .errors import BracketError
from .spectral import CharQuasiPoly, build_aux_cubic, cubic_positive_roots, eval_W


@dataclass
class OmegaContour:
    tau: float
    nu_samples: np.ndarray
    omega: np.ndarray
    min_distance: float
    min_nu: float
    signed_distance: float
    unstable_roots: int
    crossing_tol: float
    origin_crossed: bool

    def to_csv(self, dest=None):
        rows = np.column_stack([self.nu_samples, self.omega.real, self.omega.imag])
        return write_csv(dest, ["nu", "re_omega", "im_omega"], rows)

    def to_svg(self, dest=None, size: int = 480) -> Optional[str]:
        """Minimal SVG: the curve as a polyline plus a marker at the origin."""
        re, im = self.omega.real, self.omega.imag
        lo_x, hi_x = min(re.min(), 0.0), max(re.max(), 0.0)
        lo_y, hi_y = min(im.min(), 0.0), max(im.max(), 0.0)
        span = max(hi_x - lo_x, hi_y - lo_y) or 1.0
        pad = 0.05 * span

        def px(v):
            return (v - lo_x + pad) / (span + 2 * pad) * size

        def py(v):
            return size - (v - lo_y + pad) / (span + 2 * pad) * size

        pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(re, im))
        ox, oy = px(0.0), py(0.0)
        svg = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'viewBox="0 0 {size} {size}">\n'
            f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>\n'
            f'<circle cx="{ox:.3f}" cy="{oy:.3f}" r="3" fill="red"/>\n'
            f"<text x=\"4\" y=\"14\" font-size=\"12\">tau={self.tau:.6g}</text>\n"
            "</svg>\n"
        )
        if dest is None:
            return svg
        with open(dest, "w") as fh:
            fh.write(svg)
        return None

    def summary(self) -> dict:
        return {
            "tau": self.tau,
            "min_distance": self.min_distance,
            "min_nu": self.min_nu,
            "signed_distance": self.signed_distance,
            "unstable_roots": self.unstable_roots,
            "crossing_tol": self.crossing_tol,
            "origin_crossed": self.origin_crossed,
        }


def default_nu_max(poly: CharQuasiPoly) -> float:
    """Twice the largest crossing frequency (or 100 when there is none)."""
    roots = cubic_positive_roots(build_aux_cubic(poly))
    if not roots:
        return 100.0
    return 2.0 * math.sqrt(max(rt.x for rt in roots))


def count_unstable_roots(poly: CharQuasiPoly, tau: float) -> int:
    """Number of characteristic roots in Re lambda > 0 via the argument principle.

    arg W(i nu) is unwrapped on a grid fine enough to resolve the rotation
    of exp(-i nu tau), out to a frequency where P dominates Q by a factor of
    ten.  Past that point the remaining change is that of P alone, which is
    added in closed form from its leading term.
    """
    L = 10.0 * (1.0 + abs(poly.a2) + abs(poly.b2) + math.sqrt(abs(poly.a1) + abs(poly.b1))
                + abs(poly.a0 + abs(poly.b0)) ** (1.0 / 3.0))
    dnu = 0.05 / max(tau, 1.0 / L)
    n = int(min(max(2 * L / dnu, 4001), 2_000_001)) | 1
    nu = np.linspace(0.0, L, n)
    phase = np.unwrap(np.angle(eval_W(poly, 1j * nu, tau)))
    # the curve is symmetric, so the change over [-inf, inf] is twice [0, inf)
    # beyond L, arg W tracks arg (i nu)^3 = 3 pi / 2 (mod 2 pi) up to a small offset
    tail = _wrap(1.5 * math.pi - phase[-1])
    delta = 2.0 * (phase[-1] - phase[0] + tail)
    count = (3.0 - delta / math.pi) / 2.0
    return max(0, int(round(count)))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def map_contour(
    poly: CharQuasiPoly,
    tau: float,
    nu_max: Optional[float] = None,
    n_points: int = 4001,
    crossing_tol: Optional[float] = None,
) -> OmegaContour:
    """Sample W(i nu) on a uniform grid over [-nu_max, nu_max].

    The closest approach to the origin is refined between grid points by a
    bounded scalar minimization of |W(i nu)|^2 over nu >= 0 (the curve is
    symmetric about the real axis).  ``origin_crossed`` is true when the
    curve comes within ``crossing_tol`` of the origin or has already swept
    past it, which keeps the flag monotone in tau across the first crossing.
    """
    if n_points < 100:
        raise ValueError(f"n_points must be at least 100, got {n_points}")
    if nu_max is None:
        nu_max = default_nu_max(poly)
    if crossing_tol is None:
        crossing_tol = 1e-3 * abs(complex(eval_W(poly, 0.0, tau)))
    nu = np.linspace(-nu_max, nu_max, n_points)
    omega = eval_W(poly, 1j * nu, tau)

    mag = np.abs(omega)
    pos = nu >= 0
    k = int(np.flatnonzero(pos)[np.argmin(mag[pos])])
    step = nu[1] - nu[0]
    lo, hi = max(0.0, nu[k] - step), min(nu_max, nu[k] + step)

    def objective(v):
        return abs(eval_W(poly, 1j * v, tau)) ** 2

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    nu_star = float(res.x) if res.fun < mag[k] ** 2 else float(nu[k])
    dist = min(abs(complex(eval_W(poly, 1j * nu_star, tau))), float(mag.min()))
    n_unstable = count_unstable_roots(poly, tau)
    signed = -dist if n_unstable > 0 else dist
    return OmegaContour(
        tau=tau,
        nu_samples=nu,
        omega=omega,
        min_distance=dist,
        min_nu=nu_star,
        signed_distance=signed,
        unstable_roots=n_unstable,
        crossing_tol=float(crossing_tol),
        origin_crossed=bool(dist < crossing_tol or n_unstable > 0),
    )


def crossing_scan(
    poly: CharQuasiPoly,
    tau_lo: float,
    tau_hi: float,
    xtol: float = 1e-5,
    **contour_kw,
) -> float:
    """Bisect for the smallest delay at which the contour reaches the origin."""
    if not tau_lo < tau_hi:
        raise BracketError(f"need tau_lo < tau_hi, got {tau_lo!r}, {tau_hi!r}")
    a = map_contour(poly, tau_lo, **contour_kw).origin_crossed
    b = map_contour(poly, tau_hi, **contour_kw).origin_crossed
    if a == b:
        raise BracketError(f"origin_crossed is {a} at both ends of [{tau_lo}, {tau_hi}]")
    lo, hi = tau_lo, tau_hi
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if map_contour(poly, mid, **contour_kw).origin_crossed == a:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
