"""
Direction, stability and period of the periodic orbits born at tau_c.

Center-manifold reduction of the delayed closed loop in the rescaled time
t -> t / tau, where the linear part is L(phi) = tau (B1 phi(0) + B2 phi(-1))
and the nonlinearity is

    f(phi) = tau (0, -phi1(0) phi3(0) + phi1(-1) phi3(-1), phi1(0) phi2(0)).

The critical eigenvalue of the rescaled generator is i omega with
omega = tau_c nu0.  All quantities below (q, q*, D, g_ij, W20, W11, c1) live
in rescaled time; ``NormalForm.predicted_period`` converts back.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core_model import AlphaParams, RegulationTarget
from .errors import ConsistencyError, ContradictionError, DegenerateError, ResonanceError
from .spectral import build_char_poly, critical_delay, dlambda_dtau

COND_LIMIT = 1e10


@dataclass(frozen=True)
class LinearizationMatrices:
    """Jacobians of the translated closed loop w.r.t. current (B1) and delayed (B2) state."""

    B1: np.ndarray
    B2: np.ndarray

    def char_matrix(self, lam: complex, tau: float) -> np.ndarray:
        """lam I - B1 - B2 exp(-lam tau); its determinant is W(lam, tau)."""
        return lam * np.eye(3) - self.B1 - self.B2 * cmath.exp(-lam * tau)


def build_B_matrices(params: AlphaParams, target: RegulationTarget) -> LinearizationMatrices:
    s, r, b, g, xr = params.sigma, params.r, params.b, params.gamma, target.x_r
    rz = r - target.z_star
    B1 = np.array([[-s, s, 0.0], [rz, g, -xr], [xr, xr, -b]])
    B2 = np.array([[0.0, 0.0, 0.0], [-rz, -(g + s), xr], [0.0, 0.0, 0.0]])
    return LinearizationMatrices(B1, B2)


def _check_critical(mats, tau_c, nu0, tol=1e-8):
    M = mats.char_matrix(1j * nu0, tau_c)
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin > tol * (1.0 + np.abs(M).max()):
        raise ConsistencyError(
            f"i*{nu0:.6g} is not a characteristic root at tau={tau_c:.6g} (smallest singular value {smin:.3g})"
        )
    return M


def eigenvector_q(params, target, tau_c, nu0, mats=None) -> np.ndarray:
    """(1, q2, q3) with M(i nu0) q = 0, first and third rows solved in closed form."""
    mats = mats or build_B_matrices(params, target)
    M = _check_critical(mats, tau_c, nu0)
    s, b, xr = params.sigma, params.b, target.x_r
    iw = 1j * nu0
    q2 = (iw + s) / s
    q3 = (s * xr + xr * (iw + s)) / (s * (b + iw))
    q = np.array([1.0, q2, q3], dtype=complex)
    if np.abs(M @ q).max() > 1e-8 * (1.0 + np.abs(M).max()):
        raise ConsistencyError("closed-form eigenvector does not annihilate the characteristic matrix")
    return q


def eigenvector_qstar(params, target, tau_c, nu0, mats=None) -> np.ndarray:
    """Un-normalized adjoint vector (1, q2*, q3*).

    Satisfies (1, q2*, q3*) (i nu0 I + B1 + B2 exp(i nu0 tau_c)) = 0, i.e.
    its conjugate is a left null vector of M(i nu0).  Columns one and three
    give q2* and q3* in closed form.
    """
    mats = mats or build_B_matrices(params, target)
    _check_critical(mats, tau_c, nu0)
    s, r, b, xr = params.sigma, params.r, params.b, target.x_r
    iw = 1j * nu0
    e = cmath.exp(iw * tau_c)
    den = r * b * b - 2.0 * b * xr * xr - iw * (r * b - xr * xr)
    if abs(1.0 - e) < 1e-14 or abs(den) < 1e-14 * (1.0 + abs(r * b * b) + abs(b * xr * xr)):
        raise DegenerateError("adjoint eigenvector denominator vanishes")
    q2s = b * (s - iw) * (b - iw) / ((1.0 - e) * den)
    q3s = b * xr * (iw - s) / den
    qs = np.array([1.0, q2s, q3s], dtype=complex)
    A = iw * np.eye(3) + mats.B1 + mats.B2 * e
    if np.abs(qs @ A).max() > 1e-8 * (1.0 + np.abs(A).max()) * np.abs(qs).max():
        raise ConsistencyError("closed-form adjoint vector fails the left-eigen residual")
    return qs


def bilinear_form(psi0: np.ndarray, phi0: np.ndarray, B2: np.ndarray, tau_c: float,
                  omega_psi: float, omega_phi: float) -> complex:
    """<psi, phi> for psi(s) = psi0 exp(i omega_psi s), phi(t) = phi0 exp(i omega_phi t).

    Closed form of conj(psi(0)) phi(0) + tau_c int_{-1}^{0} conj(psi(xi+1)) B2 phi(xi) dxi,
    which is what the bilinear form reduces to for a kernel with point masses
    tau_c B1 at 0 and tau_c B2 at -1.
    """
    pb = np.conj(psi0)
    k = omega_phi - omega_psi
    integral = 1.0 if abs(k) < 1e-14 else (1.0 - cmath.exp(-1j * k)) / (1j * k)
    return complex(pb @ phi0 + tau_c * cmath.exp(-1j * omega_psi) * integral * (pb @ B2 @ phi0))


def bilinear_form_quadrature(psi, phi, B2, tau_c, n_nodes: int = 64) -> complex:
    """Gauss-Legendre evaluation of the same bilinear form for arbitrary callables."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    xi = 0.5 * (x - 1.0)  # map [-1, 1] onto [-1, 0]
    acc = 0.0 + 0.0j
    for node, wt in zip(xi, w):
        acc += 0.5 * wt * (np.conj(psi(node + 1.0)) @ B2 @ phi(node))
    return complex(np.conj(psi(0.0)) @ phi(0.0) + tau_c * acc)


def normalization_D(params, target, tau_c, nu0, q, qstar, mats=None) -> complex:
    """Scale D of q* = D (1, q2*, q3*) making <q*, q> = 1."""
    mats = mats or build_B_matrices(params, target)
    qb = np.conj(q)
    den = qstar @ qb + tau_c * cmath.exp(1j * tau_c * nu0) * (qstar @ mats.B2 @ qb)
    if abs(den) < 1e-14:
        raise DegenerateError("normalization denominator vanishes")
    return complex(1.0 / den)


def g_low_order(q, qstar, d, tau_c, nu0) -> Tuple[complex, complex, complex]:
    """Quadratic coefficients g20, g11, g02 of the reduced flow.

    The first component q1 of ``q`` is kept explicit; with q1 = 1 these are
    the familiar closed forms.
    """
    w = tau_c * nu0
    Db = np.conj(d)
    q1, q2, q3 = q
    qs2b, qs3b = np.conj(qstar[1]), np.conj(qstar[2])
    e2 = cmath.exp(-2j * w)
    g20 = 2 * Db * tau_c * (qs2b * q1 * q3 * (e2 - 1) + qs3b * q1 * q2)
    g11 = 2 * Db * tau_c * qs3b * (q1 * np.conj(q2)).real
    g02 = 2 * Db * tau_c * (qs2b * np.conj(q1 * q3) * (1 / e2 - 1) + qs3b * np.conj(q1 * q2))
    return complex(g20), complex(g11), complex(g02)


def _solve(A, rhs, what):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ResonanceError(f"{what} is singular (cond={cond:.3g})")
    return np.linalg.solve(A, rhs), cond


@dataclass(frozen=True)
class CenterManifoldVectors:
    E1: np.ndarray
    E2: np.ndarray
    G: np.ndarray
    G_prime: np.ndarray
    cond_G: float
    cond_G_prime: float


def solve_E1_E2(params, target, tau_c, nu0, q, mats=None) -> CenterManifoldVectors:
    """Constant parts E1, E2 of W20 and W11.

    G = M(2 i nu0) and G' = -(B1 + B2); the right-hand sides are the z^2 and
    z zbar coefficients of the nonlinearity at theta = 0.
    """
    mats = mats or build_B_matrices(params, target)
    w = tau_c * nu0
    G = mats.char_matrix(2j * nu0, tau_c)
    Gp = -(mats.B1 + mats.B2)
    q1, q2, q3 = q
    rhs1 = 2.0 * np.array([0.0, q1 * q3 * (cmath.exp(-2j * w) - 1), q1 * q2], dtype=complex)
    rhs2 = 2.0 * np.array([0.0, 0.0, (q1 * np.conj(q2)).real])
    E1, c1 = _solve(G, rhs1, "G")
    E2, c2 = _solve(Gp, rhs2, "G'")
    return CenterManifoldVectors(E1, E2, G, Gp, c1, c2)


def W_vectors(q, g20, g11, g02, E1, E2, tau_c, nu0, theta: float):
    """W20(theta), W11(theta) on the center manifold, theta in [-1, 0]."""
    w = tau_c * nu0
    qb = np.conj(q)
    ep = cmath.exp(1j * theta * w)
    em = cmath.exp(-1j * theta * w)
    W20 = 1j * g20 / w * q * ep + 1j * np.conj(g02) / (3 * w) * qb * em + E1 * cmath.exp(2j * theta * w)
    W11 = -1j * g11 / w * q * ep + 1j * np.conj(g11) / w * qb * em + E2
    return W20, W11


def g21_coefficient(q, qstar, d, W20_0, W11_0, W20_m1, W11_m1, tau_c, nu0) -> complex:
    w = tau_c * nu0
    Db = np.conj(d)
    q1, q2, q3 = q
    q1b, q2b, q3b = np.conj(q)
    qs2b, qs3b = np.conj(qstar[1]), np.conj(qstar[2])
    ep, em = cmath.exp(1j * w), cmath.exp(-1j * w)
    now = 0.5 * q3b * W20_0[0] + q3 * W11_0[0] + 0.5 * q1b * W20_0[2] + q1 * W11_0[2]
    lag = (
        q1 * W11_m1[2] * em
        + 0.5 * q1b * W20_m1[2] * ep
        + W11_m1[0] * q3 * em
        + 0.5 * W20_m1[0] * q3b * ep
    )
    zrow = q1 * W11_0[1] + 0.5 * q1b * W20_0[1] + W11_0[0] * q2 + 0.5 * W20_0[0] * q2b
    return complex(2 * Db * tau_c * (qs2b * (lag - now) + qs3b * zrow))


def first_lyapunov_coefficient(g20, g11, g02, g21, omega) -> complex:
    """c1(0) for z' = i omega z + g(z, zbar), omega the rescaled frequency."""
    return 1j / (2 * omega) * (g20 * g11 - 2 * abs(g11) ** 2 - abs(g02) ** 2 / 3) + g21 / 2


@dataclass
class NormalForm:
    tau_c: float
    nu0: float
    q: np.ndarray
    qstar: np.ndarray
    d_norm: complex
    g20: complex
    g11: complex
    g02: complex
    g21: complex
    E1: np.ndarray
    E2: np.ndarray
    c1: complex
    lambda_prime: complex
    mu2: float
    beta2: float
    t2: float
    direction: str
    orbit_stability: str

    @property
    def omega(self) -> float:
        """Critical frequency in rescaled time."""
        return self.tau_c * self.nu0

    @property
    def predicted_period(self) -> float:
        """Period of the bifurcating orbit at onset, original time units."""
        return 2 * math.pi / self.nu0

    def amplitude_squared_slope(self) -> float:
        """d(A^2)/d tau at tau_c for the x-oscillation half-amplitude A.

        From |z|^2 = -Re(Lambda') mu / Re(c1), with Lambda(mu) the rescaled
        eigenvalue (tau_c + mu) lam(tau_c + mu), and x ~ 2 Re z.
        """
        return 4.0 * self.tau_c * self.lambda_prime.real / (-self.c1.real)

    def to_dict(self) -> dict:
        def c(z):
            return {"re": float(np.real(z)), "im": float(np.imag(z))}

        def cv(v):
            return [c(z) for z in v]

        return {
            "tau_c": self.tau_c,
            "nu0": self.nu0,
            "q": cv(self.q),
            "qstar": cv(self.qstar),
            "D": c(self.d_norm),
            "g20": c(self.g20),
            "g11": c(self.g11),
            "g02": c(self.g02),
            "g21": c(self.g21),
            "E1": cv(self.E1),
            "E2": cv(self.E2),
            "c1": c(self.c1),
            "lambda_prime": c(self.lambda_prime),
            "mu2": self.mu2,
            "beta2": self.beta2,
            "T2": self.t2,
            "direction": self.direction,
            "stability": self.orbit_stability,
            "predicted_period": self.predicted_period,
        }


def classify(
    params: AlphaParams,
    target: RegulationTarget,
    tau_c: Optional[float] = None,
    nu0: Optional[float] = None,
    phase: float = 0.0,
) -> NormalForm:
    """Run the whole reduction at (tau_c, nu0) and classify the Hopf bifurcation.

    ``phase`` rotates the eigenvector q by exp(i phase) before D is computed;
    c1, mu2, beta2 and T2 do not depend on it.
    """
    if tau_c is None or nu0 is None:
        sa = critical_delay(params, target)
        if sa.tau_c is None:
            raise ContradictionError("no critical delay: E+ is stable for every tau")
        tau_c, nu0 = sa.tau_c, sa.nu0
    mats = build_B_matrices(params, target)
    q = eigenvector_q(params, target, tau_c, nu0, mats)
    qs = eigenvector_qstar(params, target, tau_c, nu0, mats)
    if phase:
        q = q * cmath.exp(1j * phase)
    d = normalization_D(params, target, tau_c, nu0, q, qs, mats)
    g20, g11, g02 = g_low_order(q, qs, d, tau_c, nu0)
    cm = solve_E1_E2(params, target, tau_c, nu0, q, mats)
    W20_0, W11_0 = W_vectors(q, g20, g11, g02, cm.E1, cm.E2, tau_c, nu0, 0.0)
    W20_m1, W11_m1 = W_vectors(q, g20, g11, g02, cm.E1, cm.E2, tau_c, nu0, -1.0)
    g21 = g21_coefficient(q, qs, d, W20_0, W11_0, W20_m1, W11_m1, tau_c, nu0)
    omega = tau_c * nu0
    c1 = first_lyapunov_coefficient(g20, g11, g02, g21, omega)

    poly = build_char_poly(params, target)
    lp = dlambda_dtau(poly, 1j * nu0, tau_c)
    if not lp.real > 0:
        raise ContradictionError(f"Re lambda'(tau_c) = {lp.real:.3g} <= 0 contradicts stability below tau_c")
    mu2 = -c1.real / lp.real
    beta2 = 2 * c1.real
    t2 = -(c1.imag + mu2 * lp.imag) / omega
    return NormalForm(
        tau_c=tau_c,
        nu0=nu0,
        q=q,
        qstar=d * qs,
        d_norm=d,
        g20=g20,
        g11=g11,
        g02=g02,
        g21=g21,
        E1=cm.E1,
        E2=cm.E2,
        c1=c1,
        lambda_prime=lp,
        mu2=mu2,
        beta2=beta2,
        t2=t2,
        direction="supercritical" if mu2 > 0 else "subcritical",
        orbit_stability="stable" if beta2 < 0 else "unstable",
    )
