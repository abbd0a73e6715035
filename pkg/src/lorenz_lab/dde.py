"""
Fixed-step RK4 integration of the controlled system, with and without delay.

The delayed system is advanced by the method of steps on a grid whose step
divides the delay exactly, so the delayed arguments of the first and last RK
stages fall on stored nodes.  The two half-stages need x(t + h/2 - tau), which
is the midpoint of a stored interval and is recovered by cubic Hermite
interpolation from the stored states and derivatives.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .core_model import AlphaParams, RegulationTarget, _closed_loop, _open_loop
from .errors import ConfigurationError, DivergenceError, InsufficientDataError

DIVERGENCE_NORM = 1e12
DEFAULT_STEPS_PER_DELAY = 64
DEFAULT_T_END = 200.0
DEFAULT_INITIAL = (1.0, 1.0, 1.0)


def steps_per_delay(tau: float, h: float, rtol: float = 1e-9) -> int:
    """Return ``N = tau / h`` if it is a positive integer, else raise."""
    if tau <= 0 or h <= 0:
        raise ConfigurationError(f"tau and h must be positive (tau={tau!r}, h={h!r})")
    n = round(tau / h)
    if n < 1 or abs(n * h - tau) > rtol * tau:
        raise ConfigurationError(f"step h={h!r} does not divide tau={tau!r}")
    return int(n)


class HistoryBuffer:
    """Ring of the last ``N + 1`` nodes, each a state and its derivative.

    Nodes older than t = 0 belong to the constant initial history, so they
    carry a zero derivative regardless of what the field evaluates to there.
    """

    def __init__(self, tau: float, h: float, initial: Sequence[float]):
        self.n_delay = steps_per_delay(tau, h)
        self.h = tau / self.n_delay
        self.size = self.n_delay + 1
        self.initial = tuple(float(v) for v in initial)
        self._ring = [None] * self.size
        self.count = 0  # nodes pushed so far; node k lives at slot k % size

    def push(self, state, deriv):
        self._ring[self.count % self.size] = (state, deriv)
        self.count += 1

    def node(self, k: int):
        """State at grid node ``k`` (negative k is initial history)."""
        if k < 0:
            return self.initial
        if k >= self.count or k < self.count - self.size:
            raise IndexError(f"node {k} not held in buffer")
        return self._ring[k % self.size][0]

    def midpoint(self, k: int):
        """Hermite value halfway between nodes ``k`` and ``k + 1``."""
        if k < 0:
            return self.initial
        (x0, y0, z0), (fx0, fy0, fz0) = self._ring[k % self.size]
        (x1, y1, z1), (fx1, fy1, fz1) = self._ring[(k + 1) % self.size]
        c = self.h / 8.0
        return (
            0.5 * (x0 + x1) + c * (fx0 - fx1),
            0.5 * (y0 + y1) + c * (fy0 - fy1),
            0.5 * (z0 + z1) + c * (fz0 - fz1),
        )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    alpha: float
    tau: float
    h: float
    x_r: float

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    def __len__(self):
        return len(self.times)

    def to_csv(self, dest=None) -> Optional[str]:
        """Write ``t,x,y,z`` rows at 17 significant digits.

        With ``dest=None`` the CSV text is returned instead of written.
        """
        rows = np.column_stack([self.times, self.states])
        return write_csv(dest, ["t", "x", "y", "z"], rows)


def write_csv(dest, header, rows):
    """Write numeric rows at 17 significant digits to a path, a file or a string."""
    if dest is None:
        fh = io.StringIO()
    elif hasattr(dest, "write"):
        fh = dest
    else:
        fh = open(dest, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.17g}" for v in row])
        if dest is None:
            return fh.getvalue()
    finally:
        if dest is not None and not hasattr(dest, "write"):
            fh.close()
    return None


def _check(state, t):
    x, y, z = state
    n2 = x * x + y * y + z * z
    if not n2 < DIVERGENCE_NORM * DIVERGENCE_NORM:
        raise DivergenceError(t, math.sqrt(n2) if n2 == n2 else float("nan"))


def _n_steps(t_end, h):
    if not t_end > 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end!r}")
    return max(1, math.ceil(t_end / h - 1e-9))


def integrate_dde(
    params: AlphaParams,
    target: RegulationTarget,
    tau: float,
    initial: Sequence[float] = DEFAULT_INITIAL,
    h: Optional[float] = None,
    t_end: float = DEFAULT_T_END,
) -> Trajectory:
    """Integrate the delayed closed loop from a constant history.

    Parameters
    ----------
    params, target
        Family member and regulation point.
    tau : float
        Delay, > 0.
    initial : sequence of 3 floats
        Value of the history on [-tau, 0].
    h : float, optional
        Step; must divide ``tau``.  Defaults to ``tau / 64``.
    t_end : float
        Final time; the grid runs to the first node at or past it.

    Raises
    ------
    ConfigurationError
        If ``h`` does not divide ``tau``.
    DivergenceError
        If the state norm exceeds 1e12.
    """
    if h is None:
        h = tau / DEFAULT_STEPS_PER_DELAY
    hist = HistoryBuffer(tau, h, initial)
    h = hist.h
    N = hist.n_delay
    n_steps = _n_steps(t_end, h)
    s, r, b, g, xr = params.sigma, params.r, params.b, params.gamma, target.x_r
    f = _closed_loop
    h2, h6 = 0.5 * h, h / 6.0

    x, y, z = hist.initial
    _check((x, y, z), 0.0)
    out = np.empty((n_steps + 1, 3))
    out[0] = (x, y, z)
    for n in range(n_steps):
        a = n - N
        xd, yd, zd = hist.node(a)
        k1 = f(s, r, b, g, xr, x, y, z, xd, yd, zd)
        hist.push((x, y, z), k1)
        xm, ym, zm = hist.midpoint(a)
        k2 = f(s, r, b, g, xr, x + h2 * k1[0], y + h2 * k1[1], z + h2 * k1[2], xm, ym, zm)
        k3 = f(s, r, b, g, xr, x + h2 * k2[0], y + h2 * k2[1], z + h2 * k2[2], xm, ym, zm)
        xd, yd, zd = hist.node(a + 1)
        k4 = f(s, r, b, g, xr, x + h * k3[0], y + h * k3[1], z + h * k3[2], xd, yd, zd)
        x += h6 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        y += h6 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        z += h6 * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
        n2 = x * x + y * y + z * z
        if not n2 < 1e24:
            _check((x, y, z), (n + 1) * h)
        out[n + 1] = (x, y, z)
    times = np.arange(n_steps + 1) * h
    return Trajectory(times, out, params.alpha, tau, h, xr)


def integrate_ode(
    params: AlphaParams,
    target: RegulationTarget,
    initial: Sequence[float] = DEFAULT_INITIAL,
    h: float = 1e-3,
    t_end: float = 50.0,
    open_loop: bool = False,
) -> Trajectory:
    """Classic RK4 for the tau = 0 closed loop, or the uncontrolled field."""
    if not h > 0:
        raise ConfigurationError(f"h must be positive, got {h!r}")
    n_steps = _n_steps(t_end, h)
    s, r, b, g, xr = params.sigma, params.r, params.b, params.gamma, target.x_r
    if open_loop:
        def f(x, y, z):
            return _open_loop(s, r, b, g, x, y, z)
    else:
        def f(x, y, z):
            return _closed_loop(s, r, b, g, xr, x, y, z, x, y, z)

    h2, h6 = 0.5 * h, h / 6.0
    x, y, z = (float(v) for v in initial)
    _check((x, y, z), 0.0)
    out = np.empty((n_steps + 1, 3))
    out[0] = (x, y, z)
    for n in range(n_steps):
        k1 = f(x, y, z)
        k2 = f(x + h2 * k1[0], y + h2 * k1[1], z + h2 * k1[2])
        k3 = f(x + h2 * k2[0], y + h2 * k2[1], z + h2 * k2[2])
        k4 = f(x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x += h6 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        y += h6 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        z += h6 * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
        if not x * x + y * y + z * z < 1e24:
            _check((x, y, z), (n + 1) * h)
        out[n + 1] = (x, y, z)
    times = np.arange(n_steps + 1) * h
    return Trajectory(times, out, params.alpha, 0.0, h, xr)


@dataclass
class OscillationMetrics:
    converged: bool
    final_distance_to_target: float
    amplitude: float
    period: Optional[float]
    n_peaks: int = 0
    amplitude_drift: Optional[float] = None
    oscillating: bool = False
    tail_start: float = 0.0

    def to_dict(self):
        return {
            "converged": self.converged,
            "oscillating": self.oscillating,
            "final_distance_to_target": self.final_distance_to_target,
            "amplitude": self.amplitude,
            "period": self.period,
            "n_peaks": self.n_peaks,
            "amplitude_drift": self.amplitude_drift,
            "tail_start": self.tail_start,
        }


def _refined_peak_times(t, x, idx):
    # parabola through each peak and its neighbours
    out = []
    dt = t[1] - t[0]
    for i in idx:
        if 0 < i < len(x) - 1:
            y0, y1, y2 = x[i - 1], x[i], x[i + 1]
            den = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            out.append(t[i] + shift * dt)
        else:
            out.append(t[i])
    return np.asarray(out)


def oscillation_metrics(
    traj: Trajectory,
    target: RegulationTarget,
    tail_fraction: float = 0.5,
    tol: float = 1e-3,
    drift_tol: float = 0.05,
) -> OscillationMetrics:
    """Summarize the trailing ``tail_fraction`` of a trajectory.

    ``amplitude`` is half the peak-to-trough range of x over the tail and
    ``period`` the mean spacing of x maxima there (None with fewer than three
    maxima).  ``amplitude_drift`` compares the amplitudes of the two halves of
    the tail; ``oscillating`` requires at least three maxima and a drift below
    ``drift_tol``.
    """
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction!r}")
    n = len(traj)
    if n < 100:
        raise InsufficientDataError(f"need at least 100 samples, got {n}")
    start = min(n - 100, int(n * (1.0 - tail_fraction)))
    t = traj.times[start:]
    x = traj.states[start:, 0]

    final = float(np.linalg.norm(traj.states[-1] - np.array(target.state)))
    amplitude = 0.5 * float(x.max() - x.min())
    converged = final < tol and amplitude < tol

    period = None
    n_peaks = 0
    drift = None
    oscillating = False
    if not converged and amplitude > 0:
        idx, _ = find_peaks(x, prominence=0.5 * amplitude)
        n_peaks = len(idx)
        if n_peaks >= 3:
            tp = _refined_peak_times(t, x, idx)
            period = float(np.mean(np.diff(tp)))
        half = len(x) // 2
        a1 = 0.5 * float(x[:half].max() - x[:half].min())
        a2 = 0.5 * float(x[half:].max() - x[half:].min())
        drift = abs(a2 - a1) / a2 if a2 > 0 else math.inf
        oscillating = n_peaks >= 3 and drift < drift_tol
    return OscillationMetrics(
        converged=converged,
        final_distance_to_target=final,
        amplitude=amplitude,
        period=period,
        n_peaks=n_peaks,
        amplitude_drift=drift,
        oscillating=oscillating,
        tail_start=float(t[0]),
    )
