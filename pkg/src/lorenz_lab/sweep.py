"""
Parameter sweeps over alpha and simulation-based regime checks.

``alpha_sweep`` runs the spectral analysis and the Hopf classification on a
uniform alpha grid and checks the qualitative claims that should hold along
it: tau_c decreasing in alpha, a positive discriminant and transversality
derivative, and a supercritical, stable bifurcation everywhere.
``verify_regimes`` integrates the delayed system slightly below and above
tau_c and reports what the trajectory actually did.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core_model import params_from_alpha, regulation_target
from .dde import DEFAULT_STEPS_PER_DELAY, DEFAULT_T_END, DEFAULT_INITIAL, integrate_dde, oscillation_metrics, write_csv
from .errors import ConfigurationError, DivergenceError, LorenzLabError
from .normal_form import classify
from .spectral import build_aux_cubic, build_char_poly, critical_delay

SWEEP_HEADER = ["alpha", "tau_c", "nu0", "delta", "fprime", "beta2", "mu2", "t2", "direction", "stability"]
THREADS_ENV = "LORENZ_LAB_THREADS"


@dataclass
class SweepRow:
    alpha: float
    tau_c: float = math.nan
    nu0: float = math.nan
    delta: float = math.nan
    fprime: float = math.nan
    beta2: float = math.nan
    mu2: float = math.nan
    t2: float = math.nan
    re_lambda_prime: float = math.nan
    direction: str = ""
    stability: str = ""
    error: Optional[dict] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_row(self):
        return [
            self.alpha, self.tau_c, self.nu0, self.delta, self.fprime,
            self.beta2, self.mu2, self.t2,
            self.direction or "failed", self.stability or "failed",
        ]


def analyze_alpha(alpha: float, x_r: Optional[float] = None) -> SweepRow:
    """One sweep row; pipeline errors are caught and stored on the row."""
    row = SweepRow(alpha=float(alpha))
    try:
        params = params_from_alpha(alpha)
        target = regulation_target(params, x_r)
        poly = build_char_poly(params, target)
        aux = build_aux_cubic(poly)
        sa = critical_delay(params, target)
        row.delta = aux.delta
        if sa.tau_c is None:
            row.direction = row.stability = "none"
            return row
        nf = classify(params, target, sa.tau_c, sa.nu0)
        row.tau_c, row.nu0 = sa.tau_c, sa.nu0
        row.fprime = float(aux.dF(sa.nu0 ** 2))
        row.beta2, row.mu2, row.t2 = nf.beta2, nf.mu2, nf.t2
        row.re_lambda_prime = nf.lambda_prime.real
        row.direction, row.stability = nf.direction, nf.orbit_stability
    except LorenzLabError as exc:
        row.error = exc.to_dict()
    return row


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {cap}")
    return max(1, min(cap, n_tasks))


@dataclass
class SweepResult:
    rows: List[SweepRow]
    verdicts: dict = field(default_factory=dict)

    def to_csv(self, dest=None):
        return write_csv(dest, SWEEP_HEADER, [r.csv_row() for r in self.rows])

    def summary(self) -> dict:
        return {
            "n": len(self.rows),
            "failed": [r.alpha for r in self.rows if r.failed],
            "errors": {f"{r.alpha:.17g}": r.error for r in self.rows if r.failed},
            "verdicts": self.verdicts,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def sweep_verdicts(rows: Sequence[SweepRow]) -> dict:
    ok = [r for r in rows if not r.failed and not math.isnan(r.tau_c)]
    taus = [r.tau_c for r in ok]
    complete = len(ok) == len(rows)
    return {
        "complete": complete,
        "tau_c_strictly_decreasing": complete and all(a > b for a, b in zip(taus, taus[1:])),
        "delta_positive": complete and all(r.delta > 0 for r in ok),
        "fprime_positive": complete and all(r.fprime > 0 for r in ok),
        "beta2_negative": complete and all(r.beta2 < 0 for r in ok),
        "mu2_positive": complete and all(r.mu2 > 0 for r in ok),
        "transversality_signs_agree": complete
        and all(np.sign(r.re_lambda_prime) == np.sign(r.fprime) == 1 for r in ok),
        "supercritical_everywhere": complete
        and all(r.direction == "supercritical" and r.stability == "stable" for r in ok),
    }


def alpha_sweep(n: int = 21, x_r: Optional[float] = None) -> SweepResult:
    """Analyze alpha = 0, 1/(n-1), ..., 1.

    Rows are computed concurrently (``LORENZ_LAB_THREADS`` caps the pool)
    and returned in alpha order.
    """
    if int(n) != n or n < 2:
        raise ConfigurationError(f"sweep needs an integer n >= 2, got {n!r}")
    n = int(n)
    alphas = [k / (n - 1) for k in range(n)]
    with ThreadPoolExecutor(max_workers=_worker_count(n)) as pool:
        rows = list(pool.map(lambda a: analyze_alpha(a, x_r), alphas))
    return SweepResult(rows=rows, verdicts=sweep_verdicts(rows))


# ---------------------------------------------------------------------------
# regime checks by simulation

CONVERGED = "converged"
OSCILLATING = "oscillating"
DIVERGED = "diverged"
INDETERMINATE = "indeterminate"


@dataclass
class RegimeVerdict:
    alpha: float
    tau: float
    verdict: str
    offset: Optional[float] = None
    expected: Optional[str] = None
    metrics: Optional[dict] = None
    blowup_time: Optional[float] = None

    @property
    def agrees(self) -> Optional[bool]:
        return None if self.expected is None else self.verdict == self.expected

    def to_dict(self) -> dict:
        d = asdict(self)
        d["agrees"] = self.agrees
        return d


def simulate_regime(
    alpha: float,
    tau: float,
    x_r: Optional[float] = None,
    initial: Sequence[float] = DEFAULT_INITIAL,
    steps: int = DEFAULT_STEPS_PER_DELAY,
    t_end: float = DEFAULT_T_END,
) -> RegimeVerdict:
    """Integrate at an absolute delay and label the long-time behaviour.

    A run that trips the divergence guard is labelled ``diverged``; one that
    neither settles nor reaches a steady oscillation is ``indeterminate``.
    """
    params = params_from_alpha(alpha)
    target = regulation_target(params, x_r)
    try:
        traj = integrate_dde(params, target, tau, initial=initial, h=tau / steps, t_end=t_end)
    except DivergenceError as exc:
        return RegimeVerdict(alpha=params.alpha, tau=tau, verdict=DIVERGED, blowup_time=exc.t)
    m = oscillation_metrics(traj, target)
    if m.converged:
        verdict = CONVERGED
    elif m.oscillating:
        verdict = OSCILLATING
    else:
        verdict = INDETERMINATE
    return RegimeVerdict(alpha=params.alpha, tau=tau, verdict=verdict, metrics=m.to_dict())


def verify_regimes(
    alpha: float,
    offsets: Sequence[float],
    x_r: Optional[float] = None,
    **sim_kw,
) -> List[RegimeVerdict]:
    """Simulate at tau = tau_c (1 + offset) and compare with the linear prediction.

    Negative offsets are expected to converge, positive ones to oscillate.
    """
    if any(o == 0 for o in offsets):
        raise ConfigurationError("offsets must exclude 0 (tau_c itself is not a regime)")
    params = params_from_alpha(alpha)
    target = regulation_target(params, x_r)
    sa = critical_delay(params, target)
    if sa.tau_c is None:
        raise ConfigurationError(f"alpha={alpha}: no critical delay to offset from")
    out = []
    for off in offsets:
        v = simulate_regime(alpha, sa.tau_c * (1.0 + off), x_r=x_r, **sim_kw)
        v.offset = float(off)
        v.expected = CONVERGED if off < 0 else OSCILLATING
        out.append(v)
    return out
