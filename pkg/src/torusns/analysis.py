"""Decay-bound machinery and data-regularity diagnostics.

* :func:`convolution_bound` measures the constant of the weakly singular
  lattice sum ``sum_b 1/((1+|a-b|^m)(1+|b|^l))`` by brute force.
* :func:`bound_monitor` tracks the envelope ``C0/(1+|a|^(n+s))`` along a run.
* :func:`classify_data` sorts data into the ``s > 1``, ``s = 1`` and
  ``s < 1`` regimes from a fitted decay exponent.
* :func:`divergence_probe` runs the adaptive driver and reports what the
  scheme did; it never claims anything about the continuous problem.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SchemeConfig
from .spectral import DecayProfile, ModeField, decay_constant, decay_margin, fit_decay, shell_maxima
from .spectral import InsufficientShells
from .stepper import Trajectory, run_adaptive

CLASSIFY_BAND = 0.15


class Verdict(str, enum.Enum):
    CONVERGENT = "Convergent"
    CRITICAL = "Critical"
    DIVERGENT = "Divergent"


def _box(n: int, R: int) -> np.ndarray:
    r = np.arange(-R, R + 1)
    return np.stack(np.meshgrid(*([r] * n), indexing="ij"), axis=-1).reshape(-1, n)


def convolution_sums(n: int, exp_m: float, exp_l: float, alpha_max: int, beta_max: int,
                     chunk: int = 1 << 22) -> tuple[np.ndarray, np.ndarray]:
    """``S(a)`` for every ``|a_i| <= alpha_max``, summing ``|b_i| <= beta_max``."""
    alphas = _box(n, alpha_max).astype(float)
    betas = _box(n, beta_max).astype(float)
    wb = 1.0 / (1.0 + np.linalg.norm(betas, axis=1) ** exp_l)
    S = np.zeros(len(alphas))
    rows = max(1, chunk // len(betas))
    for k in range(0, len(alphas), rows):
        a = alphas[k:k + rows]
        dist = np.sqrt(((a[:, None, :] - betas[None, :, :]) ** 2).sum(axis=2))
        S[k:k + rows] = (wb[None, :] / (1.0 + dist ** exp_m)).sum(axis=1)
    return alphas.astype(int), S


def convolution_bound(n: int, exp_m: float, exp_l: float, alpha_max: int,
                      beta_max: int) -> tuple[float, tuple]:
    """Return ``c = max_a S(a) (1 + |a|^(m + l - n))`` and the maximizing ``a``."""
    if not (exp_m > n and exp_l > n):
        raise ValueError("exponents must exceed the dimension")
    if beta_max < alpha_max:
        raise ValueError("beta_max must be >= alpha_max")
    alphas, S = convolution_sums(n, exp_m, exp_l, alpha_max, beta_max)
    weight = 1.0 + np.linalg.norm(alphas, axis=1) ** (exp_m + exp_l - n)
    k = int(np.argmax(S * weight))
    return float(S[k] * weight[k]), tuple(int(x) for x in alphas[k])


@dataclass
class BoundReport:
    s: float
    C0: float
    margins: list
    steps: list
    first_violation: int | None
    theorem_constant: float | None = None

    @property
    def holds(self) -> bool:
        return self.first_violation is None

    @property
    def min_margin(self) -> float:
        return min(self.margins)


def step_bound_constant(n: int, c0: float) -> float:
    """``4 pi^2 (n + n^2) c0``; steps below ``1/(this * C^2)`` keep the
    one-step growth factor of the envelope under control."""
    return 4.0 * math.pi**2 * (n + n * n) * c0


def theorem_constant(n: int, C_data: float, c_n: float, nu: float,
                     order: float | None = None) -> float:
    """Worst-case envelope constant ``C (c(n)^2 C^2 / nu)^m`` with
    ``m = n/2 + 1`` by default.  Astronomically loose; reported beside the
    sharp empirical constant, never used as a pass/fail threshold."""
    m = n / 2 + 1 if order is None else order
    return C_data * (c_n * c_n * C_data * C_data / nu) ** m


def bound_monitor(traj: Trajectory, s: float, C0: float | None = None,
                  c_n: float | None = None) -> BoundReport:
    """Per-snapshot margins ``min_a [C0/(1+|a|^(n+s))] / |v_ia|``.

    ``C0`` defaults to the smallest constant that bounds the first snapshot.
    A margin below 1 means the envelope is violated.
    """
    h = traj.snapshots[0]
    C0 = decay_constant(h, s) if C0 is None else C0
    margins = [decay_margin(f, C0, s) for f in traj.snapshots]
    first = next((m for m, g in zip(traj.steps, margins) if g < 1.0 - 1e-12), None)
    nu = traj.config.nu
    tc = None if c_n is None or nu == 0 else theorem_constant(h.n, C0, c_n, nu)
    return BoundReport(s, C0, margins, list(traj.steps), first, tc)


def envelope_constant(traj: Trajectory, s: float) -> float:
    """Smallest ``C`` with ``|v_ia(t)| <= C/(1+|a|^(n+s))`` at every snapshot."""
    return max(decay_constant(f, s) for f in traj.snapshots)


def classify_data(h: ModeField, band: float = CLASSIFY_BAND) -> tuple[Verdict, DecayProfile]:
    k, _ = shell_maxima(h)
    if len(k) < 3:
        raise InsufficientShells(f"need >= 3 shells, lattice has {len(k)}")
    prof = fit_decay(h)
    s_est = prof.s_estimate
    if s_est > 1 + band:
        return Verdict.CONVERGENT, prof
    if s_est < 1 - band:
        return Verdict.DIVERGENT, prof
    return Verdict.CRITICAL, prof


@dataclass
class ProbeReport:
    verdict: str
    s_estimate: float
    C: float
    N_used: int
    norm_history: list
    errors: dict = field(default_factory=dict)
    min_margin: float = math.inf
    diverged_step: int | None = None
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "s_estimate": self.s_estimate,
            "C": self.C,
            "N_used": self.N_used,
            "norm_history": list(self.norm_history),
            "stage_errors": {str(k): v for k, v in sorted(self.errors.items())},
            "min_margin": self.min_margin,
            "diverged_step": self.diverged_step,
            "reason": self.reason,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, default=_json_float)


def _json_float(x):
    return float(x)


def divergence_probe(h: ModeField, cfg: SchemeConfig, horizon: float | None = None,
                     target_err: float = 1e-4, N_max: int = 10) -> ProbeReport:
    """Run the adaptive driver on ``[0, horizon]`` and report the outcome.

    ``converged`` when stage doubling meets ``target_err``; ``diverged`` when
    a stage blows up (norm threshold or non-finite values); ``inconclusive``
    when ``N_max`` is reached first.  The smallest decay-envelope margin of
    the last trajectory is attached as evidence but does not decide the
    verdict, since the envelope constant of the data is only a lower bound
    for the constant a convergent run may need.
    """
    cfg = cfg if horizon is None else cfg.replace(T=horizon)
    try:
        prof = fit_decay(h)
        s_est, C = prof.s_estimate, prof.constant
    except InsufficientShells:
        s_est, C = math.inf, 0.0
    res = run_adaptive(h, cfg, target_err, max(N_max, cfg.N))
    traj = res.trajectory
    hist = traj.norm_history()
    margin = min(row["bound_margin"] for row in traj.diagnostics)
    if res.diverged:
        return ProbeReport("diverged", s_est, C, res.N_used, hist, res.errors, margin,
                           traj.diverged_step, "norm threshold or non-finite values")
    if res.converged:
        return ProbeReport("converged", s_est, C, res.N_used, hist, res.errors, margin)
    return ProbeReport("inconclusive", s_est, C, res.N_used, hist, res.errors, margin,
                       reason="N_max reached before the target error")
