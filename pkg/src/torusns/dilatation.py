"""Time dilatation around an anchor ``t0`` and the ``(rho, r)`` scaling.

With ``sigma = t - t0`` in ``(-1, 1)`` the dilated time is
``tau = sigma / sqrt(1 - sigma^2)`` and the comparison field is
``u = v / g`` with ``g = lam (1 + mu sigma)`` (local kind) or
``g = lam (1 + mu t)`` (global kind).  Since ``dt/dtau = (1 - sigma^2)^(3/2)``
the comparison field obeys::

    du/dtau = w3 * (rho r^2 D u + g rho r N(u, u) - g'/g u),   w3 = (1 - sigma^2)^(3/2)

so ``mu > 0`` adds the explicit damping ``-w3 mu / (1 + mu sigma) u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SchemeConfig
from .nsop import dissipation_diagonal, euler_part
from .spectral import ModeField, decay_constant
from .stepper import Trajectory, _diagnostics


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DilatationParams:
    t0: float = 0.0
    a: float = 0.5
    lam: float = 1.0
    mu: float = 0.0
    kind: str = "local"

    def __post_init__(self) -> None:
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.kind not in ("local", "global"):
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def delta(self) -> float:
        """Length of the dilated interval, ``a / sqrt(1 - a^2)``."""
        return tau_of_t(self.t0 + self.a, self.t0)

    def amplitude(self, t: float) -> float:
        base = t - self.t0 if self.kind == "local" else t
        return self.lam * (1.0 + self.mu * base)

    def log_rate(self, t: float) -> float:
        """``g'(t) / g(t)`` for the amplitude ``g``."""
        base = t - self.t0 if self.kind == "local" else t
        return self.mu / (1.0 + self.mu * base)


def tau_of_t(t: float, t0: float = 0.0) -> float:
    sigma = t - t0
    if not abs(sigma) < 1:
        raise DomainError(f"|t - t0| = {abs(sigma)} must be < 1")
    return sigma / math.sqrt(1.0 - sigma * sigma)


def t_of_tau(tau: float, t0: float = 0.0) -> float:
    if not math.isfinite(tau):
        raise DomainError("tau must be finite")
    return t0 + tau / math.sqrt(1.0 + tau * tau)


def _check_lam(params: DilatationParams) -> None:
    if params.lam == 0:
        raise ValueError("lam must be nonzero")


def to_comparison(traj: Trajectory, params: DilatationParams) -> Trajectory:
    """Map snapshots of ``v`` on ``[t0, t0 + a]`` to ``u`` in dilated time."""
    _check_lam(params)
    out = Trajectory(traj.config)
    for m, t, v in zip(traj.steps, traj.times, traj.snapshots):
        if t < params.t0 - 1e-14 or t > params.t0 + params.a + 1e-14:
            continue
        out.times.append(tau_of_t(min(t, params.t0 + params.a), params.t0))
        out.steps.append(m)
        out.snapshots.append(v * (1.0 / params.amplitude(t)))
    if not out.times:
        raise ValueError("trajectory does not cover the dilatation segment")
    return out


def from_comparison(traj: Trajectory, params: DilatationParams) -> Trajectory:
    """Inverse of :func:`to_comparison`: times become ``t``, fields ``v = g u``."""
    _check_lam(params)
    out = Trajectory(traj.config)
    for m, tau, u in zip(traj.steps, traj.times, traj.snapshots):
        t = t_of_tau(tau, params.t0)
        out.times.append(t)
        out.steps.append(m)
        out.snapshots.append(u * params.amplitude(t))
    return out


def damped_step(u: ModeField, tau: float, dtau: float, params: DilatationParams,
                cfg: SchemeConfig) -> ModeField:
    """One forward-Euler step of the comparison system at dilated time ``tau``."""
    t = t_of_tau(tau, params.t0)
    if not params.t0 - 1e-14 <= t < params.t0 + params.a + 1e-14:
        raise DomainError(f"t = {t} outside the segment [t0, t0 + a)")
    sigma = t - params.t0
    w3 = (1.0 - sigma * sigma) ** 1.5
    g = params.amplitude(t)
    d = dissipation_diagonal(u.lattice, cfg.nu)
    rhs = (cfg.viscous_factor * d * u.coeffs
           + g * euler_part(u, u, cfg.nonlinear_factor).coeffs
           - params.log_rate(t) * u.coeffs)
    return u.with_coeffs(u.coeffs + dtau * w3 * rhs, real_flag=u.real_flag)


def run_comparison(h: ModeField, params: DilatationParams, cfg: SchemeConfig,
                   N: int | None = None) -> Trajectory:
    """``2**N`` damped steps over ``tau`` in ``[0, delta]`` starting from the
    comparison data ``h / g(t0)``; snapshots are kept at every step."""
    N = cfg.N if N is None else N
    steps = 2 ** N
    dtau = params.delta / steps
    u = h * (1.0 / params.amplitude(params.t0))
    C0 = decay_constant(u, cfg.bound_order)
    traj = Trajectory(cfg.replace(N=N, stride=1))
    traj.times.append(0.0)
    traj.steps.append(0)
    traj.snapshots.append(u)
    traj.diagnostics.append(_diagnostics(0, 0.0, u, cfg, C0, None))
    for m in range(1, steps + 1):
        u = damped_step(u, (m - 1) * dtau, dtau, params, cfg)
        row = _diagnostics(m, m * dtau, u, cfg, C0, None)
        traj.times.append(m * dtau)
        traj.steps.append(m)
        traj.snapshots.append(u)
        traj.diagnostics.append(row)
        if row["diverged"]:
            traj.diverged, traj.diverged_step = True, m
            break
    return traj


def comparison_stage_error(h: ModeField, params: DilatationParams, cfg: SchemeConfig,
                           N: int, s: float = 2.0) -> float:
    """Final-time ``h^s`` distance between stages ``N`` and ``N + 1`` after
    mapping back to ``v``."""
    from .spectral import sobolev_norm

    a = from_comparison(run_comparison(h, params, cfg, N), params).snapshots[-1]
    b = from_comparison(run_comparison(h, params, cfg, N + 1), params).snapshots[-1]
    return sobolev_norm(a - b, s)


def scale_parameters(nu: float, C_data: float, c0: float) -> tuple[float, float]:
    """``(rho, r)`` with ``r = c0^2 C^2 / nu`` and ``rho = nu / (2 c0^2 C^2)``."""
    if nu == 0:
        raise ValueError("scaling undefined for nu = 0")
    if not (nu > 0 and C_data > 0 and c0 > 0):
        raise ValueError("nu, C_data and c0 must be positive")
    k = c0 * c0 * C_data * C_data
    return nu / (2.0 * k), k / nu


def scaled_config(cfg: SchemeConfig, C_data: float, c0: float) -> SchemeConfig:
    rho, r = scale_parameters(cfg.nu, C_data, c0)
    return cfg.replace(rho=rho, r=r)


def segment_grid(params: DilatationParams, steps: int) -> np.ndarray:
    """Original times of a uniform grid in ``tau``."""
    taus = np.linspace(0.0, params.delta, steps + 1)
    return np.array([t_of_tau(x, params.t0) for x in taus])
