"""Global Picard iteration on the linearized mode system.

Each iterate solves the linear problem ``dw/dt = rho r^2 D w + E(v_prev(t)) w``
with the coefficients taken from the previous iterate (left piecewise
constant in time) and the initial data fixed.  Contraction is measured in
the time-weighted norm ``sup_t exp(-C t) |w(t)|_{h^s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Control, SchemeConfig
from .dyson import matrix_exp_action
from .nsop import assemble_euler_matrix, dissipation_diagonal
from .spectral import FieldDiverged, ModeField, decay_constant, sobolev_norm
from .stepper import Trajectory, _diagnostics, _without_zero_modes


class NoContraction(RuntimeError):
    """Raised when the iteration stalls; ``distances`` holds the evidence."""

    def __init__(self, message: str, distances: list):
        super().__init__(message)
        self.distances = distances


@dataclass(frozen=True)
class WeightedNormSpec:
    s: float
    C_weight: float
    T: float

    def __post_init__(self) -> None:
        if self.C_weight < 0:
            raise ValueError("C_weight must be >= 0")
        if not self.T > 0:
            raise ValueError("T must be > 0")


@dataclass
class PicardResult:
    trajectory: Trajectory
    ratios: list
    distances: list
    iterations: int
    converged: bool
    iterates: list = field(default_factory=list, repr=False)

    def __iter__(self):
        yield self.trajectory
        yield self.ratios


def constant_trajectory(h: ModeField, cfg: SchemeConfig) -> Trajectory:
    """Trajectory that holds ``h`` on every step of the stage grid."""
    traj = Trajectory(cfg.replace(stride=1))
    for m in range(cfg.steps + 1):
        traj.times.append(m * cfg.dt)
        traj.steps.append(m)
        traj.snapshots.append(h)
    return traj


def _coefficient_at(coeff_traj: Trajectory, t: float) -> ModeField:
    times = np.asarray(coeff_traj.times)
    k = int(np.searchsorted(times, t + 1e-12 * max(1.0, abs(t)), side="right")) - 1
    return coeff_traj.snapshots[max(k, 0)]


def solve_linearized(coeff_traj: Trajectory, h: ModeField, cfg: SchemeConfig) -> Trajectory:
    """Frozen-coefficient exponential steps for the linear system with
    coefficients from ``coeff_traj``; all steps are kept as snapshots."""
    if not h.is_finite():
        raise FieldDiverged("initial data not finite")
    if coeff_traj.times[-1] < cfg.T * (1 - 1e-12):
        raise ValueError("coefficient trajectory does not cover [0, T]")
    controlled = cfg.control is Control.EXTENDED_ZERO_MODE
    dt = cfg.dt
    visc = np.exp(cfg.viscous_factor * dissipation_diagonal(h.lattice, cfg.nu) * dt)
    w = _without_zero_modes(h) if controlled else h
    C0 = decay_constant(h, cfg.bound_order)
    traj = Trajectory(cfg.replace(stride=1))
    traj.times.append(0.0)
    traj.steps.append(0)
    traj.snapshots.append(w)
    traj.diagnostics.append(_diagnostics(0, 0.0, w, cfg, C0, None))
    for m in range(1, cfg.steps + 1):
        t_prev = (m - 1) * dt
        v = _coefficient_at(coeff_traj, t_prev)
        E = assemble_euler_matrix(v, cfg.nonlinear_factor, t_prev, exclude_zero_mode=controlled)
        w = matrix_exp_action(E, w, cfg.exp_tolerance, t=dt)
        w = w.with_coeffs(visc * w.coeffs, real_flag=h.real_flag)
        row = _diagnostics(m, m * dt, w, cfg, C0, None)
        traj.times.append(m * dt)
        traj.steps.append(m)
        traj.snapshots.append(w)
        traj.diagnostics.append(row)
        if row["diverged"]:
            traj.diverged, traj.diverged_step = True, m
            break
    return traj


def weighted_norm(traj: Trajectory, spec: WeightedNormSpec) -> float:
    return max(math.exp(-spec.C_weight * t) * sobolev_norm(f, spec.s)
               for t, f in zip(traj.times, traj.snapshots))


def weighted_distance(a: Trajectory, b: Trajectory, spec: WeightedNormSpec) -> float:
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times):
        raise ValueError("trajectories live on different time grids")
    return max(math.exp(-spec.C_weight * t) * sobolev_norm(x - y, spec.s)
               for t, x, y in zip(a.times, a.snapshots, b.snapshots))


def lipschitz_surrogate(h: ModeField, cfg: SchemeConfig, s: float, probes: int = 8,
                        seed: int = 0) -> float:
    """Largest ``|E(h) w|_{h^s}`` over random unit vectors ``w`` of ``h^s``."""
    E = assemble_euler_matrix(h, cfg.nonlinear_factor)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(probes):
        c = rng.standard_normal(h.coeffs.shape) + 1j * rng.standard_normal(h.coeffs.shape)
        w = ModeField(h.lattice, c)
        w = w * (1.0 / sobolev_norm(w, s))
        best = max(best, sobolev_norm(E.apply(w), s))
    return best


def default_norm_spec(h: ModeField, cfg: SchemeConfig, s: float | None = None) -> WeightedNormSpec:
    """``C_weight = 3 x`` the Lipschitz surrogate of ``E(h)``."""
    s = cfg.error_order if s is None else s
    return WeightedNormSpec(s, 3.0 * lipschitz_surrogate(h, cfg, s), cfg.T)


def picard_iterate(h: ModeField, cfg: SchemeConfig, spec: WeightedNormSpec | None = None,
                   max_iter: int = 20, tol: float = 1e-10,
                   keep_iterates: bool = False) -> PicardResult:
    """Iterate ``v^m = solve_linearized(v^{m-1}, h)`` from ``v^0`` with
    coefficients frozen at ``h``.

    Stops once the weighted distance between successive iterates is below
    ``tol``.  Raises :class:`NoContraction` if ``max_iter`` is reached while
    the distances stopped decreasing.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    spec = default_norm_spec(h, cfg) if spec is None else spec
    prev = solve_linearized(constant_trajectory(h, cfg), h, cfg)
    iterates = [prev] if keep_iterates else []
    distances: list = []
    for it in range(1, max_iter + 1):
        cur = solve_linearized(prev, h, cfg)
        if keep_iterates:
            iterates.append(cur)
        distances.append(weighted_distance(cur, prev, spec))
        prev = cur
        if distances[-1] < tol:
            return PicardResult(cur, _ratios(distances), distances, it, True, iterates)
    ratios = _ratios(distances)
    if len(ratios) >= 2 and ratios[-1] >= 1.0:
        raise NoContraction(f"no contraction after {max_iter} iterations "
                            f"(last ratio {ratios[-1]:.3g})", distances)
    return PicardResult(prev, ratios, distances, max_iter, False, iterates)


def _ratios(d: list) -> list:
    return [b / a if a > 0 else 0.0 for a, b in zip(d, d[1:])]
