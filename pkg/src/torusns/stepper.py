"""Euler-type product schemes on the uniform grid ``dt = T / 2**N``.

Three step kinds are available:

* ``ForwardEuler``: ``v + dt * rhs(v)``.
* ``Trotter``: the Euler part is frozen at the start of the step and
  exponentiated, then the exact viscous factor is applied,
  ``exp(rho r^2 D dt) exp(E(v) dt) v``.  First order in ``dt``.
* ``TrotterDyson``: symmetric viscous half steps around a second-order
  Dyson series for the Euler part, with the coefficient matrix interpolated
  linearly between the start value and a forward-Euler predictor.

With ``ExtendedZeroMode`` control the zero modes are moved into a
per-component accumulator ``c`` (the mean flow).  Each step advects the
nonzero modes by ``c`` through an exact phase factor, adds the zero-mode
convection increment to ``c`` and resets the zero modes to 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .config import Control, SchemeConfig, StepKind
from .dyson import linear_sampler, matrix_exp_action, time_ordered_series
from .nsop import assemble_euler_matrix, convection, dissipation_diagonal, euler_part, ns_rhs
from .serial import fmt_float
from .spectral import (
    FieldDiverged,
    ModeField,
    decay_constant,
    decay_margin,
    divergence,
    sobolev_norm,
)


class StageMismatch(ValueError):
    pass


@dataclass
class Trajectory:
    config: SchemeConfig
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    diverged: bool = False
    diverged_step: int | None = None
    control: np.ndarray | None = None

    @property
    def final(self) -> ModeField:
        return self.snapshots[-1]

    def at_step(self, m: int) -> ModeField:
        return self.snapshots[self.steps.index(m)]

    def norm_history(self, s: float | None = None) -> list:
        key = f"hs_norm[{self.config.blowup_order if s is None else s:g}]"
        return [row[key] for row in self.diagnostics if key in row]


# ----------------------------------------------------------------------------
# single steps
# ----------------------------------------------------------------------------

def _viscous_factor(v: ModeField, dt: float, cfg: SchemeConfig) -> np.ndarray:
    return np.exp(cfg.viscous_factor * dissipation_diagonal(v.lattice, cfg.nu) * dt)


def forward_euler_step(v: ModeField, dt: float, cfg: SchemeConfig) -> ModeField:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    out = v.coeffs + dt * ns_rhs(v, cfg).coeffs
    return v.with_coeffs(out, real_flag=v.real_flag)


def trotter_step(v: ModeField, dt: float, cfg: SchemeConfig, t: float = 0.0) -> ModeField:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    E = assemble_euler_matrix(v, cfg.nonlinear_factor, time_label=t)
    w = matrix_exp_action(E, v, cfg.exp_tolerance, t=dt)
    return v.with_coeffs(_viscous_factor(v, dt, cfg) * w.coeffs, real_flag=v.real_flag)


def trotter_dyson_step(v: ModeField, dt: float, cfg: SchemeConfig, t: float = 0.0) -> ModeField:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    half = _viscous_factor(v, dt / 2, cfg)
    vh = v.with_coeffs(half * v.coeffs)
    factor = cfg.nonlinear_factor
    E0 = assemble_euler_matrix(vh, factor, time_label=t)
    pred = vh.with_coeffs(vh.coeffs + dt * euler_part(vh, vh, factor).coeffs)
    E1 = assemble_euler_matrix(pred, factor, time_label=t + dt)
    w = time_ordered_series(linear_sampler(E0, E1, t, dt), vh, cfg.dyson_order,
                            cfg.dyson_points, t0=t, dt=dt)
    return v.with_coeffs(half * w.coeffs, real_flag=v.real_flag)


def step(v: ModeField, dt: float, cfg: SchemeConfig, t: float = 0.0) -> ModeField:
    if cfg.mode is StepKind.FORWARD_EULER:
        return forward_euler_step(v, dt, cfg)
    if cfg.mode is StepKind.TROTTER:
        return trotter_step(v, dt, cfg, t)
    return trotter_dyson_step(v, dt, cfg, t)


def rk4_step(v: ModeField, dt: float, cfg: SchemeConfig) -> ModeField:
    """Classical four-stage step on the full right-hand side (reference only)."""
    def f(c):
        return ns_rhs(v.with_coeffs(c), cfg).coeffs

    c = v.coeffs
    k1 = f(c)
    k2 = f(c + dt / 2 * k1)
    k3 = f(c + dt / 2 * k2)
    k4 = f(c + dt * k3)
    return v.with_coeffs(c + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), real_flag=v.real_flag)


def rk4_final(h: ModeField, cfg: SchemeConfig) -> ModeField:
    v = h
    for _ in range(cfg.steps):
        v = rk4_step(v, cfg.dt, cfg)
    return v


def zero_mode_increment(v: ModeField, dt: float, cfg: SchemeConfig) -> np.ndarray:
    """Zero-mode convection over one step, ``dt * rho r * B(v, v)_0`` (real part)."""
    z = v.lattice.zero_index
    return dt * cfg.nonlinear_factor * convection(v, v).coeffs[:, z].real


def _without_zero_modes(v: ModeField) -> ModeField:
    c = np.array(v.coeffs)
    c[:, v.lattice.zero_index] = 0.0
    return v.with_coeffs(c, real_flag=v.real_flag)


def extended_controlled_step(v: ModeField, c: np.ndarray, dt: float, cfg: SchemeConfig,
                             t: float = 0.0) -> tuple[ModeField, np.ndarray]:
    """One step of the zero-mode controlled scheme; returns ``(v', c')``."""
    if cfg.control is not Control.EXTENDED_ZERO_MODE:
        raise ValueError("extended_controlled_step needs control=ExtendedZeroMode")
    c = np.asarray(c, dtype=float)
    v = _without_zero_modes(v)
    base = step(v, dt, cfg, t)
    lat = v.lattice
    shift = np.exp(-cfg.nonlinear_factor * 2j * np.pi * (lat.alphas @ c) * dt / lat.l)
    out = base.coeffs * shift
    out[:, lat.zero_index] = 0.0
    c_new = c + zero_mode_increment(v, dt, cfg)
    return base.with_coeffs(out, real_flag=v.real_flag), c_new


# ----------------------------------------------------------------------------
# stage runs
# ----------------------------------------------------------------------------

def _diagnostics(m: int, t: float, v: ModeField, cfg: SchemeConfig, C0: float,
                 c: np.ndarray | None) -> dict:
    row: dict = {"step": m, "t": t}
    finite = v.is_finite()
    orders = sorted(set(cfg.norm_orders) | {cfg.blowup_order, cfg.error_order})
    for s in orders:
        row[f"hs_norm[{s:g}]"] = sobolev_norm(v, s) if finite else math.inf
    row["max_div"] = float(np.abs(divergence(v)).max()) if finite else math.inf
    row["bound_margin"] = decay_margin(v, C0, cfg.bound_order) if finite else 0.0
    row["zero_mode_max"] = float(np.abs(v.coeffs[:, v.lattice.zero_index]).max())
    cc = np.zeros(v.n) if c is None else c
    for i, ci in enumerate(cc):
        row[f"c_accum[{i + 1}]"] = float(ci)
    row["diverged"] = not finite
    return row


def run_stage(h: ModeField, cfg: SchemeConfig) -> Trajectory:
    """Apply ``2**N`` steps of the configured scheme starting from ``h``."""
    if not h.is_finite():
        raise FieldDiverged("initial data not finite")
    controlled = cfg.control is Control.EXTENDED_ZERO_MODE
    dt, nsteps, stride = cfg.dt, cfg.steps, cfg.snapshot_stride()
    c = np.array(h.coeffs[:, h.lattice.zero_index].real) if controlled else None
    v = _without_zero_modes(h) if controlled else h
    C0 = decay_constant(h, cfg.bound_order)
    traj = Trajectory(cfg)
    traj.times.append(0.0)
    traj.steps.append(0)
    traj.snapshots.append(v)
    traj.diagnostics.append(_diagnostics(0, 0.0, v, cfg, C0, c))
    ref = {k: x for k, x in traj.diagnostics[0].items() if k.startswith("hs_norm") and x > 0}
    for m in range(1, nsteps + 1):
        t_prev = (m - 1) * dt
        try:
            if controlled:
                v, c = extended_controlled_step(v, c, dt, cfg, t_prev)
            else:
                v = step(v, dt, cfg, t_prev)
        except FloatingPointError:
            v = v.with_coeffs(np.full_like(v.coeffs, np.nan))
        t = m * dt
        row = _diagnostics(m, t, v, cfg, C0, c)
        traj.diagnostics.append(row)
        blown = row["diverged"] or any(row[k] > cfg.divergence_threshold * x
                                       for k, x in ref.items())
        if blown or m % stride == 0 or m == nsteps:
            traj.times.append(t)
            traj.steps.append(m)
            traj.snapshots.append(v)
        if blown:
            traj.diverged = True
            traj.diverged_step = m
            break
    traj.control = c
    return traj


def stage_doubling_error(traj_N: Trajectory, traj_N1: Trajectory, s: float) -> float:
    """Max ``h^s`` distance between stages ``N`` and ``N+1`` on the coarse grid
    times retained by both trajectories."""
    a, b = traj_N.config, traj_N1.config
    if b.N != a.N + 1 or not math.isclose(a.T, b.T) or a.L != b.L or a.n != b.n:
        raise StageMismatch(f"stages N={a.N}, N={b.N} (T={a.T}, {b.T}) are not consecutive")
    if traj_N.diverged or traj_N1.diverged:
        return math.inf
    fine = {m: f for m, f in zip(traj_N1.steps, traj_N1.snapshots)}
    common = [(f, fine[2 * m]) for m, f in zip(traj_N.steps, traj_N.snapshots) if 2 * m in fine]
    if not common:
        raise StageMismatch("no common coarse-grid snapshot times")
    return max(sobolev_norm(x - y, s) for x, y in common)


@dataclass
class AdaptiveResult:
    trajectory: Trajectory
    N_used: int
    converged: bool
    diverged: bool
    errors: dict
    trajectories: dict = field(repr=False, default_factory=dict)

    @property
    def orders(self) -> dict:
        """``log2(err_N / err_{N+1})`` for consecutive measured stages."""
        out = {}
        for N in sorted(self.errors):
            if N + 1 in self.errors and self.errors[N + 1] > 0 and self.errors[N] > 0:
                out[N] = math.log2(self.errors[N] / self.errors[N + 1])
        return out

    @property
    def verdict(self) -> str:
        if self.diverged:
            return "diverged"
        return "converged" if self.converged else "inconclusive"


def run_adaptive(h: ModeField, cfg: SchemeConfig, target_err: float, N_max: int,
                 s: float | None = None, keep_all: bool = False) -> AdaptiveResult:
    """Double the stage from ``cfg.N`` until the stage-doubling error in
    ``h^s`` (default ``cfg.error_order``) drops below ``target_err``.

    ``N_used`` is the coarser stage of the first pair that meets the target;
    the returned trajectory is the finer one of that pair.
    """
    if not target_err > 0:
        raise ValueError("target_err must be > 0")
    s = cfg.error_order if s is None else s
    N = cfg.N
    coarse = run_stage(h, cfg)
    trajs = {N: coarse}
    errors: dict = {}
    if coarse.diverged:
        return AdaptiveResult(coarse, N, False, True, errors, trajs)
    while N < N_max:
        fine = run_stage(h, cfg.replace(N=N + 1))
        trajs[N + 1] = fine
        if fine.diverged:
            return AdaptiveResult(fine, N + 1, False, True, errors, trajs if keep_all else {})
        errors[N] = stage_doubling_error(coarse, fine, s)
        if errors[N] < target_err:
            return AdaptiveResult(fine, N, True, False, errors, trajs if keep_all else {})
        coarse, N = fine, N + 1
        if not keep_all:
            trajs = {N: coarse}
    return AdaptiveResult(coarse, N, False, False, errors, trajs if keep_all else {})


# ----------------------------------------------------------------------------
# output
# ----------------------------------------------------------------------------

def diagnostics_columns(cfg: SchemeConfig) -> list:
    orders = sorted(set(cfg.norm_orders) | {cfg.blowup_order, cfg.error_order})
    cols = ["step", "t"] + [f"hs_norm[{s:g}]" for s in orders]
    cols += ["max_div", "bound_margin", "zero_mode_max"]
    cols += [f"c_accum[{i + 1}]" for i in range(cfg.n)]
    return cols + ["diverged"]


def write_diagnostics_csv(traj: Trajectory, path) -> None:
    cols = diagnostics_columns(traj.config)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in traj.diagnostics:
            w.writerow([_fmt(row[c]) for c in cols])


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt_float(x)
