import csv
import math

import numpy as np
import pytest

from conftest import random_solenoidal
from test_nsop import plane_wave
from torusns import presets
from torusns.config import Control, SchemeConfig, StepKind
from torusns.dyson import matrix_exp_action
from torusns.nsop import assemble_euler_matrix, convection
from torusns.spectral import ModeField, ModeLattice, sobolev_norm
from torusns.stepper import (
    StageMismatch,
    diagnostics_columns,
    extended_controlled_step,
    forward_euler_step,
    rk4_final,
    run_adaptive,
    run_stage,
    stage_doubling_error,
    step,
    trotter_dyson_step,
    trotter_step,
    write_diagnostics_csv,
    zero_mode_increment,
)

EULER = StepKind.FORWARD_EULER
TG_CFG = SchemeConfig(n=2, L=4, nu=0.05, T=0.5, mode=EULER)


def test_forward_euler_linear_step():
    w = plane_wave()
    cfg = SchemeConfig(nu=1.0)
    out = forward_euler_step(w, 0.001, cfg)
    assert np.abs(out.coeffs - (1 - 4 * np.pi**2 * 5 * 0.001) * w.coeffs).max() < 1e-14
    z = ModeField.zeros(ModeLattice(2, 2))
    assert np.all(forward_euler_step(z, 0.1, cfg).coeffs == 0)
    with pytest.raises(ValueError):
        forward_euler_step(w, 0.0, cfg)


def test_forward_euler_taylor_green(tg):
    cfg = SchemeConfig(nu=0.01)
    out = forward_euler_step(tg, 0.01, cfg)
    assert np.abs(out.coeffs - (1 - 8 * np.pi**2 * 0.01 * 0.01) * tg.coeffs).max() < 1e-12


@pytest.mark.parametrize("dt", [1e-3, 0.1, 1.0])
def test_trotter_exact_on_shear(shear, dt):
    cfg = SchemeConfig(nu=0.7)
    out = trotter_step(shear, dt, cfg)
    assert np.abs(out.coeffs - np.exp(-4 * np.pi**2 * 0.7 * dt) * shear.coeffs).max() < 1e-15


def test_trotter_inviscid_is_exp_action():
    v = random_solenoidal(2, 2, 0)
    cfg = SchemeConfig(nu=0.0, L=2)
    ref = matrix_exp_action(assemble_euler_matrix(v), v, t=0.01)
    assert np.abs(trotter_step(v, 0.01, cfg).coeffs - ref.coeffs).max() < 1e-15


def test_trotter_taylor_green(tg):
    cfg = SchemeConfig(nu=0.01)
    out = trotter_step(tg, 0.01, cfg)
    factor = np.exp(-8 * np.pi**2 * 0.01 * 0.01)
    assert np.abs(out.coeffs - factor * tg.coeffs).max() < 1e-4


def test_step_dispatch(tg):
    for kind, fn in [(EULER, forward_euler_step), (StepKind.TROTTER, trotter_step),
                     (StepKind.TROTTER_DYSON, trotter_dyson_step)]:
        cfg = SchemeConfig(nu=0.02, mode=kind)
        assert np.array_equal(step(tg, 0.01, cfg).coeffs, fn(tg, 0.01, cfg).coeffs)


@pytest.mark.parametrize("N", [4, 6])
def test_shear_stage_exact(shear, N):
    cfg = SchemeConfig(nu=1.0, T=1.0, N=N, L=4)
    traj = run_stage(shear, cfg)
    for t, f in zip(traj.times, traj.snapshots):
        assert np.abs(f.coeffs - presets.shear_decay(t, 1.0) * shear.coeffs).max() < 1e-15
    assert traj.times[-1] == pytest.approx(1.0)
    assert len(traj.diagnostics) == 2**N + 1


def test_stage_snapshots_and_stride(tg):
    traj = run_stage(tg, TG_CFG.replace(N=4, stride=4))
    assert traj.steps == [0, 4, 8, 12, 16]
    assert traj.at_step(8) is traj.snapshots[2]
    assert len(traj.norm_history()) == 17
    assert traj.norm_history(2) == [row["hs_norm[2]"] for row in traj.diagnostics]


def _tg_errors(Ns):
    trajs = {N: run_stage(presets.taylor_green_2d(4), TG_CFG.replace(N=N, stride=2**N))
             for N in Ns}
    return [stage_doubling_error(trajs[N], trajs[N + 1], 2.0) for N in Ns[:-1]]


def test_taylor_green_error_halves():
    e8, = _tg_errors([8, 9])
    decay = presets.taylor_green_decay(0.5, 0.05)
    tg = presets.taylor_green_2d(4)
    err8 = sobolev_norm(run_stage(tg, TG_CFG.replace(N=8)).final - decay * tg, 2)
    err9 = sobolev_norm(run_stage(tg, TG_CFG.replace(N=9)).final - decay * tg, 2)
    assert 1.7 <= err8 / err9 <= 2.3
    assert e8 > 0


def test_taylor_green_doubling_ratios():
    errs = _tg_errors([6, 7, 8, 9, 10])
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.7 <= r <= 2.3 for r in ratios), ratios


def test_stage_doubling_checks(shear):
    cfg = SchemeConfig(nu=1.0, T=1.0, N=4)
    a = run_stage(shear, cfg)
    b = run_stage(shear, cfg.replace(N=5))
    assert stage_doubling_error(a, b, 2.0) < 1e-14
    with pytest.raises(StageMismatch):
        stage_doubling_error(a, a, 2.0)
    with pytest.raises(StageMismatch):
        stage_doubling_error(a, run_stage(shear, cfg.replace(N=5, T=2.0)), 2.0)
    z = ModeField.zeros(ModeLattice(2, 2))
    za, zb = run_stage(z, cfg.replace(L=2)), run_stage(z, cfg.replace(L=2, N=5))
    assert stage_doubling_error(za, zb, 1.0) == 0.0


def test_adaptive_shear_uses_initial_stage(shear):
    res = run_adaptive(shear, SchemeConfig(nu=1.0, T=1.0, N=4), 1e-12, N_max=8)
    assert res.converged and res.N_used == 4 and res.verdict == "converged"


def test_adaptive_taylor_green():
    tg = presets.taylor_green_2d(4)
    res = run_adaptive(tg, TG_CFG.replace(N=6), 1e-3, N_max=12)
    assert res.converged and res.N_used == 9
    ref = presets.taylor_green_decay(0.5, 0.05) * tg
    # first order: the finer stage sits about one doubling error from the limit
    assert sobolev_norm(res.trajectory.final - ref, 2) < res.errors[9]
    assert all(0.8 <= o <= 1.2 for o in res.orders.values())


def test_adaptive_not_converged_is_inconclusive(tg):
    res = run_adaptive(tg, TG_CFG.replace(N=3), 1e-12, N_max=4)
    assert not res.converged and not res.diverged and res.verdict == "inconclusive"
    with pytest.raises(ValueError):
        run_adaptive(tg, TG_CFG, 0.0, N_max=4)


def test_blowup_detected():
    # explicit step far beyond its stability limit
    h = random_solenoidal(2, 4, 1)
    cfg = SchemeConfig(nu=1.0, T=1.0, N=4, mode=EULER)
    traj = run_stage(h, cfg)
    assert traj.diverged and traj.diverged_step is not None
    assert traj.steps[-1] == traj.diverged_step
    res = run_adaptive(h, cfg, 1e-4, N_max=6)
    assert res.diverged and res.verdict == "diverged"


def _orders(kind, Ns=(4, 5, 6, 7)):
    h = random_solenoidal(2, 3, 5, s=1.5, C=2.0)
    cfg = SchemeConfig(L=3, nu=0.02, T=0.5, mode=kind)
    trajs = {N: run_stage(h, cfg.replace(N=N, stride=2**N)) for N in Ns}
    errs = [stage_doubling_error(trajs[a], trajs[a + 1], 2.0) for a in Ns[:-1]]
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


def test_trotter_first_order_on_random_data():
    assert all(0.8 <= o <= 1.2 for o in _orders(StepKind.TROTTER))


def test_trotter_dyson_second_order_on_random_data():
    # the degree-2 Dyson polynomial is only conditionally stable, so start finer
    assert all(1.7 <= o <= 2.3 for o in _orders(StepKind.TROTTER_DYSON, (6, 7, 8, 9)))


def test_trotter_dyson_coarse_step_flags_divergence():
    h = random_solenoidal(2, 3, 5, s=1.5, C=2.0)
    cfg = SchemeConfig(L=3, nu=0.02, T=0.5, N=4, mode=StepKind.TROTTER_DYSON)
    assert run_stage(h, cfg).diverged


def test_rk4_reference_converges():
    h = random_solenoidal(2, 3, 2)
    cfg = SchemeConfig(L=3, nu=0.02, T=0.25)
    a, b, c = (rk4_final(h, cfg.replace(N=N)) for N in (3, 4, 5))
    ratio = sobolev_norm(a - b, 2) / sobolev_norm(b - c, 2)
    assert 12 < ratio < 20


def test_zero_mode_increment_and_control():
    h = random_solenoidal(2, 3, 4)
    cfg = SchemeConfig(L=3, nu=0.05, control=Control.EXTENDED_ZERO_MODE)
    z = h.lattice.zero_index
    inc = zero_mode_increment(h, 0.01, cfg)
    assert np.allclose(inc, 0.01 * convection(h, h).coeffs[:, z].real)
    v, c = extended_controlled_step(h, np.array([0.1, -0.2]), 0.01, cfg)
    assert np.all(v.coeffs[:, z] == 0)
    with pytest.raises(ValueError):
        extended_controlled_step(h, np.zeros(2), 0.01, cfg.replace(control=Control.NONE))


def test_control_symmetric_data_keeps_accumulator(tg):
    cfg = SchemeConfig(nu=0.05, control=Control.EXTENDED_ZERO_MODE)
    _, c = extended_controlled_step(tg, np.zeros(2), 0.01, cfg)
    assert np.all(c == 0)


def test_controlled_matches_uncontrolled_on_taylor_green(tg):
    cfg = SchemeConfig(nu=0.05, T=0.5, N=5)
    a = run_stage(tg, cfg)
    b = run_stage(tg, cfg.replace(control=Control.EXTENDED_ZERO_MODE))
    for x, y in zip(a.snapshots, b.snapshots):
        assert np.abs(x.coeffs - y.coeffs).max() < 1e-12


def test_diagnostics_csv(tmp_path, tg):
    traj = run_stage(tg, TG_CFG.replace(N=3))
    path = tmp_path / "d.csv"
    write_diagnostics_csv(traj, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == diagnostics_columns(traj.config)
    assert len(rows) == 1 + 9
    assert rows[1][0] == "0" and rows[-1][-1] == "0"
