import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from oracles import brute_sobolev, synthesize
from torusns.spectral import (
    FieldDiverged,
    InsufficientShells,
    ModeField,
    ModeLattice,
    NotRealError,
    basis_convert,
    decay_constant,
    decay_margin,
    divergence,
    enforce_reality,
    eval_physical,
    eval_real,
    fit_decay,
    from_real,
    half_lattice,
    load_field,
    reality_defect,
    save_field,
    sobolev_norm,
    to_real,
    truncate,
)


def cos_x2(L=3):
    lat = ModeLattice(2, L)
    return ModeField.from_modes(lat, {(0, (0, 1)): 0.5, (0, (0, -1)): 0.5}, real=True)


def test_lattice_layout():
    lat = ModeLattice(2, 3)
    assert lat.size == 49
    assert tuple(lat.alphas[lat.zero_index]) == (0, 0)
    assert np.array_equal(lat.alphas[lat.neg_index], -lat.alphas)
    for k in (0, 7, 30):
        assert lat.index_of(lat.alphas[k]) == k


def test_sobolev_single_mode():
    lat = ModeLattice(2, 2)
    f = ModeField.from_modes(lat, {(0, (1, 0)): 1.0})
    assert sobolev_norm(f, 0) == 1.0
    assert sobolev_norm(f, 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert sobolev_norm(ModeField.zeros(lat), 3.0) == 0.0


@pytest.mark.parametrize("s", [0.0, 1.0, 2.5])
def test_sobolev_matches_brute_sum(s):
    f = random_field(2, 3, seed=4)
    assert sobolev_norm(f, s) == pytest.approx(brute_sobolev(f, s), rel=1e-13)


def test_sobolev_diverged_field():
    lat = ModeLattice(2, 1)
    c = np.zeros((2, lat.size), complex)
    c[0, 0] = np.nan
    with pytest.raises(FieldDiverged):
        sobolev_norm(ModeField(lat, c), 1.0)


def test_truncate():
    f = random_field(2, 3, seed=1)
    assert np.array_equal(truncate(f, 3).coeffs, f.coeffs)
    z = truncate(f, 0)
    assert z.lattice.size == 1
    assert z.coeffs[:, 0].tolist() == f.coeffs[:, f.lattice.zero_index].tolist()
    with pytest.raises(ValueError):
        truncate(f, 4)
    with pytest.raises(ValueError):
        truncate(f, -1)


def test_truncate_drops_exact_tail():
    lat = ModeLattice(2, 4)
    amp = 1.0 / (1.0 + lat.abs_alpha**4)
    f = ModeField(lat, np.vstack([amp, amp]))
    g = truncate(f, 2)
    kept = np.all(np.abs(lat.alphas) <= 2, axis=1)
    expected = math.sqrt(2 * np.sum(amp[kept] ** 2))
    assert sobolev_norm(g, 0) < sobolev_norm(f, 0)
    assert sobolev_norm(g, 0) == pytest.approx(expected, rel=1e-14)


def test_real_basis_examples():
    rf = to_real(cos_x2())
    k = list(map(tuple, rf.reps)).index((0, 1))
    assert rf.cos[0, k] == 1.0
    assert np.all(rf.sin == 0)
    lat = ModeLattice(2, 3)
    f = ModeField.from_modes(lat, {(0, (0, 1)): -0.5j, (0, (0, -1)): 0.5j}, real=True)
    assert to_real(f).sin[0, k] == pytest.approx(1.0, abs=1e-15)


def test_half_lattice_covers_pairs():
    lat = ModeLattice(3, 2)
    idx = half_lattice(lat)
    assert idx[0] == lat.zero_index
    both = np.concatenate([idx, lat.neg_index[idx[1:]]])
    assert sorted(both.tolist()) == list(range(lat.size))


@pytest.mark.parametrize("seed", range(5))
def test_real_round_trip(seed):
    f = random_field(2, 3, seed)
    back = from_real(to_real(f))
    assert np.abs(back.coeffs - f.coeffs).max() < 1e-12
    assert isinstance(basis_convert(f), type(to_real(f)))
    assert np.abs(basis_convert(basis_convert(f)).coeffs - f.coeffs).max() < 1e-12


def test_real_and_complex_evaluation_agree():
    f = random_field(2, 3, seed=9)
    x = np.random.default_rng(0).uniform(size=(10, 2))
    assert np.abs(eval_real(to_real(f), x) - eval_physical(f, x)).max() < 1e-12


def test_enforce_reality():
    lat = ModeLattice(2, 3)
    f = ModeField.from_modes(lat, {(0, (1, 0)): 1.0})
    g = enforce_reality(f)
    assert g.mode(0, (1, 0)) == 0.5 and g.mode(0, (-1, 0)) == 0.5
    h = random_field(2, 3, seed=2)
    assert np.array_equal(enforce_reality(h).coeffs, h.coeffs)
    u = random_field(2, 3, seed=3, real=False)
    x = np.random.default_rng(1).uniform(size=(100, 2))
    vals = synthesize(enforce_reality(u).coeffs.T, u.lattice.alphas, x)
    assert np.abs(vals.imag).max() < 1e-12


def test_real_flag_rejects_complex_field():
    lat = ModeLattice(2, 2)
    with pytest.raises(NotRealError):
        ModeField.from_modes(lat, {(0, (1, 0)): 1.0}, real=True)


def test_eval_physical():
    f = cos_x2()
    assert eval_physical(f, [0.0, 0.0])[0] == pytest.approx(1.0)
    assert eval_physical(f, [0.0, 0.25])[0] == pytest.approx(0.0, abs=1e-15)
    g = random_field(2, 3, seed=5)
    x = np.random.default_rng(2).uniform(size=(10, 2))
    direct = np.zeros((10, 2))
    for p in range(10):
        for i in range(2):
            for a, c in zip(g.lattice.alphas, g.coeffs[i]):
                direct[p, i] += (c * np.exp(2j * np.pi * a @ x[p])).real
    assert np.abs(eval_physical(g, x) - direct).max() < 1e-12
    with pytest.raises(NotRealError):
        eval_physical(random_field(2, 2, seed=6, real=False), x)


def test_divergence():
    assert np.all(divergence(cos_x2()) == 0)
    lat = ModeLattice(2, 2)
    f = ModeField.from_modes(lat, {(0, (1, 0)): 0.5, (0, (-1, 0)): 0.5}, real=True)
    d = divergence(f)
    assert d[lat.index_of((1, 0))] == pytest.approx(2j * np.pi * 0.5)
    g = ModeField(ModeLattice(2, 2, 2.0), f.coeffs)
    assert divergence(g)[lat.index_of((1, 0))] == pytest.approx(2j * np.pi * 0.5 / 2.0)


def test_fit_decay_synthetic():
    lat = ModeLattice(2, 8)
    amp = 1.0 / (1.0 + lat.abs_alpha) ** 5
    p = fit_decay(ModeField(lat, np.vstack([amp, amp])))
    assert abs(p.exponent - 5) < 0.05
    assert p.constant == pytest.approx(1.0, rel=0.05)
    flat = fit_decay(ModeField(lat, np.ones((2, lat.size))))
    assert abs(flat.exponent) < 0.05
    assert fit_decay(ModeField.zeros(lat)).constant == 0.0


def test_fit_decay_needs_shells():
    lat = ModeLattice(2, 1)
    f = ModeField.from_modes(lat, {(0, (1, 0)): 1.0})
    with pytest.raises(InsufficientShells):
        fit_decay(f)


def test_decay_constant_and_margin():
    lat = ModeLattice(2, 4)
    amp = 2.0 / (1.0 + lat.abs_alpha**3.5)
    f = ModeField(lat, np.vstack([amp, 0 * amp]))
    assert decay_constant(f, 1.5) == pytest.approx(2.0, rel=1e-14)
    assert decay_margin(f, 2.0, 1.5) == pytest.approx(1.0, rel=1e-14)
    assert decay_margin(f, 1.0, 1.5) == pytest.approx(0.5, rel=1e-14)
    assert decay_margin(ModeField.zeros(lat), 1.0, 1.5) == math.inf


def test_save_load_round_trip(tmp_path):
    f = random_field(2, 3, seed=11)
    save_field(f, tmp_path / "f.json")
    g = load_field(tmp_path / "f.json")
    assert np.array_equal(g.coeffs, f.coeffs)
    assert g.real_flag


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), L=st.integers(1, 3), n=st.integers(2, 3))
def test_property_round_trip_and_reality(seed, L, n):
    f = random_field(n, L, seed)
    assert reality_defect(f) < 1e-14
    assert np.abs(from_real(to_real(f)).coeffs - f.coeffs).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
def test_property_sobolev_monotone_in_s(seed, s, t):
    f = random_field(2, 2, seed)
    lo, hi = sorted((s, t))
    assert sobolev_norm(f, lo) <= sobolev_norm(f, hi) * (1 + 1e-14)
