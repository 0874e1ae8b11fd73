"""Canonical initial data and closed-form reference solutions."""

from __future__ import annotations

import numpy as np

from .spectral import ModeField, ModeLattice, divergence, reality_defect


def _check(field: ModeField) -> ModeField:
    scale = max(1.0, field.max_abs())
    assert reality_defect(field) <= 1e-12 * scale, "preset is not reality-symmetric"
    lat = field.lattice
    assert np.abs(divergence(field)).max(initial=0.0) <= 1e-12 * scale * (1 + lat.L) / lat.l, \
        "preset is not divergence free"
    return field


def taylor_green_2d(L: int, amplitude: float = 1.0, l: float = 1.0) -> ModeField:
    """``v1 = A cos(2 pi x1/l) sin(2 pi x2/l)``, ``v2 = -A sin(2 pi x1/l) cos(2 pi x2/l)``."""
    if L < 2:
        raise ValueError("Taylor-Green needs L >= 2 to hold its pressure modes")
    lat = ModeLattice(2, L, l)
    q = amplitude / 4j
    modes = {
        (0, (1, 1)): q, (0, (-1, 1)): q, (0, (1, -1)): -q, (0, (-1, -1)): -q,
        (1, (1, 1)): -q, (1, (1, -1)): -q, (1, (-1, 1)): q, (1, (-1, -1)): q,
    }
    return _check(ModeField.from_modes(lat, modes, real=True))


def taylor_green_decay(t: float, nu: float, l: float = 1.0, viscous_factor: float = 1.0) -> float:
    """Amplitude factor of the Taylor-Green vortex at time ``t``."""
    return float(np.exp(-viscous_factor * nu * 8 * np.pi**2 * t / l**2))


def single_shear(L: int, axes: tuple[int, int] = (0, 1), amplitude: float = 1.0,
                 n: int = 2, l: float = 1.0) -> ModeField:
    """``v_i = A cos(2 pi x_j / l)`` for ``(i, j) = axes``, all else zero."""
    i, j = axes
    if L < 1:
        raise ValueError("shear needs L >= 1")
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"invalid axis pair {axes} for n={n}")
    lat = ModeLattice(n, L, l)
    e = np.zeros(n, dtype=int)
    e[j] = 1
    modes = {(i, tuple(e)): amplitude / 2, (i, tuple(-e)): amplitude / 2}
    return _check(ModeField.from_modes(lat, modes, real=True))


def shear_decay(t: float, nu: float, l: float = 1.0, viscous_factor: float = 1.0) -> float:
    return float(np.exp(-viscous_factor * nu * 4 * np.pi**2 * t / l**2))


def random_decay(L: int, n: int, s: float, C: float, seed: int, l: float = 1.0) -> ModeField:
    """Random divergence-free real data with ``|v_ia| = C / (1 + |a|^(n+s))``.

    Phases are drawn for one representative of each pair ``{a, -a}`` and
    mirrored by conjugation, so the magnitudes are exact before the
    per-mode projection ``v_a <- v_a - a (a . v_a) / |a|^2``.
    """
    if not C > 0:
        raise ValueError("C must be > 0")
    lat = ModeLattice(n, L, l)
    rng = np.random.default_rng(seed)
    amp = C / (1.0 + lat.abs_alpha ** (n + s))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n, lat.size))
    c = amp * np.exp(1j * phase)
    z = lat.zero_index
    c[:, z] = amp[z] * np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    upper = np.arange(z + 1, lat.size)
    c[:, lat.neg_index[upper]] = np.conj(c[:, upper])
    a = lat.alphas.T.astype(float)
    a2 = lat.alpha_sq.copy()
    a2[z] = 1.0
    c = c - a * (np.sum(a * c, axis=0) / a2)
    return _check(ModeField(lat, c, real_flag=True))


def scaled_to_norm(field: ModeField, s: float, target: float) -> ModeField:
    """Rescale ``field`` so that its ``h^s`` norm equals ``target``."""
    from .spectral import sobolev_norm

    norm = sobolev_norm(field, s)
    if norm == 0:
        raise ValueError("cannot rescale the zero field")
    return ModeField(field.lattice, field.coeffs * (target / norm), real_flag=field.real_flag)


PRESETS = {
    "taylor_green_2d": taylor_green_2d,
    "single_shear": single_shear,
    "random_decay": random_decay,
}
