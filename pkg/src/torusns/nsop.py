"""The Navier-Stokes mode operator on a truncated lattice.

Right-hand side of the mode system, with ``k = 2 pi / l``::

    dv_ia/dt = rho r^2 d_a v_ia + rho r (B(v, v)_ia + G(v, v)_ia)

    d_a     = -nu k^2 |a|^2                            (viscous symbol)
    B(v,w)  = -sum_j sum_g (i k g_j) v_j(a-g) w_ig      (convection)
    G(v,w)  = -(i k a_i) p_a,  p_0 = 0                  (pressure / Leray term)
    p_a     = -Q_a / |a|^2,   Q_a = sum_{j,m} sum_g a_m g_j v_j(a-g) w_mg

``p`` solves the mode Poisson equation ``-k^2 |a|^2 p_a = (k i a) . B_a``,
so ``B + G`` is divergence free for every pair ``(v, w)``.  Products whose
wave vector leaves the box are dropped (plain Galerkin truncation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SchemeConfig
from .spectral import ModeField, ModeLattice, _same_lattice


@dataclass(frozen=True, eq=False)
class CoeffMatrix:
    """Dense ``n*size x n*size`` matrix; block ``(i, j)`` couples component
    ``j`` of the input to component ``i`` of the output."""

    lattice: ModeLattice
    matrix: np.ndarray
    time_label: float = 0.0

    def block(self, i: int, j: int) -> np.ndarray:
        m = self.lattice.size
        return self.matrix[i * m:(i + 1) * m, j * m:(j + 1) * m]

    def apply(self, w: ModeField) -> ModeField:
        out = self.matrix @ w.coeffs.ravel()
        return w.with_coeffs(out.reshape(w.coeffs.shape))

    def __mul__(self, scalar) -> "CoeffMatrix":
        return CoeffMatrix(self.lattice, self.matrix * scalar, self.time_label)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class PressureModes:
    lattice: ModeLattice
    p: np.ndarray

    def mode(self, alpha) -> complex:
        return complex(self.p[self.lattice.index_of(alpha)])


def dissipative_symbol(alpha, nu: float, l: float) -> float:
    a = np.asarray(alpha, dtype=float)
    return float(-nu * 4 * np.pi**2 * np.sum(a**2) / l**2)


def dissipation_diagonal(lattice: ModeLattice, nu: float) -> np.ndarray:
    return -nu * 4 * np.pi**2 * lattice.alpha_sq / lattice.l**2


def _gathered(v: ModeField) -> np.ndarray:
    """``V[j, a, g] = v_j(a-g)``, zero where ``a-g`` is outside the box."""
    lat = v.lattice
    padded = np.concatenate([v.coeffs, np.zeros((lat.n, 1), complex)], axis=1)
    return padded[:, lat.difference_index]


def _transport_kernel(v: ModeField) -> np.ndarray:
    """``T[a, g] = sum_j g_j v_j(a-g)``."""
    V = _gathered(v)
    a = v.lattice.alphas
    T = V[0] * a[:, 0]
    for j in range(1, v.lattice.n):
        T += V[j] * a[:, j]
    return T


def convection(v: ModeField, w: ModeField) -> ModeField:
    _same_lattice(v, w)
    lat = v.lattice
    T = _transport_kernel(v)
    out = -(2j * np.pi / lat.l) * (w.coeffs @ T.T)
    return w.with_coeffs(out, real_flag=v.real_flag and w.real_flag)


def _poisson_source(v: ModeField, w: ModeField) -> np.ndarray:
    wT = w.coeffs @ _transport_kernel(v).T
    return np.sum(v.lattice.alphas.T * wT, axis=0)


def _pressure_from_source(lat: ModeLattice, Q: np.ndarray) -> np.ndarray:
    p = np.zeros(lat.size, complex)
    nz = lat.alpha_sq > 0
    p[nz] = -Q[nz] / lat.alpha_sq[nz]
    return p


def pressure_modes(v: ModeField, w: ModeField) -> PressureModes:
    _same_lattice(v, w)
    lat = v.lattice
    return PressureModes(lat, _pressure_from_source(lat, _poisson_source(v, w)))


def leray_term(v: ModeField, w: ModeField) -> ModeField:
    lat = v.lattice
    p = pressure_modes(v, w).p
    out = -(2j * np.pi / lat.l) * lat.alphas.T * p
    return w.with_coeffs(out, real_flag=v.real_flag and w.real_flag)


def euler_part(v: ModeField, w: ModeField, factor: float = 1.0) -> ModeField:
    """``factor * (B(v, w) + G(v, w))``."""
    _same_lattice(v, w)
    lat = v.lattice
    wT = w.coeffs @ _transport_kernel(v).T
    p = _pressure_from_source(lat, np.sum(lat.alphas.T * wT, axis=0))
    c = -(2j * np.pi / lat.l) * (wT + lat.alphas.T * p)
    return w.with_coeffs(factor * c, real_flag=v.real_flag and w.real_flag)


def ns_rhs(v: ModeField, cfg: SchemeConfig) -> ModeField:
    d = dissipation_diagonal(v.lattice, cfg.nu)
    out = cfg.viscous_factor * d * v.coeffs + euler_part(v, v, cfg.nonlinear_factor).coeffs
    return v.with_coeffs(out, real_flag=v.real_flag)


def assemble_euler_matrix(v: ModeField, factor: float = 1.0, time_label: float = 0.0,
                          exclude_zero_mode: bool = False) -> CoeffMatrix:
    """Dense matrix ``E`` with ``E w = factor * (B(v, w) + G(v, w))``.

    Row block ``i``, column block ``m`` at ``(a, g)`` equals
    ``-factor * (2 pi i / l) * P_im(a) * sum_j g_j v_j(a-g)`` with ``P(a)`` the
    orthogonal projector onto the plane normal to ``a`` (identity at ``a = 0``).
    ``exclude_zero_mode`` drops the zero-mode rows and columns.
    """
    lat = v.lattice
    n, M = lat.n, lat.size
    T = _transport_kernel(v)
    a = lat.alphas.astype(float)
    a2 = lat.alpha_sq.copy()
    a2[a2 == 0] = 1.0
    proj = np.eye(n)[:, :, None] - (a.T[:, None, :] * a.T[None, :, :]) / a2
    scale = -factor * 2j * np.pi / lat.l
    blocks = scale * proj[:, :, :, None] * T[None, None, :, :]
    E = blocks.transpose(0, 2, 1, 3).reshape(n * M, n * M)
    if exclude_zero_mode:
        z = lat.zero_index + M * np.arange(n)
        E[z, :] = 0.0
        E[:, z] = 0.0
    return CoeffMatrix(lat, E, time_label)
