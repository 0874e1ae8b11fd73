"""Right-hand side evaluated directly in the cosine/sine basis.

Products of real basis functions are expanded with the product-to-sum
identities::

    cos a cos b = (cos(a-b) + cos(a+b)) / 2
    sin a sin b = (cos(a-b) - cos(a+b)) / 2
    sin a cos b = (sin(a+b) + sin(a-b)) / 2
    cos a sin b = (sin(a+b) - sin(a-b)) / 2

and every resulting wave vector is folded back onto its half-lattice
representative (``cos`` is even, ``sin`` odd).  Wave vectors outside the
box are dropped, which is the same Galerkin truncation as the complex
convolution.  This route shares no code with :mod:`torusns.nsop` and serves
as its cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import SchemeConfig
from .spectral import ModeLattice, RealModeField, half_lattice


@dataclass(frozen=True)
class _Fold:
    plus_rep: np.ndarray     # rep index of b + g  (R x R), -1 if outside the box
    plus_sign: np.ndarray    # +1 / -1 parity of the fold, 0 at the zero vector
    minus_rep: np.ndarray
    minus_sign: np.ndarray


@lru_cache(maxsize=16)
def _fold_tables(lattice: ModeLattice) -> _Fold:
    idx = half_lattice(lattice)
    reps = lattice.alphas[idx]
    R = len(idx)
    rep_of = np.full(lattice.size, -1)
    sign_of = np.zeros(lattice.size)
    rep_of[idx] = np.arange(R)
    sign_of[idx] = 1.0
    rep_of[lattice.neg_index[idx]] = np.arange(R)
    sign_of[lattice.neg_index[idx[1:]]] = -1.0
    sign_of[lattice.zero_index] = 0.0

    def fold(vec: np.ndarray):
        inside = np.all(np.abs(vec) <= lattice.L, axis=-1)
        flat = np.zeros(vec.shape[:-1], dtype=np.intp)
        for k in range(lattice.n):
            flat = flat * lattice.side + (np.clip(vec[..., k], -lattice.L, lattice.L) + lattice.L)
        rep = np.where(inside, rep_of[flat], -1)
        sign = np.where(inside, sign_of[flat], 0.0)
        return rep, sign

    p_rep, p_sign = fold(reps[:, None, :] + reps[None, :, :])
    m_rep, m_sign = fold(reps[:, None, :] - reps[None, :, :])
    return _Fold(p_rep, p_sign, m_rep, m_sign)


def _scatter(R: int, rep: np.ndarray, vals: np.ndarray) -> np.ndarray:
    ok = rep >= 0
    return np.bincount(rep[ok], weights=vals[ok], minlength=R)


def product(lattice: ModeLattice, ac, as_, bc, bs) -> tuple[np.ndarray, np.ndarray]:
    """Cosine/sine coefficients of the product of two real expansions."""
    f = _fold_tables(lattice)
    R = len(ac)
    cc = 0.5 * np.outer(ac, bc)
    ss = 0.5 * np.outer(as_, bs)
    sc = 0.5 * np.outer(as_, bc)
    cs = 0.5 * np.outer(ac, bs)
    pc = _scatter(R, f.minus_rep, cc + ss) + _scatter(R, f.plus_rep, cc - ss)
    ps = (_scatter(R, f.plus_rep, f.plus_sign * (sc + cs))
          + _scatter(R, f.minus_rep, f.minus_sign * (sc - cs)))
    return pc, ps


def derivative(rf_reps: np.ndarray, j: int, c: np.ndarray, s: np.ndarray, k: float):
    """``d/dx_j`` of ``c cos + s sin`` with wave number factor ``k = 2 pi / l``."""
    a = k * rf_reps[:, j]
    return a * s, -a * c


def real_convection(v: RealModeField, w: RealModeField) -> tuple[np.ndarray, np.ndarray]:
    """``-(v . grad) w`` in the real basis."""
    lat = v.lattice
    k = 2 * np.pi / lat.l
    n, R = v.cos.shape
    oc, os_ = np.zeros((n, R)), np.zeros((n, R))
    for i in range(n):
        for j in range(n):
            dc, ds = derivative(w.reps, j, w.cos[i], w.sin[i], k)
            pc, ps = product(lat, v.cos[j], v.sin[j], dc, ds)
            oc[i] -= pc
            os_[i] -= ps
    return oc, os_


def real_pressure_gradient(v: RealModeField, w: RealModeField) -> tuple[np.ndarray, np.ndarray]:
    """``-grad p`` with ``lap p = -sum_{j,m} d_m v_j d_j w_m`` and zero mean."""
    lat = v.lattice
    k = 2 * np.pi / lat.l
    n, R = v.cos.shape
    qc, qs = np.zeros(R), np.zeros(R)
    for j in range(n):
        for m in range(n):
            ac, as_ = derivative(v.reps, m, v.cos[j], v.sin[j], k)
            bc, bs = derivative(w.reps, j, w.cos[m], w.sin[m], k)
            pc, ps = product(lat, ac, as_, bc, bs)
            qc += pc
            qs += ps
    a2 = k * k * np.sum(v.reps.astype(float) ** 2, axis=1)
    pc, ps = np.zeros(R), np.zeros(R)
    pc[1:] = qc[1:] / a2[1:]
    ps[1:] = qs[1:] / a2[1:]
    oc = np.zeros((n, R))
    os_ = np.zeros((n, R))
    for i in range(n):
        ki = k * v.reps[:, i]
        oc[i] = -ki * ps
        os_[i] = ki * pc
    return oc, os_


def real_ns_rhs(v: RealModeField, cfg: SchemeConfig) -> RealModeField:
    lat = v.lattice
    k2 = (2 * np.pi / lat.l) ** 2
    visc = -cfg.nu * k2 * np.sum(v.reps.astype(float) ** 2, axis=1)
    bc, bs = real_convection(v, v)
    gc, gs = real_pressure_gradient(v, v)
    f = cfg.nonlinear_factor
    cos = cfg.viscous_factor * visc * v.cos + f * (bc + gc)
    sin = cfg.viscous_factor * visc * v.sin + f * (bs + gs)
    sin[:, 0] = 0.0
    return RealModeField(lat, v.reps, cos, sin)
