"""Finite-matrix bench for decay classes, the transposed bracket, BCH
truncations and the dissipative Trotter residual.

All references use the dense exponential ``scipy.linalg.expm``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .serial import fmt_float
from .spectral import ModeLattice


# ----------------------------------------------------------------------------
# decay classes
# ----------------------------------------------------------------------------

def _distance_matrix(lattice: ModeLattice) -> np.ndarray:
    a = lattice.alphas.astype(float)
    return np.sqrt(((a[:, None, :] - a[None, :, :]) ** 2).sum(axis=2))


def msn_constant(M: np.ndarray, s: float, lattice: ModeLattice) -> float:
    """``sup_{a,b} |m_ab| (1 + |a-b|^s)``: smallest ``C`` with ``M`` in the class."""
    M = np.asarray(M)
    if M.shape != (lattice.size, lattice.size):
        raise ValueError(f"matrix shape {M.shape} does not match lattice size {lattice.size}")
    return float((np.abs(M) * (1.0 + _distance_matrix(lattice) ** s)).max(initial=0.0))


def decay_matrix(lattice: ModeLattice, s: float, C: float = 1.0) -> np.ndarray:
    """``m_ab = C / (1 + |a-b|^s)``."""
    return C / (1.0 + _distance_matrix(lattice) ** s)


@dataclass
class ProductDecay:
    """Measured membership constants of ``D E`` per truncation ``L``.

    ``constants`` use the claimed exponent ``r + s - n``; ``min_constants``
    use ``min(r, s)``, the exponent a convolution of two power laws keeps.
    """

    exponent: float
    constants: dict
    spread: float
    min_constants: dict = None
    min_spread: float = 0.0

    @property
    def c_measured(self) -> float:
        return max(self.constants.values())


def product_decay_check(D_of_L, E_of_L, s: float, r: float, n: int,
                        Ls=(4, 8), l: float = 1.0) -> ProductDecay:
    """Measure ``msn_constant(D E, r + s - n)`` for truncations ``Ls``.

    ``D_of_L`` and ``E_of_L`` build the factors on a lattice.  ``spread`` is
    the relative change of the constant across the truncations.  The same
    is reported at exponent ``min(r, s)`` for comparison.
    """
    if not (s > n and r > n):
        raise ValueError("exponents must exceed the dimension")
    e = r + s - n
    consts, mins = {}, {}
    for L in Ls:
        lat = ModeLattice(n, L, l)
        D, E = D_of_L(lat), E_of_L(lat)
        cd, ce = msn_constant(D, s, lat), msn_constant(E, r, lat)
        scale = cd * ce
        P = D @ E
        consts[L] = msn_constant(P, e, lat) / scale if scale > 0 else 0.0
        mins[L] = msn_constant(P, min(r, s), lat) / scale if scale > 0 else 0.0
    return ProductDecay(e, consts, _spread(consts), mins, _spread(mins))


def _spread(consts: dict) -> float:
    vals = np.array(list(consts.values()))
    return float((vals.max() - vals.min()) / vals.max()) if vals.max() > 0 else 0.0


# ----------------------------------------------------------------------------
# brackets and BCH
# ----------------------------------------------------------------------------

def lie_bracket_T(E: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``[E, B]_T = E B - B^T E``."""
    E, B = np.asarray(E), np.asarray(B)
    if E.shape != B.shape or E.shape[0] != E.shape[1]:
        raise ValueError("need square matrices of equal shape")
    return E @ B - B.T @ E


def comm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def bch_standard(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    """Standard BCH series ``log(e^A e^B)`` through total degree ``q`` (<= 4)."""
    if not 1 <= q <= 4:
        raise ValueError("q must be in 1..4")
    AB = comm(A, B)
    C = A + B
    if q >= 2:
        C = C + AB / 2
    if q >= 3:
        C = C + comm(A, AB) / 12 - comm(B, AB) / 12
    if q >= 4:
        C = C - comm(B, comm(A, AB)) / 24
    return C


def bch_transposed(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    """Candidate series for diagonal ``A`` written with ``dB = B - B^T`` and
    transposed brackets: ``[A,B] -> A dB``, ``[A,[A,B]] -> 2 A^2 dB``,
    ``[B,[A,B]] -> A [dB, B]_T`` and the degree-4 term through
    ``A^2 ([dB, B]_T + [dB, B^T]_T)``.  A hypothesis only; compared, never
    trusted."""
    if not 1 <= q <= 4:
        raise ValueError("q must be in 1..4")
    dB = B - B.T
    C = A + B
    if q >= 2:
        C = C + A @ dB / 2
    if q >= 3:
        C = C + 2 * A @ A @ dB / 12 - A @ lie_bracket_T(dB, B) / 12
    if q >= 4:
        A2 = A @ A
        C = C - (A2 @ lie_bracket_T(dB, B) + A2 @ lie_bracket_T(dB, B.T)) / 48
    return C


@dataclass
class BCHResult:
    C_standard: np.ndarray
    C_transposed: np.ndarray
    residual_standard: float
    residual_transposed: float


def bch_truncation(A_diag, B: np.ndarray, q: int, t: float) -> BCHResult:
    """Compare ``exp(At) exp(Bt)`` with ``exp(C(t))`` for both series.

    ``A_diag`` holds the (negative) diagonal of ``A``.  Residuals are
    spectral norms of the difference of the dense exponentials.
    """
    a = np.asarray(A_diag, dtype=float)
    if a.ndim != 1:
        raise ValueError("A_diag must be the diagonal as a 1-D array")
    A = np.diag(a) * t
    Bt = np.asarray(B) * t
    ref = expm(A) @ expm(Bt)
    Cs, Cp = bch_standard(A, Bt, q), bch_transposed(A, Bt, q)
    rs = float(np.linalg.norm(expm(Cs) - ref, 2))
    rp = float(np.linalg.norm(expm(Cp) - ref, 2))
    return BCHResult(Cs, Cp, rs, rp)


def bch_order(A_diag, B, q: int, ts) -> float:
    """Slope of ``log residual`` against ``log t`` for the standard series."""
    res = [bch_truncation(A_diag, B, q, t).residual_standard for t in ts]
    return float(np.polyfit(np.log(ts), np.log(res), 1)[0])


# ----------------------------------------------------------------------------
# Trotter residual
# ----------------------------------------------------------------------------

def trotter_residual(A_diag, B: np.ndarray, v: np.ndarray, t: float, k: int) -> float:
    """``|(e^{At/k} e^{Bt/k})^k v - e^{(A+B)t} v|``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.asarray(A_diag, dtype=float)
    B = np.asarray(B)
    v = np.asarray(v)
    ref = expm((np.diag(a) + B) * t) @ v
    stepB = expm(B * t / k)
    stepA = np.exp(a * t / k)
    w = v.astype(complex if np.iscomplexobj(B) or np.iscomplexobj(v) else float)
    for _ in range(k):
        w = stepA * (stepB @ w)
    return float(np.linalg.norm(w - ref))


def trotter_series(A_diag, B, v, t: float, ks=(1, 2, 4, 8, 16, 32, 64, 128, 256)) -> list:
    return [trotter_residual(A_diag, B, v, t, k) for k in ks]


def loglog_slope(xs, ys) -> float:
    """Negated slope of ``log y`` against ``log x``; zeros are skipped."""
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(-np.polyfit(x, y, 1)[0])


def random_dissipative_pair(size: int, rng: np.random.Generator,
                            a_range=(0.5, 4.0), b_scale: float = 1.0):
    """Negative diagonal ``a`` and a dense Gaussian ``B`` scaled by ``b_scale``."""
    a = -rng.uniform(*a_range, size=size)
    B = b_scale * rng.standard_normal((size, size)) / math.sqrt(size)
    return a, B


# ----------------------------------------------------------------------------
# report
# ----------------------------------------------------------------------------

def write_bench_csv(rows, path) -> None:
    """Rows of ``(case_id, q_or_k, residual_standard, residual_transposed)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "q_or_k", "residual_standard", "residual_transposed"])
        for case, qk, rs, rp in rows:
            w.writerow([case, qk, _fmt(rs), _fmt(rp)])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return fmt_float(x)
