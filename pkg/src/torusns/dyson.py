"""Matrix-exponential actions and truncated time-ordered (Dyson) series."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .nsop import CoeffMatrix
from .spectral import ModeField

MAX_TERMS = 200


class ExpmNotConverged(RuntimeError):
    pass


def _as_array(M) -> np.ndarray:
    return M.matrix if isinstance(M, CoeffMatrix) else np.asarray(M)


def expm_action_vector(A: np.ndarray, x: np.ndarray, tol: float,
                       max_terms: int = MAX_TERMS) -> np.ndarray:
    """``exp(A) x`` by Taylor series with scaling: ``A`` is split into
    ``s = ceil(max row-sum)`` equal parts so each partial series converges
    fast, and the action is applied ``s`` times."""
    if not tol > 0:
        raise ValueError("tol must be > 0")
    norm_inf = float(np.abs(A).sum(axis=1).max(initial=0.0))
    if not np.isfinite(norm_inf):
        raise ExpmNotConverged("expm not converged: non-finite matrix")
    if norm_inf == 0.0:
        return x.copy()
    s = max(1, math.ceil(norm_inf))
    As = A / s
    out = x
    for _ in range(s):
        total = out.copy()
        term = out
        small = 0
        for k in range(1, max_terms + 1):
            term = (As @ term) / k
            total = total + term
            tn = np.linalg.norm(term)
            if tn <= tol * np.linalg.norm(total) or tn == 0.0:
                small += 1
                if small == 2 or tn == 0.0:
                    break
            else:
                small = 0
        else:
            raise ExpmNotConverged(f"expm not converged within {max_terms} terms")
        out = total
    return out


def matrix_exp_action(M, v: ModeField, tol: float = 1e-14, t: float = 1.0,
                      max_terms: int = MAX_TERMS) -> ModeField:
    """``exp(t M) v`` for a :class:`CoeffMatrix` (or dense array) ``M``."""
    A = _as_array(M) * t
    out = expm_action_vector(A, v.coeffs.ravel(), tol, max_terms)
    return v.with_coeffs(out.reshape(v.coeffs.shape))


def cumulative_weights(q: int) -> np.ndarray:
    """``S[i, j] = int_0^{x_i} l_j(x) dx`` for Lagrange polynomials ``l_j`` on
    ``q`` equispaced nodes of ``[0, 1]``; exact for polynomials of degree < q."""
    if q < 2:
        raise ValueError("need at least 2 quadrature points")
    x = np.linspace(0.0, 1.0, q)
    V = np.vander(x, q, increasing=True)
    coef = np.linalg.inv(V)  # column j holds the monomial coefficients of l_j
    powers = np.arange(1, q + 1)
    integ = (x[:, None] ** powers[None, :]) / powers[None, :]
    return integ @ coef


def time_ordered_series(E_of_t: Callable[[float], object], v0: ModeField, order: int,
                        quad_points: int = 4, t0: float = 0.0, dt: float = 1.0) -> ModeField:
    """Truncated Dyson series for ``dw/dt = E(t) w`` on ``[t0, t0 + dt]``.

    Returns ``v0 + sum_{m=1}^{order} int_{t0 < t_m < ... < t_1 < t0+dt}
    E(t_1) ... E(t_m) v0``.  The nested simplex integrals are built level by
    level, ``y_m(t) = int_{t0}^{t} E(s) y_{m-1}(s) ds``, with an interpolatory
    cumulative rule on ``quad_points`` equispaced nodes.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    S = cumulative_weights(quad_points) * dt
    nodes = t0 + dt * np.linspace(0.0, 1.0, quad_points)
    mats = [_as_array(E_of_t(float(t))) for t in nodes]
    y = np.tile(v0.coeffs.ravel(), (quad_points, 1))
    total = v0.coeffs.ravel().copy()
    for _ in range(order):
        f = np.stack([A @ yi for A, yi in zip(mats, y)])
        y = S @ f
        total = total + y[-1]
    if not np.all(np.isfinite(total)):
        raise OverflowError("Dyson series overflowed")
    return v0.with_coeffs(total.reshape(v0.coeffs.shape))


def linear_sampler(E0, E1, t0: float, dt: float) -> Callable[[float], np.ndarray]:
    """Linear interpolation between matrices sampled at ``t0`` and ``t0 + dt``."""
    A0, A1 = _as_array(E0), _as_array(E1)

    def sample(t: float) -> np.ndarray:
        theta = (t - t0) / dt
        return (1.0 - theta) * A0 + theta * A1

    return sample
