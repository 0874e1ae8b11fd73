"""Mode lattices, mode fields, norms, real-basis conversion and decay fits.

A field on the n-torus of side ``l`` is stored by its Fourier modes
``v[i, alpha]`` for components ``i = 0..n-1`` and wave vectors ``alpha`` in
the box ``|alpha_k| <= L``.  The box is enumerated lexicographically, with
``alpha_1`` varying slowest from ``-L`` to ``L``; this is exactly C-order
flattening of an array of shape ``(2L+1,) * n`` and every matrix assembly
in the package uses this order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

REALITY_TOL = 1e-12
EVOLVED_REALITY_TOL = 1e-8


class FieldDiverged(ValueError):
    """Raised when an operation needs finite coefficients and gets NaN/Inf."""


class NotRealError(ValueError):
    """Raised when a field violates the reality symmetry v(-a) = conj(v(a))."""


class InsufficientShells(ValueError):
    pass


@dataclass(frozen=True)
class ModeLattice:
    n: int
    L: int
    l: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.L < 0 or not self.l > 0:
            raise ValueError(f"invalid lattice n={self.n} L={self.L} l={self.l}")

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.n

    @property
    def size(self) -> int:
        return self.side**self.n

    @cached_property
    def alphas(self) -> np.ndarray:
        """All wave vectors, shape ``(size, n)``, in lexicographic order."""
        axes = [np.arange(-self.L, self.L + 1)] * self.n
        grid = np.meshgrid(*axes, indexing="ij")
        out = np.stack([g.ravel() for g in grid], axis=1)
        out.flags.writeable = False
        return out

    @cached_property
    def abs_alpha(self) -> np.ndarray:
        out = np.sqrt((self.alphas**2).sum(axis=1).astype(float))
        out.flags.writeable = False
        return out

    @cached_property
    def alpha_sq(self) -> np.ndarray:
        out = (self.alphas**2).sum(axis=1).astype(float)
        out.flags.writeable = False
        return out

    @property
    def zero_index(self) -> int:
        return (self.size - 1) // 2

    @cached_property
    def neg_index(self) -> np.ndarray:
        """Flat index of ``-alpha`` for each flat index ``alpha``."""
        return np.arange(self.size)[::-1].copy()

    def index_of(self, alpha) -> int:
        a = np.asarray(alpha, dtype=int)
        if a.shape != (self.n,) or np.any(np.abs(a) > self.L):
            raise IndexError(f"mode {tuple(a)} outside lattice L={self.L}")
        return int(np.ravel_multi_index(tuple(a + self.L), self.shape))

    @cached_property
    def difference_index(self) -> np.ndarray:
        """``D[a, g]`` = flat index of ``alpha - gamma`` or ``size`` if outside the box."""
        diff = self.alphas[:, None, :] - self.alphas[None, :, :]
        inside = np.all(np.abs(diff) <= self.L, axis=2)
        flat = np.zeros(diff.shape[:2], dtype=np.intp)
        stride = 1
        for k in reversed(range(self.n)):
            flat += (diff[:, :, k] + self.L) * stride
            stride *= self.side
        flat[~inside] = self.size
        flat.flags.writeable = False
        return flat

    def with_L(self, L: int) -> "ModeLattice":
        return ModeLattice(self.n, L, self.l)


@dataclass(frozen=True, eq=False)
class ModeField:
    """Complex Fourier coefficients of an ``n``-component field.

    ``coeffs`` has shape ``(n, size)``.  Instances are immutable; every
    operation returns a new field.
    """

    lattice: ModeLattice
    coeffs: np.ndarray
    real_flag: bool = False
    diverged: bool = False

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.lattice.n, self.lattice.size):
            c = c.reshape(self.lattice.n, self.lattice.size)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.real_flag and not self.diverged:
            err = reality_defect(self)
            if err > REALITY_TOL * max(1.0, float(np.abs(c).max(initial=0.0))):
                raise NotRealError(f"field not real: defect {err:.3e}")

    @classmethod
    def zeros(cls, lattice: ModeLattice, real: bool = True) -> "ModeField":
        return cls(lattice, np.zeros((lattice.n, lattice.size), complex), real_flag=real)

    @classmethod
    def from_modes(cls, lattice: ModeLattice, modes: dict, real: bool = False) -> "ModeField":
        """Build from ``{(component, alpha_tuple): value}``; components are 0-based."""
        c = np.zeros((lattice.n, lattice.size), complex)
        for (i, alpha), value in modes.items():
            c[i, lattice.index_of(alpha)] = value
        return cls(lattice, c, real_flag=real)

    @property
    def n(self) -> int:
        return self.lattice.n

    def grid(self, i: int) -> np.ndarray:
        return self.coeffs[i].reshape(self.lattice.shape)

    def mode(self, i: int, alpha) -> complex:
        return complex(self.coeffs[i, self.lattice.index_of(alpha)])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def with_coeffs(self, coeffs: np.ndarray, real_flag: bool | None = None) -> "ModeField":
        if real_flag is None:
            real_flag = False
        finite = bool(np.all(np.isfinite(coeffs)))
        if real_flag and finite:
            # evolved fields drift off the real subspace by roundoff; project back
            c = np.asarray(coeffs)
            defect = float(np.abs(c[:, self.lattice.neg_index] - np.conj(c)).max(initial=0.0))
            if defect > EVOLVED_REALITY_TOL * max(1.0, float(np.abs(c).max(initial=0.0))):
                raise NotRealError(f"field not real: defect {defect:.3e}")
            coeffs = 0.5 * (c + np.conj(c[:, self.lattice.neg_index]))
        return ModeField(self.lattice, coeffs, real_flag=real_flag and finite, diverged=not finite)

    def __add__(self, other: "ModeField") -> "ModeField":
        _same_lattice(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "ModeField") -> "ModeField":
        _same_lattice(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "ModeField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))


def _same_lattice(a: ModeField, b: ModeField) -> None:
    if a.lattice != b.lattice:
        raise ValueError(f"lattice mismatch: {a.lattice} vs {b.lattice}")


def reality_defect(field: ModeField) -> float:
    """max |v(-a) - conj(v(a))| over components and modes."""
    c = field.coeffs
    return float(np.abs(c[:, field.lattice.neg_index] - np.conj(c)).max(initial=0.0))


def sobolev_norm(field: ModeField, s: float) -> float:
    """Dual Sobolev norm ``sqrt(sum |v_ia|^2 (1+|a|^2)^s)``."""
    if not field.is_finite():
        raise FieldDiverged("field diverged")
    w = (1.0 + field.lattice.alpha_sq) ** s
    return float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2 * w)))


def truncate(field: ModeField, L_new: int) -> ModeField:
    lat = field.lattice
    if L_new > lat.L:
        raise ValueError(f"cannot truncate L={lat.L} to larger L'={L_new}")
    if L_new < 0:
        raise ValueError("L' must be >= 0")
    lo, hi = lat.L - L_new, lat.L + L_new + 1
    sl = (slice(None),) + (slice(lo, hi),) * lat.n
    grid = field.coeffs.reshape((lat.n,) + lat.shape)[sl]
    new = lat.with_L(L_new)
    return ModeField(new, grid.reshape(lat.n, new.size), real_flag=field.real_flag,
                     diverged=field.diverged)


def enforce_reality(field: ModeField) -> ModeField:
    c = field.coeffs
    sym = 0.5 * (c + np.conj(c[:, field.lattice.neg_index]))
    return ModeField(field.lattice, sym, real_flag=True)


def divergence(field: ModeField) -> np.ndarray:
    """Modes of div v: ``d_a = sum_j (2 pi i a_j / l) v_ja``, flat over the lattice."""
    lat = field.lattice
    k = 2j * np.pi * lat.alphas.T / lat.l
    return np.sum(k * field.coeffs, axis=0)


def eval_physical(field: ModeField, x) -> np.ndarray:
    """Evaluate the field at point(s) ``x``; returns shape ``(n,)`` or ``(P, n)``."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    lat = field.lattice
    phase = np.exp(2j * np.pi * (pts @ lat.alphas.T) / lat.l)
    vals = phase @ field.coeffs.T
    scale = max(1.0, float(np.abs(field.coeffs).sum(axis=1).max(initial=0.0)))
    resid = float(np.abs(vals.imag).max(initial=0.0))
    if resid > 1e-8 * scale:
        raise NotRealError(f"imaginary residue {resid:.3e} in physical evaluation")
    out = vals.real
    return out[0] if np.ndim(x) == 1 else out


# ----------------------------------------------------------------------------
# real basis
# ----------------------------------------------------------------------------

def half_lattice(lattice: ModeLattice) -> np.ndarray:
    """Flat indices of one representative per pair ``{a, -a}``: zero first,
    then every mode whose first nonzero component is positive."""
    zero = lattice.zero_index
    # lexicographic order puts -a before a, so the upper half is the positive half
    return np.concatenate([[zero], np.arange(zero + 1, lattice.size)])


@dataclass(frozen=True, eq=False)
class RealModeField:
    """Cosine/sine coefficients on half-lattice representatives.

    ``v_i(x) = sum_r cos_[i,r] cos(2 pi a_r.x / l) + sin_[i,r] sin(2 pi a_r.x / l)``,
    representative ``r = 0`` being the zero mode.
    """

    lattice: ModeLattice
    reps: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self) -> None:
        for name in ("reps", "cos", "sin"):
            a = np.array(getattr(self, name))
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if np.any(self.sin[:, 0] != 0):
            raise ValueError("sine coefficient of the zero mode must vanish")


def to_real(field: ModeField) -> RealModeField:
    lat = field.lattice
    defect = reality_defect(field)
    if defect > REALITY_TOL * max(1.0, field.max_abs()):
        raise NotRealError(f"field not real: defect {defect:.3e}")
    idx = half_lattice(lat)
    v = field.coeffs[:, idx]
    cos = 2.0 * v.real
    sin = -2.0 * v.imag
    cos[:, 0] = v[:, 0].real
    sin[:, 0] = 0.0
    return RealModeField(lat, lat.alphas[idx], cos, sin)


def from_real(rf: RealModeField) -> ModeField:
    lat = rf.lattice
    idx = half_lattice(lat)
    c = np.zeros((lat.n, lat.size), complex)
    half = 0.5 * (rf.cos - 1j * rf.sin)
    c[:, idx] = half
    c[:, lat.neg_index[idx]] = np.conj(half)
    c[:, lat.zero_index] = rf.cos[:, 0]
    return ModeField(lat, c, real_flag=True)


def basis_convert(field):
    """Complex -> real for a :class:`ModeField`, real -> complex otherwise."""
    if isinstance(field, RealModeField):
        return from_real(field)
    return to_real(field)


def eval_real(rf: RealModeField, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    arg = 2 * np.pi * (pts @ rf.reps.T) / rf.lattice.l
    out = np.cos(arg) @ rf.cos.T + np.sin(arg) @ rf.sin.T
    return out[0] if np.ndim(x) == 1 else out


# ----------------------------------------------------------------------------
# decay fits
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayProfile:
    """Fitted envelope ``|v_ia| <~ C / (1 + |a|^e)``.

    ``model`` records which parametrisation fitted best: ``"envelope"`` for
    ``C/(1+|a|^e)`` and ``"shifted"`` for ``C/(1+|a|)^e``.
    """

    constant: float
    exponent: float
    s_estimate: float
    residual: float
    model: str = "envelope"
    shells: tuple = field(default=(), repr=False)


def shell_maxima(field: ModeField) -> tuple[np.ndarray, np.ndarray]:
    """Integer radii ``k = 1..L`` and ``max_{i, floor|a| = k} |v_ia|``.

    Only shells inside the inscribed ball are used so that every shell is
    complete under box truncation.
    """
    lat = field.lattice
    amp = np.abs(field.coeffs).max(axis=0)
    radius = np.floor(lat.abs_alpha + 1e-12).astype(int)
    ks = np.arange(1, lat.L + 1)
    maxima = np.array([amp[radius == k].max(initial=0.0) for k in ks])
    return ks, maxima


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


def _envelope_fit(k: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Fit ``y = log C - log(1 + k^e)``; C is eliminated in closed form."""
    from scipy.optimize import minimize_scalar

    logk = np.log(k)

    def rms(e: float) -> tuple[float, float]:
        g = -np.logaddexp(0.0, e * logk)
        logC = float(np.mean(y - g))
        return logC, float(np.sqrt(np.mean((y - logC - g) ** 2)))

    opt = minimize_scalar(lambda e: rms(e)[1], bounds=(-5.0, 60.0), method="bounded",
                          options={"xatol": 1e-10})
    logC, res = rms(opt.x)
    return logC, float(opt.x), res


def fit_decay(field: ModeField) -> DecayProfile:
    """Fit the shell maxima of ``field`` with a power-law envelope.

    Two parametrisations are fitted by least squares in log space,
    ``C/(1+|a|)^e`` (linear in ``log(1+|a|)``) and ``C/(1+|a|^e)``; the
    one with the smaller RMS residual is returned, ties going to the first.
    """
    if not field.is_finite():
        raise FieldDiverged("field diverged")
    k, m = shell_maxima(field)
    if field.max_abs() == 0.0:
        return DecayProfile(0.0, math.inf, math.inf, 0.0, "zero")
    keep = m > 0
    if keep.sum() < 2:
        raise InsufficientShells("insufficient shells")
    k, m = k[keep].astype(float), m[keep]
    y = np.log(m)
    b0, b1, res_lin = _linear_fit(np.log1p(k), y)
    logC, e, res_env = _envelope_fit(k, y)
    n = field.n
    shells = tuple(zip(k.tolist(), m.tolist()))
    if res_lin <= res_env + 1e-12:
        return DecayProfile(math.exp(b0), -b1, -b1 - n, res_lin, "shifted", shells)
    return DecayProfile(math.exp(logC), e, e - n, res_env, "envelope", shells)


def decay_constant(field: ModeField, s: float) -> float:
    """Smallest ``C0`` with ``|v_ia| <= C0 / (1 + |a|^(n+s))`` on nonzero modes."""
    lat = field.lattice
    nz = lat.alpha_sq > 0
    env = 1.0 + lat.abs_alpha[nz] ** (lat.n + s)
    return float((np.abs(field.coeffs[:, nz]) * env).max(initial=0.0))


def decay_margin(field: ModeField, C0: float, s: float) -> float:
    """``min [C0 / (1 + |a|^(n+s))] / |v_ia|`` over nonzero modes; ``inf`` if none."""
    lat = field.lattice
    nz = lat.alpha_sq > 0
    amp = np.abs(field.coeffs[:, nz])
    if not np.all(np.isfinite(amp)):
        return 0.0
    bound = C0 / (1.0 + lat.abs_alpha[nz] ** (lat.n + s))
    mask = amp > 0
    if not mask.any():
        return math.inf
    return float((np.broadcast_to(bound, amp.shape)[mask] / amp[mask]).min())


# ----------------------------------------------------------------------------
# snapshot files
# ----------------------------------------------------------------------------

def field_to_json(field: ModeField) -> dict:
    lat = field.lattice
    comps = []
    for i in range(lat.n):
        comps.append([
            {"alpha": [int(a) for a in alpha], "re": float(v.real), "im": float(v.imag)}
            for alpha, v in zip(lat.alphas, field.coeffs[i])
        ])
    return {"n": lat.n, "L": lat.L, "l": lat.l, "components": comps}


def field_from_json(data: dict) -> ModeField:
    for key in ("n", "L", "l", "components"):
        if key not in data:
            raise ValueError(f"snapshot missing key {key!r}")
    lat = ModeLattice(int(data["n"]), int(data["L"]), float(data["l"]))
    if len(data["components"]) != lat.n:
        raise ValueError("component count does not match n")
    c = np.zeros((lat.n, lat.size), complex)
    for i, comp in enumerate(data["components"]):
        for entry in comp:
            c[i, lat.index_of(entry["alpha"])] = complex(entry["re"], entry["im"])
    f = ModeField(lat, c)
    if reality_defect(f) <= REALITY_TOL * max(1.0, f.max_abs()):
        f = ModeField(lat, c, real_flag=True)
    return f


def save_field(field: ModeField, path) -> None:
    from .serial import dumps

    Path(path).write_text(dumps(field_to_json(field)) + "\n")


def load_field(path) -> ModeField:
    return field_from_json(json.loads(Path(path).read_text()))

