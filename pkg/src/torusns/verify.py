"""Property benches behind ``torusns verify``.

Each suite returns a :class:`SuiteReport` whose rows go to a CSV file; a
suite passes when every row passes its documented tolerance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import bchlab, presets
from .analysis import convolution_bound
from .config import SchemeConfig
from .nsop import ns_rhs
from .realbasis import real_ns_rhs
from .serial import fmt_float
from .spectral import ModeField, ModeLattice, enforce_reality, from_real, to_real

TAIL_TOL = 0.01
ROUND_TRIP_TOL = 1e-12
TROTTER_SLOPE = (0.8, 1.2)
BCH_SLOPE_TOL = 0.3


@dataclass
class SuiteReport:
    name: str
    header: list
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_cell(x) for x in row])


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    return str(x)


def suite_bounds(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("bounds", ["case_id", "n", "exp_m", "exp_l", "alpha_max", "beta_max",
                                 "c", "worst_alpha", "c_doubled", "rel_change", "pass"])
    cases = [(2, 3.5, 3.5, 8, 64), (1, 3.0, 3.0, 8, 256), (2, 3.0, 4.0, 6, 48)]
    for k, (n, m, l, am, bm) in enumerate(cases):
        c, worst = convolution_bound(n, m, l, am, bm)
        c2, _ = convolution_bound(n, m, l, am, 2 * bm)
        rel = abs(c2 - c) / c
        ok = bool(np.isfinite(c) and c >= 1 and rel < TAIL_TOL)
        rep.rows.append((f"bounds-{k}", n, m, l, am, bm, c, "x".join(map(str, worst)), c2, rel, ok))
        if not ok:
            rep.failures.append(rep.rows[-1])
    return rep


def suite_bch(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("bch", ["case_id", "q_or_k", "residual_standard", "residual_transposed"])
    rng = np.random.default_rng(seed)
    ts = [0.1 / 2**k for k in range(5)]
    for case in range(4):
        a, B = bchlab.random_dissipative_pair(4, rng)
        for q in (2, 3):
            res = [bchlab.bch_truncation(a, B, q, t) for t in ts]
            for t, r in zip(ts, res):
                rep.rows.append((f"bch-{case}-t{t:g}", q, r.residual_standard, r.residual_transposed))
            slope = -bchlab.loglog_slope(ts, [r.residual_standard for r in res])
            rep.rows.append((f"bch-{case}-slope", q, slope, ""))
            if abs(slope - (q + 1)) > BCH_SLOPE_TOL:
                rep.failures.append((f"bch-{case}", q, slope))
    return rep


def suite_trotter(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("trotter", ["case_id", "q_or_k", "residual_standard", "residual_transposed"])
    rng = np.random.default_rng(seed)
    ks = [1, 2, 4, 8, 16, 32, 64, 128, 256]
    for case in range(10):
        a, B = bchlab.random_dissipative_pair(8, rng)
        v = rng.standard_normal(8)
        res = bchlab.trotter_series(a, B, v, 1.0, ks)
        for k, r in zip(ks, res):
            rep.rows.append((f"trotter-{case}", k, r, ""))
        slope = bchlab.loglog_slope(ks, res)
        rep.rows.append((f"trotter-{case}-slope", "", slope, ""))
        if not TROTTER_SLOPE[0] <= slope <= TROTTER_SLOPE[1]:
            rep.failures.append((f"trotter-{case}", slope))
    return rep


def random_real_field(n: int, L: int, seed: int) -> ModeField:
    rng = np.random.default_rng(seed)
    lat = ModeLattice(n, L)
    c = rng.standard_normal((n, lat.size)) + 1j * rng.standard_normal((n, lat.size))
    return enforce_reality(ModeField(lat, c))


def suite_basis(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("basis", ["case_id", "round_trip_err", "rhs_err", "pass"])
    cfg = SchemeConfig(n=2, L=3, nu=0.05)
    for k in range(20):
        h = random_real_field(2, 3, seed + k)
        rt = float(np.abs(from_real(to_real(h)).coeffs - h.coeffs).max())
        d = presets.random_decay(3, 2, 1.5, 1.0, seed + k)
        a, b = to_real(ns_rhs(d, cfg)), real_ns_rhs(to_real(d), cfg)
        scale = max(1.0, float(np.abs(a.cos).max()), float(np.abs(a.sin).max()))
        rhs = max(float(np.abs(a.cos - b.cos).max()), float(np.abs(a.sin - b.sin).max())) / scale
        ok = rt < ROUND_TRIP_TOL and rhs < ROUND_TRIP_TOL
        rep.rows.append((f"basis-{k}", rt, rhs, ok))
        if not ok:
            rep.failures.append(rep.rows[-1])
    return rep


SUITES = {
    "bounds": suite_bounds,
    "bch": suite_bch,
    "trotter": suite_trotter,
    "basis": suite_basis,
}
