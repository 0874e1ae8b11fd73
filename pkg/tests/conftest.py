import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from torusns import presets  # noqa: E402
from torusns.spectral import ModeField, ModeLattice, enforce_reality  # noqa: E402


def random_field(n, L, seed, real=True, scale=1.0, l=1.0):
    rng = np.random.default_rng(seed)
    lat = ModeLattice(n, L, l)
    c = scale * (rng.standard_normal((n, lat.size)) + 1j * rng.standard_normal((n, lat.size)))
    f = ModeField(lat, c)
    return enforce_reality(f) if real else f


def random_solenoidal(n, L, seed, s=1.5, C=1.0, l=1.0):
    return presets.random_decay(L, n, s, C, seed, l)


@pytest.fixture
def tg():
    return presets.taylor_green_2d(4)


@pytest.fixture
def shear():
    return presets.single_shear(4)


def pytest_terminal_summary(terminalreporter):
    details = getattr(sys.modules.get("test_acceptance"), "RESULTS", {})
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" in rep.nodeid and rep.when == "call":
                k = int(rep.nodeid.split("test_criterion_")[1][:2])
                detail = details.get(k, (None, "no measurement recorded"))[1]
                lines.append((k, f"criterion {k:2d}: {'PASS' if rep.passed else 'FAIL'}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
