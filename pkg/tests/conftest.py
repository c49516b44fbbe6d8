from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from levytv.levy_model import AtomMeasure, Band, LevyTriplet, StableMeasure

settings.register_profile(
    "levytv", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("levytv")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def sym_half():
    """Symmetric stable-type measure, beta = 0.5, unit weights."""
    return StableMeasure(0.5)


@pytest.fixture
def sym_half_triplet(sym_half):
    return LevyTriplet(0.0, 0.0, sym_half)


@pytest.fixture
def gauss_triplet():
    return LevyTriplet(0.0, 1.0, AtomMeasure.zero())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def banded():
    def make(beta, lo, hi, cp=1.0, cm=1.0):
        return StableMeasure(beta, cp, cm, Band(lo, hi))
    return make
