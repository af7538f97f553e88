"""Shared fixtures: canonical annulus, small grids, a compact ring state.

Unit tests run on deliberately small grids; the expensive resolution studies
live in test_acceptance.py behind session-scoped fixtures.
"""

import numpy as np
import pytest

from ringkinetics.domain import (
    AnnulusSpec,
    NormsBundle,
    build_grid,
    gaussian_ring_ic,
)
from ringkinetics.potential import AprioriConstants, PotentialSpec


@pytest.fixture
def annulus() -> AnnulusSpec:
    """The canonical walls-and-margins example: (1, 3) with margins 0.5/0.25."""
    return AnnulusSpec(1.0, 3.0, 0.5, 0.25)


@pytest.fixture
def small_grid(annulus):
    return build_grid(annulus, 16, 9, 0.5)


@pytest.fixture
def mid_grid(annulus):
    return build_grid(annulus, 32, 17, 0.5)


@pytest.fixture
def ring(mid_grid):
    """Compact Gaussian ring well inside every margin of mid_grid."""
    return gaussian_ring_ic(
        mid_grid, center_r=2.0, width_r=0.1, temp=0.12, amplitude=1.0, m0=0.4
    )


@pytest.fixture
def unit_norms() -> NormsBundle:
    """Unit-norm bundle of the hand-evaluated constants example."""
    return NormsBundle(
        etheta0_sup=1.0,
        b0_sup=1.0,
        ebtheta_sup=1.0,
        f0_l1=1.0,
        rp0f0_l1=1.0,
        f0_linf=1.0,
        lam=0.0,
        m0=1.0,
    )


@pytest.fixture
def unit_constants(annulus, unit_norms) -> AprioriConstants:
    return AprioriConstants(annulus, unit_norms)


@pytest.fixture
def csc_spec(annulus) -> PotentialSpec:
    return PotentialSpec("explicit-csc", annulus, annulus.delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


# ---------------------------------------------------------------------------
# Acceptance reporting: one PASS/FAIL line per criterion, echoed at the end
# of the pytest run so the verdicts survive output capture.
# ---------------------------------------------------------------------------

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    def _record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
