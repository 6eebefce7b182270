import mpmath
import pytest
from hypothesis import HealthCheck, settings

from esdl.evalcore import FamilyParams

# fixed-seed property runs
settings.register_profile("repro", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")

mpmath.mp.dps = 40


def mp_f(p, lam, z, deriv=False):
    """High-precision f (or f') straight from the defining sum."""
    z = mpmath.mpc(z)
    total = mpmath.mpc(0)
    for k in range(p):
        w = mpmath.exp(2j * mpmath.pi * k / p)
        total += (w if deriv else 1) * mpmath.exp(w * z)
    return lam * total


@pytest.fixture
def unit():
    return FamilyParams(4, 1.0)


@pytest.fixture
def quarter():
    return FamilyParams(4, 0.25)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
