import sys
import mpmath
import numpy as np
import pytest

from nmkrotov.bath import BathParams


def cf_reference(tau, p: BathParams) -> complex:
    """Ohmic CF from its Laplace-transform closed form (independent of quadrature).

    coth(w/2T) = 1 + 2 sum_n exp(-n w/T) turns every term into
    alpha * int w exp(-z w) dw = alpha / z^2, and the Matsubara-like sum is a
    trigamma function.
    """
    z = 1.0 / p.cutoff - 1j * tau
    if p.temperature == 0:
        re = p.alpha * (1.0 / z**2).real
    else:
        tri = complex(mpmath.psi(1, p.temperature * z))
        re = p.alpha * (-1.0 / z**2 + 2.0 * p.temperature**2 * tri).real
    im = -p.alpha * (1.0 / z**2).imag
    return complex(re, im)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
