"""testing functions in constants module."""
import math

import pytest

from gnslab.constants import GNParams, Regime, constants_for, h_of_q, log_gamma, \
    log_c_p, log_sobolev_estimates, log_sobolev_limits, lyapunov_constant
from gnslab.errors import DomainError


def test_log_gamma():
    """Test log Gamma at half integers and integers."""
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
    assert log_gamma(5) == pytest.approx(math.log(24), rel=1e-14)
    assert log_gamma(10.5) == pytest.approx(math.lgamma(10.5), rel=1e-13)


def test_log_gamma_domain():
    """Test log Gamma rejects non-positive arguments."""
    with pytest.raises(DomainError):
        log_gamma(0)
    with pytest.raises(DomainError):
        log_gamma(-1.5)


def test_h_of_q():
    """Test h(q) against the arctangent and Wallis integrals."""
    assert h_of_q(1) == pytest.approx(math.pi, rel=1e-14)
    assert h_of_q(2) == pytest.approx(math.pi / 2, rel=1e-14)
    assert h_of_q(3) == pytest.approx(3 * math.pi / 8, rel=1e-14)
    with pytest.raises(DomainError):
        h_of_q(0.5)


def test_params():
    """Test derived exponents at p = 4."""
    params = GNParams(4)
    assert params.regime is Regime.Supercritical
    assert params.d == pytest.approx(4)
    assert params.beta == pytest.approx(2)
    assert params.kappa == pytest.approx(5)
    assert params.q_dual == pytest.approx(2.5)
    assert params.m_fd == pytest.approx(0.6)
    assert params.el_coefficient == pytest.approx(2)
    assert GNParams(6).beta is None
    assert GNParams(1.5).d is None
    assert GNParams(1.5).regime is Regime.Subcritical


def test_params_domain():
    """Test invalid exponents."""
    with pytest.raises(DomainError):
        GNParams(2)
    with pytest.raises(DomainError):
        GNParams(1)
    with pytest.raises(DomainError):
        GNParams(float('nan'))
    with pytest.raises(TypeError):
        GNParams('4')


def test_constants_p4():
    """Test the closed-form constants at p = 4."""
    table = constants_for(GNParams(4))
    assert table.i2_or_j2 == pytest.approx(2, rel=1e-13)
    assert table.zeta_p == pytest.approx(4 / 3, rel=1e-13)
    assert table.c_p == pytest.approx(3 ** 0.4, rel=1e-13)
    assert table.c1_or_c2 > 0 and table.c_gn > 0


def test_constants_p15():
    """Test J2 at p = 3/2 against the Wallis integral of cos^8."""
    table = constants_for(GNParams(1.5))
    assert table.i2_or_j2 == pytest.approx(35 * math.pi / 128, rel=1e-13)
    assert table.c_p == pytest.approx(2 ** 0.2, rel=1e-13)


def test_c_p_continuity():
    """Test c_p tends to 1 at p = 2 from both sides."""
    assert log_c_p(GNParams(2 + 1e-8)) == pytest.approx(0, abs=1e-7)
    assert log_c_p(GNParams(2 - 1e-8)) == pytest.approx(0, abs=1e-7)


def test_log_sobolev_limits():
    """Test the analytic limit and the finite difference estimates."""
    limit, slope = log_sobolev_limits()
    assert limit == 1
    assert slope == pytest.approx(1 + math.log(2 * math.pi))
    h = 0.01
    estimates = log_sobolev_estimates(h)
    assert abs(estimates['c1'] - (1 + h * slope / 4)) < 2e-3
    assert abs(estimates['c2'] - (1 + h * slope / 4)) < 2e-3
    assert abs(estimates['slope_below'] - slope) < 0.2
    assert abs(log_sobolev_estimates(1e-3)['slope_above'] - slope) < 5e-3
    with pytest.raises(DomainError):
        log_sobolev_estimates(1.5)


def test_lyapunov_constant():
    """Test the Lyapunov constant at p = 4."""
    assert lyapunov_constant(GNParams(4)) == pytest.approx(2 * math.sqrt(4 / 3))
