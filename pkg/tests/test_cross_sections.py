import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grazingmodes import CrossSection, FamilyKind, GrazingFamily, momentum_transfer_constant, parse_kernel_spec
from grazingmodes.cross_sections import eval_zeta_eps, momentum_transfer, validate_grazing_family
from grazingmodes.errors import DomainError, NonIntegrableError
from grazingmodes.grazing_fpl_modes import FplKernel


def test_cutoff_momentum_transfer_is_pi():
    cs = CrossSection.cutoff(0.0, 1.0)
    assert abs(momentum_transfer(cs, 1.0) - math.pi) < 1e-12


@given(st.floats(1e-3, 3.0), st.floats(-2.0, 1.0))
def test_momentum_transfer_scales_with_q_gamma(q, gamma):
    cs = CrossSection.cutoff(gamma, 2.0)
    assert momentum_transfer(cs, q) == pytest.approx(2 * math.pi * q**gamma, rel=1e-11, abs=1e-300)


def _power_law_lambda(nu, a=math.pi / 2):
    # termwise integration of the cosine series
    mpmath.mp.dps = 30
    a = mpmath.mpf(a)
    s = mpmath.nsum(lambda k: (-1) ** (k + 1) * a ** (2 * k - nu) / (mpmath.factorial(2 * k) * (2 * k - nu)), [1, mpmath.inf])
    return float(2 * mpmath.pi * s)


@pytest.mark.parametrize("nu", [0.2, 0.5, 1.0, 1.5, 1.9])
def test_power_law_lambda_matches_series(nu):
    got = momentum_transfer_constant(CrossSection.power_law(0.0, nu))
    assert abs(got - _power_law_lambda(nu)) <= 1e-9 * got


@pytest.mark.parametrize("nu", [2.0, 2.5])
def test_nonintegrable_singularity(nu):
    with pytest.raises(NonIntegrableError):
        momentum_transfer_constant(CrossSection.power_law(0.0, nu))


def test_inverse_power_exponents():
    cs = CrossSection.inverse_power(3.0)
    assert cs.gamma == -1.0 and cs.singularity_order == 0.5
    with pytest.raises(DomainError):
        CrossSection(0.0, lambda t: t, singularity_order=0.5, s_force=3.0)
    with pytest.raises(DomainError):
        CrossSection.cutoff(-3.5)


def test_rescaled_lambda_is_epsilon_independent():
    # theta = eps x maps every member onto the same integral in x
    fam = GrazingFamily(CrossSection.power_law(0.0, 0.5), FamilyKind.RESCALED, 0.2)
    lams = [momentum_transfer_constant(fam.at(e)) for e in (0.2, 0.02, 0.002, 2e-4)]
    assert np.allclose(lams, fam.lambda0, rtol=1e-9)
    mpmath.mp.dps = 30
    ref = 2 * mpmath.pi * mpmath.quad(lambda x: (1 - mpmath.cos(x)) * x ** mpmath.mpf(-2.5), [0, 1e-6, 1e-3, 1, mpmath.pi / 2])
    assert abs(fam.lambda0 - float(ref)) <= 1e-9 * fam.lambda0


def test_validate_rescaled_family_passes():
    fam = GrazingFamily(CrossSection.power_law(0.0, 0.5), FamilyKind.RESCALED, 0.2)
    rep = validate_grazing_family(fam, [0.2, 0.1, 0.05, 0.025], 0.5, 1e-6)
    assert rep.sup_monotone and rep.passed
    assert rep.rows[-1].sup_b == 0.0


def test_validate_repeated_epsilon_rows_identical():
    fam = GrazingFamily(CrossSection.power_law(0.0, 0.5), FamilyKind.RESCALED, 0.1)
    rep = validate_grazing_family(fam, [0.1, 0.1], 0.3, 1e-12)
    assert rep.rows[0] == rep.rows[1]
    assert rep.cauchy_ok


def test_log_cutoff_sup_decays_like_inverse_log():
    base = CrossSection.power_law(0.0, 2.0)
    fam = GrazingFamily(base, FamilyKind.LOG_CUTOFF, 0.1, lambda0=1.0)
    rep = validate_grazing_family(fam, [1e-1, 1e-2, 1e-3], 0.1, 1.0)
    sups = np.array([r.sup_b for r in rep.rows])
    scaled = sups * np.log(1.0 / np.array([1e-1, 1e-2, 1e-3]))
    assert np.allclose(scaled, scaled[0], rtol=1e-12)
    assert rep.sup_monotone


def test_eval_zeta_eps_examples():
    base = CrossSection.power_law(0.0, 0.5)
    log_fam = GrazingFamily(CrossSection.power_law(0.0, 2.0), FamilyKind.LOG_CUTOFF, 0.1, lambda0=1.0)
    assert eval_zeta_eps(log_fam, 0.05) == 0.0
    fam = GrazingFamily(base, FamilyKind.RESCALED, 0.1)
    assert eval_zeta_eps(fam, 0.2) == 0.0
    theta, eps = 0.05, 0.1
    x = theta / eps
    closed = math.sin(x / 2) ** 2 * x**-1.5 / (theta * math.sin(theta / 2) ** 2)
    assert abs(eval_zeta_eps(fam, theta) - closed) <= 1e-13 * closed
    with pytest.raises(DomainError):
        eval_zeta_eps(fam, 0.0)
    with pytest.raises(DomainError):
        eval_zeta_eps(fam, 2.0)


def test_custom_family_is_pass_through():
    def custom(theta, eps):
        return np.exp(-theta / eps) / eps

    fam = GrazingFamily(CrossSection.cutoff(0.0), FamilyKind.CUSTOM, 0.1, lambda0=1.0, custom=custom)
    th = np.linspace(0.01, 1.5, 50)
    assert np.array_equal(eval_zeta_eps(fam, th), custom(th, 0.1))


def test_parse_kernel_spec_kinds():
    assert isinstance(parse_kernel_spec({"kind": "fpl", "gamma": "1"}), FplKernel)
    assert parse_kernel_spec({"kind": "vhs"}).theta_max == math.pi
    fam = parse_kernel_spec({"kind": "rescaled", "nu": "0.5", "epsilon": "0.05"})
    assert isinstance(fam, GrazingFamily) and fam.epsilon == 0.05
    assert parse_kernel_spec({"kind": "inverse_power", "s": "3"}).gamma == -1.0
    with pytest.raises(DomainError):
        parse_kernel_spec({"kind": "nonsense"})
