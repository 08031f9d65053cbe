import math

import mpmath
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j0

from grazingmodes._quadrature import (
    composite_rule,
    expi_minus_one,
    gauss_legendre,
    graded_breakpoints,
    j0_minus_one,
    one_minus_cos,
    plane_wave_bracket,
    radial_rule,
    sphere_rule,
)


@given(st.integers(2, 12), st.integers(0, 23))
def test_gauss_legendre_exact_for_polynomials(n, deg):
    x, w = gauss_legendre(n, -0.5, 2.0)
    exact = (2.0 ** (deg + 1) - (-0.5) ** (deg + 1)) / (deg + 1)
    if deg <= 2 * n - 1:
        assert abs(np.sum(w * x**deg) - exact) <= 1e-11 * max(1.0, abs(exact))


@given(st.floats(-0.9, 3.0), st.integers(0, 6))
def test_radial_rule_moments(beta, k):
    r, w = radial_rule(16, beta, 2.5)
    exact = 2.5 ** (beta + k + 1) / (beta + k + 1)
    assert abs(np.sum(w * r**k) - exact) <= 1e-11 * exact


def test_sphere_rule_integrates_harmonics():
    om, w = sphere_rule(12, 24)
    assert abs(w.sum() - 4 * math.pi) < 1e-12
    assert np.allclose(np.linalg.norm(om, axis=1), 1.0)
    assert abs(np.sum(w * om[:, 2] ** 2) - 4 * math.pi / 3) < 1e-12
    assert abs(np.sum(w * om[:, 0] * om[:, 1])) < 1e-13


def test_graded_breakpoints_reach_toward_zero():
    b = graded_breakpoints(0.0, math.pi / 2, depth=30)
    assert b[0] == 0.0 and b[-1] == math.pi / 2
    assert np.all(np.diff(b) > 0)
    assert b[1] < 1e-8


def test_composite_rule_singular_integrand():
    # int_0^1 x^{-1/2} dx = 2
    b = graded_breakpoints(0.0, 1.0, depth=60)
    x, w = composite_rule(b, 16)
    assert abs(np.sum(w / np.sqrt(x)) - 2.0) < 1e-10


@settings(max_examples=200)
@given(st.floats(1e-12, 3.0))
def test_stable_differences(x):
    assert abs(one_minus_cos(x) - 2 * math.sin(x / 2) ** 2) <= 1e-15
    assert abs(expi_minus_one(x) - (np.cos(x) - 1 + 1j * np.sin(x))) <= 1e-14
    with mpmath.workdps(40):
        ref = float(mpmath.besselj(0, mpmath.mpf(x)) - 1)
    assert abs(j0_minus_one(x) - ref) <= 5e-14 * abs(ref)


def test_plane_wave_bracket_small_arguments_keep_relative_precision():
    phase, arg = 1e-9, 2e-9
    exact = (np.exp(1j * phase) * j0(arg)) - 1.0
    got = plane_wave_bracket(phase, arg)
    # leading terms: i phase - phase^2/2 - arg^2/4
    lead = 1j * phase - phase**2 / 2 - arg**2 / 4
    assert abs(got - lead) <= 1e-25
    assert abs(got.imag - exact.imag) <= 1e-20
