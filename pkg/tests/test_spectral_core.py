import csv
import math

import numpy as np
import pytest

from grazingmodes import (
    BlowupError,
    DimensionMismatchError,
    FplKernel,
    Moments,
    GridConfig,
    SpectralState,
    SupportViolationError,
    build_mode_tensor,
    build_split_kernel,
    collision_direct,
    collision_fast,
    moments,
    project_initial,
    step,
)
from grazingmodes.experiments import random_hermitian_state
from grazingmodes.grazing_fpl_modes import mode_tensor_from_split
from grazingmodes.initial_data import smooth_bump, truncated_maxwellian
from grazingmodes.spectral_core import (
    export_coefficients,
    hermitian_defect,
    integrate,
    l2_norm,
    matched_maxwellian,
    suggest_dt,
)


@pytest.fixture(scope="module")
def split2():
    return build_split_kernel(FplKernel(0.0), GridConfig(2), check_samples=10)


@pytest.fixture(scope="module")
def tensor2(cutoff):
    return build_mode_tensor(cutoff, GridConfig(2), verify_samples=10)


def _naive(c, B, N):
    out = np.zeros_like(c)
    r = range(-N, N + 1)
    for l1 in r:
        for l2 in r:
            for l3 in r:
                for m1 in r:
                    for m2 in r:
                        k = (l1 + m1, 0, 0)
                        for m3 in r:
                            k = (l1 + m1, l2 + m2, l3 + m3)
                            if max(abs(x) for x in k) > N:
                                continue
                            b = B((l1, l2, l3), (m1, m2, m3))
                            out[k[0] + N, k[1] + N, k[2] + N] += c[l1 + N, l2 + N, l3 + N] * c[m1 + N, m2 + N, m3 + N] * b
    return out


def test_gaussian_mass_matches_analytic():
    grid = GridConfig(4)
    # f(R) ~ 1e-40, so the hard cutoff removes nothing measurable
    f = truncated_maxwellian(grid.R, rho=1.0, T=0.02, taper=None)
    s = project_initial(f, grid, n_grid=96)
    mom = moments(s)
    assert abs(mom.mass - 1.0) <= 1e-10
    assert abs(mom.mass - (2 * math.pi) ** 3 * s.coeffs[4, 4, 4].real) <= 1e-12
    assert np.max(np.abs(mom.momentum)) <= 1e-10


@pytest.mark.parametrize("n_grid", [9, 10, 33, 64])
def test_mass_is_the_zero_coefficient_for_any_grid(n_grid):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(0))
    m = moments(s, n_grid=n_grid).mass
    assert abs(m - (2 * math.pi) ** 3 * s.coeffs[2, 2, 2].real) <= 1e-12 * max(1.0, abs(m))


def test_resolved_projection_is_grid_independent():
    grid = GridConfig(4)
    f = truncated_maxwellian(grid.R, T=0.02, taper=None)
    a = project_initial(f, grid, n_grid=128).coeffs
    b = project_initial(f, grid, n_grid=256).coeffs
    assert np.max(np.abs(a - b)) <= 1e-12


def test_compact_bump_projection_converges():
    # the bump is smooth but not analytic at its edge, so convergence is slow
    grid = GridConfig(2)
    f = smooth_bump(grid.R)
    c = [project_initial(f, grid, n_grid=n).coeffs for n in (32, 64, 128)]
    d1 = np.max(np.abs(c[0] - c[1]))
    d2 = np.max(np.abs(c[1] - c[2]))
    assert d2 < 0.1 * d1


def test_zero_data():
    grid = GridConfig(2)
    s = project_initial(lambda v: np.zeros(v.shape[:-1]), grid)
    assert not s.coeffs.any()


def test_support_violation():
    grid = GridConfig(2)
    wide = truncated_maxwellian(10.0, T=1.0)
    with pytest.raises(SupportViolationError):
        project_initial(wide, grid)
    with pytest.warns(UserWarning):
        project_initial(wide, grid, strict=False)


def test_direct_tensor_matches_naive_loop(tensor2):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(5))
    got = collision_direct(s, tensor2)
    ref = _naive(s.coeffs, tensor2.lookup, 2)
    assert np.max(np.abs(got - ref)) <= 1e-14 * np.max(np.abs(ref))


def test_direct_split_matches_naive_loop(split2):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(6))
    got = collision_direct(s, split2)
    ref = _naive(s.coeffs, split2.reassemble, 2)
    assert np.max(np.abs(got - ref)) <= 1e-14 * np.max(np.abs(ref))


def test_fast_matches_direct(split2):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(7))
    d = collision_direct(s, split2)
    f = collision_fast(s, split2)
    assert np.max(np.abs(f - d)) <= 1e-12 * np.max(np.abs(d))
    assert hermitian_defect(f) <= 1e-12 * np.max(np.abs(f))
    t = mode_tensor_from_split(split2)
    assert np.max(np.abs(collision_direct(s, t) - d)) <= 1e-12 * np.max(np.abs(d))


def test_single_pair_state(split2):
    # c supported on {l, m}: only the modes of those pairs contribute
    grid = GridConfig(2)
    c = np.zeros(grid.shape, complex)
    l, m = np.array([1, 0, 0]), np.array([0, -1, 1])
    c[tuple(l + 2)] = 1.0
    c[tuple(m + 2)] = 2.0
    s = SpectralState(grid, c)
    q = collision_fast(s, split2)
    k = l + m
    expect = 2.0 * (split2.reassemble(l, m) + split2.reassemble(m, l))
    assert abs(q[tuple(k + 2)] - expect) <= 1e-12 * abs(expect)
    assert np.allclose(q, collision_direct(s, split2), rtol=0, atol=1e-12 * abs(expect))


def test_total_mass_rate_vanishes(split2, tensor2):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(8))
    for kern in (split2, tensor2):
        q = collision_direct(s, kern)
        assert abs(q[2, 2, 2]) <= 1e-12 * np.max(np.abs(q))


def test_zero_state_does_not_move(split2):
    s = SpectralState.zeros(GridConfig(2))
    assert not step(s, split2, 0.1).coeffs.any()


def _near_uniform(grid, seed, amp=0.1):
    r = random_hermitian_state(grid, np.random.default_rng(seed)).coeffs
    c0 = (2 * math.pi) ** -3
    c = amp * c0 * r / np.max(np.abs(r))
    c[(grid.N,) * 3] = c0
    return SpectralState(grid, c)


def test_rk4_local_error_order(split2):
    s = _near_uniform(GridConfig(2), 4)
    h = suggest_dt(s, split2, factor=1.0, method="spectral")

    def fine(dt, n=32):
        out = s
        for _ in range(n):
            out = step(out, split2, dt / n)
        return out.coeffs

    one = np.max(np.abs(step(s, split2, h).coeffs - fine(h)))
    half = np.max(np.abs(step(s, split2, h / 2).coeffs - fine(h / 2)))
    assert 24 < one / half < 40


def test_cutoff_mass_conservation(tensor2):
    s = _near_uniform(GridConfig(2), 3)
    m0 = moments(s).mass
    e0 = moments(s).energy
    dt = suggest_dt(s, tensor2, factor=0.5, method="spectral", evaluator="direct")
    out = integrate(s, tensor2, 2.0, dt, evaluator="direct")
    assert abs(moments(out).mass - m0) <= 1e-10 * m0 * 2.0
    # energy is not an invariant of the truncated system
    assert moments(out).energy != e0


def test_matched_maxwellian_inverts_moments():
    rho, u, T = 2.0, np.array([0.1, 0.0, -0.05]), 0.02
    mom = Moments(rho, rho * u, 0.5 * rho * (u @ u + 3 * T))
    r, uu, TT = matched_maxwellian(mom)
    assert r == rho and np.allclose(uu, u, rtol=1e-15) and TT == pytest.approx(T, rel=1e-13)


def test_blowup_is_reported(split2):
    s = random_hermitian_state(GridConfig(2), np.random.default_rng(0))
    with pytest.raises(BlowupError) as err:
        step(s.with_coeffs(1e3 * s.coeffs), split2, 1.0)
    assert err.value.time == 1.0


def test_dimension_mismatch(split2):
    with pytest.raises(DimensionMismatchError):
        collision_fast(SpectralState.zeros(GridConfig(3)), split2)
    with pytest.raises(DimensionMismatchError):
        SpectralState(GridConfig(2), np.zeros((4, 4, 4)))


def test_parseval_norm():
    grid = GridConfig(1)
    c = np.zeros(grid.shape, complex)
    c[1, 1, 1] = 1.0
    assert l2_norm(c) == pytest.approx((2 * math.pi) ** 1.5)


def test_coefficient_csv_is_lexicographic(tmp_path):
    s = random_hermitian_state(GridConfig(1), np.random.default_rng(1))
    path = tmp_path / "c.csv"
    export_coefficients(s, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["k1", "k2", "k3", "re", "im"]
    ks = [tuple(int(x) for x in r[:3]) for r in rows[1:]]
    assert ks == sorted(ks) and len(ks) == 27
    assert complex(float(rows[1][3]), float(rows[1][4])) == s.coeffs[0, 0, 0]
