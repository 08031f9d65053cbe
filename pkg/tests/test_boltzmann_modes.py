import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grazingmodes import CacheError, CrossSection, GridConfig, QuadratureSpec, compute_mode, compute_mode_vhs
from grazingmodes import build_mode_tensor, cache
from grazingmodes.boltzmann_modes import (
    ModeIntegrator,
    _product_mode,
    canonical_key,
    compute_mode_complex,
    enumerate_classes,
    grid_rmax,
    invariant_triple,
    vhs_integral,
    vhs_prefactor,
)
from grazingmodes.errors import DomainError, NonIntegrableError

vec = st.tuples(*[st.integers(-2, 2)] * 3)


@pytest.fixture(scope="module")
def integ2(cutoff):
    grid = GridConfig(2)
    return ModeIntegrator(cutoff, grid, QuadratureSpec.for_grid(2), grid_rmax(grid))


@pytest.fixture(scope="module")
def tensor2(cutoff):
    return build_mode_tensor(cutoff, GridConfig(2), verify_samples=30)


def _brute_force_classes(N, signed=False):
    r = range(-N, N + 1)
    lat = list(itertools.product(r, r, r))
    seen = set()
    for l in lat:
        for m in lat:
            seen.add(tuple(int(x) for x in canonical_key(l, m, signed)))
    return seen


@pytest.mark.parametrize("N,count", [(1, 24), (2, 243)])
def test_class_counts_match_brute_force(N, count):
    codes, keys, pairs = enumerate_classes(N)
    assert len(codes) == count
    assert {tuple(k) for k in keys.tolist()} == _brute_force_classes(N)
    assert np.array_equal(canonical_key(pairs[:, 0], pairs[:, 1]), keys)


@settings(max_examples=60, deadline=None)
@given(vec, vec)
def test_mode_symmetries(integ2, l, m):
    l, m = np.array(l), np.array(m)
    b = integ2.mode_lm(l, m)
    assert abs(b.imag) <= 1e-10
    for other in ((-l, -m), (-l, m), (l, -m)):
        assert abs(b.real - integ2.mode_lm(*other).real) <= 1e-10
    assert abs(integ2.mode_lm(-m, m)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(vec, vec)
def test_signed_triple_determines_the_mode(integ2, l, m):
    # any orthogonal map of the lattice preserves the triple
    perm = np.array([2, 0, 1])
    sign = np.array([1, -1, 1])
    l, m = np.array(l), np.array(m)
    l2, m2 = sign * l[perm], sign * m[perm]
    assert tuple(invariant_triple(l, m)) == tuple(invariant_triple(l2, m2))
    assert abs(integ2.mode_lm(l, m) - integ2.mode_lm(l2, m2)) <= 1e-10


def test_swap_is_not_a_symmetry_on_the_half_sphere(cutoff):
    grid = GridConfig(1)
    l, m = (1, 0, 0), (0, 1, 1)
    a = compute_mode(cutoff, grid, l, m)
    b = compute_mode(cutoff, grid, m, l)
    assert abs(a - b) > 1.0


def test_reduced_matches_product_quadrature(cutoff):
    # literal product rule over |q|, two spheres and the deflection angle
    grid = GridConfig(1)
    quad = QuadratureSpec(n_rho=24, n_omega=16, n_sigma_theta=12, n_sigma_phi=24)
    for l, m in [((1, 0, 0), (0, 1, 0)), ((1, 1, 0), (0, -1, 1)), ((0, 0, 1), (1, 1, 1))]:
        a, _ = compute_mode_complex(cutoff, grid, l, m)
        b = _product_mode(cutoff, grid, l, m, quad)
        assert abs(a - b) <= 1e-9


def test_diagonal_and_mass_modes_vanish(cutoff):
    grid = GridConfig(2)
    assert compute_mode(cutoff, grid, (1, 2, 0), (1, 2, 0)) == 0.0
    assert abs(compute_mode(cutoff, grid, (-1, 2, 0), (1, -2, 0))) <= 1e-10


def test_vhs_closed_form_matches_numeric():
    grid = GridConfig(4)
    l, m = (1, 0, 0), (0, 1, 0)
    closed = compute_mode_vhs(0.0, 1.0, grid, l, m)
    numeric = vhs_prefactor(0.0, 1.0) * vhs_integral(0.0, l, m, n=400, rmax=grid.R)
    assert abs(closed - numeric) <= 1e-12 * max(1.0, abs(closed))


def test_vhs_prefactor_value():
    assert vhs_prefactor(0.0, 1.0) == pytest.approx(8 * (4 * math.pi) ** 2, rel=1e-15)
    assert vhs_prefactor(1.0, 2.0) == pytest.approx(2 * 16 * (4 * math.pi) ** 2, rel=1e-15)


def test_vhs_exponent_domain():
    with pytest.raises(DomainError):
        compute_mode_vhs(-3.0, 1.0, GridConfig(1), (1, 0, 0), (0, 0, 0))


def test_strong_singularity_refused():
    cs = CrossSection.cutoff(-3.0)
    grid = GridConfig(1)
    with pytest.raises((NonIntegrableError, DomainError)):
        compute_mode(cs, grid, (1, 0, 0), (0, 1, 0))


def test_pair_outside_lattice(cutoff):
    with pytest.raises(DomainError):
        compute_mode(cutoff, GridConfig(1), (2, 0, 0), (0, 0, 0))


def test_n_zero_tensor(cutoff):
    t = build_mode_tensor(cutoff, GridConfig(0))
    assert len(t) == 1 and t.lookup((0, 0, 0), (0, 0, 0)) == 0.0


def test_tensor_lookup_matches_direct_integration(tensor2, integ2):
    rng = np.random.default_rng(3)
    for l, m in rng.integers(-2, 3, size=(20, 2, 3)):
        assert abs(tensor2.lookup(l, m) - integ2.mode_lm(l, m).real) <= 1e-9
    assert tensor2.meta["symmetry"]["table"] <= 1e-9


def test_cache_round_trip_is_bit_identical(tensor2, tmp_path, cutoff):
    path = tmp_path / "modes.bin"
    cache.save_mode_tensor(tensor2, path)
    back = cache.load_mode_tensor(path, N=2, kernel_tag=cutoff.tag, tol=tensor2.tol)
    assert np.array_equal(back.keys, tensor2.keys)
    assert back.values.tobytes() == tensor2.values.tobytes()
    loaded = build_mode_tensor(cutoff, GridConfig(2), cache_path=path)
    assert loaded.values.tobytes() == tensor2.values.tobytes()


def test_cache_mismatch_and_corruption(tensor2, tmp_path, cutoff):
    path = tmp_path / "modes.bin"
    cache.save_mode_tensor(tensor2, path)
    with pytest.raises(CacheError):
        cache.load_mode_tensor(path, N=3)
    with pytest.raises(CacheError):
        cache.load_mode_tensor(path, kernel_tag="other")
    with pytest.raises(CacheError):
        cache.load_mode_tensor(path, tol=tensor2.tol / 10)
    data = bytearray(path.read_bytes())
    data[-3] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CacheError):
        cache.load_mode_tensor(path)
    path.write_bytes(b"short")
    with pytest.raises(CacheError):
        cache.load_any(path)
