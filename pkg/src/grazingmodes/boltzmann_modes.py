"""Boltzmann kernel modes by quadrature, with symmetry-compressed storage.

A mode is

    B(l, m) = int_{|q| <= 2 lam pi} dq e^{i q.m} int_{S^2} dsigma B(q, theta)
              [exp(i (l - m)/2 . (q - |q| sigma)) - 1].

The default ("reduced") route integrates both azimuths analytically, which
leaves a three-dimensional integral over ``|q|``, the cosine between ``q`` and
``l - m`` and the deflection angle.  The inner deflection-angle integral only
depends on ``r = |q| |l - m| / 2`` and that cosine, so it is tabulated once per
kernel on a Chebyshev grid in ``r`` and reused by every mode.  The "product"
route is the literal five-dimensional product rule and serves as an oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np
from scipy.special import j0

from ._quadrature import (
    fixed_dot,
    expi_minus_one,
    gauss_legendre,
    graded_breakpoints,
    plane_wave_bracket,
    radial_rule,
    sphere_rule,
)
from .cross_sections import CrossSection, GrazingFamily, momentum_transfer_constant
from .errors import DomainError, GrazingModesError, NonIntegrableError, QuadratureNotConvergedError

#: Support ratio that keeps periodic images of the collision region apart.
LAMBDA = 2.0 / (3.0 + math.sqrt(2.0))


@dataclass(frozen=True)
class GridConfig:
    """Fourier lattice ``{-N..N}^3`` on the period ``[-pi, pi]^3``."""

    N: int
    T: float = math.pi

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise DomainError("N must be a nonnegative integer")
        if self.T != math.pi:
            raise DomainError("the period half-width is fixed to pi")

    @property
    def lam(self):
        return LAMBDA

    @property
    def R(self):
        return LAMBDA * math.pi

    @property
    def q_max(self):
        return 2.0 * LAMBDA * math.pi

    @property
    def shape(self):
        n = 2 * self.N + 1
        return (n, n, n)

    def lattice(self):
        """All lattice vectors, lexicographic, as an ``(n**3, 3)`` int array."""
        r = np.arange(-self.N, self.N + 1)
        return np.array(list(itertools.product(r, r, r)), dtype=np.int64)


@dataclass(frozen=True)
class ThetaGrading:
    ratio: float = 0.5
    max_width: float = 0.25
    rel_floor: float = 1e-14
    max_depth: int = 400


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for mode quadrature; ``refined(k)`` doubles them ``k`` times."""

    n_rho: int = 32
    n_omega: int = 24
    n_sigma_theta: int = 16
    n_sigma_phi: int = 16
    theta_grading: ThetaGrading = field(default_factory=ThetaGrading)
    tol: float = 1e-10
    max_refinements: int = 2
    n_interp: Optional[int] = None
    interp_factor: float = 1.0

    def __post_init__(self):
        for name in ("n_rho", "n_omega", "n_sigma_theta", "n_sigma_phi"):
            if getattr(self, name) < 2:
                raise DomainError(f"{name} must be at least 2")
        if not self.tol > 0:
            raise DomainError("tol must be positive")

    @classmethod
    def for_grid(cls, N, tol=1e-10, **kw):
        """Counts sized for the largest oscillation on the lattice of size N."""
        n = 24 + 8 * max(int(N), 1)
        return cls(n_rho=n, n_omega=n, n_sigma_theta=16, n_sigma_phi=2 * n, tol=tol, **kw)

    def refined(self, level):
        if level == 0:
            return self
        f = 2**level
        return replace(
            self,
            n_rho=self.n_rho * f,
            n_omega=self.n_omega * f,
            n_sigma_theta=self.n_sigma_theta * f,
            n_sigma_phi=self.n_sigma_phi * f,
            n_interp=None if self.n_interp is None else self.n_interp * f,
            interp_factor=self.interp_factor * 1.25**level,
        )


# -- symmetry keys ----------------------------------------------------------


def invariant_triple(l, m):
    """``(|l+m|^2, |l-m|^2, (l+m).(l-m))`` for integer vectors (exact)."""
    l = np.asarray(l, dtype=np.int64)
    m = np.asarray(m, dtype=np.int64)
    kp = np.sum((l + m) ** 2, axis=-1)
    km = np.sum((l - m) ** 2, axis=-1)
    dot = np.sum(l * l, axis=-1) - np.sum(m * m, axis=-1)
    return kp, km, dot


def canonical_key(l, m, signed=False):
    """Symmetry class of ``(l, m)``.

    ``B(-l, m) = B(l, m)`` swaps the first two entries of the triple, so they
    are sorted unless ``signed``.  The sign of the third entry is kept: for
    kernels supported on the half sphere ``B(l, m) != B(m, l)`` in general.
    """
    kp, km, dot = invariant_triple(l, m)
    if signed:
        return np.stack([kp, km, dot], axis=-1)
    return np.stack([np.minimum(kp, km), np.maximum(kp, km), dot], axis=-1)


def encode_keys(keys, N):
    keys = np.asarray(keys, dtype=np.int64)
    a = 12 * N * N + 1
    b = 6 * N * N + 1
    return (keys[..., 0] * a + keys[..., 1]) * b + keys[..., 2] + 3 * N * N


def enumerate_classes(N, signed=False):
    """Distinct symmetry classes on ``{-N..N}^3`` and a representative pair each."""
    lat = GridConfig(N).lattice()
    codes_all = []
    reps = {}
    for i, l in enumerate(lat):
        keys = canonical_key(l[None, :], lat, signed=signed)
        codes = encode_keys(keys, N)
        uniq, first = np.unique(codes, return_index=True)
        for c, j in zip(uniq.tolist(), first.tolist()):
            if c not in reps:
                reps[c] = (i, j)
        codes_all.append(uniq)
    codes = np.unique(np.concatenate(codes_all))
    pairs = np.array([(lat[reps[c][0]], lat[reps[c][1]]) for c in codes.tolist()], dtype=np.int64)
    keys = canonical_key(pairs[:, 0], pairs[:, 1], signed=signed)
    return codes, keys, pairs


# -- reduced quadrature -----------------------------------------------------


def _theta_rule(cs, quad):
    lo, hi = cs.support
    g = quad.theta_grading
    nu = cs.singularity_order
    if nu is None:
        depth = 3
    elif lo > 0:
        depth = 0
    else:
        if nu >= 2:
            raise NonIntegrableError(f"{cs.name}: singularity order {nu} >= 2")
        floor = g.rel_floor ** (1.0 / (2.0 - nu))
        depth = min(g.max_depth, int(math.ceil(math.log(floor) / math.log(g.ratio))))
    breaks = graded_breakpoints(lo, hi, depth=depth, ratio=g.ratio, max_width=g.max_width)
    start = lo + 0.25 * (hi - lo)
    n_outer = quad.n_sigma_theta
    n_inner = max(8, quad.n_sigma_theta // 2 + 2)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(n_outer if a >= start * (1 - 1e-12) else n_inner, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _cheb_points(n, rmax):
    k = np.arange(n)
    return 0.5 * rmax * (1.0 - np.cos(np.pi * k / (n - 1)))


def _cheb_weights(n):
    # barycentric weights of Chebyshev-Lobatto points
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


# Plain loops keep the summation order fixed, so results do not depend on
# memory alignment the way vectorized numpy reductions can.
@numba.njit(cache=True)
def _barycentric(nodes, weights, table, x):
    out = np.empty((x.size, table.shape[1]), dtype=np.complex128)
    for i in range(x.size):
        hit = -1
        for j in range(nodes.size):
            if x[i] == nodes[j]:
                hit = j
                break
        if hit >= 0:
            out[i, :] = table[hit, :]
            continue
        den = 0.0
        for c in range(table.shape[1]):
            out[i, c] = 0.0
        for j in range(nodes.size):
            a = weights[j] / (x[i] - nodes[j])
            den += a
            for c in range(table.shape[1]):
                out[i, c] += a * table[j, c]
        for c in range(table.shape[1]):
            out[i, c] /= den
    return out


@numba.njit(cache=True)
def _contract(w_rho, vals, w_t):
    total = 0.0 + 0.0j
    for i in range(w_rho.size):
        row = 0.0 + 0.0j
        for c in range(w_t.size):
            row += vals[i, c] * w_t[c]
        total += w_rho[i] * row
    return total


class ModeIntegrator:
    """Reduced-quadrature evaluator for one kernel at one refinement level.

    The deflection-angle integral is tabulated on a Chebyshev grid in
    ``r in [0, r_max]`` at construction time.
    """

    def __init__(self, cs, grid, quad, r_max):
        cs = cs.at() if isinstance(cs, GrazingFamily) else cs
        if cs.gamma <= -3:
            raise NonIntegrableError(f"{cs.name}: |q|^gamma is not integrable at the origin for gamma={cs.gamma}")
        # propagates NonIntegrableError for divergent kernels
        momentum_transfer_constant(cs)
        self.cs = cs
        self.grid = grid
        self.quad = quad
        self.rho, self.w_rho = radial_rule(quad.n_rho, 2.0 + cs.gamma, grid.q_max)
        self.t, self.w_t = gauss_legendre(quad.n_omega, -1.0, 1.0)
        self.theta, self.w_theta = _theta_rule(cs, quad)
        self.r_max = max(float(r_max), 1e-3)
        # the inner integrand oscillates in r with frequency <= 2 sin(theta_max / 2)
        omega = 2.0 * math.sin(0.5 * cs.support[1])
        n_c = quad.n_interp or int(math.ceil(0.75 * omega * self.r_max * quad.interp_factor)) + 24
        self.r_nodes = _cheb_points(n_c, self.r_max)
        self.table = self._tabulate(self.r_nodes)
        self._weights = _cheb_weights(n_c)
        self._cache = {}

    def _tabulate(self, r):
        zw = self.cs.zeta(self.theta) * self.w_theta
        one_m_cos = 2.0 * np.sin(0.5 * self.theta) ** 2
        sin_th = np.sin(self.theta)
        s = np.sqrt(1.0 - self.t**2)
        out = np.empty((r.size, self.t.size), dtype=complex)
        for i, ri in enumerate(r):
            phase = ri * self.t[:, None] * one_m_cos[None, :]
            arg = ri * s[:, None] * sin_th[None, :]
            out[i] = 2.0 * np.pi * fixed_dot(plane_wave_bracket(phase, arg), zw)
        return out

    def inner(self, d2):
        """Deflection-angle integral at ``r = rho |d| / 2`` for all radial nodes."""
        got = self._cache.get(d2)
        if got is None:
            r = self.rho * math.sqrt(d2) / 2.0
            if r.max() > self.r_max * (1 + 1e-12):
                raise GrazingModesError("mode outside the tabulated range")
            got = _barycentric(self.r_nodes, self._weights, self.table, r)
            self._cache[d2] = got
        return got

    def mode(self, m2, md, d2):
        """Complex mode from invariants ``|m|^2``, ``m.d`` and ``|d|^2``, d = l - m."""
        if d2 == 0:
            return 0j
        dn = math.sqrt(d2)
        m_par = md / dn
        m_perp = math.sqrt(max(m2 - m_par * m_par, 0.0))
        rho = self.rho[:, None]
        outer = np.exp(1j * rho * m_par * self.t[None, :]) * j0(
            rho * m_perp * np.sqrt(1.0 - self.t[None, :] ** 2)
        )
        theta_int = self.inner(d2)
        return 2.0 * np.pi * _contract(self.w_rho, outer * theta_int, self.w_t)

    def mode_lm(self, l, m):
        l = np.asarray(l, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        d = l - m
        return self.mode(int(m @ m), int(m @ d), int(d @ d))


def _pair_rmax(grid, l, m):
    d = np.asarray(l, dtype=float) - np.asarray(m, dtype=float)
    return grid.q_max * float(np.linalg.norm(d)) / 2.0


def grid_rmax(grid):
    return grid.q_max * 2.0 * math.sqrt(3.0) * grid.N / 2.0


def _check_pair(grid, l, m):
    for v in (l, m):
        if len(v) != 3 or max(abs(int(x)) for x in v) > grid.N:
            raise DomainError(f"lattice vector {tuple(v)} outside {{-{grid.N}..{grid.N}}}^3")


def compute_mode_complex(cs, grid, l, m, quad=None, method="reduced"):
    """Raw complex mode value and its refinement error estimate."""
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    if np.array_equal(np.asarray(l), np.asarray(m)):
        return 0j, 0.0
    prev = None
    rmax = _pair_rmax(grid, l, m)
    for level in range(quad.max_refinements + 1):
        q = quad.refined(level)
        if method == "reduced":
            val = ModeIntegrator(cs, grid, q, rmax).mode_lm(l, m)
        elif method == "product":
            val = _product_mode(cs, grid, l, m, q)
        else:
            raise ValueError(f"unknown method {method!r}")
        if prev is not None:
            err = abs(val - prev)
            if err <= quad.tol:
                return val, err
        prev = val
    raise QuadratureNotConvergedError(
        f"mode {tuple(l)},{tuple(m)} not converged: refinements differ by {err:.3e}",
        estimate=prev,
        pair=(tuple(l), tuple(m)),
    )


def compute_mode(cs, grid, l, m, quad=None, method="reduced"):
    """Real kernel mode ``B(l, m)`` to absolute accuracy ``quad.tol``.

    The imaginary part of the raw quadrature must itself be below the
    tolerance; it is checked, then discarded.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    val, _ = compute_mode_complex(cs, grid, l, m, quad, method)
    if abs(val.imag) > quad.tol:
        raise QuadratureNotConvergedError(
            f"imaginary residue {val.imag:.3e} exceeds tolerance", estimate=val, pair=(tuple(l), tuple(m))
        )
    return float(val.real)


def _orthonormal_frames(omega):
    # e1, e2 perpendicular to each row of omega
    helper = np.where(np.abs(omega[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(omega, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(omega, e1)
    return e1, e2


def _product_mode(cs, grid, l, m, quad):
    """Literal product rule over |q|, the q-sphere and the sigma-sphere."""
    cs = cs.at() if isinstance(cs, GrazingFamily) else cs
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    d = l - m
    rho, w_rho = radial_rule(quad.n_rho, 2.0 + cs.gamma, grid.q_max)
    omega, w_om = sphere_rule(quad.n_omega, 2 * quad.n_omega)
    theta, w_th = _theta_rule(cs, quad)
    phi = 2.0 * np.pi * np.arange(quad.n_sigma_phi) / quad.n_sigma_phi
    w_phi = 2.0 * np.pi / quad.n_sigma_phi
    e1, e2 = _orthonormal_frames(omega)
    d_om = omega @ d
    d_e1 = e1 @ d
    d_e2 = e2 @ d
    m_om = omega @ m
    zw = cs.zeta(theta) * w_th * w_phi
    omc = 2.0 * np.sin(0.5 * theta) ** 2
    sth = np.sin(theta)
    # d.(omega - sigma) on the (omega, theta, phi) grid
    tang = d_e1[:, None] * np.cos(phi)[None, :] + d_e2[:, None] * np.sin(phi)[None, :]
    proj = omc[None, :, None] * d_om[:, None, None] - sth[None, :, None] * tang[:, None, :]
    total = 0j
    for r, wr in zip(rho, w_rho):
        br = expi_minus_one(0.5 * r * proj)
        sigma_int = np.einsum("atp,t->a", br, zw)
        total += wr * np.sum(w_om * np.exp(1j * r * m_om) * sigma_int)
    return total


# -- variable hard spheres ---------------------------------------------------


def vhs_prefactor(alpha, c_alpha):
    """Constant in front of the one-dimensional VHS mode integral.

    Integrating both spheres of a constant kernel gives ``(4 pi)^2`` and the
    substitution ``r = |q| / 2`` contributes ``2^(3 + alpha)``.
    """
    return (4.0 * math.pi) ** 2 * 2.0 ** (3.0 + alpha) * c_alpha


def _r2_sinc_sinc(a2, b2, X):
    """``int_0^X r^2 sinc(a r) sinc(b r) dr`` for ``a = sqrt(a2)``, ``b = sqrt(b2)``."""
    if a2 == 0 and b2 == 0:
        return X**3 / 3.0
    if a2 == 0 or b2 == 0:
        b = math.sqrt(max(a2, b2))
        return (math.sin(b * X) - b * X * math.cos(b * X)) / b**3
    a = math.sqrt(a2)
    b = math.sqrt(b2)

    def S(w, exact_zero):
        return X if exact_zero else math.sin(w * X) / w

    return (S(a - b, a2 == b2) - S(a + b, False)) / (2.0 * a * b)


def _sinc(x):
    return np.sinc(x / np.pi)


def vhs_integral(alpha, l, m, n=None, rmax=LAMBDA * math.pi):
    """Numeric ``int_0^rmax r^(2+alpha) [sinc sinc - sinc] dr`` by Gauss-Jacobi."""
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    a = np.linalg.norm(l + m)
    b = np.linalg.norm(l - m)
    c = 2.0 * np.linalg.norm(m)
    n = n or int(24 + 2 * rmax * (a + b + c))
    r, w = radial_rule(n, 2.0 + alpha, rmax)
    return float(np.sum(w * (_sinc(a * r) * _sinc(b * r) - _sinc(c * r))))


def compute_mode_vhs(alpha, c_alpha, grid, l, m, quad=None):
    """Mode of the VHS kernel ``C_alpha |q|**alpha`` via the 1-D reduction.

    Maxwell molecules (``alpha = 0``) use the closed antiderivative of sinc
    products; other exponents use Gauss-Jacobi with node doubling.
    """
    if alpha <= -3:
        raise DomainError("VHS exponent must exceed -3")
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    l = np.asarray(l, dtype=np.int64)
    m = np.asarray(m, dtype=np.int64)
    X = grid.R
    if alpha == 0:
        a2 = int(np.sum((l + m) ** 2))
        b2 = int(np.sum((l - m) ** 2))
        c2 = 4 * int(m @ m)
        val = _r2_sinc_sinc(a2, b2, X) - _r2_sinc_sinc(c2, 0, X)
        return vhs_prefactor(alpha, c_alpha) * val
    n = 32 + int(2 * X * 4 * math.sqrt(3) * grid.N)
    prev = vhs_integral(alpha, l, m, n, X)
    for _ in range(quad.max_refinements + 1):
        n *= 2
        val = vhs_integral(alpha, l, m, n, X)
        if abs(val - prev) * vhs_prefactor(alpha, c_alpha) <= quad.tol:
            return vhs_prefactor(alpha, c_alpha) * val
        prev = val
    raise QuadratureNotConvergedError("VHS radial quadrature did not converge", pair=(tuple(l), tuple(m)))


# -- tensors ------------------------------------------------------------------


@dataclass(frozen=True)
class ModeTensor:
    """Kernel modes on ``{-N..N}^3 x {-N..N}^3`` stored once per symmetry class.

    ``keys`` rows are :func:`canonical_key` triples, ``codes`` their exact
    integer encodings (sorted), ``values`` the real modes.
    """

    N: int
    keys: np.ndarray
    values: np.ndarray
    kernel_tag: str
    tol: float
    signed: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        codes = encode_keys(self.keys, self.N)
        order = np.argsort(codes, kind="stable")
        object.__setattr__(self, "keys", np.ascontiguousarray(np.asarray(self.keys, dtype=np.int64)[order]))
        object.__setattr__(self, "values", np.ascontiguousarray(np.asarray(self.values, dtype=float)[order]))
        object.__setattr__(self, "codes", np.ascontiguousarray(codes[order]))
        if np.any(np.diff(self.codes) == 0):
            raise GrazingModesError("duplicate symmetry classes")

    def __len__(self):
        return self.values.size

    def lookup(self, l, m):
        """Mode value(s) for lattice pairs; arrays broadcast over leading axes."""
        l = np.asarray(l, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        if np.abs(l).max(initial=0) > self.N or np.abs(m).max(initial=0) > self.N:
            raise DomainError("pair outside the tensor lattice")
        codes = encode_keys(canonical_key(l, m, self.signed), self.N)
        idx = np.searchsorted(self.codes, codes)
        idx = np.minimum(idx, self.codes.size - 1)
        if np.any(self.codes[idx] != codes):
            raise GrazingModesError("pair has no stored symmetry class")
        out = self.values[idx]
        return float(out) if np.ndim(out) == 0 else out


def _random_pairs(N, count, rng):
    return rng.integers(-N, N + 1, size=(count, 2, 3))


def evaluate_invariants(cs, grid, inv, quad=None, n_jobs=1, pairs=None):
    """Converged complex modes for rows ``(|m|^2, m.d, |d|^2)`` of ``inv``.

    Every row is integrated at successive refinement levels until two agree
    to ``quad.tol``.  Returns the values and the finest integrator used.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    inv = np.asarray(inv, dtype=np.int64).reshape(-1, 3)
    rmax = grid_rmax(grid)

    def evaluate(level, rows):
        integ = ModeIntegrator(cs, grid, quad.refined(level), rmax)
        out = np.empty(len(rows), dtype=complex)
        order = np.argsort(inv[rows, 2], kind="stable")
        chunks = np.array_split(order, max(1, n_jobs))

        def work(chunk):
            for i in chunk:
                a, b, c = (int(x) for x in inv[rows[i]])
                out[i] = integ.mode(a, b, c)

        if n_jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(n_jobs) as ex:
                list(ex.map(work, chunks))
        else:
            work(order)
        return out, integ

    rows = np.arange(len(inv))
    values = np.empty(len(inv), dtype=complex)
    prev, integ = evaluate(0, rows)
    pending = rows
    for level in range(1, quad.max_refinements + 1):
        cur, integ = evaluate(level, pending)
        ok = np.abs(cur - prev) <= quad.tol
        values[pending[ok]] = cur[ok]
        pending = pending[~ok]
        prev = cur[~ok]
        if pending.size == 0:
            break
    if pending.size:
        bad = pending[0]
        where = f"invariants {tuple(inv[bad])}"
        pair = None
        if pairs is not None:
            pair = (tuple(pairs[bad, 0]), tuple(pairs[bad, 1]))
            where = f"l={pair[0]}, m={pair[1]}"
        raise QuadratureNotConvergedError(f"{pending.size} classes not converged, e.g. {where}", pair=pair)
    return values, integ


def build_mode_tensor(cs, grid, quad=None, cache_path=None, verify_samples=100, seed=0, n_jobs=1):
    """Tabulate every symmetry class of the kernel modes on the grid lattice.

    Each class is integrated at successive refinement levels until two agree
    to ``quad.tol``.  Afterwards the symmetry invariants are re-checked on
    ``verify_samples`` random pairs computed independently of the class map.
    A matching cache file is loaded instead of recomputing; a fresh result is
    written to ``cache_path`` when given.
    """
    from . import cache

    quad = quad or QuadratureSpec.for_grid(grid.N)
    tag = cs.at().tag if isinstance(cs, GrazingFamily) else cs.tag
    if cache_path is not None:
        try:
            return cache.load_mode_tensor(cache_path, N=grid.N, kernel_tag=tag, tol=quad.tol)
        except FileNotFoundError:
            pass
    N = grid.N
    if N == 0:
        tensor = ModeTensor(0, np.zeros((1, 3), dtype=np.int64), np.zeros(1), tag, quad.tol)
        if cache_path is not None:
            cache.save_mode_tensor(tensor, cache_path)
        return tensor
    codes, keys, pairs = enumerate_classes(N)
    m = pairs[:, 1]
    d = pairs[:, 0] - pairs[:, 1]
    inv = np.stack([np.sum(m * m, 1), np.sum(m * d, 1), np.sum(d * d, 1)], axis=1)
    values, integ = evaluate_invariants(cs, grid, inv, quad, n_jobs=n_jobs, pairs=pairs)
    imag = float(np.max(np.abs(values.imag)))
    if imag > quad.tol:
        raise QuadratureNotConvergedError(f"imaginary residue {imag:.3e} exceeds tolerance")
    tensor = ModeTensor(N, keys, values.real, tag, quad.tol, meta={"max_imag": imag})
    if verify_samples:
        report = verify_symmetries(tensor, integ, verify_samples, seed)
        tensor.meta["symmetry"] = report
        worst = max(report.values())
        if worst > 10 * quad.tol:
            raise GrazingModesError(f"symmetry verification failed: {report}")
    if cache_path is not None:
        cache.save_mode_tensor(tensor, cache_path)
    return tensor


def verify_symmetries(tensor, integ, samples=100, seed=0):
    """Largest violations of the mode symmetries on random pairs.

    Mode values are recomputed through ``integ`` for every transformed pair,
    so agreement is a genuine check of the class map.
    """
    rng = np.random.default_rng(seed)
    pairs = _random_pairs(tensor.N, samples, rng)
    worst = {"conj": 0.0, "flip_l": 0.0, "flip_m": 0.0, "null_diag": 0.0, "imag": 0.0, "table": 0.0}
    for l, m in pairs:
        b = integ.mode_lm(l, m)
        worst["imag"] = max(worst["imag"], abs(b.imag))
        worst["conj"] = max(worst["conj"], abs(b.real - integ.mode_lm(-l, -m).real))
        worst["flip_l"] = max(worst["flip_l"], abs(b.real - integ.mode_lm(-l, m).real))
        worst["flip_m"] = max(worst["flip_m"], abs(b.real - integ.mode_lm(l, -m).real))
        worst["null_diag"] = max(worst["null_diag"], abs(integ.mode_lm(-m, m)))
        worst["table"] = max(worst["table"], abs(b.real - tensor.lookup(l, m)))
    return worst
