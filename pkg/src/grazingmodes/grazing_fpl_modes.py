"""Grazing-limit modes: Fokker-Planck-Landau kernel modes, the small-angle
approximation of the Boltzmann modes, and split fields for fast evaluation.

All mode integrals here have the form ``int_{|q|<=Q} e^{i q.m} w(|q|) P(q) dq``
with ``P`` a polynomial of degree <= 2 in ``q``.  Two independent routes are
provided: a literal three-dimensional spherical product rule, and the radial
reduction through the spherical averages

    <e^{i x mhat.w}>            = j0(x)
    <w_j e^{i x mhat.w}>        = i j1(x) mhat_j
    <w_j w_h e^{i x mhat.w}>    = j1(x)/x delta_jh - j2(x) mhat_j mhat_h
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import spherical_jn

from ._quadrature import fixed_dot, gauss_legendre, one_minus_cos, radial_rule, sphere_rule
from .boltzmann_modes import (
    GridConfig,
    ModeTensor,
    QuadratureSpec,
    _check_pair,
    _theta_rule,
    canonical_key,
    enumerate_classes,
)
from .cross_sections import CrossSection, GrazingFamily
from .errors import DomainError, GrazingModesError, QuadratureNotConvergedError

# symmetric index pairs (j <= h) in storage order
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class FplKernel:
    """Landau kernel ``Psi(|q|) = lambda0 / 8 * |q|**(gamma + 2)``."""

    gamma: float
    lambda0: float = 1.0

    def __post_init__(self):
        if self.gamma <= -3:
            raise DomainError("FPL modes need gamma > -3")
        if not self.lambda0 > 0:
            raise DomainError("lambda0 must be positive")

    @property
    def psi_coeff(self):
        return self.lambda0 / 8.0

    def psi(self, r):
        return self.psi_coeff * np.power(r, self.gamma + 2.0)

    @property
    def tag(self):
        return f"fpl(gamma={self.gamma!r},lambda0={self.lambda0!r})"

    @classmethod
    def from_family(cls, fam):
        return cls(fam.gamma, fam.lambda0)


def _spherical_moments(x):
    """``j0, j1, j1/x, j2`` at ``x >= 0``; ``j1/x`` via ``(j0 + j2)/3``."""
    j0 = spherical_jn(0, x)
    j1 = spherical_jn(1, x)
    j2 = spherical_jn(2, x)
    return j0, j1, (j0 + j2) / 3.0, j2


def _radial_mode(drift, diffusion, gamma, grid, k_vec, m, n):
    """``int e^{iq.m} |q|^gamma {drift * i q.k - diffusion * |q|^2 [k_perp]^2} dq``.

    Radially reduced, with ``k_vec`` the vector carried by both braces.
    """
    k_vec = np.asarray(k_vec, dtype=float)
    m = np.asarray(m, dtype=float)
    rho, w = radial_rule(n, 2.0 + gamma, grid.q_max)
    mn = float(np.linalg.norm(m))
    km = float(k_vec @ m) / mn if mn > 0 else 0.0
    k2 = float(k_vec @ k_vec)
    j0, j1, j1x, j2 = _spherical_moments(rho * mn)
    # <i q.k e^{iq.m}> = i * rho * i j1 (k.mhat)
    drift_part = -rho * j1 * km
    # <[k_perp]^2 e^{iq.m}> = k2 j0 - (k2 j1/x - j2 km^2)
    perp_part = k2 * (j0 - j1x) + j2 * km * km
    return 4.0 * math.pi * float(np.sum(w * (drift * drift_part - diffusion * rho**2 * perp_part)))


def _radial_nodes(grid, *vecs):
    size = sum(float(np.linalg.norm(v)) for v in vecs)
    return 32 + int(2 * grid.q_max * size)


def fpl_mode_radial(fk, grid, l, m, n=None):
    """FPL mode by the one-dimensional radial reduction."""
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    k = l + m
    n = n or _radial_nodes(grid, k, m)
    return _radial_mode(-fk.lambda0 / 2.0, fk.lambda0 / 8.0, fk.gamma, grid, k, m, n)


def _sphere_grid(quad, grid, gamma):
    rho, w_rho = radial_rule(quad.n_rho, 2.0 + gamma, grid.q_max)
    omega, w_om = sphere_rule(quad.n_omega, quad.n_sigma_phi)
    return rho, w_rho, omega, w_om


def _direct(integrand, fk, grid, l, m, quad):
    """Three-dimensional spherical product rule with node doubling."""
    prev = None
    for level in range(quad.max_refinements + 1):
        q = quad.refined(level)
        rho, w_rho, omega, w_om = _sphere_grid(q, grid, fk.gamma)
        val = 0j
        for r, wr in zip(rho, w_rho):
            val += wr * np.sum(w_om * integrand(r, omega))
        if prev is not None and abs(val - prev) <= quad.tol:
            return val
        prev = val
    raise QuadratureNotConvergedError(
        f"FPL mode {tuple(l)},{tuple(m)} not converged", estimate=prev, pair=(tuple(l), tuple(m))
    )


def _real(val, tol, l, m):
    if abs(val.imag) > tol:
        raise QuadratureNotConvergedError(
            f"imaginary residue {val.imag:.3e} exceeds tolerance", estimate=val, pair=(tuple(l), tuple(m))
        )
    return float(val.real)


def fpl_mode_grazing(fk, grid, l, m, quad=None):
    """Grazing form: ``-(lambda0/2) int e^{iq.m}|q|^g {i q.k + |q|^2 [k_perp]^2 / 4}``.

    Evaluated by direct spherical quadrature; here ``|q|^gamma`` is the
    radial weight (the ``|q|^gamma`` factor is folded into Gauss-Jacobi).
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    k = np.asarray(l, float) + np.asarray(m, float)
    mv = np.asarray(m, float)
    k2 = k @ k

    def integrand(r, om):
        kq = om @ k
        perp = k2 - kq * kq
        return np.exp(1j * r * (om @ mv)) * (1j * r * kq + 0.25 * r * r * perp)

    return _real(-0.5 * fk.lambda0 * _direct(integrand, fk, grid, l, m, quad), quad.tol, l, m)


def fpl_mode_landau(fk, grid, l, m, quad=None):
    """Landau form: ``-4 int e^{iq.m} Psi(|q|)/|q|^2 {i q.k + |q|^2 [k_perp]^2 / 4}``."""
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    k = np.asarray(l, float) + np.asarray(m, float)
    mv = np.asarray(m, float)

    def integrand(r, om):
        # the rule carries |q|^(gamma+2); Psi/|q|^2 supplies lambda0/8 |q|^gamma
        q = r * om
        qk = q @ k
        k_perp2 = k @ k - qk * qk / (r * r)
        return fk.psi_coeff * np.exp(1j * (q @ mv)) * (1j * qk + 0.25 * r * r * k_perp2)

    return _real(-4.0 * _direct(integrand, fk, grid, l, m, quad), quad.tol, l, m)


def fpl_mode(fk, grid, l, m, quad=None):
    """FPL kernel mode; the grazing and Landau forms must agree to ``2 tol``."""
    quad = quad or QuadratureSpec.for_grid(grid.N)
    if fk.gamma <= -3:
        raise DomainError("FPL modes need gamma > -3")
    a = fpl_mode_grazing(fk, grid, l, m, quad)
    b = fpl_mode_landau(fk, grid, l, m, quad)
    if abs(a - b) > 2 * quad.tol:
        raise QuadratureNotConvergedError(f"grazing and Landau forms differ by {abs(a - b):.3e}")
    return a


def fpl_mode_alt(fk, grid, l, m, quad=None):
    """FPL mode in the ``[l_perp]^2 - [m_perp]^2`` representation.

    ``-int Psi(|q|) {[l_perp]^2 - [m_perp]^2} e^{iq.m} dq``: the sign follows
    from applying the Galerkin projection to the Landau operator directly and
    makes this form coincide with :func:`fpl_mode`.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    lv = np.asarray(l, float)
    mv = np.asarray(m, float)
    if np.array_equal(lv, mv):
        return 0.0
    l2, m2 = lv @ lv, mv @ mv

    def integrand(r, om):
        lp = l2 - (om @ lv) ** 2
        mp = m2 - (om @ mv) ** 2
        return fk.psi_coeff * r * r * (lp - mp) * np.exp(1j * r * (om @ mv))

    return _real(-_direct(integrand, fk, grid, l, m, quad), quad.tol, l, m)


# -- approximate Boltzmann modes ---------------------------------------------


def approx_coefficients(fam, quad=None):
    """Drift and diffusion weights of the small-angle approximation.

    ``c_drift = 2 pi int zeta sin^2(theta/2)`` and
    ``c_diff = (2 pi / 16) int zeta sin^2(theta)``; in the grazing limit they
    tend to ``lambda0/2`` and ``lambda0/8``.
    """
    quad = quad or QuadratureSpec()
    cs = fam.at() if isinstance(fam, GrazingFamily) else fam
    vals = []
    for level in (0, 1):
        th, w = _theta_rule(cs, quad.refined(level))
        z = cs.zeta(th) * w
        vals.append(
            (math.pi * float(np.sum(z * one_minus_cos(th))), 2.0 * math.pi / 16.0 * float(np.sum(z * np.sin(th) ** 2)))
        )
    (a0, b0), (a1, b1) = vals
    if max(abs(a1 - a0), abs(b1 - b0)) > quad.tol:
        raise QuadratureNotConvergedError("approximation weights did not converge")
    return a1, b1


def approx_boltzmann_mode(fam, grid, l, m, quad=None):
    """Small-angle approximation of ``B_eps(l, m)`` (remainder dropped).

    ``int dq e^{iq.m} |q|^gamma {c_drift i q.d - c_diff |q|^2 [d_perp]^2}``
    with ``d = l - m``.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    _check_pair(grid, l, m)
    d = np.asarray(l, float) - np.asarray(m, float)
    if not d.any():
        return 0.0
    c1, c2 = approx_coefficients(fam, quad)
    mv = np.asarray(m, float)
    n = _radial_nodes(grid, d, mv)
    a = _radial_mode(c1, c2, fam.gamma, grid, d, mv, n)
    b = _radial_mode(c1, c2, fam.gamma, grid, d, mv, 2 * n)
    if abs(a - b) > quad.tol:
        raise QuadratureNotConvergedError("approximate mode did not converge", pair=(tuple(l), tuple(m)))
    return b


# -- split kernels ------------------------------------------------------------


class SplitVariant(enum.Enum):
    FPL_LIMIT = 0
    APPROX_BOLTZMANN = 1


@dataclass(frozen=True)
class SplitKernel:
    """Mode factors such that, with ``k = l + m``,

    ``B(l, m) = E(m) + sum_j k_j F_j(m) + |k|^2 G(m) + sum_jh k_j k_h I_jh(m)``.

    ``I`` stores the six entries ``j <= h`` in :data:`SYM_PAIRS` order; the
    off-diagonal ones enter the sum twice.  ``E`` is zero for the FPL limit
    and collects the ``m``-weighted terms of the approximate Boltzmann modes.
    Arrays are indexed ``[.., m1 + N, m2 + N, m3 + N]``.
    """

    N: int
    F: np.ndarray
    G: np.ndarray
    I: np.ndarray
    E: np.ndarray
    variant: SplitVariant
    kernel_tag: str
    tol: float = 1e-10
    epsilon: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def variant_code(self):
        return self.variant.value

    def field_stack(self):
        return np.concatenate([self.E[None], self.F, self.G[None], self.I], axis=0)

    @classmethod
    def from_field_stack(cls, N, arr, variant_code, tag, tol):
        return cls(N, arr[1:4].copy(), arr[4].copy(), arr[5:11].copy(), arr[0].copy(), SplitVariant(variant_code), tag, tol)

    def reassemble(self, l, m):
        """Mode values for pairs of lattice vectors (leading axes broadcast)."""
        l = np.asarray(l, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        k = (l + m).astype(float)
        idx = tuple(np.moveaxis(m + self.N, -1, 0))
        out = self.E[idx].copy()
        for j in range(3):
            out = out + k[..., j] * self.F[j][idx]
        out = out + np.sum(k * k, axis=-1) * self.G[idx]
        for s, (j, h) in enumerate(SYM_PAIRS):
            mult = 1.0 if j == h else 2.0
            out = out + mult * k[..., j] * k[..., h] * self.I[s][idx]
        return out


def _radial_fields(gamma, grid, lattice, n, drift, diffusion):
    """Drift vector, scalar and tensor fields on the lattice by radial reduction.

    ``A_j(m) = drift * int i q_j |q|^g e^{iq.m}``,
    ``C(m) = -diffusion * int |q|^(g+2) e^{iq.m}``,
    ``D_jh(m) = diffusion * int |q|^g q_j q_h e^{iq.m}``.
    """
    rho, w = radial_rule(n, 2.0 + gamma, grid.q_max)
    mv = lattice.astype(float)
    mn = np.linalg.norm(mv, axis=1)
    x = mn[:, None] * rho[None, :]
    j0, j1, j1x, j2 = _spherical_moments(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        mhat = np.where(mn[:, None] > 0, mv / mn[:, None], 0.0)
    s1 = 4.0 * math.pi * fixed_dot((j1 * rho), w)  # int |q|^(g+1) j1
    s0 = 4.0 * math.pi * fixed_dot((j0 * rho**2), w)
    sa = 4.0 * math.pi * fixed_dot((j1x * rho**2), w)
    sb = 4.0 * math.pi * fixed_dot((j2 * rho**2), w)
    # i * (i j1 mhat) -> -j1 mhat
    A = drift * (-s1[:, None] * mhat)
    C = -diffusion * s0
    D = np.empty((lattice.shape[0], 6))
    for s, (j, h) in enumerate(SYM_PAIRS):
        D[:, s] = diffusion * ((1.0 if j == h else 0.0) * sa - sb * mhat[:, j] * mhat[:, h])
    return A, C, D


def _cartesian_fields(gamma, grid, lattice, quad, drift, diffusion):
    """Same fields by three-dimensional spherical quadrature (ground truth)."""
    rho, w_rho = radial_rule(quad.n_rho, 2.0 + gamma, grid.q_max)
    omega, w_om = sphere_rule(quad.n_omega, quad.n_sigma_phi)
    mv = lattice.astype(float)
    A = np.zeros((lattice.shape[0], 3), complex)
    C = np.zeros(lattice.shape[0], complex)
    D = np.zeros((lattice.shape[0], 6), complex)
    for r, wr in zip(rho, w_rho):
        e = np.exp(1j * r * fixed_dot(mv, omega.T)) * (wr * w_om)[None, :]
        A += drift * 1j * r * fixed_dot(e, omega)
        C += -diffusion * r * r * e.sum(axis=1)
        for s, (j, h) in enumerate(SYM_PAIRS):
            D[:, s] += diffusion * r * r * fixed_dot(e, omega[:, j] * omega[:, h])
    return A, C, D


def _assemble(N, A, C, D, variant, lattice):
    """Convert fields in ``d = l - m`` (approx) or ``k`` (FPL) to k-multipliers."""
    side = 2 * N + 1
    shape = (side, side, side)
    mv = lattice.astype(float)
    if variant is SplitVariant.FPL_LIMIT:
        F, G, I = A.T, C, D.T
        E = np.zeros(lattice.shape[0], dtype=complex)
    else:
        # d = k - 2m
        Dfull = np.zeros((lattice.shape[0], 3, 3), dtype=D.dtype)
        for s, (j, h) in enumerate(SYM_PAIRS):
            Dfull[:, j, h] = D[:, s]
            Dfull[:, h, j] = D[:, s]
        Dm = np.sum(Dfull * mv[:, None, :], axis=2)
        E = -2.0 * np.sum(mv * A, axis=1) + 4.0 * np.sum(mv * mv, axis=1) * C + 4.0 * np.sum(mv * Dm, axis=1)
        F = (A - 4.0 * mv * C[:, None] - 4.0 * Dm).T
        G, I = C, D.T
    E = np.asarray(E, complex).reshape(shape)
    F = np.asarray(F, complex).reshape((3,) + shape)
    G = np.asarray(G, complex).reshape(shape)
    I = np.asarray(I, complex).reshape((6,) + shape)
    # exact parity in m: F odd, the rest even
    flip = (Ellipsis, slice(None, None, -1), slice(None, None, -1), slice(None, None, -1))
    return 0.5 * (E + E[flip]), 0.5 * (F - F[flip]), 0.5 * (G + G[flip]), 0.5 * (I + I[flip])


def build_split_kernel(source, grid, quad=None, path="radial", check_samples=100, seed=0):
    """Split fields for FPL modes or for the approximate Boltzmann modes.

    ``path="radial"`` uses the 1-D reduction (with node doubling);
    ``path="cartesian"`` uses 3-D quadrature.  The reassembly identity is
    checked on ``check_samples`` random pairs against independently computed
    modes.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    N = grid.N
    lattice = grid.lattice()
    if isinstance(source, FplKernel):
        variant, gamma, eps = SplitVariant.FPL_LIMIT, source.gamma, None
        drift, diffusion = source.lambda0 / 2.0, source.lambda0 / 8.0
        tag = source.tag
    elif isinstance(source, GrazingFamily):
        variant, gamma, eps = SplitVariant.APPROX_BOLTZMANN, source.gamma, source.epsilon
        drift, diffusion = approx_coefficients(source, quad)
        tag = "approx:" + source.at().tag
    else:
        raise TypeError("source must be an FplKernel or a GrazingFamily")
    if variant is SplitVariant.FPL_LIMIT:
        # grazing form carries -lambda0/2 on the drift in k
        drift = -drift
    if path == "radial":
        n = 32 + int(2 * grid.q_max * 2 * math.sqrt(3) * N)
        prev = _radial_fields(gamma, grid, lattice, n, drift, diffusion)
        cur = _radial_fields(gamma, grid, lattice, 2 * n, drift, diffusion)
        err = max(float(np.max(np.abs(a - b))) for a, b in zip(prev, cur))
        if err > quad.tol:
            raise QuadratureNotConvergedError(f"split fields not converged ({err:.3e})")
        A, C, D = cur
    elif path == "cartesian":
        prev = None
        for level in range(quad.max_refinements + 1):
            cur = _cartesian_fields(gamma, grid, lattice, quad.refined(level), drift, diffusion)
            if prev is not None:
                err = max(float(np.max(np.abs(a - b))) for a, b in zip(prev, cur))
                if err <= quad.tol:
                    break
            prev = cur
        else:
            raise QuadratureNotConvergedError("cartesian split fields not converged")
        A, C, D = cur
    else:
        raise ValueError(f"unknown path {path!r}")
    E, F, G, I = _assemble(N, A, C, D, variant, lattice)
    split = SplitKernel(N, F, G, I, E, variant, tag, quad.tol, eps)
    if check_samples and N > 0:
        split.meta["reassembly"] = _check_reassembly(split, source, grid, check_samples, seed)
        if split.meta["reassembly"]["max_abs"] > 100 * quad.tol:
            raise GrazingModesError(f"reassembly check failed: {split.meta['reassembly']}")
    return split


def _check_reassembly(split, source, grid, samples, seed):
    rng = np.random.default_rng(seed)
    pairs = rng.integers(-grid.N, grid.N + 1, size=(samples, 2, 3))
    worst = 0.0
    worst_imag = 0.0
    for l, m in pairs:
        got = split.reassemble(l, m)
        if isinstance(source, FplKernel):
            ref = fpl_mode_radial(source, grid, l, m)
        else:
            ref = approx_boltzmann_mode(source, grid, l, m)
        worst = max(worst, abs(got.real - ref))
        worst_imag = max(worst_imag, abs(got.imag))
    zero = float(np.max(np.abs(split.reassemble(-grid.lattice(), grid.lattice()))))
    return {"max_abs": max(worst, worst_imag), "imag": worst_imag, "k0": zero}


def mode_tensor_from_split(split):
    """Class-compressed :class:`ModeTensor` holding the reassembled modes."""
    signed = split.variant is SplitVariant.APPROX_BOLTZMANN
    _, keys, pairs = enumerate_classes(split.N, signed=signed)
    vals = split.reassemble(pairs[:, 0], pairs[:, 1])
    return ModeTensor(split.N, keys, vals.real, split.kernel_tag, split.tol, signed=signed)
