"""Spectral state, projection, collision evaluators and time stepping.

Coefficient arrays are complex with shape ``(2N+1,)*3`` and are indexed
``c[k1 + N, k2 + N, k3 + N]``; the represented function is
``f(v) = sum_k c_k exp(i k.v)`` on the period ``[-pi, pi)^3``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numba
import numpy as np
from scipy import fft as sfft

from ._quadrature import fixed_dot
from .boltzmann_modes import GridConfig, ModeTensor
from .errors import BlowupError, DimensionMismatchError, DomainError, SupportViolationError
from .grazing_fpl_modes import SYM_PAIRS, SplitKernel

BLOWUP_BOUND = 1e6
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class SpectralState:
    grid: GridConfig
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise DimensionMismatchError(f"coefficients of shape {c.shape} do not match N={self.grid.N}")
        if self.time < 0:
            raise DomainError("time must be nonnegative")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self):
        return self.grid.N

    def with_coeffs(self, coeffs, time=None):
        return replace(self, coeffs=coeffs, time=self.time if time is None else time)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))


@dataclass(frozen=True)
class Moments:
    mass: float
    momentum: np.ndarray
    energy: float


def hermitian_part(c):
    """``(c_k + conj(c_{-k})) / 2``, the coefficients of the real part."""
    return 0.5 * (c + np.conj(c[::-1, ::-1, ::-1]))


def hermitian_defect(c):
    return float(np.max(np.abs(c - np.conj(c[::-1, ::-1, ::-1])), initial=0.0))


def physical_axis(n):
    """Uniform nodes ``-pi + j h``, ``h = 2 pi / n``."""
    return -math.pi + 2.0 * math.pi * np.arange(n) / n


def cell_axis(n):
    """Cell centers ``-pi + (j + 1/2) h``, symmetric under ``v -> -v``."""
    return -math.pi + 2.0 * math.pi * (np.arange(n) + 0.5) / n


def _axis_matrix(N, x):
    # E[j, k + N] = exp(i k x_j)
    k = np.arange(-N, N + 1)
    return np.exp(1j * np.outer(x, k))


def _separable(E, arr):
    """Apply ``E`` along each of the three axes of ``arr``."""
    out = fixed_dot(E, arr)
    out = fixed_dot(E, out.transpose(1, 0, 2)).transpose(1, 0, 2)
    out = fixed_dot(E, out.transpose(2, 0, 1)).transpose(1, 2, 0)
    return out


def default_n_grid(N):
    return max(64, 2 * (2 * N + 1))


def project_initial(f: Callable, grid: GridConfig, n_grid: Optional[int] = None, strict: bool = True):
    """Fourier coefficients of ``f`` by the discrete transform on ``n_grid^3`` nodes.

    ``f`` takes an array of velocities of shape ``(..., 3)``.  Values outside
    the ball of radius ``grid.R`` must vanish; otherwise
    :class:`SupportViolationError` is raised (``strict``) or a warning issued.
    """
    n = n_grid or default_n_grid(grid.N)
    if n < 2 * (2 * grid.N + 1):
        raise DomainError(f"n_grid={n} is below the anti-aliasing minimum {2 * (2 * grid.N + 1)}")
    x = physical_axis(n)
    V = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    vals = np.asarray(f(V), dtype=float)
    if vals.shape != V.shape[:-1]:
        raise DimensionMismatchError("f must map (..., 3) velocities to (...) values")
    outside = np.linalg.norm(V, axis=-1) > grid.R
    leak = float(np.max(np.abs(vals[outside]), initial=0.0))
    if leak > SUPPORT_TOL:
        msg = f"initial datum is {leak:.3e} outside the ball of radius {grid.R:.6f}"
        if strict:
            raise SupportViolationError(msg)
        warnings.warn(msg, stacklevel=2)
    if np.any(vals < 0):
        warnings.warn("initial datum has negative values", stacklevel=2)
    E = np.conj(_axis_matrix(grid.N, x)).T
    c = _separable(E, vals.astype(complex)) / n**3
    return SpectralState(grid, hermitian_part(c))


def reconstruct(state: SpectralState, n_grid: Optional[int] = None):
    """Real values of ``f_N`` on the ``n_grid^3`` cell-centered grid."""
    n = n_grid or default_n_grid(state.N)
    return _separable(_axis_matrix(state.N, cell_axis(n)), state.coeffs).real


def moments(state: SpectralState, n_grid: Optional[int] = None) -> Moments:
    n = n_grid or default_n_grid(state.N)
    f = reconstruct(state, n)
    x = cell_axis(n)
    h3 = (2.0 * math.pi / n) ** 3
    mass = float(f.sum() * h3)
    sx, sy, sz = f.sum(axis=(1, 2)), f.sum(axis=(0, 2)), f.sum(axis=(0, 1))
    fx, fy, fz = (float(np.sum(s * x)) for s in (sx, sy, sz))
    x2 = x * x
    e = float(np.sum(sx * x2) + np.sum(sy * x2) + np.sum(sz * x2))
    return Moments(mass, np.array([fx, fy, fz]) * h3, float(0.5 * e * h3))


def matched_maxwellian(mom: Moments):
    """``(rho, u, T)`` of the Maxwellian with the given moments."""
    rho = mom.mass
    if not rho > 0:
        raise DomainError("matched Maxwellian needs positive mass")
    u = mom.momentum / rho
    T = (2.0 * mom.energy / rho - float(u @ u)) / 3.0
    if not T > 0:
        raise DomainError("matched Maxwellian needs positive temperature")
    return rho, u, T


def maxwellian(v, rho, u, T):
    d2 = np.sum((np.asarray(v) - u) ** 2, axis=-1)
    return rho * (2.0 * math.pi * T) ** -1.5 * np.exp(-d2 / (2.0 * T))


def l2_distance_to(state: SpectralState, params, n_grid: Optional[int] = None):
    n = n_grid or default_n_grid(state.N)
    x = cell_axis(n)
    V = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    diff = reconstruct(state, n) - maxwellian(V, *params)
    return float(math.sqrt(np.sum(diff * diff) * (2.0 * math.pi / n) ** 3))


def l2_norm(coeffs):
    """``L^2([-pi, pi]^3)`` norm of a trigonometric polynomial (Parseval)."""
    return float(math.sqrt((2.0 * math.pi) ** 3 * np.sum(np.abs(coeffs) ** 2)))


# -- evaluators -----------------------------------------------------------------


@numba.njit(cache=True)
def _lookup(codes, values, l1, l2, l3, m1, m2, m3, N, signed):
    s1, s2, s3 = l1 + m1, l2 + m2, l3 + m3
    d1, d2, d3 = l1 - m1, l2 - m2, l3 - m3
    kp = s1 * s1 + s2 * s2 + s3 * s3
    km = d1 * d1 + d2 * d2 + d3 * d3
    dot = l1 * l1 + l2 * l2 + l3 * l3 - m1 * m1 - m2 * m2 - m3 * m3
    if not signed and km < kp:
        kp, km = km, kp
    code = (kp * (12 * N * N + 1) + km) * (6 * N * N + 1) + dot + 3 * N * N
    lo, hi = 0, codes.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if codes[mid] < code:
            lo = mid + 1
        else:
            hi = mid
    if codes[lo] != code:
        return np.nan
    return values[lo]


@numba.njit(cache=True)
def _direct_tensor(c, codes, values, N, signed):
    n = 2 * N + 1
    out = np.zeros((n, n, n), dtype=np.complex128)
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            for k3 in range(-N, N + 1):
                acc = 0j
                for m1 in range(max(-N, k1 - N), min(N, k1 + N) + 1):
                    for m2 in range(max(-N, k2 - N), min(N, k2 + N) + 1):
                        for m3 in range(max(-N, k3 - N), min(N, k3 + N) + 1):
                            l1, l2, l3 = k1 - m1, k2 - m2, k3 - m3
                            b = _lookup(codes, values, l1, l2, l3, m1, m2, m3, N, signed)
                            acc += c[l1 + N, l2 + N, l3 + N] * c[m1 + N, m2 + N, m3 + N] * b
                out[k1 + N, k2 + N, k3 + N] = acc
    return out


@numba.njit(cache=True)
def _direct_split(c, fields, N, absolute):
    # fields: E, F0, F1, F2, G, I00, I01, I02, I11, I12, I22 on the m lattice
    n = 2 * N + 1
    out = np.zeros((n, n, n), dtype=np.complex128)
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            for k3 in range(-N, N + 1):
                acc = 0j
                kk = float(k1 * k1 + k2 * k2 + k3 * k3)
                for m1 in range(max(-N, k1 - N), min(N, k1 + N) + 1):
                    for m2 in range(max(-N, k2 - N), min(N, k2 + N) + 1):
                        for m3 in range(max(-N, k3 - N), min(N, k3 + N) + 1):
                            a, b, e = m1 + N, m2 + N, m3 + N
                            B = (
                                fields[0, a, b, e]
                                + k1 * fields[1, a, b, e]
                                + k2 * fields[2, a, b, e]
                                + k3 * fields[3, a, b, e]
                                + kk * fields[4, a, b, e]
                                + k1 * k1 * fields[5, a, b, e]
                                + 2.0 * k1 * k2 * fields[6, a, b, e]
                                + 2.0 * k1 * k3 * fields[7, a, b, e]
                                + k2 * k2 * fields[8, a, b, e]
                                + 2.0 * k2 * k3 * fields[9, a, b, e]
                                + k3 * k3 * fields[10, a, b, e]
                            )
                            fl = c[k1 - m1 + N, k2 - m2 + N, k3 - m3 + N]
                            if absolute:
                                acc += abs(B)
                            else:
                                acc += fl * c[a, b, e] * B
                out[k1 + N, k2 + N, k3 + N] = acc
    return out


@numba.njit(cache=True)
def _abs_tensor_rows(codes, values, N, signed):
    n = 2 * N + 1
    out = np.zeros((n, n, n))
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            for k3 in range(-N, N + 1):
                acc = 0.0
                for m1 in range(max(-N, k1 - N), min(N, k1 + N) + 1):
                    for m2 in range(max(-N, k2 - N), min(N, k2 + N) + 1):
                        for m3 in range(max(-N, k3 - N), min(N, k3 + N) + 1):
                            acc += abs(_lookup(codes, values, k1 - m1, k2 - m2, k3 - m3, m1, m2, m3, N, signed))
                out[k1 + N, k2 + N, k3 + N] = acc
    return out


def _check_dims(state, kernel):
    if kernel.N != state.N:
        raise DimensionMismatchError(f"kernel N={kernel.N} does not match state N={state.N}")


def collision_direct(state: SpectralState, modes) -> np.ndarray:
    """``Q_k = sum_{l+m=k} c_l c_m B(l, m)`` by direct summation, O(N^6).

    ``modes`` is a :class:`ModeTensor` or a :class:`SplitKernel` (reassembled
    on the fly).
    """
    _check_dims(state, modes)
    N = state.N
    if isinstance(modes, SplitKernel):
        return _direct_split(state.coeffs, modes.field_stack(), N, False)
    if isinstance(modes, ModeTensor):
        out = _direct_tensor(state.coeffs, modes.codes, modes.values, N, modes.signed)
        if np.isnan(out).any():
            raise DimensionMismatchError("mode tensor is missing symmetry classes")
        return out
    raise TypeError("modes must be a ModeTensor or a SplitKernel")


def _k_axes(N):
    k = np.arange(-N, N + 1, dtype=float)
    return np.meshgrid(k, k, k, indexing="ij")


def padded_size(N):
    return sfft.next_fast_len(4 * N + 2)


def collision_fast(state: SpectralState, split: SplitKernel) -> np.ndarray:
    """Split evaluation through zero-padded FFT convolutions, O(N^3 log N)."""
    if not isinstance(split, SplitKernel):
        raise TypeError("collision_fast needs a SplitKernel")
    _check_dims(state, split)
    N = state.N
    side = 2 * N + 1
    L = padded_size(N)
    shape = (L, L, L)
    c = state.coeffs
    fc = sfft.fftn(c, shape)
    k = _k_axes(N)
    kk = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    # output index k + 2N in the linear convolution of two arrays offset by N
    sl = (slice(N, N + side),) * 3

    def conv(field):
        return sfft.ifftn(fc * sfft.fftn(c * field, shape))[sl]

    out = np.zeros(split.G.shape, dtype=complex)
    if np.any(split.E):
        out += conv(split.E)
    for j in range(3):
        out += k[j] * conv(split.F[j])
    out += kk * conv(split.G)
    for s, (j, h) in enumerate(SYM_PAIRS):
        out += (1.0 if j == h else 2.0) * k[j] * k[h] * conv(split.I[s])
    return out


def evaluate(state, kernel, evaluator="fast"):
    if evaluator == "fast":
        return collision_fast(state, kernel)
    if evaluator == "direct":
        return collision_direct(state, kernel)
    raise ValueError(f"unknown evaluator {evaluator!r}")


def suggest_dt(state: SpectralState, kernel, factor: float = 0.1, method: str = "row_sum", evaluator="fast") -> float:
    """Explicit step size from a growth-rate estimate at the current state.

    ``row_sum``: ``factor / (max_k sum_m |B(k-m, m)| * ||c||_1)``, a strict
    but very pessimistic bound.  ``spectral``: ``factor`` over the spectral
    radius of the linearized operator, estimated by power iteration.
    """
    _check_dims(state, kernel)
    if method == "spectral":
        rate = linearized_radius(state, kernel, evaluator)
        return factor / rate if rate > 0 else math.inf
    if method != "row_sum":
        raise ValueError(f"unknown method {method!r}")
    N = state.N
    if isinstance(kernel, SplitKernel):
        rows = _direct_split(state.coeffs, kernel.field_stack(), N, True).real
    else:
        rows = _abs_tensor_rows(kernel.codes, kernel.values, N, kernel.signed)
    rate = float(rows.max()) * float(np.abs(state.coeffs).sum())
    return factor / rate if rate > 0 else math.inf


def linearized_radius(state: SpectralState, kernel, evaluator="fast", iters=60, seed=0):
    """Power-iteration estimate of the spectral radius of ``d -> Q(c,d) + Q(d,c)``.

    For a quadratic ``Q`` the derivative is exact as
    ``(Q(c + d, c + d) - Q(c - d, c - d)) / 2``.
    """
    rng = np.random.default_rng(seed)
    c = state.coeffs
    d = hermitian_part(rng.standard_normal(c.shape) + 1j * rng.standard_normal(c.shape))
    d /= np.linalg.norm(d)
    est = 0.0
    for _ in range(iters):
        jd = 0.5 * (evaluate(state.with_coeffs(c + d), kernel, evaluator) - evaluate(state.with_coeffs(c - d), kernel, evaluator))
        nrm = float(np.linalg.norm(jd))
        if nrm == 0.0:
            return 0.0
        if abs(nrm - est) <= 1e-3 * nrm:
            return nrm
        est = nrm
        d = jd / nrm
    return est


def step(state: SpectralState, kernel, dt: float, evaluator: str = "fast", bound: float = BLOWUP_BOUND):
    """One classical RK4 step, then Hermitian symmetrization."""
    if not dt > 0:
        raise DomainError("dt must be positive")

    def rhs(c):
        return evaluate(state.with_coeffs(c), kernel, evaluator)

    c = state.coeffs
    k1 = rhs(c)
    k2 = rhs(c + 0.5 * dt * k1)
    k3 = rhs(c + 0.5 * dt * k2)
    k4 = rhs(c + dt * k3)
    new = hermitian_part(c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    t = state.time + dt
    peak = float(np.max(np.abs(new)))
    if not np.isfinite(peak) or peak > bound:
        raise BlowupError(f"coefficient magnitude {peak:.3e} exceeds {bound:.1e} at t={t:.6g}", time=t)
    return state.with_coeffs(new, t)


def integrate(state, kernel, t_end, dt, evaluator="fast", callback=None):
    """Step to ``t_end`` with steps of at most ``dt``; ``callback(state)`` after each."""
    n = int(math.ceil((t_end - state.time) / dt - 1e-12)) if t_end > state.time else 0
    if n == 0:
        return state
    h = (t_end - state.time) / n
    for _ in range(n):
        state = step(state, kernel, h, evaluator)
        if callback is not None:
            callback(state)
    return state


# -- CSV export -------------------------------------------------------------------


def coefficient_rows(state: SpectralState):
    N = state.N
    for idx in np.ndindex(*state.grid.shape):
        v = state.coeffs[idx]
        yield (idx[0] - N, idx[1] - N, idx[2] - N, repr(float(v.real)), repr(float(v.imag)))


def physical_rows(state: SpectralState, n_grid: Optional[int] = None):
    n = n_grid or default_n_grid(state.N)
    f = reconstruct(state, n)
    x = cell_axis(n)
    for idx in np.ndindex(*f.shape):
        yield (repr(float(x[idx[0]])), repr(float(x[idx[1]])), repr(float(x[idx[2]])), repr(float(f[idx])))


def _open_csv(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def export_coefficients(state, path, preamble=()):
    with _open_csv(path) as fh:
        w = csv.writer(fh)
        for row in preamble:
            w.writerow(row)
        w.writerow(["k1", "k2", "k3", "re", "im"])
        w.writerows(coefficient_rows(state))


def export_physical(state, path, n_grid=None, preamble=()):
    with _open_csv(path) as fh:
        w = csv.writer(fh)
        for row in preamble:
            w.writerow(row)
        w.writerow(["v1", "v2", "v3", "f"])
        w.writerows(physical_rows(state, n_grid))
