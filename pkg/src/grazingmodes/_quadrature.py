"""Quadrature rules and numerically careful integrand helpers."""

from functools import lru_cache

import numba
import numpy as np
from scipy.special import j0, roots_jacobi, roots_legendre


@lru_cache(maxsize=128)
def _legendre(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a, b):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


@lru_cache(maxsize=128)
def _jacobi(n, beta):
    x, w = roots_jacobi(n, 0.0, beta)
    return x, w


def radial_rule(n, beta, rmax):
    """Gauss-Jacobi rule for ``int_0^rmax r**beta f(r) dr`` (weight folded in).

    Returns nodes ``r`` and weights ``w`` with ``sum(w * f(r))`` approximating
    the weighted integral; ``beta > -1``.
    """
    if beta <= -1.0:
        raise ValueError(f"radial weight exponent must exceed -1, got {beta}")
    x, w = _jacobi(int(n), float(beta))
    half = 0.5 * rmax
    r = half * (x + 1.0)
    return r, w * half ** (beta + 1.0)


def sphere_rule(n_cos, n_phi):
    """Product rule on the unit sphere: Gauss in cos(theta), trapezoid in phi.

    Returns unit vectors of shape ``(n_cos * n_phi, 3)`` and weights summing
    to ``4 pi``.
    """
    c, wc = gauss_legendre(n_cos, -1.0, 1.0)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - c**2)
    pts = np.stack(
        [
            (s[:, None] * np.cos(phi)[None, :]).ravel(),
            (s[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(c, n_phi),
        ],
        axis=1,
    )
    wts = np.repeat(wc, n_phi) * (2.0 * np.pi / n_phi)
    return pts, wts


def graded_breakpoints(lo, hi, *, depth, ratio=0.5, max_width=0.25, outer_fraction=0.25):
    """Panel breakpoints on ``[lo, hi]`` refined geometrically toward ``lo``.

    The outer part ``[hi * outer_fraction, hi]`` is cut into panels no wider
    than ``max_width``; below it the breakpoints shrink by ``ratio`` per panel
    until ``depth`` levels are used or ``lo`` is reached.  When ``lo > 0`` the
    grading runs relative to ``lo`` instead, which resolves a kernel that is
    large just above a cut-off.
    """
    if not hi > lo:
        raise ValueError("empty integration interval")
    pts = {lo, hi}
    start = lo + (hi - lo) * outer_fraction
    n_outer = max(1, int(np.ceil((hi - start) / max_width)))
    pts.update(np.linspace(start, hi, n_outer + 1).tolist())
    if lo > 0.0:
        # geometric from lo upward: lo * 2**j
        x = lo / ratio
        while x < start:
            pts.add(x)
            x /= ratio
    else:
        x = start
        for _ in range(depth):
            x *= ratio
            pts.add(x)
    return np.array(sorted(pts))


def composite_rule(breaks, n_outer, n_inner=None, wide=0.05):
    """Composite Gauss-Legendre rule over consecutive breakpoints.

    Panels wider than ``wide`` get ``n_outer`` nodes, narrower (graded)
    panels get ``n_inner``.
    """
    n_inner = n_outer if n_inner is None else n_inner
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = n_outer if (b - a) > wide else n_inner
        x, w = gauss_legendre(n, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def one_minus_cos(x):
    """``1 - cos(x)`` without cancellation for small ``x``."""
    return 2.0 * np.sin(0.5 * x) ** 2


def expi_minus_one(phase):
    """``exp(i phase) - 1`` accurate for tiny phases."""
    return -2.0 * np.sin(0.5 * phase) ** 2 + 1j * np.sin(phase)


def j0_minus_one(x):
    """``J0(x) - 1`` accurate for tiny arguments."""
    x = np.asarray(x, dtype=float)
    y = -0.25 * x * x
    # sum_{n>=1} y^n / (n!)^2, Horner form; 12 terms reach 1e-17 at |x| = 1
    series = np.zeros_like(y)
    for n in range(12, 0, -1):
        series = y / (n * n) * (1.0 + series)
    return np.where(np.abs(x) < 1.0, series, j0(x) - 1.0)


def plane_wave_bracket(phase, arg):
    """``exp(i phase) J0(arg) - 1`` without cancellation."""
    return expi_minus_one(phase) * j0(arg) + j0_minus_one(arg)


@numba.njit(cache=True)
def _fixed_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.complex128)
    for i in range(a.shape[0]):
        for k in range(a.shape[1]):
            x = a[i, k]
            for j in range(b.shape[1]):
                out[i, j] += x * b[k, j]
    return out


def fixed_dot(a, b):
    """Contract the last axis of ``a`` with the first axis of ``b``.

    A plain loop with a fixed summation order; BLAS kernels may reorder sums
    depending on memory alignment, which breaks bit-for-bit reproducibility.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    real = not (np.iscomplexobj(a) or np.iscomplexobj(b))
    a2 = np.ascontiguousarray(a.reshape(-1, a.shape[-1]), dtype=np.complex128)
    b2 = np.ascontiguousarray(b.reshape(b.shape[0], -1), dtype=np.complex128)
    out = _fixed_matmul(a2, b2).reshape(a.shape[:-1] + b.shape[1:])
    return out.real.copy() if real else out
