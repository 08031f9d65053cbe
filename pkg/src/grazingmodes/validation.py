"""Argument checks shared by the estimator and the command line."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionMismatchError, DomainError


def check_lattice_size(N):
    if isinstance(N, bool) or int(N) != N or N < 0:
        raise DomainError(f"N must be a nonnegative integer, got {N!r}")
    return int(N)


def check_coefficients(X, N, hermitian_tol=None):
    """Coerce ``X`` to complex coefficient arrays of shape ``(n, 2N+1, 2N+1, 2N+1)``.

    Accepts a single cube, a batch of cubes, or flattened rows of length
    ``(2N+1)**3``.  With ``hermitian_tol`` set, every sample must satisfy
    ``c_{-k} = conj(c_k)`` to that tolerance (relative to its max modulus).
    """
    side = 2 * N + 1
    X = np.asarray(X, dtype=complex)
    if X.shape == (side,) * 3:
        X = X[None]
    elif X.ndim == 2 and X.shape[1] == side**3:
        X = X.reshape(-1, side, side, side)
    elif X.ndim != 4 or X.shape[1:] != (side,) * 3:
        raise DimensionMismatchError(f"expected coefficients for N={N}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("coefficients must be finite")
    if hermitian_tol is not None:
        for i, c in enumerate(X):
            scale = max(float(np.abs(c).max()), 1e-300)
            defect = float(np.abs(c - np.conj(c[::-1, ::-1, ::-1])).max())
            if defect > hermitian_tol * scale:
                raise DomainError(f"sample {i} is not Hermitian (defect {defect:.3e})")
    return X


def check_epsilons(eps):
    eps = [float(e) for e in eps]
    if not eps:
        raise ConfigError("empty epsilon list")
    if any(not 0 < e <= 1 for e in eps):
        raise ConfigError("epsilon values must lie in (0, 1]")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"epsilon list must be strictly decreasing, got {eps}")
    return eps


def check_evaluator(name, allow_both=False):
    allowed = ("direct", "fast", "both") if allow_both else ("direct", "fast")
    if name not in allowed:
        raise ConfigError(f"evaluator must be one of {allowed}, got {name!r}")
    return name
