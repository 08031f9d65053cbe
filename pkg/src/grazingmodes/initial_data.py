"""Built-in initial data supported in the ball of radius ``R``."""

from __future__ import annotations

import numpy as np

from .spectral_core import maxwellian


def _smooth_step(x):
    # C-infinity step: 0 for x <= 0, 1 for x >= 1
    x = np.clip(x, 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    return a / (a + b)


def cutoff(v, R, taper=0.3):
    """Radial cutoff vanishing for ``|v| >= R``.

    ``taper=None`` gives the indicator of the open ball; otherwise a smooth
    transition over the outer fraction ``taper`` of the radius.
    """
    r = np.linalg.norm(v, axis=-1)
    if taper is None:
        return (r < R).astype(float)
    r0 = (1.0 - taper) * R
    return 1.0 - _smooth_step((r - r0) / (R - r0))


def truncated_maxwellian(R, rho=1.0, u=(0.0, 0.0, 0.0), T=0.03, taper=0.3):
    u = np.asarray(u, dtype=float)

    def f(v):
        return maxwellian(v, rho, u, T) * cutoff(v, R, taper)

    return f


def sum_of_two_maxwellians(R, rho=1.0, shift=0.45, T=0.03, taper=0.3):
    """Equal-weight Maxwellians centered at ``+-shift e1``."""
    u = np.array([shift, 0.0, 0.0])

    def f(v):
        return 0.5 * (maxwellian(v, rho, u, T) + maxwellian(v, rho, -u, T)) * cutoff(v, R, taper)

    return f


def smooth_bump(R, height=1.0, width=None):
    """``height * exp(1 - 1/(1 - |v|^2/w^2))`` inside ``|v| < w``."""
    w = 0.9 * R if width is None else float(width)
    if w > R:
        raise ValueError("bump width exceeds the support radius")

    def f(v):
        s = np.sum(np.asarray(v) ** 2, axis=-1) / (w * w)
        inside = s < 1.0
        out = np.zeros(s.shape)
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    return f


BUILTINS = {
    "truncated_maxwellian": truncated_maxwellian,
    "sum_of_two_maxwellians": sum_of_two_maxwellians,
    "smooth_bump": smooth_bump,
}


def make_initial(name, R, **params):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown initial condition {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(R, **params)

