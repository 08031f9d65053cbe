"""Collision kernels, grazing families and the momentum-transfer functional.

A kernel is written ``B(q, theta) = |q|**gamma * b(cos theta)`` and handled
through the angular density ``zeta(theta) = b(cos theta) sin(theta)``, which
already carries the spherical Jacobian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._quadrature import gauss_legendre, one_minus_cos
from .errors import DomainError, NonIntegrableError

HALF_PI = 0.5 * math.pi

#: Default absolute tolerance for angular quadrature.
DEFAULT_TOL = 1e-10

#: Reference epsilon at which built-in families estimate their limit constant.
LAMBDA0_REFERENCE_EPS = 1e-5


@dataclass(frozen=True)
class CrossSection:
    """Collision kernel ``|q|**gamma * b(cos theta)``.

    Parameters
    ----------
    gamma : float
        Radial exponent, in ``[-3, 1]``.
    angular_density : callable
        Vectorized ``theta -> zeta(theta)`` on ``(0, theta_max]``.
    singularity_order : float, optional
        ``nu`` such that ``zeta ~ theta**-(1 + nu)`` at 0; ``None`` for a
        density that is bounded near 0.
    s_force : float, optional
        Inverse-power force exponent the kernel was derived from.
    theta_max : float
        Upper end of the deflection-angle range; ``pi/2`` for symmetrized
        kernels, ``pi`` for kernels integrated over the full sphere.
    support : (float, float), optional
        Interval outside which ``zeta`` is known to vanish.
    name : str
        Stable identifier used in cache headers and CSV provenance.
    """

    gamma: float
    angular_density: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    singularity_order: Optional[float] = None
    s_force: Optional[float] = None
    theta_max: float = HALF_PI
    support: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if not -3.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [-3, 1], got {self.gamma}")
        if self.singularity_order is not None and self.singularity_order <= 0:
            raise DomainError("singularity_order must be positive")
        if not 0.0 < self.theta_max <= math.pi:
            raise DomainError("theta_max must lie in (0, pi]")
        if self.s_force is not None:
            s = self.s_force
            if s <= 1:
                raise DomainError("inverse-power exponent s must exceed 1")
            if self.gamma != (s - 5.0) / (s - 1.0) or self.singularity_order != 2.0 / (s + 1.0):
                raise DomainError("gamma and nu do not match the inverse-power formulas")
        if self.support is None:
            object.__setattr__(self, "support", (0.0, self.theta_max))

    # -- constructors -------------------------------------------------------

    @classmethod
    def cutoff(cls, gamma=0.0, b0=1.0):
        """Angle-independent ``b = b0`` on the half sphere (a cut-off kernel)."""
        return cls(gamma, lambda th: b0 * np.sin(th), name=f"cutoff(gamma={gamma!r},b0={b0!r})")

    @classmethod
    def vhs(cls, alpha, c_alpha=1.0):
        """Variable hard spheres ``C_alpha |q|**alpha`` over the full sphere."""
        return cls(
            alpha,
            lambda th: c_alpha * np.sin(th),
            theta_max=math.pi,
            name=f"vhs(alpha={alpha!r},c={c_alpha!r})",
        )

    @classmethod
    def power_law(cls, gamma, nu, coeff=1.0, theta_max=HALF_PI):
        """Pure power singularity ``zeta = coeff * theta**-(1 + nu)``."""
        return cls(
            gamma,
            lambda th: coeff * np.power(th, -(1.0 + nu)),
            singularity_order=nu,
            theta_max=theta_max,
            name=f"power(gamma={gamma!r},nu={nu!r},c={coeff!r})",
        )

    @classmethod
    def inverse_power(cls, s, coeff=1.0):
        """Kernel of an inverse ``s``-power force with a pure power density."""
        gamma = (s - 5.0) / (s - 1.0)
        nu = 2.0 / (s + 1.0)
        return cls(
            gamma,
            lambda th: coeff * np.power(th, -(1.0 + nu)),
            singularity_order=nu,
            s_force=s,
            name=f"inverse_power(s={s!r},c={coeff!r})",
        )

    # -----------------------------------------------------------------------

    def zeta(self, theta):
        """Evaluate the angular density, zero outside ``support``."""
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.support
        inside = (theta >= lo) & (theta <= hi) & (theta > 0)
        safe = np.where(inside, theta, hi)
        return np.where(inside, self.angular_density(safe), 0.0)

    @property
    def tag(self):
        return f"{self.name};support={self.support[0]!r},{self.support[1]!r}"


class FamilyKind(enum.Enum):
    LOG_CUTOFF = "log_cutoff"
    RESCALED = "rescaled"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GrazingFamily:
    """One-parameter family ``zeta_eps`` concentrating on grazing collisions.

    ``lambda0`` defaults to the momentum-transfer constant at
    ``LAMBDA0_REFERENCE_EPS``.  For ``CUSTOM`` families ``custom`` is a
    vectorized callable ``(theta, eps) -> zeta_eps(theta)``.
    """

    base: CrossSection
    family_kind: FamilyKind
    epsilon: float
    lambda0: Optional[float] = None
    custom: Optional[Callable] = field(default=None, compare=False)
    custom_support: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        kind = FamilyKind(self.family_kind)
        object.__setattr__(self, "family_kind", kind)
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if kind is FamilyKind.LOG_CUTOFF and not self.epsilon < 1:
            raise DomainError("LOG_CUTOFF requires epsilon < 1")
        if kind is FamilyKind.RESCALED and self.epsilon > 1:
            raise DomainError("RESCALED requires epsilon <= 1")
        if kind is FamilyKind.CUSTOM and self.custom is None:
            raise DomainError("CUSTOM families need a callable")
        if self.lambda0 is None:
            ref = replace(self, epsilon=min(LAMBDA0_REFERENCE_EPS, self.epsilon), lambda0=1.0)
            object.__setattr__(self, "lambda0", momentum_transfer_constant(ref.at()))
        if not self.lambda0 > 0:
            raise DomainError("lambda0 must be positive")

    @property
    def gamma(self):
        return self.base.gamma

    def with_epsilon(self, eps):
        return replace(self, epsilon=eps)

    def support(self, eps=None):
        eps = self.epsilon if eps is None else eps
        kind = self.family_kind
        if kind is FamilyKind.LOG_CUTOFF:
            return (max(eps, self.base.support[0]), self.base.support[1])
        if kind is FamilyKind.RESCALED:
            return (0.0, min(eps * self.base.support[1], self.base.theta_max))
        if self.custom_support is not None:
            return tuple(self.custom_support(eps))
        return (0.0, self.base.theta_max)

    def at(self, eps=None):
        """The member of the family at ``eps`` as a plain :class:`CrossSection`."""
        eps = self.epsilon if eps is None else eps
        fam = self

        def density(theta):
            return _zeta_eps(fam, theta, eps)

        nu = self.base.singularity_order
        if nu is not None and self.family_kind is FamilyKind.RESCALED:
            # zeta_eps ~ zeta(x) x^2 / theta^3 near 0
            nu = nu + 1.0
        return CrossSection(
            self.base.gamma,
            density,
            singularity_order=nu,
            theta_max=self.base.theta_max,
            support=self.support(eps),
            name=f"{self.family_kind.value}[{self.base.name}](eps={eps!r})",
        )


def _zeta_eps(fam, theta, eps):
    theta = np.asarray(theta, dtype=float)
    base = fam.base
    if fam.family_kind is FamilyKind.LOG_CUTOFF:
        return np.where(theta >= eps, base.zeta(theta), 0.0) / math.log(1.0 / eps)
    if fam.family_kind is FamilyKind.RESCALED:
        x = theta / eps
        inside = x <= base.support[1]
        xs = np.where(inside, x, base.support[1])
        val = np.sin(0.5 * xs) ** 2 * base.zeta(xs) / (theta * np.sin(0.5 * theta) ** 2)
        return np.where(inside, val, 0.0)
    return np.asarray(fam.custom(theta, eps), dtype=float)


def eval_zeta_eps(fam, theta):
    """``zeta_eps(theta)`` for the family at its current epsilon."""
    th = np.asarray(theta, dtype=float)
    if np.any(~(th > 0)) or np.any(th > fam.base.theta_max):
        raise DomainError(f"theta must lie in (0, {fam.base.theta_max}]")
    out = _zeta_eps(fam, th, fam.epsilon)
    return float(out) if out.ndim == 0 else out


def _as_cross_section(cs):
    return cs.at() if isinstance(cs, GrazingFamily) else cs


def momentum_transfer_constant(cs, tol=DEFAULT_TOL, nodes=20, max_depth=400):
    """``Lambda = 2 pi int zeta(theta) (1 - cos theta) dtheta``.

    Uses composite Gauss-Legendre panels halved toward the lower end of the
    support until a panel contributes less than ``tol`` times the running
    total.  Raises :class:`NonIntegrableError` if that never happens.
    """
    cs = _as_cross_section(cs)
    lo, hi = cs.support
    if hi <= lo:
        return 0.0

    def panel(a, b):
        x, w = gauss_legendre(nodes, a, b)
        return float(np.sum(w * cs.zeta(x) * one_minus_cos(x)))

    total = 0.0
    start = lo + 0.25 * (hi - lo)
    n_outer = max(1, int(math.ceil((hi - start) / 0.25)))
    edges = np.linspace(start, hi, n_outer + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        total += panel(a, b)
    if lo > 0.0:
        a = lo
        while a < start:
            b = min(2.0 * a, start)
            total += panel(a, b)
            a = b
    else:
        b = start
        quiet = 0
        prev = None
        r_prev = None
        for _ in range(max_depth):
            a = 0.5 * b
            c = panel(a, b)
            total += c
            b = a
            if c == 0.0:
                break
            # deep panels of a power-law integrand shrink by a fixed ratio,
            # so the remainder is a geometric series
            r = abs(c / prev) if prev else None
            prev = c
            if r is not None and r < 1.0:
                tail = c * r / (1.0 - r)
                small = abs(tail) <= tol * max(abs(total), 1.0)
                steady = r_prev is not None and abs(r - r_prev) <= 1e-9 * r
                quiet = quiet + 1 if (small or steady) else 0
                if quiet >= 3:
                    total += tail
                    break
            r_prev = r
        else:
            raise NonIntegrableError(
                f"momentum transfer of {cs.name} did not converge (panel contributions do not decay)"
            )
    if not math.isfinite(total):
        raise NonIntegrableError(f"momentum transfer of {cs.name} is not finite")
    return 2.0 * math.pi * total


def momentum_transfer(cs, q_norm, tol=DEFAULT_TOL):
    """``A(q) = |q|**gamma * Lambda`` for a kernel or a family member."""
    if q_norm < 0:
        raise DomainError("q_norm must be nonnegative")
    cs = _as_cross_section(cs)
    lam = momentum_transfer_constant(cs, tol=tol)
    if q_norm == 0:
        return 0.0 if cs.gamma > 0 else (lam if cs.gamma == 0 else math.inf)
    return q_norm**cs.gamma * lam


@dataclass
class GrazingRow:
    epsilon: float
    lambda_eps: float
    sup_b: float


@dataclass
class GrazingReport:
    rows: list
    cauchy_ok: bool
    sup_monotone: bool
    sup_small: bool

    @property
    def passed(self):
        return self.cauchy_ok and self.sup_monotone and self.sup_small


def validate_grazing_family(fam, epsilons, theta1, tol, n_grid=2001):
    """Check the two grazing-concentration conditions along ``epsilons``.

    For each epsilon the report holds the momentum-transfer constant and the
    supremum of ``b_eps = zeta_eps / sin`` over a grid on ``[theta1,
    theta_max]``.
    """
    eps = [float(e) for e in epsilons]
    if any(b > a for a, b in zip(eps[:-1], eps[1:])):
        raise DomainError("epsilons must be decreasing")
    if not 0 < theta1 < HALF_PI:
        raise DomainError("theta1 must lie in (0, pi/2)")
    grid = np.linspace(theta1, fam.base.theta_max, n_grid)
    grid = grid[np.sin(grid) > 0]
    rows = []
    for e in eps:
        member = fam.with_epsilon(e)
        lam = momentum_transfer_constant(member.at())
        sup = float(np.max(np.abs(eval_zeta_eps(member, grid) / np.sin(grid))))
        rows.append(GrazingRow(e, lam, sup))
    lams = [r.lambda_eps for r in rows]
    cauchy = len(lams) < 2 or abs(lams[-1] - lams[-2]) <= tol * max(1.0, abs(lams[-1]))
    sups = [r.sup_b for r in rows]
    monotone = all(b <= a for a, b in zip(sups[:-1], sups[1:]))
    return GrazingReport(rows, cauchy, monotone, sups[-1] < tol)


def parse_kernel_spec(spec):
    """Build a kernel or family from ``key=value`` settings.

    Recognized keys: ``kind`` (cutoff, vhs, power, inverse_power, log_cutoff,
    rescaled, fpl), ``gamma``, ``nu``, ``s``, ``epsilon``, ``lambda0``, ``c``.
    ``kind=fpl`` returns a :class:`~grazingmodes.grazing_fpl_modes.FplKernel`.
    """
    from .grazing_fpl_modes import FplKernel

    kind = str(spec.get("kind", "cutoff")).lower()
    gamma = float(spec.get("gamma", 0.0))
    coeff = float(spec.get("c", 1.0))
    if kind == "cutoff":
        return CrossSection.cutoff(gamma, coeff)
    if kind == "vhs":
        return CrossSection.vhs(gamma, coeff)
    if kind == "fpl":
        return FplKernel(gamma, float(spec.get("lambda0", 1.0)))
    s_val = spec.get("s")
    if s_val not in (None, ""):
        s_val = float(s_val)
        if kind == "log_cutoff":
            base = CrossSection.power_law((s_val - 5.0) / (s_val - 1.0), 2.0, coeff)
        else:
            base = CrossSection.inverse_power(s_val, coeff)
    else:
        nu = float(spec.get("nu", 2.0 if kind == "log_cutoff" else 0.5))
        base = CrossSection.power_law(gamma, nu, coeff)
    if kind in ("power", "inverse_power"):
        return base
    lam0 = spec.get("lambda0")
    lam0 = float(lam0) if lam0 not in (None, "") else None
    eps = float(spec.get("epsilon", 0.1))
    if kind == "log_cutoff":
        return GrazingFamily(base, FamilyKind.LOG_CUTOFF, eps, lam0)
    if kind == "rescaled":
        return GrazingFamily(base, FamilyKind.RESCALED, eps, lam0)
    raise DomainError(f"unknown kernel kind {kind!r}")
