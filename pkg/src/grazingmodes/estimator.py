"""Scikit-learn style wrapper around the collision evaluators."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .boltzmann_modes import GridConfig, ModeTensor, QuadratureSpec, build_mode_tensor
from .cross_sections import CrossSection, GrazingFamily, parse_kernel_spec
from .grazing_fpl_modes import FplKernel, SplitKernel, build_split_kernel, mode_tensor_from_split
from .spectral_core import SpectralState, collision_direct, collision_fast
from .validation import check_coefficients, check_evaluator, check_lattice_size


class SpectralCollisionOperator(BaseEstimator, TransformerMixin):
    """Maps Fourier coefficient arrays ``c`` to the collision term ``Q_N(c, c)``.

    ``fit`` tabulates the kernel: a class-compressed mode tensor for Boltzmann
    kernels, split fields for the Landau kernel (``kind="fpl"``) and for the
    small-angle approximation (``kind="approx"``, which needs a grazing
    family).  ``transform`` accepts one coefficient cube, a batch of cubes, or
    flattened rows and returns the same layout as a batch.
    """

    def __init__(self, kind="fpl", gamma=0.0, N=4, epsilon=0.1, nu=0.5, lambda0=1.0, c=1.0,
                 family="rescaled", evaluator="fast", tol=1e-10, cache_path=None):
        self.kind = kind
        self.gamma = gamma
        self.N = N
        self.epsilon = epsilon
        self.nu = nu
        self.lambda0 = lambda0
        self.c = c
        self.family = family
        self.evaluator = evaluator
        self.tol = tol
        self.cache_path = cache_path

    def _kernel(self):
        if self.kind == "fpl":
            return FplKernel(self.gamma, self.lambda0)
        if self.kind == "approx":
            return parse_kernel_spec(
                {"kind": self.family, "gamma": self.gamma, "nu": self.nu, "epsilon": self.epsilon, "c": self.c}
            )
        spec = {"kind": self.kind, "gamma": self.gamma, "nu": self.nu, "epsilon": self.epsilon,
                "c": self.c, "lambda0": self.lambda0}
        return parse_kernel_spec(spec)

    def fit(self, X=None, y=None):
        N = check_lattice_size(self.N)
        check_evaluator(self.evaluator)
        grid = GridConfig(N)
        quad = QuadratureSpec.for_grid(N, tol=self.tol)
        kernel = self._kernel()
        if isinstance(kernel, FplKernel) or (self.kind == "approx" and isinstance(kernel, GrazingFamily)):
            split = build_split_kernel(kernel, grid, quad)
            self.split_ = split
            self.modes_ = split if self.evaluator == "fast" else mode_tensor_from_split(split)
        elif isinstance(kernel, (CrossSection, GrazingFamily)):
            if self.evaluator == "fast":
                raise ValueError("the fast evaluator needs a split kernel (kind='fpl' or 'approx')")
            self.modes_ = build_mode_tensor(kernel, grid, quad, cache_path=self.cache_path)
        else:
            raise ValueError(f"unsupported kernel {kernel!r}")
        self.grid_ = grid
        self.n_features_in_ = (2 * N + 1) ** 3
        return self

    def transform(self, X):
        check_is_fitted(self, "modes_")
        batch = check_coefficients(X, self.grid_.N, hermitian_tol=1e-8)
        out = np.empty_like(batch)
        for i, c in enumerate(batch):
            state = SpectralState(self.grid_, c)
            if isinstance(self.modes_, SplitKernel) and self.evaluator == "fast":
                out[i] = collision_fast(state, self.modes_)
            else:
                out[i] = collision_direct(state, self.modes_)
        return out

    def kernel_values(self, l, m):
        """Mode values ``B(l, m)`` of the fitted kernel."""
        check_is_fitted(self, "modes_")
        if isinstance(self.modes_, ModeTensor):
            return self.modes_.lookup(l, m)
        return self.modes_.reassemble(l, m).real
