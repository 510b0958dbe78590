"""scikit-learn style wrappers around the functional core.

``EigenfunctionExpansion`` maps sampled functions on [0, 1] (one per row)
to their biorthogonal coefficients and back.  ``CoefficientRecovery``
fits ``p(t)`` to integral data ``E(t)`` and predicts it at new times.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import GridMismatch
from .expansion import DEFAULT_RULE, SampledFunction
from .inverse import InverseProblem, solve_inverse
from .spectral import ModeBasis, SpectralConfig


class EigenfunctionExpansion(TransformerMixin, BaseEstimator):
    """Rows of ``X`` are samples on ``grid`` (uniform on [0, 1] if None)."""

    def __init__(self, a=1.0, b=0.0, d=1.0, truncation=64, n0=0, grid=None):
        self.a = a
        self.b = b
        self.d = d
        self.truncation = truncation
        self.n0 = n0
        self.grid = grid

    def _grid(self, n_points):
        if self.grid is None:
            return np.linspace(0.0, 1.0, n_points)
        grid = np.asarray(self.grid, dtype=float)
        if grid.size != n_points:
            raise GridMismatch(f"grid has {grid.size} nodes but X has {n_points} columns")
        return grid

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=4)
        self.grid_ = self._grid(X.shape[1])
        self.basis_ = ModeBasis(SpectralConfig(self.a, self.b, self.d), self.truncation, self.n0)
        self.indices_ = self.basis_.indices.copy()
        self._U = DEFAULT_RULE.weights[:, None] * self.basis_.biorthogonal(DEFAULT_RULE.nodes)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise GridMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        nodes = DEFAULT_RULE.nodes
        rows = np.array([SampledFunction(self.grid_, row)(nodes) for row in X])
        return rows @ self._U

    def inverse_transform(self, C):
        check_is_fitted(self, "basis_")
        C = check_array(C)
        return C @ self.basis_.eigenfunctions(self.grid_).T


class CoefficientRecovery(BaseEstimator):
    """Recover ``p(t)`` from samples of ``E(t)``.

    ``phi`` and ``f`` are the initial data and source (callables).  ``fit``
    takes the sample times as a column vector and ``E`` as targets.
    """

    def __init__(self, a=1.0, b=0.0, d=1.0, phi=None, f=None, n0=0, truncation=64, nodes=1024, method="direct", override=False):
        self.a = a
        self.b = b
        self.d = d
        self.phi = phi
        self.f = f
        self.n0 = n0
        self.truncation = truncation
        self.nodes = nodes
        self.method = method
        self.override = override

    def fit(self, t, E, E_deriv=None):
        t = check_array(t, ensure_2d=False).ravel()
        E = np.asarray(E, dtype=float).ravel()
        if t.shape != E.shape:
            raise GridMismatch("t and E must have the same length")
        problem = InverseProblem(
            SpectralConfig(self.a, self.b, self.d),
            self.f,
            self.phi,
            SampledFunction(t, E),
            float(t[-1]),
            self.n0,
            SampledFunction(t, np.asarray(E_deriv, dtype=float).ravel()) if E_deriv is not None else None,
        )
        if t[0] != 0.0:
            raise GridMismatch("time samples must start at t = 0")
        self.result_ = solve_inverse(problem, self.nodes, self.truncation, self.method, self.override)
        self.p_ = self.result_.p_function()
        self.stamp_ = self.result_.stamp
        return self

    def predict(self, t):
        check_is_fitted(self, "p_")
        t = check_array(t, ensure_2d=False).ravel()
        return self.p_(t)
