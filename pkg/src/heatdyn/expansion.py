"""Biorthogonal Fourier coefficients and admissible-class checks.

All pairings ``(f, g) = int_0^1 f g dx`` go through one composite
Gauss-Legendre rule (8 points on each of 64 panels by default).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .errors import GridMismatch, NonMonotoneGrid
from .spectral import EigenMode, ModeBasis

PHI_CLASS_TOL = 1e-8
SPAN_TOL = 1e-8
FD_STEP = 1e-5
DEFAULT_TRUNCATION = 64


class QuadratureRule:
    """Composite Gauss-Legendre rule on [0, 1]."""

    def __init__(self, panels: int = 64, points: int = 8):
        g, w = leggauss(points)
        edges = np.linspace(0.0, 1.0, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        self.panels, self.points = panels, points
        self.nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


DEFAULT_RULE = QuadratureRule()


@dataclass(frozen=True)
class SampledFunction:
    """Tabulated function with optional closed-form evaluator.

    When ``func`` is given it is used for evaluation; otherwise values are
    interpolated with a not-a-knot cubic spline through ``(grid, values)``.
    """

    grid: np.ndarray
    values: np.ndarray
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise GridMismatch("grid and values must be 1-D arrays of equal length")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise NonMonotoneGrid("grid must be strictly increasing with at least 2 nodes")
        if not np.all(np.isfinite(values)):
            raise GridMismatch("values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, func, n: int = 1001, lo: float = 0.0, hi: float = 1.0):
        grid = np.linspace(lo, hi, n)
        return cls(grid, np.asarray(func(grid), dtype=float) * np.ones_like(grid), func)

    @property
    def has_closed_form(self) -> bool:
        return self.func is not None

    @property
    def domain(self):
        return float(self.grid[0]), float(self.grid[-1])

    def covers(self, lo: float, hi: float, tol: float = 1e-12) -> bool:
        return self.grid[0] <= lo + tol and self.grid[-1] >= hi - tol

    def __call__(self, x, deriv: int = 0):
        x = np.asarray(x, dtype=float)
        if self.func is not None and deriv == 0:
            return np.asarray(self.func(x), dtype=float) * np.ones_like(x)
        spline = self.__dict__.get("_spline")
        if spline is None:
            kind = "not-a-knot" if self.grid.size > 3 else "natural"
            spline = CubicSpline(self.grid, self.values, bc_type=kind)
            object.__setattr__(self, "_spline", spline)
        return spline(x, deriv)


def _evaluate(g, x):
    if isinstance(g, SampledFunction):
        if not g.covers(0.0, 1.0):
            raise GridMismatch(f"sampled function on {g.domain} does not cover [0, 1]")
        return g(x)
    if callable(g):
        return np.asarray(g(x), dtype=float) * np.ones_like(x)
    return np.full_like(x, float(g))


def inner_product(f, g, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """``int_0^1 f g dx``; ``f`` and ``g`` may be sampled functions, callables or constants."""
    x = rule.nodes
    return rule.integrate(_evaluate(f, x) * _evaluate(g, x))


@dataclass(frozen=True)
class CoefficientSeries:
    excluded_index: int
    indices: np.ndarray
    values: np.ndarray

    @property
    def truncation(self) -> int:
        return int(max(self.indices.max(), self.excluded_index))

    @property
    def coeffs(self) -> dict:
        return {int(n): float(c) for n, c in zip(self.indices, self.values)}

    def __getitem__(self, n: int) -> float:
        hit = np.flatnonzero(self.indices == n)
        if hit.size == 0:
            raise KeyError(n)
        return float(self.values[hit[0]])


def coefficient_vector(f, basis: ModeBasis, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    x = rule.nodes
    return basis.biorthogonal(x).T @ (rule.weights * _evaluate(f, x))


def coefficients(f, basis: ModeBasis, rule: QuadratureRule = DEFAULT_RULE) -> CoefficientSeries:
    """``(f, u_n)`` for every retained index of ``basis``."""
    return CoefficientSeries(basis.n0, basis.indices.copy(), coefficient_vector(f, basis, rule))


def reconstruct(series: CoefficientSeries, basis: ModeBasis, x):
    """Partial sum ``sum_n c_n y_n(x)`` over the retained indices."""
    cols = np.array([basis.position(n) for n in series.indices])
    y = basis.eigenfunctions(x)[:, cols]
    out = y @ series.values
    return out if np.ndim(x) else float(out[0])


def weighted_coefficient_sum(series: CoefficientSeries, basis: ModeBasis) -> float:
    """Partial sum of ``|lambda_n c_n|``; bounded as truncation grows for admissible data."""
    cols = np.array([basis.position(n) for n in series.indices])
    return float(np.sum(np.abs(basis.lam[cols] * series.values)))


# five-point one-sided weights (times h and h^2): 4th order for f', 3rd order for f''
_EDGE_D1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE_D2 = np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0


def _fd_derivatives(f, x0: float, h: float = FD_STEP):
    """First and second derivative estimates; one-sided five-point stencils at 0 and 1."""
    if x0 <= 0.0:
        v = _evaluate(f, x0 + h * np.arange(5.0))
        return _EDGE_D1 @ v / h, _EDGE_D2 @ v / h**2
    if x0 >= 1.0:
        v = _evaluate(f, x0 - h * np.arange(5.0))
        return -(_EDGE_D1 @ v) / h, _EDGE_D2 @ v / h**2
    v = _evaluate(f, x0 + h * np.array([-1.0, 0.0, 1.0]))
    return (v[2] - v[0]) / (2 * h), (v[2] - 2 * v[1] + v[0]) / h**2


@dataclass
class ClassReport:
    residuals: dict
    tol: float = PHI_CLASS_TOL

    @property
    def passed(self) -> bool:
        return all(abs(r) < self.tol for r in self.residuals.values())

    @property
    def failing(self) -> list:
        return [k for k, r in self.residuals.items() if not abs(r) < self.tol]

    def as_dict(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tol": self.tol,
        }


def validate_phi_class(
    f,
    excluded: EigenMode,
    derivatives: Optional[Sequence[Callable]] = None,
    rule: QuadratureRule = DEFAULT_RULE,
) -> ClassReport:
    """Check the admissible-class conditions for ``f``.

    Conditions: f(0) = f''(0) = 0, f(1) = f'(1) = f''(1) = 0 and
    (f, y_excluded) = 0.  ``derivatives`` may supply ``(f', f'')``;
    otherwise finite differences with step 1e-5 are used.
    """
    if derivatives is not None:
        d1, d2 = derivatives
        f1_0, f2_0 = float(_evaluate(d1, np.array([0.0]))[0]), float(_evaluate(d2, np.array([0.0]))[0])
        f1_1, f2_1 = float(_evaluate(d1, np.array([1.0]))[0]), float(_evaluate(d2, np.array([1.0]))[0])
    else:
        _, f2_0 = _fd_derivatives(f, 0.0)
        f1_1, f2_1 = _fd_derivatives(f, 1.0)
    ends = _evaluate(f, np.array([0.0, 1.0]))
    residuals = {
        "f(0)": float(ends[0]),
        "f''(0)": float(f2_0),
        "f(1)": float(ends[1]),
        "f'(1)": float(f1_1),
        "f''(1)": float(f2_1),
        "(f,y_n0)": inner_product(f, excluded, rule),
    }
    return ClassReport(residuals)


def span_residual(f, basis: ModeBasis, n_check: int = 1000, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Sup-norm round-trip error of the truncated expansion on ``n_check`` points."""
    x = np.linspace(0.0, 1.0, n_check)
    c = coefficient_vector(f, basis, rule)
    return float(np.max(np.abs(basis.eigenfunctions(x) @ c - _evaluate(f, x))))


@dataclass
class AdmissibilityReport:
    """Admissible means: in the class checked by :func:`validate_phi_class`,
    or reproduced to ``SPAN_TOL`` by the truncated eigenfunction expansion
    (finite eigenfunction combinations without the excluded index)."""

    phi_class: ClassReport
    span_error: float
    projected: bool = False
    projection_coefficient: float = 0.0

    @property
    def in_span(self) -> bool:
        return self.span_error < SPAN_TOL

    @property
    def admissible(self) -> bool:
        return self.phi_class.passed or self.in_span

    @property
    def route(self) -> str:
        if self.phi_class.passed:
            return "phi_class"
        return "modal_span" if self.in_span else "none"

    def as_dict(self) -> dict:
        return {
            "status": "PASS" if self.admissible else "FAIL",
            "route": self.route,
            # either route suffices, so the class check is informational here
            "phi_class": {k: v for k, v in self.phi_class.as_dict().items() if k != "status"} | {"passed": self.phi_class.passed},
            "span_error": self.span_error,
            "projected": self.projected,
            "projection_coefficient": self.projection_coefficient,
        }


def check_admissible(f, basis: ModeBasis, derivatives=None, rule: QuadratureRule = DEFAULT_RULE):
    return AdmissibilityReport(
        validate_phi_class(f, basis.excluded, derivatives, rule), span_residual(f, basis, rule=rule)
    )


def project_out(f, excluded: EigenMode, rule: QuadratureRule = DEFAULT_RULE):
    """Remove the ``y_excluded`` component of ``f`` (plain L2 projection).

    Returns ``(g, c)`` with ``g = f - c y_excluded``.
    """
    c = inner_product(f, excluded, rule) / excluded.norm_sq

    def g(x):
        x = np.asarray(x, dtype=float)
        return _evaluate(f, x) - c * excluded(x)

    return g, c
