"""Truncated generalized-Fourier solution of the direct problem

    u_t = u_xx - p(t) u + f(x, t),   u(x, 0) = phi(x),
    u(0, t) = 0,   a u_xx(1, t) + d u_x(1, t) - b u(1, t) = 0.

The solution is ``u = sum_n v_n(t) y_n(x)`` over the retained modes, with
each amplitude solving ``v' + (p + lam_n) v = f_n``, ``v(0) = phi_n``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, GridMismatch, GridTooCoarse, HypothesisViolation, ValidationError
from .expansion import (
    DEFAULT_RULE,
    DEFAULT_TRUNCATION,
    QuadratureRule,
    SampledFunction,
    _evaluate,
    _fd_derivatives,
    check_admissible,
    project_out,
)
from .spectral import ModeBasis, SpectralConfig

log = logging.getLogger(__name__)

CUMULATIVE_NODES = 2048
DUHAMEL_REFINE = 4
CONSISTENCY_TOL = 1e-8
CONSISTENCY_TOL_FD = 1e-4
POLICIES = ("strict", "project", "permit")


def time_function(p) -> Callable:
    """Coerce a constant, callable or :class:`SampledFunction` into a vectorised ``p(t)``."""
    if p is None:
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    if isinstance(p, SampledFunction) or callable(p):
        return lambda t: np.asarray(p(np.asarray(t, dtype=float)), dtype=float) * np.ones_like(
            np.asarray(t, dtype=float)
        )
    c = float(p)
    return lambda t: np.full_like(np.asarray(t, dtype=float), c)


def source_matrix(f, x, t) -> np.ndarray:
    """``f(x_j, t_i)`` as an array of shape ``(len(t), len(x))``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if f is None:
        return np.zeros((t.size, x.size))
    if not callable(f):
        return np.full((t.size, x.size), float(f))
    vals = np.asarray(f(x[None, :], t[:, None]), dtype=float)
    return np.broadcast_to(vals, (t.size, x.size)).copy()


@dataclass(frozen=True)
class DirectProblem:
    """Data of the direct problem.

    ``p`` is a function of t (or a constant), ``f`` a vectorised function
    of ``(x, t)`` (or None for zero source) and ``phi`` a function of x.
    ``phi_derivatives`` optionally supplies ``(phi', phi'')`` so that the
    class and consistency checks avoid finite differences.
    """

    cfg: SpectralConfig
    p: object
    f: object
    phi: object
    T: float
    n0: int = 0
    phi_derivatives: Optional[tuple] = None

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon T must be positive, got {self.T}")


class CumulativeIntegral:
    """``P(t) = int_0^t p`` tabulated by composite Simpson on a uniform grid.

    Between nodes the table is interpolated by cubic Hermite polynomials
    using ``P' = p``.
    """

    def __init__(self, p, T: float, nodes: int = CUMULATIVE_NODES):
        self.p = time_function(p)
        self.grid = np.linspace(0.0, T, nodes)
        pv = self.p(self.grid)
        self.table = np.concatenate([[0.0], cumulative_simpson(pv, x=self.grid)])
        self._interp = CubicHermiteSpline(self.grid, self.table, pv)

    def __call__(self, t):
        return self._interp(np.asarray(t, dtype=float))


def product_weights(z):
    """Weights ``(w0, w1)`` of int_0^1 exp(-z (1 - s)) g(s) ds ~ w0 g(0) + w1 g(1), g linear."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.05
    zs = np.where(small, z, 0.0)
    # series: phi1 = sum (-z)^k/(k+1)!, psi = sum (-z)^k/(k!(k+2))
    phi1 = np.zeros_like(z)
    psi = np.zeros_like(z)
    term = np.ones_like(z)
    for k in range(13):
        if k:
            term = term * (-zs) / k
        phi1 = phi1 + term / (k + 1)
        psi = psi + term / (k + 2)
    zl = np.where(small, 1.0, z)
    em = -np.expm1(-zl)
    phi1_l = em / zl
    psi_l = (em - zl * np.exp(-zl)) / zl**2
    phi1 = np.where(small, phi1, phi1_l)
    psi = np.where(small, psi, psi_l)
    return psi, phi1 - psi


def refine_grid(t_grid, factor: int = DUHAMEL_REFINE):
    """Fine grid containing 0 and every node of ``t_grid``; returns ``(fine, positions)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    base = np.unique(np.concatenate([[0.0], t_grid]))
    steps = np.diff(base)
    frac = np.arange(factor) / factor
    fine = np.concatenate([(base[:-1, None] + steps[:, None] * frac[None, :]).ravel(), base[-1:]])
    pos = np.searchsorted(fine, t_grid)
    return fine, pos


@dataclass
class SolutionField:
    """``u(x_i, t_j)`` stored as ``values[i, j]``."""

    x_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    truncation: Optional[int]
    provenance: str
    amplitudes: Optional[np.ndarray] = None
    integrals: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def energy(self) -> np.ndarray:
        """``int_0^1 u(x, t) dx`` for every ``t`` in ``t_grid``."""
        if self.amplitudes is not None:
            return self.amplitudes @ self.integrals
        return np.trapezoid(self.values, self.x_grid, axis=0)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


class DirectSolver:
    """Reusable series solver; immutable after construction."""

    def __init__(
        self,
        cfg: SpectralConfig,
        truncation: int = DEFAULT_TRUNCATION,
        n0: int = 0,
        rule: QuadratureRule = DEFAULT_RULE,
        basis: Optional[ModeBasis] = None,
    ):
        if truncation < 8:
            raise DomainError(f"truncation must be >= 8, got {truncation}")
        self.cfg = cfg
        self.truncation = truncation
        self.rule = rule
        self.basis = basis if basis is not None else ModeBasis(cfg, truncation, n0)
        self._U = self.basis.biorthogonal(rule.nodes)
        self._WU = rule.weights[:, None] * self._U

    @property
    def n0(self) -> int:
        return self.basis.n0

    # -- data preparation -------------------------------------------------

    def initial_coefficients(self, phi_values_at_nodes) -> np.ndarray:
        return self._WU.T @ phi_values_at_nodes

    def source_coefficients(self, f, s) -> np.ndarray:
        """``f_n(s_k) = (f(., s_k), u_n)`` with shape ``(len(s), modes)``."""
        return source_matrix(f, self.rule.nodes, s) @ self._WU

    def prepare(self, problem: DirectProblem, policy: str = "strict", check_times: int = 5):
        """Validate data and return ``(phi_values, f_callable, report)`` at quadrature nodes."""
        if policy not in POLICIES:
            raise DomainError(f"policy must be one of {POLICIES}, got {policy!r}")
        if problem.cfg != self.cfg or problem.n0 != self.n0:
            raise GridMismatch("problem configuration does not match the solver basis")
        basis = self.basis
        phi = problem.phi
        f = problem.f
        report = {"policy": policy}
        if policy != "permit":
            phi_rep = check_admissible(phi, basis, problem.phi_derivatives, self.rule)
            times = np.linspace(0.0, problem.T, check_times)
            f_reps = [check_admissible(_slice(f, t), basis, rule=self.rule) for t in times]
            bad_f = [t for t, r in zip(times, f_reps) if not r.admissible]
            if policy == "project":
                if not phi_rep.admissible:
                    phi, c = project_out(phi, basis.excluded, self.rule)
                    phi_rep.projected, phi_rep.projection_coefficient = True, c
                    log.warning("phi projected off y_%d (coefficient %.3e)", basis.n0, c)
                if bad_f:
                    f = _project_source(f, basis.excluded, self.rule)
                    log.warning("f projected off y_%d at every t", basis.n0)
            elif not phi_rep.admissible or bad_f:
                report["phi"] = phi_rep.as_dict()
                what = "phi" if not phi_rep.admissible else f"f(., t={bad_f[0]:.4g})"
                raise ValidationError(
                    f"{what} is outside the admissible class for n0={basis.n0}; "
                    "use policy='project' or 'permit' to proceed",
                    report,
                )
            report["phi"] = phi_rep.as_dict()
            report["f"] = {
                "status": "PASS" if not bad_f else ("WARN" if policy == "project" else "FAIL"),
                "checked_times": times.tolist(),
                "failing_times": [float(t) for t in bad_f],
                "projected": bool(bad_f) and policy == "project",
            }
        else:
            report["phi"] = {"status": "WARN", "route": "unchecked"}
            report["f"] = {"status": "WARN", "route": "unchecked"}
        report["consistency"] = consistency_residuals(problem)
        if report["consistency"]["status"] != "PASS":
            warnings.warn("initial data violate the compatibility conditions", RuntimeWarning, stacklevel=3)
        return _evaluate(phi, self.rule.nodes), f, report

    # -- core -------------------------------------------------------------

    def amplitudes(self, phi_c, f, p, t_grid, T: Optional[float] = None):
        """Mode amplitudes ``v_n(t_j)`` with shape ``(len(t_grid), modes)``."""
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(t_grid < 0):
            raise DomainError("t_grid must be nonnegative")
        horizon = max(float(T or 0.0), float(t_grid.max(initial=0.0)))
        P = CumulativeIntegral(p, horizon if horizon > 0 else 1.0)
        lam = self.basis.lam
        fine, pos = refine_grid(t_grid)
        Pf = P(fine)
        hom = phi_c[None, :] * np.exp(-np.outer(fine, lam) - Pf[:, None])
        duh = np.zeros((fine.size, lam.size))
        if f is not None:
            fn = self.source_coefficients(f, fine)
            if np.any(fn != 0):
                acc = np.zeros(lam.size)
                for k in range(fine.size - 1):
                    dt = fine[k + 1] - fine[k]
                    z = lam * dt
                    w0, w1 = product_weights(z)
                    dP = np.exp(-(Pf[k + 1] - Pf[k]))
                    acc = np.exp(-z) * dP * acc + dt * (w0 * fn[k] * dP + w1 * fn[k + 1])
                    duh[k + 1] = acc
        v = hom + duh
        v[fine == 0.0] = phi_c
        return v[pos]

    def solve(self, problem: DirectProblem, x_grid, t_grid, policy: str = "strict") -> SolutionField:
        x_grid = np.asarray(x_grid, dtype=float)
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(x_grid < 0) or np.any(x_grid > 1):
            raise DomainError("x_grid must lie in [0, 1]")
        phi_vals, f, report = self.prepare(problem, policy)
        phi_c = self.initial_coefficients(phi_vals)
        v = self.amplitudes(phi_c, f, problem.p, t_grid, problem.T)
        u = self.basis.eigenfunctions(x_grid) @ v.T
        lam = self.basis.lam
        half = self.basis.indices > self.truncation // 2
        report["majorant_tail"] = float(np.sum(np.abs(lam[half] * phi_c[half])))
        report["weighted_coefficient_sum"] = float(np.sum(np.abs(lam * phi_c)))
        return SolutionField(
            x_grid, t_grid, u, self.truncation, "SERIES", v, self.basis.integral.copy(), report
        )


def _slice(f, t):
    if f is None:
        return 0.0
    if not callable(f):
        return float(f)
    return lambda x: np.asarray(f(np.asarray(x, dtype=float), t), dtype=float) * np.ones_like(x)


def _project_source(f, excluded, rule):
    y0 = excluded(rule.nodes)
    w = rule.weights * y0 / excluded.norm_sq

    def g(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        ts = np.unique(t)
        coef = source_matrix(f, rule.nodes, ts) @ w
        c = np.interp(t, ts, coef) if ts.size > 1 else np.full_like(t, coef[0])
        return np.asarray(f(x, t), dtype=float) - c * excluded(x)

    return g


def consistency_residuals(problem: DirectProblem) -> dict:
    """phi(0) and a phi''(1) + d phi'(1) - b phi(1); necessary for a classical solution."""
    cfg = problem.cfg
    phi = problem.phi
    if problem.phi_derivatives is not None:
        d1, d2 = problem.phi_derivatives
        p1, p2 = float(_evaluate(d1, np.array([1.0]))[0]), float(_evaluate(d2, np.array([1.0]))[0])
    else:
        p1, p2 = _fd_derivatives(phi, 1.0)
    ends = _evaluate(phi, np.array([0.0, 1.0]))
    right = cfg.a * p2 + cfg.d * p1 - cfg.b * ends[1]
    # second differences with step 1e-5 carry roundoff ~1e-5 (|phi(1)| + |phi'(1)|)
    if problem.phi_derivatives is not None:
        tol = CONSISTENCY_TOL
    else:
        tol = CONSISTENCY_TOL_FD * max(1.0, abs(float(ends[1])), abs(float(p1)))
    ok = abs(ends[0]) < CONSISTENCY_TOL and abs(right) < tol * (abs(cfg.a) + abs(cfg.d) + abs(cfg.b))
    return {"status": "PASS" if ok else "WARN", "phi(0)": float(ends[0]), "right": float(right), "tol": tol}


def mode_amplitude(n: int, problem: DirectProblem, t, truncation: int = DEFAULT_TRUNCATION):
    """Amplitude ``v_n(t)`` of mode ``n`` (admissibility checks skipped)."""
    solver = DirectSolver(problem.cfg, max(truncation, n, 8), problem.n0)
    col = solver.basis.position(n)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    phi_c = solver.initial_coefficients(_evaluate(problem.phi, solver.rule.nodes))
    v = solver.amplitudes(phi_c, problem.f, problem.p, t_arr, problem.T)[:, col]
    return v if np.ndim(t) else float(v[0])


def solve_direct(
    problem: DirectProblem,
    x_grid,
    t_grid,
    truncation: int = DEFAULT_TRUNCATION,
    policy: str = "strict",
) -> SolutionField:
    """Series solution on ``x_grid x t_grid``.

    ``policy`` controls data outside the admissible class: ``"strict"``
    raises :class:`ValidationError`, ``"project"`` removes the excluded-mode
    component and proceeds, ``"permit"`` skips the check.
    """
    return DirectSolver(problem.cfg, truncation, problem.n0).solve(problem, x_grid, t_grid, policy)


# -- diagnostics on solution fields ---------------------------------------


def fd_weights(z: float, nodes, m: int) -> np.ndarray:
    """Fornberg weights for the ``m``-th derivative at ``z`` from values at ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


BOUNDARY_STENCIL = 8


def _edge_derivative(values, grid, at_end: bool, m: int):
    k = min(BOUNDARY_STENCIL, grid.size)
    sl = slice(grid.size - k, None) if at_end else slice(0, k)
    w = fd_weights(grid[-1] if at_end else grid[0], grid[sl], m)
    return np.tensordot(w, values[sl], axes=(0, 0))


def time_derivative(values_t, t):
    """Derivative along the last axis with 5-point (one-sided at the ends) stencils."""
    out = np.empty_like(values_t)
    n = t.size
    for j in range(n):
        lo = min(max(j - 2, 0), max(n - 5, 0))
        idx = slice(lo, min(lo + 5, n))
        out[..., j] = values_t[..., idx] @ fd_weights(t[j], t[idx], 1)
    return out


def boundary_residuals(field: SolutionField, cfg: SpectralConfig, problem: Optional[DirectProblem] = None) -> dict:
    """Sup over t of |u(0,t)|, of the static right condition, and (given the
    problem data) of the dynamic right condition."""
    x = field.x_grid
    if x.size < 5:
        raise GridTooCoarse(f"need at least 5 x-nodes, got {x.size}")
    u = field.values
    u1 = u[-1]
    ux = _edge_derivative(u, x, True, 1)
    uxx = _edge_derivative(u, x, True, 2)
    out = {
        "left": float(np.max(np.abs(u[0]))),
        "static": float(np.max(np.abs(cfg.a * uxx + cfg.d * ux - cfg.b * u1))),
        "dynamic": None,
    }
    if problem is not None and field.t_grid.size >= 5:
        t = field.t_grid
        ut = time_derivative(u1[None, :], t)[0]
        pv = time_function(problem.p)(t)
        fv = source_matrix(problem.f, np.array([1.0]), t)[:, 0]
        dyn = cfg.a * ut + cfg.d * ux + (cfg.a * pv - cfg.b) * u1 - cfg.a * fv
        out["dynamic"] = float(np.max(np.abs(dyn)))
    return out


def _min_p(problem: DirectProblem, t_hi: float, n: int = 4001) -> float:
    return float(np.min(time_function(problem.p)(np.linspace(0.0, t_hi, n))))


def data_norms(problem: DirectProblem, x_grid, t_grid, dense: int = 2001):
    """Sup norms of ``phi`` on [0, 1] and of ``f`` on the space-time grid (densified in x)."""
    xs = np.union1d(np.asarray(x_grid, dtype=float), np.linspace(0.0, 1.0, dense))
    phi = _evaluate(problem.phi, xs)
    fv = source_matrix(problem.f, xs, t_grid)
    return phi, fv


def stability_gap(u1: SolutionField, u2: SolutionField, data1: DirectProblem, data2: DirectProblem) -> dict:
    """Compare ``|u1 - u2|`` with ``|phi1 - phi2| + (1 + |b|) T |f1 - f2|`` (sup norms)."""
    if u1.values.shape != u2.values.shape or not (
        np.array_equal(u1.x_grid, u2.x_grid) and np.array_equal(u1.t_grid, u2.t_grid)
    ):
        raise GridMismatch("fields must share grids")
    T = float(u1.t_grid[-1])
    for prob in (data1, data2):
        if _min_p(prob, T) < 0:
            raise HypothesisViolation("p must be nonnegative on [0, T]")
    phi1, f1 = data_norms(data1, u1.x_grid, u1.t_grid)
    phi2, f2 = data_norms(data2, u1.x_grid, u1.t_grid)
    lhs = float(np.max(np.abs(u1.values - u2.values)))
    rhs = float(np.max(np.abs(phi1 - phi2)) + (1 + abs(data1.cfg.b)) * T * np.max(np.abs(f1 - f2)))
    return {"lhs": lhs, "rhs": rhs, "status": "PASS" if lhs <= rhs + 1e-9 else "FAIL"}


def apriori_bound(field: SolutionField, problem: DirectProblem, tol: float = 1e-8) -> dict:
    """``|u| <= |phi| + (1 + |b|) T |f|`` for p >= 0."""
    T = float(field.t_grid[-1])
    if _min_p(problem, T) < 0:
        raise HypothesisViolation("p must be nonnegative on [0, T]")
    phi, fv = data_norms(problem, field.x_grid, field.t_grid)
    lhs = field.sup_norm()
    rhs = float(np.max(np.abs(phi)) + (1 + abs(problem.cfg.b)) * T * np.max(np.abs(fv)))
    return {"lhs": lhs, "rhs": rhs, "status": "PASS" if lhs <= rhs + tol else "FAIL"}


def parabolic_extremum_check(field: SolutionField, upper: bool = True, tol: float = 1e-8) -> dict:
    """Maximum (``upper``) or minimum principle: interior extremum against the
    parabolic boundary (t = 0, x = 0, x = 1) and zero."""
    u = field.values
    edge = np.concatenate([u[:, 0], u[0, :], u[-1, :], [0.0]])
    if upper:
        bound, extreme = float(edge.max()), float(u.max())
        ok = extreme <= bound + tol
    else:
        bound, extreme = float(edge.min()), float(u.min())
        ok = extreme >= bound - tol
    return {"extreme": extreme, "bound": bound, "status": "PASS" if ok else "FAIL"}
