"""Finite-difference reference solver.

Independent of the eigenfunction machinery: the right end is advanced by
the dynamic form of the boundary condition,

    a u_t(1) = -d u_x(1) - (a p - b) u(1) + a f(1, t),

with ``u_x(1) ~ (3 u_N - 4 u_{N-1} + u_{N-2}) / (2h)`` folded into the
implicit system.  Interior rows use the 3-point Laplacian and a theta
scheme in time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .direct import DirectProblem, SolutionField, source_matrix, time_function
from .errors import DomainError, GridTooCoarse, SingularSystem
from .expansion import _evaluate


@dataclass(frozen=True)
class FdmScheme:
    nx: int = 400
    nt: int = 4000
    theta: float = 0.5

    def __post_init__(self):
        if self.nx < 16 or self.nt < 16:
            raise DomainError("nx and nt must be at least 16")
        if self.theta not in (0.5, 1.0):
            raise DomainError("theta must be 1/2 (Crank-Nicolson) or 1 (backward Euler)")


def _operator_bands(n, h, p, cfg):
    """Banded form (2 lower, 1 upper) of the semi-discrete operator A on unknowns u_1..u_N."""
    ab = np.zeros((4, n))
    r = 1.0 / h**2
    # upper diagonal sits in row 0 shifted right, diagonal row 1, sub-diagonals rows 2 and 3
    ab[0, 1:] = r
    ab[1, :] = -2 * r - p
    ab[2, :-1] = r
    kappa = cfg.d / cfg.a
    ab[1, -1] = -kappa * 3 / (2 * h) - (p - cfg.b / cfg.a)
    ab[2, -2] = kappa * 4 / (2 * h)
    ab[3, -3] = -kappa / (2 * h)
    return ab


def _apply(ab, u):
    out = ab[1] * u
    out[:-1] += ab[0, 1:] * u[1:]
    out[1:] += ab[2, :-1] * u[:-1]
    out[2:] += ab[3, :-2] * u[:-2]
    return out


def solve_fdm(problem: DirectProblem, scheme: FdmScheme = FdmScheme(), store_every: int = 1) -> SolutionField:
    """March the theta scheme from t = 0 to ``problem.T``.

    The returned field holds every ``store_every``-th time level (the last
    level is always kept).
    """
    cfg = problem.cfg
    if cfg.a == 0:
        raise DomainError("the dynamic boundary form needs a != 0")
    nx, nt, theta = scheme.nx, scheme.nt, scheme.theta
    x = np.linspace(0.0, 1.0, nx + 1)
    t = np.linspace(0.0, problem.T, nt + 1)
    h, dt = x[1] - x[0], t[1] - t[0]
    p = time_function(problem.p)(t)
    fv = source_matrix(problem.f, x[1:], t)
    u = _evaluate(problem.phi, x[1:]).astype(float)
    keep = np.unique(np.concatenate([np.arange(0, nt + 1, store_every), [nt]]))
    out = np.empty((nx + 1, keep.size))
    out[0] = 0.0
    col = 0
    if keep[0] == 0:
        out[1:, 0] = u
        col = 1
    ab_old = _operator_bands(nx, h, p[0], cfg)
    for k in range(nt):
        ab_new = _operator_bands(nx, h, p[k + 1], cfg)
        rhs = u + dt * (1 - theta) * (_apply(ab_old, u) + fv[k]) + dt * theta * fv[k + 1]
        lhs = -dt * theta * ab_new
        lhs[1] += 1.0
        try:
            u = solve_banded((2, 1), lhs, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise SingularSystem(f"implicit solve failed at step {k + 1}: {exc}") from exc
        if not np.all(np.isfinite(u)):
            raise SingularSystem(f"non-finite state at step {k + 1}")
        ab_old = ab_new
        if col < keep.size and keep[col] == k + 1:
            out[1:, col] = u
            col += 1
    meta = {"scheme": {"nx": nx, "nt": nt, "theta": theta}}
    return SolutionField(x, t[keep], out, None, "FDM", metadata=meta)


def pde_residual(field: SolutionField, problem: DirectProblem) -> float:
    """Max interior residual of ``u_t - u_xx + p u - f`` by centred differences."""
    x, t, u = field.x_grid, field.t_grid, field.values
    if x.size < 3 or t.size < 3:
        raise GridTooCoarse("need at least 3 nodes in x and t")
    hx_l, hx_r = np.diff(x)[:-1], np.diff(x)[1:]
    uxx = 2 * (
        u[2:, 1:-1] / (hx_r * (hx_l + hx_r))[:, None]
        - u[1:-1, 1:-1] / (hx_l * hx_r)[:, None]
        + u[:-2, 1:-1] / (hx_l * (hx_l + hx_r))[:, None]
    )
    ut = (u[1:-1, 2:] - u[1:-1, :-2]) / (t[2:] - t[:-2])[None, :]
    pv = time_function(problem.p)(t[1:-1])
    fv = source_matrix(problem.f, x[1:-1], t[1:-1]).T
    res = ut - uxx + pv[None, :] * u[1:-1, 1:-1] - fv
    return float(np.max(np.abs(res)))


def discrete_max_principle(field: SolutionField, tol: float = 1e-12) -> dict:
    """Interior values against max{0, initial data, both lateral boundaries}."""
    u = field.values
    bound = max(0.0, u[:, 0].max(), u[0].max(), u[-1].max())
    interior = u[1:-1, 1:].max() if u.shape[1] > 1 else -np.inf
    return {"interior_max": float(interior), "bound": float(bound), "status": "PASS" if interior <= bound + tol else "FAIL"}
