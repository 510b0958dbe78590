"""Recovery of ``p(t)`` from the integral data ``E(t) = int_0^1 u(x, t) dx``.

With ``q(t) = exp(int_0^t p)`` the data condition turns the series
solution into a linear Volterra equation of the second kind,

    q(t) = F(t) + int_0^t K(t, s) q(s) ds,
    F(t) = sum_n phi_n exp(-lam_n t) I_n / E(t),
    K(t, s) = sum_n f_n(s) exp(-lam_n (t - s)) I_n / E(t),

where ``I_n = int_0^1 y_n``.  Then ``p = q' / q`` with ``q'`` taken from
the differentiated equation rather than by differencing ``q``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .direct import (
    DirectProblem,
    DirectSolver,
    SolutionField,
    _slice,
    fd_weights,
    time_function,
)
from .errors import (
    AssumptionViolation,
    ClosureFailure,
    DomainError,
    NoConvergence,
    NonpositiveE,
    NonpositiveQ,
)
from .expansion import DEFAULT_RULE, DEFAULT_TRUNCATION, SampledFunction, _evaluate, check_admissible
from .spectral import SpectralConfig

log = logging.getLogger(__name__)

DEFAULT_NODES = 1024
E0_TOL = 1e-8
E_FLOOR = 1e-12
SIGN_TOL = 1e-10
CLOSURE_TOL = 1e-4
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class InverseProblem:
    """Data of the inverse problem; ``E`` and ``E_deriv`` are functions of t
    (callables, constants or :class:`SampledFunction`)."""

    cfg: SpectralConfig
    f: object
    phi: object
    E: object
    T: float
    n0: int = 0
    E_deriv: object = None
    phi_derivatives: Optional[tuple] = None

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon T must be positive, got {self.T}")


@dataclass
class AssumptionReport:
    checks: list = field(default_factory=list)

    def add(self, tag: str, ok: bool, value: float, message: str):
        self.checks.append({"tag": tag, "status": "PASS" if ok else "FAIL", "value": float(value), "message": message})

    @property
    def passed(self) -> bool:
        return all(c["status"] == "PASS" for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if c["status"] != "PASS"]

    def as_dict(self) -> dict:
        return {"status": "PASS" if self.passed else "FAIL", "checks": self.checks}


@dataclass
class VolterraSystem:
    """Sampled right-hand side, kernel and their t-derivatives on a uniform grid."""

    t: np.ndarray
    F: np.ndarray
    K: np.ndarray
    Fp: np.ndarray
    Kt: np.ndarray
    E: Optional[np.ndarray] = None
    Ep: Optional[np.ndarray] = None

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def norm_bound(self) -> float:
        """``|F| exp(T |K|)`` in sup norms."""
        return float(np.max(np.abs(self.F)) * np.exp(self.T * np.max(np.abs(self.K))))

    @classmethod
    def from_functions(cls, t, F: Callable, K: Callable, Fp: Callable = None, Kt: Callable = None):
        """Build a system by sampling closed-form ``F(t)`` and ``K(t, s)``."""
        t = np.asarray(t, dtype=float)
        tt, ss = np.meshgrid(t, t, indexing="ij")
        lower = ss <= tt

        def kern(fn):
            if fn is None:
                return np.zeros_like(tt)
            return np.where(lower, np.broadcast_to(fn(tt, ss), tt.shape), 0.0)

        def vec(fn):
            return np.zeros_like(t) if fn is None else np.broadcast_to(fn(t), t.shape).astype(float)

        return cls(t, vec(F), kern(K), vec(Fp), kern(Kt))


def uniform_grid(T: float, nodes: int = DEFAULT_NODES) -> np.ndarray:
    return np.linspace(0.0, T, nodes)


def differentiate_samples(values, t) -> np.ndarray:
    """Fourth-order finite differences on a uniform grid, one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    n = t.size
    if n < 5:
        raise DomainError("need at least 5 samples to differentiate")
    h = t[1] - t[0]
    out = np.empty(n)
    out[2:-2] = (values[:-4] - 8 * values[1:-3] + 8 * values[3:-1] - values[4:]) / (12 * h)
    for j in (0, 1, n - 2, n - 1):
        lo = min(max(j - 2, 0), n - 5)
        out[j] = fd_weights(t[j], t[lo : lo + 5], 1) @ values[lo : lo + 5]
    return out


class InverseSolver:
    """Assumption checks, Volterra assembly and recovery for one basis/grid."""

    def __init__(
        self,
        cfg: SpectralConfig,
        truncation: int = DEFAULT_TRUNCATION,
        n0: int = 0,
        rule=DEFAULT_RULE,
    ):
        self.direct = DirectSolver(cfg, truncation, n0, rule)
        self.basis = self.direct.basis
        self.cfg = cfg

    def _data(self, problem: InverseProblem, t):
        phi_c = self.direct.initial_coefficients(_evaluate(problem.phi, self.direct.rule.nodes))
        fn = self.direct.source_coefficients(problem.f, t)
        E = time_function(problem.E)(t)
        Ep = time_function(problem.E_deriv)(t) if problem.E_deriv is not None else differentiate_samples(E, t)
        return phi_c, fn, E, Ep

    def check_assumptions(self, problem: InverseProblem, t, data=None, check_times: int = 5) -> AssumptionReport:
        phi_c, fn, E, _ = data if data is not None else self._data(problem, t)
        rule = self.direct.rule
        rep = AssumptionReport()
        adm = check_admissible(problem.phi, self.basis, problem.phi_derivatives, rule)
        rep.add("A1", adm.admissible, adm.span_error, f"phi admissible via {adm.route}")
        scale = max(1.0, float(np.max(np.abs(phi_c))))
        lead = float(phi_c[0])
        rep.add("A1", lead > SIGN_TOL * scale, lead, f"leading coefficient phi_{self.basis.indices[0]} > 0")
        worst = float(np.min(phi_c))
        rep.add("A1", worst >= -SIGN_TOL * scale, worst, "all phi_n >= 0")

        mass = rule.integrate(_evaluate(problem.phi, rule.nodes))
        rep.add("A2", abs(E[0] - mass) <= E0_TOL, E[0] - mass, "E(0) = int phi")
        emin, emax = float(np.min(E)), float(np.max(np.abs(E)))
        rep.add("A2", emin > E_FLOOR * emax and emin > 0, emin, "E(t) > 0 on the grid")
        rep.add("A2", bool(np.all(np.isfinite(E))), 0.0, "E finite")

        times = np.linspace(0.0, problem.T, check_times)
        spans = []
        for tc in times:
            spans.append(check_admissible(_slice(problem.f, tc), self.basis, rule=rule))
        bad = [r for r in spans if not r.admissible]
        rep.add("A3", not bad, max((r.span_error for r in spans), default=0.0), "f(., t) admissible")
        fscale = max(1.0, float(np.max(np.abs(fn)))) if fn.size else 1.0
        fworst = float(np.min(fn)) if fn.size else 0.0
        rep.add("A3", fworst >= -SIGN_TOL * fscale, fworst, "all f_n(t) >= 0")
        return rep

    def assemble(self, problem: InverseProblem, t, data=None) -> VolterraSystem:
        t = np.asarray(t, dtype=float)
        phi_c, fn, E, Ep = data if data is not None else self._data(problem, t)
        if not np.all(E > 0) or np.min(E) <= E_FLOOR * np.max(np.abs(E)):
            raise NonpositiveE(f"E must stay above {E_FLOOR:g} max|E|; min E = {np.min(E):.3e}")
        lam, I = self.basis.lam, self.basis.integral
        decay = np.exp(-np.outer(t, lam))
        S = decay @ (phi_c * I)
        Sp = -decay @ (lam * phi_c * I)
        n = t.size
        h = t[1] - t[0]
        lag = np.subtract.outer(np.arange(n), np.arange(n))
        lower = lag >= 0
        lagc = np.where(lower, lag, 0)
        G = np.zeros((n, n))
        Gt = np.zeros((n, n))
        weights = fn * I[None, :]
        for k in range(lam.size):
            w = weights[:, k]
            if not np.any(w):
                continue
            table = np.exp(-lam[k] * h * np.arange(n))
            block = table[lagc] * w[None, :]
            G += block
            Gt -= lam[k] * block
        G[~lower] = 0.0
        Gt[~lower] = 0.0
        F = S / E
        Fp = Sp / E - S * Ep / E**2
        K = G / E[:, None]
        Kt = Gt / E[:, None] - G * (Ep / E**2)[:, None]
        return VolterraSystem(t, F, K, Fp, Kt, E, Ep)


def check_assumptions(problem: InverseProblem, t_grid=None, truncation: int = DEFAULT_TRUNCATION) -> AssumptionReport:
    t = uniform_grid(problem.T) if t_grid is None else np.asarray(t_grid, dtype=float)
    return InverseSolver(problem.cfg, truncation, problem.n0).check_assumptions(problem, t)


def assemble_volterra(
    problem: InverseProblem,
    t_grid=None,
    truncation: int = DEFAULT_TRUNCATION,
    override: bool = False,
) -> VolterraSystem:
    """Check assumptions (unless ``override``) and assemble the Volterra system."""
    t = uniform_grid(problem.T) if t_grid is None else np.asarray(t_grid, dtype=float)
    solver = InverseSolver(problem.cfg, truncation, problem.n0)
    data = solver._data(problem, t)
    if not override:
        _raise_on(solver.check_assumptions(problem, t, data))
    return solver.assemble(problem, t, data)


def _raise_on(report: AssumptionReport):
    if report.passed:
        return
    first = report.failures[0]
    if first["tag"] == "A2" and "E(t) > 0" in first["message"]:
        raise NonpositiveE(first["message"], report.as_dict())
    raise AssumptionViolation(first["tag"], f"{first['message']} (measured {first['value']:.3e})", report.as_dict())


def _trapezoid_matrix(system: VolterraSystem, kernel: np.ndarray) -> np.ndarray:
    W = np.tril(kernel) * system.h
    W[:, 0] *= 0.5
    W[np.diag_indices_from(W)] *= 0.5
    W[0, 0] = 0.0
    return W


def solve_volterra_direct(system: VolterraSystem) -> np.ndarray:
    """Forward substitution with the trapezoid rule."""
    F, K, h = system.F, system.K, system.h
    n = F.size
    q = np.empty(n)
    q[0] = F[0]
    for i in range(1, n):
        acc = 0.5 * K[i, 0] * q[0] + K[i, 1:i] @ q[1:i]
        q[i] = (F[i] + h * acc) / (1.0 - 0.5 * h * K[i, i])
    if not np.all(q > 0):
        i = int(np.flatnonzero(~(q > 0))[0])
        raise NonpositiveQ(f"q({system.t[i]:.4g}) = {q[i]:.3e} <= 0")
    return q


@dataclass
class PicardResult:
    q: np.ndarray
    term_norms: list
    terms: Optional[list]
    bound: float
    bound_ok: bool


def solve_volterra_picard(
    system: VolterraSystem,
    max_terms: int = 500,
    tol: float = 1e-15,
    keep_terms: bool = False,
) -> PicardResult:
    """Partial sums of the Neumann series ``sum_k K^k F`` (trapezoid discretisation).

    Stops once a term's sup norm falls below ``tol``; raises
    :class:`NoConvergence` if ``max_terms`` terms do not get there.
    """
    W = _trapezoid_matrix(system, system.K)
    term = system.F.copy()
    q = term.copy()
    norms = [float(np.max(np.abs(term)))]
    kept = [term.copy()] if keep_terms else None
    for _ in range(max_terms):
        if norms[-1] < tol:
            break
        term = W @ term
        q += term
        norms.append(float(np.max(np.abs(term))))
        if keep_terms:
            kept.append(term.copy())
    else:
        if norms[-1] >= tol:
            raise NoConvergence(f"Neumann series term norm {norms[-1]:.3e} after {max_terms} terms")
    if not np.all(q > 0):
        raise NonpositiveQ(f"min q = {np.min(q):.3e} <= 0")
    bound = system.norm_bound()
    return PicardResult(q, norms, kept, bound, float(np.max(np.abs(q))) <= bound + BOUND_TOL)


def recover_p(q: np.ndarray, system: VolterraSystem):
    """``p = q' / q`` with ``q'(t) = F'(t) + K(t, t) q(t) + int_0^t K_t(t, s) q(s) ds``.

    Returns ``(p, q_prime)``.
    """
    q = np.asarray(q, dtype=float)
    if not np.all(q > 0):
        raise NonpositiveQ(f"min q = {np.min(q):.3e} <= 0")
    W = _trapezoid_matrix(system, system.Kt)
    qp = system.Fp + np.diag(system.K) * q + W @ q
    return qp / q, qp


@dataclass
class InverseResult:
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    q_prime: np.ndarray
    field: Optional[SolutionField]
    system: VolterraSystem
    report: dict
    verified: bool = True

    @property
    def stamp(self) -> str:
        return "VERIFIED" if self.verified else "UNVERIFIED"

    def p_function(self) -> SampledFunction:
        return SampledFunction(self.t, self.p)


def solve_inverse(
    problem: InverseProblem,
    nodes: int = DEFAULT_NODES,
    truncation: int = DEFAULT_TRUNCATION,
    method: str = "direct",
    override: bool = False,
    closure_tol: float = CLOSURE_TOL,
    x_grid=None,
    reconstruct: bool = True,
    picard_tol: float = 1e-15,
) -> InverseResult:
    """Full pipeline: assumptions, Volterra system, ``q``, ``p`` and ``u``.

    ``override=True`` runs despite failed assumptions and stamps the
    result UNVERIFIED.  Both Volterra paths are always run; ``method``
    selects which ``q`` is used downstream.
    """
    if method not in ("direct", "picard"):
        raise DomainError(f"method must be 'direct' or 'picard', got {method!r}")
    t = uniform_grid(problem.T, nodes)
    solver = InverseSolver(problem.cfg, truncation, problem.n0)
    data = solver._data(problem, t)
    assumptions = solver.check_assumptions(problem, t, data)
    if not override:
        _raise_on(assumptions)
    elif not assumptions.passed:
        log.warning("assumptions failed (%s); output is UNVERIFIED", ", ".join(c["tag"] for c in assumptions.failures))
    system = solver.assemble(problem, t, data)
    q_direct = solve_volterra_direct(system)
    picard = solve_volterra_picard(system, tol=picard_tol)
    q = q_direct if method == "direct" else picard.q
    p, qp = recover_p(q, system)
    report = {
        "assumptions": assumptions.as_dict(),
        "F_min": float(system.F.min()),
        "K_min": float(system.K[np.tril_indices(t.size)].min()),
        "neumann_bound": {
            "q_norm": float(np.max(np.abs(q))),
            "bound": picard.bound,
            "status": "PASS" if picard.bound_ok else "FAIL",
        },
        "picard": {"terms": len(picard.term_norms), "agreement": float(np.max(np.abs(q_direct - picard.q)))},
        "method": method,
    }
    field_u = None
    if reconstruct:
        xg = np.linspace(0.0, 1.0, 101) if x_grid is None else np.asarray(x_grid, dtype=float)
        dp = DirectProblem(problem.cfg, SampledFunction(t, p), problem.f, problem.phi, problem.T, problem.n0)
        field_u = solver.direct.solve(dp, xg, t, policy="permit")
        closure = float(np.max(np.abs(field_u.energy() - data[2])))
        report["closure"] = {"residual": closure, "tol": closure_tol, "status": "PASS" if closure <= closure_tol else "FAIL"}
    result = InverseResult(t, p, q, qp, field_u, system, report, verified=assumptions.passed)
    report["stamp"] = result.stamp
    if reconstruct and report["closure"]["status"] == "FAIL":
        raise ClosureFailure(f"overdetermination residual {report['closure']['residual']:.3e} > {closure_tol:g}", result)
    return result


def synthesize_energy(problem: DirectProblem, t_grid, truncation: int = DEFAULT_TRUNCATION):
    """``E(t) = int u dx`` and ``E'(t)`` from a series forward solve (no admissibility checks)."""
    solver = DirectSolver(problem.cfg, truncation, problem.n0)
    t = np.asarray(t_grid, dtype=float)
    phi_c = solver.initial_coefficients(_evaluate(problem.phi, solver.rule.nodes))
    v = solver.amplitudes(phi_c, problem.f, problem.p, t, problem.T)
    fn = solver.source_coefficients(problem.f, t)
    lam, I = solver.basis.lam, solver.basis.integral
    pv = time_function(problem.p)(t)
    vp = -(pv[:, None] + lam[None, :]) * v + fn
    return v @ I, vp @ I


def inverse_distance(res1: InverseResult, res2: InverseResult) -> dict:
    if not np.array_equal(res1.t, res2.t):
        raise DomainError("results must share the time grid")
    return {
        "dq": float(np.max(np.abs(res1.q - res2.q))),
        "dq_prime": float(np.max(np.abs(res1.q_prime - res2.q_prime))),
        "dp": float(np.max(np.abs(res1.p - res2.p))),
    }


def data_distance(pr1: InverseProblem, pr2: InverseProblem, t) -> dict:
    """Sup-norm distances: E in C^1 on ``t``, phi in C on [0, 1], f in C on [0, 1] x ``t``."""
    from .direct import source_matrix

    x = np.linspace(0.0, 1.0, 1001)
    E1, E2 = time_function(pr1.E)(t), time_function(pr2.E)(t)
    d1 = time_function(pr1.E_deriv)(t) if pr1.E_deriv is not None else differentiate_samples(E1, t)
    d2 = time_function(pr2.E_deriv)(t) if pr2.E_deriv is not None else differentiate_samples(E2, t)
    dE = float(np.max(np.abs(E1 - E2)) + np.max(np.abs(d1 - d2)))
    dphi = float(np.max(np.abs(_evaluate(pr1.phi, x) - _evaluate(pr2.phi, x))))
    tf = t[:: max(1, t.size // 64)]
    df = float(np.max(np.abs(source_matrix(pr1.f, x, tf) - source_matrix(pr2.f, x, tf))))
    return {"E_C1": dE, "phi": dphi, "f": df, "total": dE + dphi + df}


def stability_experiment(
    problem: InverseProblem,
    perturb: Callable[[InverseProblem, float], InverseProblem],
    epsilons: Sequence[float] = (1e-3, 1e-4, 1e-5),
    spread: float = 10.0,
    **solve_kw,
) -> dict:
    """Sweep ``perturb(problem, eps)`` and record ``|dq|, |dq'|, |dp|`` per unit ``eps``.

    PASS when, for each of q, q' and p, the largest ratio over the sweep is
    within a factor ``spread`` of the smallest.
    """
    solve_kw.setdefault("reconstruct", False)
    base = solve_inverse(problem, **solve_kw)
    rows = []
    for eps in epsilons:
        other = perturb(problem, eps)
        res = solve_inverse(other, **solve_kw)
        d = inverse_distance(base, res)
        dd = data_distance(problem, other, base.t)
        rows.append(
            {
                "eps": eps,
                **d,
                "data": dd,
                "ratio_q": d["dq"] / eps,
                "ratio_q_prime": d["dq_prime"] / eps,
                "ratio_p": d["dp"] / eps,
                "dq_per_data": d["dq"] / dd["total"] if dd["total"] > 0 else float("nan"),
            }
        )
    spreads = {}
    for key in ("ratio_q", "ratio_q_prime", "ratio_p"):
        vals = np.array([r[key] for r in rows])
        spreads[key] = float(vals.max() / vals.min()) if np.all(vals > 0) else float("inf")
    ok = all(s < spread for s in spreads.values())
    return {"rows": rows, "spreads": spreads, "status": "PASS" if ok else "FAIL"}


__all__ = [
    "InverseProblem",
    "InverseResult",
    "InverseSolver",
    "PicardResult",
    "VolterraSystem",
    "assemble_volterra",
    "check_assumptions",
    "data_distance",
    "differentiate_samples",
    "inverse_distance",
    "recover_p",
    "solve_inverse",
    "solve_volterra_direct",
    "solve_volterra_picard",
    "stability_experiment",
    "synthesize_energy",
    "uniform_grid",
]
