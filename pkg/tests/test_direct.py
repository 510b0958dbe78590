import dataclasses
import warnings

import numpy as np
import pytest

from heatdyn.direct import (
    CumulativeIntegral,
    DirectProblem,
    DirectSolver,
    apriori_bound,
    boundary_residuals,
    consistency_residuals,
    mode_amplitude,
    parabolic_extremum_check,
    product_weights,
    solve_direct,
    stability_gap,
)
from heatdyn.errors import DomainError, GridTooCoarse, HypothesisViolation, ValidationError
from problems import CFG, T, mixture, modes, random_direct, separable, smooth_p

Y = modes()
X = np.linspace(0.0, 1.0, 101)
TG = np.linspace(0.0, T, 101)
LAM1 = float(Y[1].lam)


def single(p=0.0, f=None, phi=None):
    return DirectProblem(CFG, p, f, Y[1] if phi is None else phi, T, 0)


def class_bump():
    g1 = lambda x: x**3 * (1 - x) ** 3
    g2 = lambda x: x**4 * (1 - x) ** 3
    from heatdyn.expansion import inner_product

    c = inner_product(g1, Y[0]) / inner_product(g2, Y[0])
    return lambda x: g1(x) - c * g2(x)


def test_mode_amplitude_examples():
    t = np.linspace(0, T, 11)
    np.testing.assert_allclose(mode_amplitude(1, single(), t), np.exp(-LAM1 * t), atol=1e-13)
    assert abs(mode_amplitude(2, single(), 0.3)) < 1e-13
    np.testing.assert_allclose(mode_amplitude(1, single(p=1.7), t), np.exp(-(LAM1 + 1.7) * t), atol=1e-13)
    src = DirectProblem(CFG, 0.0, lambda x, t: Y[1](x) + 0 * t, 0.0, T, 0)
    np.testing.assert_allclose(mode_amplitude(1, src, t), -np.expm1(-LAM1 * t) / LAM1, atol=1e-14)


def test_cumulative_integral_and_weights():
    P = CumulativeIntegral(lambda t: np.cos(t), 2.0)
    s = np.linspace(0, 2, 37)
    np.testing.assert_allclose(P(s), np.sin(s), atol=1e-12)
    w0, w1 = product_weights(np.array([0.0, 1e-3, 0.7, 40.0]))
    # constants integrate exactly: w0 + w1 = (1 - exp(-z)) / z
    z = np.array([1e-3, 0.7, 40.0])
    np.testing.assert_allclose((w0 + w1)[1:], -np.expm1(-z) / z, rtol=1e-14)
    assert (w0 + w1)[0] == pytest.approx(1.0, abs=1e-15)


def test_single_mode_and_zero():
    u = solve_direct(single(), X, TG)
    exact = np.exp(-LAM1 * TG)[None, :] * Y[1](X)[:, None]
    assert np.max(np.abs(u.values - exact)) < 1e-9
    assert np.max(np.abs(u.values[0])) < 1e-10
    z = solve_direct(DirectProblem(CFG, 0.0, None, 0.0, T, 0), X, TG)
    assert np.all(z.values == 0)


def test_superposition():
    rng = np.random.default_rng(7)
    a, b = random_direct(rng), random_direct(rng)
    ab = dataclasses.replace(
        a,
        phi=lambda x: 2 * a.phi(x) - 3 * b.phi(x),
        f=lambda x, t: 2 * a.f(x, t) - 3 * b.f(x, t),
    )
    b = dataclasses.replace(b, p=a.p)
    ua, ub, uab = (solve_direct(pr, X, TG).values for pr in (a, b, ab))
    assert np.max(np.abs(uab - (2 * ua - 3 * ub))) < 1e-10


def test_boundary_residuals():
    x = np.linspace(0, 1, 201)
    u = solve_direct(single(), x, TG)
    res = boundary_residuals(u, CFG, single())
    assert res["left"] < 1e-6 and res["static"] < 1e-6
    z = solve_direct(DirectProblem(CFG, 0.0, None, 0.0, T, 0), x, TG)
    assert boundary_residuals(z, CFG) == {"left": 0.0, "static": 0.0, "dynamic": None}
    with pytest.raises(GridTooCoarse):
        boundary_residuals(solve_direct(single(), np.linspace(0, 1, 4), TG), CFG)


def test_policies():
    bad = DirectProblem(CFG, 0.0, None, lambda x: x * (1 - x) ** 3, T, 0)
    with pytest.raises(ValidationError):
        solve_direct(bad, X, TG)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = solve_direct(bad, X, TG, policy="project")
    assert u.metadata["phi"]["projected"]
    with pytest.raises(DomainError):
        solve_direct(bad, X, TG, policy="lenient")


def test_consistency_report():
    rep = consistency_residuals(single())
    assert rep["status"] == "PASS"
    rep = consistency_residuals(DirectProblem(CFG, 0.0, None, lambda x: 1 + x, T, 0))
    assert rep["status"] == "WARN" and rep["phi(0)"] == 1.0


def test_truncation_convergence():
    pr = DirectProblem(CFG, 1.0, None, class_bump(), T, 0)
    t = np.linspace(0.0, T, 21)
    sols = {n: DirectSolver(CFG, n).solve(pr, X, t).values for n in (16, 32, 64, 128)}
    diffs = [np.max(np.abs(sols[n] - sols[2 * n])) for n in (16, 32, 64)]
    assert diffs[0] > diffs[1] > diffs[2]


def test_exponential_decay():
    rng = np.random.default_rng(3)
    pr = dataclasses.replace(random_direct(rng), f=None)
    u = solve_direct(pr, X, TG)
    sup = np.max(np.abs(u.values), axis=0)
    assert np.all(np.diff(sup) <= 1e-14)


def test_stability_examples():
    base = random_direct(np.random.default_rng(11))
    u = solve_direct(base, X, TG)
    same = stability_gap(u, u, base, base)
    assert same["lhs"] == 0 and same["status"] == "PASS"
    eps = 1e-3
    pert = dataclasses.replace(base, phi=lambda x: base.phi(x) + eps * Y[1](x))
    rep = stability_gap(u, solve_direct(pert, X, TG), base, pert)
    assert rep["lhs"] <= eps * np.max(np.abs(Y[1](X))) + 1e-12 and rep["status"] == "PASS"
    g = separable({1: 1.0}, lambda t: 1.0 + 0 * t)
    pert = dataclasses.replace(base, f=lambda x, t: base.f(x, t) + eps * g(x, t))
    rep = stability_gap(u, solve_direct(pert, X, TG), base, pert)
    assert rep["status"] == "PASS"
    neg = dataclasses.replace(base, p=lambda t: -1.0 + 0 * t)
    with pytest.raises(HypothesisViolation):
        stability_gap(u, u, neg, neg)


def test_apriori_bound():
    for seed in range(5):
        pr = random_direct(np.random.default_rng(40 + seed))
        assert apriori_bound(solve_direct(pr, X, TG), pr)["status"] == "PASS"


def test_extremum_check_detects_violation():
    u = solve_direct(single(), X, TG)
    assert parabolic_extremum_check(u)["status"] == "PASS"
    u.values[50, 50] += 10.0
    assert parabolic_extremum_check(u)["status"] == "FAIL"


def test_metadata_diagnostics():
    u = solve_direct(single(), X, TG)
    assert u.truncation == 64 and u.provenance == "SERIES"
    assert u.metadata["weighted_coefficient_sum"] == pytest.approx(LAM1, rel=1e-9)
    assert u.metadata["majorant_tail"] < 1e-8
    np.testing.assert_allclose(u.energy(), np.exp(-LAM1 * TG) * Y[1].integral, atol=1e-14)
