import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatdyn.errors import GridMismatch, NonMonotoneGrid
from heatdyn.expansion import (
    QuadratureRule,
    SampledFunction,
    check_admissible,
    coefficient_vector,
    coefficients,
    inner_product,
    weighted_coefficient_sum,
    project_out,
    reconstruct,
    span_residual,
    validate_phi_class,
)
from heatdyn.spectral import ModeBasis, SpectralConfig, compute_modes

CFG = SpectralConfig(1.0, 0.0, 1.0)
BASIS = ModeBasis(CFG, 64, 0)
Y = compute_modes(CFG, 10)


def bump(with_derivatives=False):
    """x^3 (1-x)^3 with its y_0 component removed by a second boundary-compatible bump."""
    g1 = (
        lambda x: x**3 * (1 - x) ** 3,
        lambda x: 3 * x**2 * (1 - x) ** 3 - 3 * x**3 * (1 - x) ** 2,
        lambda x: 6 * x * (1 - x) ** 3 - 18 * x**2 * (1 - x) ** 2 + 6 * x**3 * (1 - x),
    )
    g2 = (
        lambda x: x**4 * (1 - x) ** 3,
        lambda x: 4 * x**3 * (1 - x) ** 3 - 3 * x**4 * (1 - x) ** 2,
        lambda x: 12 * x**2 * (1 - x) ** 3 - 24 * x**3 * (1 - x) ** 2 + 6 * x**4 * (1 - x),
    )
    c = inner_product(g1[0], Y[0]) / inner_product(g2[0], Y[0])
    parts = [lambda x, a=a, b=b: a(x) - c * b(x) for a, b in zip(g1, g2)]
    return parts if with_derivatives else parts[0]


def test_inner_products():
    assert inner_product(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    s = lambda x: np.sin(np.pi * x)
    assert inner_product(s, s) == pytest.approx(0.5, abs=1e-12)
    u5 = BASIS.biorthogonal(QuadratureRule().nodes)[:, BASIS.position(5)]
    rule = QuadratureRule()
    assert abs(rule.integrate(Y[3](rule.nodes) * u5)) < 1e-10


def test_sampled_function_checks():
    with pytest.raises(NonMonotoneGrid):
        SampledFunction(np.array([0.0, 0.5, 0.5, 1.0]), np.zeros(4))
    with pytest.raises(GridMismatch):
        SampledFunction(np.array([0.0, 1.0]), np.zeros(3))
    short = SampledFunction(np.linspace(0, 0.9, 50), np.zeros(50))
    with pytest.raises(GridMismatch):
        inner_product(short, 1.0)


def test_coefficients_of_eigenfunctions():
    c = coefficients(Y[1], BASIS)
    expect = np.zeros(c.values.size)
    expect[BASIS.position(1)] = 1.0
    assert np.max(np.abs(c.values - expect)) < 1e-10
    assert 0 not in c.coeffs and c[1] == pytest.approx(1.0, abs=1e-10)
    c2 = coefficients(lambda x: Y[1](x) + 2 * Y[2](x), BASIS)
    assert c2[1] == pytest.approx(1, abs=1e-10) and c2[2] == pytest.approx(2, abs=1e-10)
    assert np.all(coefficients(0.0, BASIS).values == 0)


def test_reconstruct_round_trip():
    x = np.linspace(0, 1, 1000)
    c = coefficients(Y[1], BASIS)
    assert np.max(np.abs(reconstruct(c, BASIS, x) - Y[1](x))) < 1e-9
    zero = coefficients(0.0, BASIS)
    assert np.all(reconstruct(zero, BASIS, x) == 0)


def test_reconstruction_converges_for_class_data():
    g = bump()
    errs = [span_residual(g, ModeBasis(CFG, n, 0)) for n in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]


def test_phi_class_examples():
    rep = validate_phi_class(lambda x: np.sin(float(Y[1].mu) * x), Y[0])
    assert not rep.passed and "f'(1)" in rep.failing
    assert validate_phi_class(0.0, Y[0]).passed
    g = bump()
    rep = validate_phi_class(g, Y[0])
    assert rep.passed, rep.as_dict()
    g, d1, d2 = bump(with_derivatives=True)
    assert validate_phi_class(g, Y[0], derivatives=(d1, d2)).passed
    assert validate_phi_class(lambda x: x**3 * (1 - x) ** 3, Y[0]).failing == ["(f,y_n0)"]


def test_project_out():
    g1 = lambda x: x**3 * (1 - x) ** 3
    g, c = project_out(g1, Y[0])
    assert c != 0
    assert abs(inner_product(g, Y[0])) < 1e-14
    # plain projection breaks the endpoint conditions since y_0(1) != 0
    assert not validate_phi_class(g, Y[0]).passed


def test_admissibility_routes():
    mix = lambda x: Y[1](x) - 0.4 * Y[3](x)
    rep = check_admissible(mix, BASIS)
    assert rep.admissible and rep.route == "modal_span"
    rep = check_admissible(bump(), BASIS)
    assert rep.admissible and rep.route == "phi_class"
    rep = check_admissible(lambda x: x, BASIS)
    assert not rep.admissible and rep.route == "none"


def test_weighted_coefficient_sum():
    assert weighted_coefficient_sum(coefficients(0.0, BASIS), BASIS) == 0.0
    assert weighted_coefficient_sum(coefficients(Y[1], BASIS), BASIS) == pytest.approx(float(Y[1].lam), rel=1e-9)
    g = bump()
    s64 = weighted_coefficient_sum(coefficients(g, BASIS), BASIS)
    b128 = ModeBasis(CFG, 128, 0)
    s128 = weighted_coefficient_sum(coefficients(g, b128), b128)
    assert abs(s128 - s64) <= 0.05 * s128


def test_quadrature_self_consistency():
    g = bump()
    fine = QuadratureRule(panels=128)
    assert np.max(np.abs(coefficient_vector(g, BASIS) - coefficient_vector(g, BASIS, fine))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(
    w=st.lists(st.floats(-3, 3), min_size=6, max_size=6),
    alpha=st.floats(-2, 2),
    beta=st.floats(-2, 2),
)
def test_linearity_and_span_round_trip(w, alpha, beta):
    f = lambda x: sum(wi * Y[i + 1](x) for i, wi in enumerate(w[:3]))
    g = lambda x: sum(wi * Y[i + 4](x) for i, wi in enumerate(w[3:]))
    h = lambda x: alpha * f(x) + beta * g(x)
    lhs = coefficient_vector(h, BASIS)
    rhs = alpha * coefficient_vector(f, BASIS) + beta * coefficient_vector(g, BASIS)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert span_residual(h, BASIS) < 1e-9
