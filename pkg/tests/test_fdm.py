import numpy as np
import pytest

from heatdyn.direct import DirectProblem, boundary_residuals, solve_direct
from heatdyn.errors import DomainError
from heatdyn.fdm import FdmScheme, discrete_max_principle, pde_residual, solve_fdm
from problems import CFG, T, mixture, modes, signed_source, smooth_p

Y = modes()
LAM1 = float(Y[1].lam)
SINGLE = DirectProblem(CFG, 0.0, None, Y[1], T, 0)


def exact(field):
    return np.exp(-LAM1 * field.t_grid)[None, :] * Y[1](field.x_grid)[:, None]


def test_scheme_validation():
    with pytest.raises(DomainError):
        FdmScheme(8, 100)
    with pytest.raises(DomainError):
        FdmScheme(100, 100, theta=0.3)


def test_zero_data():
    u = solve_fdm(DirectProblem(CFG, 0.0, None, 0.0, T, 0), FdmScheme(32, 32))
    assert np.all(u.values == 0)
    assert u.provenance == "FDM"


def test_second_order_in_space():
    errs = []
    for nx in (25, 50, 100, 200):
        u = solve_fdm(SINGLE, FdmScheme(nx, 8000, 0.5), store_every=100)
        errs.append(np.max(np.abs(u.values - exact(u))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates >= 1.7) & (rates <= 2.3)), rates


def test_dynamic_boundary_residual_shrinks():
    res = []
    for nx in (100, 200, 400):
        u = solve_fdm(SINGLE, FdmScheme(nx, 10 * nx, 0.5))
        res.append(boundary_residuals(u, CFG, SINGLE)["dynamic"])
    assert res[-1] < 1e-4
    assert res[0] / res[1] > 3 and res[1] / res[2] > 3


def test_pde_residual():
    z = DirectProblem(CFG, 0.0, None, 0.0, T, 0)
    assert pde_residual(solve_fdm(z, FdmScheme(32, 32)), z) == 0.0
    x = np.linspace(0, 1, 201)
    res = [pde_residual(solve_direct(SINGLE, x, np.linspace(0, T, n + 1)), SINGLE) for n in (50, 100, 200)]
    assert res[0] > res[1] > res[2]
    field = solve_direct(SINGLE, x, np.linspace(0, T, 201))
    base = pde_residual(field, SINGLE)
    field.values[100, 100] += 0.1
    assert pde_residual(field, SINGLE) > 10 * base


def test_discrete_max_principle_backward_euler():
    for seed in range(3):
        rng = np.random.default_rng(300 + seed)
        phi = mixture({0: rng.normal(), 2: 0.3 * rng.normal(), 3: 0.1 * rng.normal()})
        pr = DirectProblem(CFG, smooth_p(rng), signed_source(rng, -1.0), phi, T, 1)
        u = solve_fdm(pr, FdmScheme(100, 400, 1.0))
        assert discrete_max_principle(u)["status"] == "PASS"


def test_store_every_keeps_last_level():
    u = solve_fdm(SINGLE, FdmScheme(32, 100), store_every=30)
    assert u.t_grid[-1] == pytest.approx(T) and u.t_grid.size == 5
