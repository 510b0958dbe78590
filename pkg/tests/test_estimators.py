import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from heatdyn.errors import GridMismatch
from heatdyn.estimators import CoefficientRecovery, EigenfunctionExpansion
from problems import CFG, T, modes

Y = modes()


def test_expansion_round_trip():
    x = np.linspace(0, 1, 401)
    X = np.vstack([Y[1](x), Y[2](x) - 0.5 * Y[4](x)])
    est = EigenfunctionExpansion(truncation=32).fit(X)
    C = est.transform(X)
    assert C.shape == (2, 32)
    assert C[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(est.inverse_transform(C) - X)) < 1e-7
    assert est.get_params()["truncation"] == 32
    assert clone(est).get_params() == est.get_params()


def test_expansion_checks():
    with pytest.raises(NotFittedError):
        EigenfunctionExpansion().transform(np.zeros((1, 10)))
    est = EigenfunctionExpansion(truncation=16).fit(np.zeros((1, 10)))
    with pytest.raises(GridMismatch):
        est.transform(np.zeros((1, 12)))
    with pytest.raises(GridMismatch):
        EigenfunctionExpansion(grid=np.linspace(0, 1, 5)).fit(np.zeros((1, 10)))


def test_coefficient_recovery():
    lam, I = float(Y[1].lam), Y[1].integral
    t = np.linspace(0, T, 801)
    E = I * np.exp(-(lam + 2.0) * t)
    est = CoefficientRecovery(phi=Y[1], nodes=512).fit(t, E, -(lam + 2.0) * E)
    assert est.stamp_ == "VERIFIED"
    assert np.max(np.abs(est.predict(np.linspace(0, T, 7)) - 2.0)) < 1e-4
    with pytest.raises(NotFittedError):
        CoefficientRecovery(phi=Y[1]).predict(t)
