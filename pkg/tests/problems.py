"""Problem generators shared by the test modules.

Data are built from finite eigenfunction mixtures so the exact series is
known; random draws use explicit seeds.
"""
from __future__ import annotations

import numpy as np

from heatdyn.direct import DirectProblem
from heatdyn.expansion import SampledFunction
from heatdyn.inverse import InverseProblem, synthesize_energy, uniform_grid
from heatdyn.spectral import SpectralConfig, compute_modes

CFG = SpectralConfig(1.0, 0.0, 1.0)
T = 0.5


def modes(cfg=CFG, count=16):
    return compute_modes(cfg, count)


def mixture(weights: dict, cfg=CFG):
    """``x -> sum_n w_n y_n(x)``."""
    ms = modes(cfg, max(weights) + 1)

    def g(x):
        x = np.asarray(x, dtype=float)
        return sum(w * ms[n](x) for n, w in weights.items()) * np.ones_like(x)

    return g


def separable(weights: dict, g, cfg=CFG):
    """``(x, t) -> g(t) sum_n w_n y_n(x)``."""
    h = mixture(weights, cfg)
    return lambda x, t: g(np.asarray(t, dtype=float)) * h(x)


def smooth_p(rng, floor=0.0):
    c0, c1, w = floor + rng.uniform(0.0, 2.0), rng.uniform(0.0, 1.0), rng.uniform(1.0, 6.0)
    return lambda t: c0 + c1 * np.sin(w * np.asarray(t, dtype=float)) ** 2


def random_direct(rng, cfg=CFG, n0=0, retained=range(1, 9), horizon=T):
    """Random mode mixtures for phi and f (time-varying weights), smooth p >= 0."""
    idx = [n for n in retained if n != n0]
    phi_w = {n: rng.normal() / (1 + n) for n in idx}
    f_w = {n: rng.normal() / (1 + n) for n in idx[:4]}
    om = rng.uniform(0.5, 4.0)
    hx = mixture(f_w, cfg)
    f = lambda x, t: (1.0 + 0.5 * np.cos(om * np.asarray(t, dtype=float))) * hx(x)
    return DirectProblem(cfg, smooth_p(rng), f, mixture(phi_w, cfg), horizon, n0)


def signed_source(rng, sign, cfg=CFG):
    """``f = sign * g(t) h(x)`` with ``h >= 0`` on [0, 1], built on modes {0, 2..5}
    (admissible for n0 = 1).  Draws are rejected until ``h >= 0``."""
    x = np.linspace(0.0, 1.0, 2001)
    while True:
        w = {0: 1.0, **{n: rng.uniform(-0.08, 0.08) for n in range(2, 6)}}
        h = mixture(w, cfg)
        if np.min(h(x)) >= 0.0:
            break
    amp, om = rng.uniform(0.5, 2.0), rng.uniform(0.5, 4.0)
    g = lambda t: amp * (1.2 + np.sin(om * np.asarray(t, dtype=float)))
    return separable(w, lambda t: sign * g(t), cfg)


def inverse_from_direct(problem: DirectProblem, nodes: int, exact_derivative: bool = True) -> InverseProblem:
    """Integral data ``E`` (and ``E'``) from a series forward solve on the inverse grid."""
    t = uniform_grid(problem.T, nodes)
    E, Ep = synthesize_energy(problem, t)
    return InverseProblem(
        problem.cfg,
        problem.f,
        problem.phi,
        SampledFunction(t, E),
        problem.T,
        problem.n0,
        SampledFunction(t, Ep) if exact_derivative else None,
    )


def mixed_inverse_data(pstar, cfg=CFG):
    """Mixed-mode phi and a nonnegative-coefficient source satisfying A1-A3."""
    phi = mixture({1: 1.0, 2: 0.3, 3: 0.1}, cfg)
    f = separable({1: 0.5, 2: 0.2}, lambda t: 1.0 + t, cfg)
    return DirectProblem(cfg, pstar, f, phi, T, 0)
