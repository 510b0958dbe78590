"""Eigenpairs of the boundary-eigenparameter problem

    y'' + lam * y = 0,   y(0) = 0,   (a * lam + b) * y(1) = d * y'(1),

with ``a * d > 0``.  Eigenfrequencies are bracketed analytically and found
by bisection carried out in ``np.longdouble`` so that the characteristic
residual can be driven below 1e-10 even for n ~ 50, where one float64 ulp
of ``mu`` already moves the residual by ~7e-10.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, DomainError, ExcludedIndexError

LD = np.longdouble
PI_LD = LD("3.14159265358979323846264338327950288")

ZERO_MODE_TOL = 1e-12
MAX_BISECTIONS = 200
SINH_SCAN_STEP = 0.25


class Regime(enum.Enum):
    NEGATIVE_MODE = "negative_mode"  # b/d > 1: lambda_0 < 0
    ZERO_MODE = "zero_mode"  # b/d == 1: lambda_0 == 0
    ALL_POSITIVE = "all_positive"  # b/d < 1


class ModeKind(enum.Enum):
    SINH = "sinh"
    LINEAR = "linear"
    SIN = "sin"


class Branch(enum.Enum):
    POSITIVE = "positive"  # lambda = mu**2
    NEGATIVE = "negative"  # lambda = -mu**2


@dataclass(frozen=True)
class SpectralConfig:
    """Boundary coefficients ``a, b, d`` of the right-end condition."""

    a: float
    b: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "d"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if not self.a * self.d > 0:
            raise DomainError(f"a*d > 0 required, got a={self.a}, d={self.d}")

    @property
    def ratio(self) -> float:
        """``b / d``, which alone selects the regime."""
        return self.b / self.d

    @property
    def a_over_d(self) -> float:
        return self.a / self.d

    @property
    def regime(self) -> Regime:
        r = self.ratio
        if abs(r - 1.0) <= ZERO_MODE_TOL:
            return Regime.ZERO_MODE
        return Regime.NEGATIVE_MODE if r > 1.0 else Regime.ALL_POSITIVE


@dataclass(frozen=True)
class EigenMode:
    """One eigenpair with its closed-form L2 norm, integral and y(1).

    ``mu`` and ``lam`` are kept in extended precision; everything derived
    for vectorised evaluation uses float64.
    """

    index: int
    mu: np.longdouble
    lam: np.longdouble
    kind: ModeKind
    norm_sq: float
    integral: float
    boundary_value: float

    def __call__(self, x, deriv: int = 0):
        """Evaluate the eigenfunction (or a derivative up to order 3) without domain checks."""
        x = np.asarray(x, dtype=float)
        mu = float(self.mu)
        if self.kind is ModeKind.SIN:
            trig = (np.sin, np.cos, np.sin, np.cos)[deriv]
            sign = (1.0, 1.0, -1.0, -1.0)[deriv]
            return sign * mu**deriv * trig(mu * x)
        if self.kind is ModeKind.SINH:
            hyp = (np.sinh, np.cosh)[deriv % 2]
            return 2.0 * mu**deriv * hyp(mu * x)
        if deriv == 0:
            return x.copy()
        return np.full_like(x, 1.0 if deriv == 1 else 0.0)


def _ld(cfg: SpectralConfig):
    return LD(cfg.a) / LD(cfg.d), LD(cfg.b) / LD(cfg.d)


def characteristic_residual(cfg: SpectralConfig, mu, branch: Branch = Branch.POSITIVE) -> float:
    """Residual of the characteristic equation at frequency ``mu``.

    POSITIVE: ``(a/d mu^2 + b/d) sin mu - mu cos mu``;
    NEGATIVE: ``(b/d - a/d mu^2) sinh mu - mu cosh mu``.
    Evaluated in extended precision and returned as float.
    """
    if mu < 0:
        raise DomainError(f"mu must be nonnegative, got {mu}")
    m = LD(mu)
    ad, bd = _ld(cfg)
    if branch is Branch.POSITIVE:
        res = (ad * m * m + bd) * np.sin(m) - m * np.cos(m)
    else:
        res = (bd - ad * m * m) * np.sinh(m) - m * np.cosh(m)
    return float(res)


def _reduced(cfg, mu, branch):
    # residual / mu, continuous at 0 with value b/d - 1; same sign as the residual for mu > 0
    ad, bd = _ld(cfg)
    mu = np.asarray(mu, dtype=LD)
    safe = np.where(mu == 0, LD(1), mu)
    if branch is Branch.POSITIVE:
        s = np.where(mu == 0, LD(1), np.sin(safe) / safe)
        return (ad * mu * mu + bd) * s - np.cos(mu)
    s = np.where(mu == 0, LD(1), np.sinh(safe) / safe)
    return (bd - ad * mu * mu) * s - np.cosh(mu)


def _bisect(fn, lo, hi):
    """Vectorised bisection to full longdouble resolution (at most MAX_BISECTIONS halvings)."""
    lo = np.array(lo, dtype=LD)
    hi = np.array(hi, dtype=LD)
    flo, fhi = fn(lo), fn(hi)
    bad = np.sign(flo) * np.sign(fhi) > 0
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise BracketFailure(
            f"no sign change in [{float(lo[k])}, {float(hi[k])}] "
            f"(residuals {float(flo[k]):.3e}, {float(fhi[k]):.3e})"
        )
    for _ in range(MAX_BISECTIONS):
        mid = (lo + hi) / 2
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        fm = fn(mid)
        exact = fm == 0
        left = (np.sign(fm) == np.sign(flo)) & active & ~exact
        right = ~left & active & ~exact
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(right, mid, hi)
        fhi = np.where(right, fm, fhi)
        lo = np.where(exact & active, mid, lo)
        hi = np.where(exact & active, mid, hi)
    return np.where(np.abs(flo) <= np.abs(fhi), lo, hi)


def _sinh_root(cfg: SpectralConfig):
    mu_max = 10.0 + math.sqrt(cfg.b / cfg.a)
    grid = np.arange(1, int(mu_max / SINH_SCAN_STEP) + 1) * SINH_SCAN_STEP
    vals = _reduced(cfg, grid, Branch.NEGATIVE)
    hits = np.flatnonzero(vals <= 0)
    if hits.size == 0:
        raise BracketFailure(f"no negative-branch sign change in (0, {mu_max}]")
    k = hits[0]
    lo = 0.0 if k == 0 else grid[k - 1]
    fn = lambda m: _reduced(cfg, m, Branch.NEGATIVE)  # noqa: E731
    return _bisect(fn, [lo], [grid[k]])[0]


def _make_mode(index, mu, kind):
    if kind is ModeKind.LINEAR:
        return EigenMode(index, LD(0), LD(0), kind, 1.0 / 3.0, 0.5, 1.0)
    if kind is ModeKind.SINH:
        e, em = np.exp(mu), np.exp(-mu)
        norm_sq = (np.exp(2 * mu) - np.exp(-2 * mu)) / (2 * mu) - 2
        return EigenMode(index, mu, -mu * mu, kind, float(norm_sq), float((e + em - 2) / mu), float(e - em))
    norm_sq = LD(0.5) - np.sin(2 * mu) / (4 * mu)
    return EigenMode(
        index, mu, mu * mu, kind, float(norm_sq), float((1 - np.cos(mu)) / mu), float(np.sin(mu))
    )


def sin_brackets(cfg: SpectralConfig, indices):
    """Analytic brackets ``(pi n, pi n + width)`` for the sine-type frequencies."""
    n = np.asarray(indices, dtype=LD)
    width = PI_LD / 2 if cfg.ratio >= 0 else PI_LD
    return PI_LD * n, PI_LD * n + width


def compute_modes(cfg: SpectralConfig, count: int) -> list[EigenMode]:
    """Eigenmodes ``n = 0 .. count-1`` in increasing eigenvalue order."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    regime = cfg.regime
    modes = []
    first_sin = 0
    if regime is Regime.NEGATIVE_MODE:
        modes.append(_make_mode(0, _sinh_root(cfg), ModeKind.SINH))
        first_sin = 1
    elif regime is Regime.ZERO_MODE:
        modes.append(_make_mode(0, LD(0), ModeKind.LINEAR))
        first_sin = 1
    idx = np.arange(first_sin, count)
    if idx.size:
        lo, hi = sin_brackets(cfg, idx)
        # open bracket at 0 for the n = 0 sine mode; the reduced residual is finite there
        mus = _bisect(lambda m: _reduced(cfg, m, Branch.POSITIVE), lo, hi)
        modes.extend(_make_mode(int(n), m, ModeKind.SIN) for n, m in zip(idx, mus))
    return modes[:count]


def _check_unit(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(~np.isfinite(arr)):
        raise DomainError("x must lie in [0, 1]")
    return arr


def eval_eigenfunction(mode: EigenMode, x):
    return mode(_check_unit(x))


def eval_biorthogonal(mode: EigenMode, excluded: EigenMode, cfg: SpectralConfig, x):
    """Biorthogonal partner ``u_n`` of ``y_n`` with respect to the system without ``excluded``."""
    if mode.index == excluded.index:
        raise ExcludedIndexError(f"mode {mode.index} is the excluded index")
    if excluded.boundary_value == 0:
        raise DomainError("excluded mode has y(1) = 0")
    x = _check_unit(x)
    r = mode.boundary_value / excluded.boundary_value
    denom = mode.norm_sq + cfg.a_over_d * mode.boundary_value**2
    return (mode(x) - r * excluded(x)) / denom


def asymptotic_mu(cfg: SpectralConfig, n: int) -> float:
    """Two-term large-n approximation ``pi n + d / (a pi n)``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return math.pi * n + cfg.d / (cfg.a * math.pi * n)


class ModeBasis:
    """Modes ``0..truncation`` with one index excluded, evaluated in bulk.

    Columns of every matrix returned here follow ``self.indices`` (all
    indices except the excluded one).
    """

    def __init__(self, cfg: SpectralConfig, truncation: int = 64, excluded: int = 0):
        if excluded < 0 or excluded > truncation:
            raise DomainError(f"excluded index {excluded} outside 0..{truncation}")
        self.cfg = cfg
        self.truncation = truncation
        self.all_modes = compute_modes(cfg, truncation + 1)
        self.excluded = self.all_modes[excluded]
        if self.excluded.boundary_value == 0:
            raise DomainError("excluded mode has y(1) = 0")
        self.modes = [m for m in self.all_modes if m.index != excluded]
        self.indices = np.array([m.index for m in self.modes])
        self.mu = np.array([float(m.mu) for m in self.modes])
        self.lam = np.array([float(m.lam) for m in self.modes])
        self.norm_sq = np.array([m.norm_sq for m in self.modes])
        self.integral = np.array([m.integral for m in self.modes])
        self.boundary = np.array([m.boundary_value for m in self.modes])
        self.denom = self.norm_sq + cfg.a_over_d * self.boundary**2
        self.ratio = self.boundary / self.excluded.boundary_value
        self._sin_cols = np.array([m.kind is ModeKind.SIN for m in self.modes])

    @property
    def n0(self) -> int:
        return self.excluded.index

    def position(self, n: int) -> int:
        """Column of mode index ``n``."""
        hit = np.flatnonzero(self.indices == n)
        if hit.size == 0:
            raise ExcludedIndexError(f"index {n} not in basis")
        return int(hit[0])

    def eigenfunctions(self, x, deriv: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, len(self.modes)))
        if self._sin_cols.any():
            mu = self.mu[self._sin_cols]
            arg = np.outer(x, mu)
            trig = (np.sin, np.cos, np.sin, np.cos)[deriv](arg)
            out[:, self._sin_cols] = (1.0, 1.0, -1.0, -1.0)[deriv] * mu**deriv * trig
        for k in np.flatnonzero(~self._sin_cols):
            out[:, k] = self.modes[k](x, deriv)
        return out

    def biorthogonal(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y0 = self.excluded(x)
        return (self.eigenfunctions(x) - np.outer(y0, self.ratio)) / self.denom
