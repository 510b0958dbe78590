"""Inline function descriptors.

A small arithmetic language over ``x``, ``t``, ``pi``, numeric literals,
``+ - * / ^`` (``**`` also accepted), ``sin cos exp sinh`` and ``eig(n)``,
the n-th eigenfunction of the configured spectral problem evaluated at x.
Expressions are parsed with :mod:`ast` and every node is whitelisted
before compilation.
"""
from __future__ import annotations

import ast
from functools import lru_cache

import numpy as np

from .errors import ParseError
from .spectral import SpectralConfig, compute_modes

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sinh": np.sinh}
CONSTANTS = {"pi": np.pi}
VARIABLES = ("x", "t")
MAX_EIG_INDEX = 512

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


@lru_cache(maxsize=32)
def _modes(cfg: SpectralConfig, count: int):
    return compute_modes(cfg, count)


class Expression:
    """Compiled descriptor; call as ``expr(x, t)``.

    >>> Expression("x^2 + t")(np.array([0.5]), 1.0)
    array([1.25])
    """

    def __init__(self, text: str, cfg: SpectralConfig | None = None, allowed=VARIABLES):
        if not isinstance(text, str) or not text.strip():
            raise ParseError("expression must be a non-empty string")
        self.text = text
        self.cfg = cfg
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ParseError(f"cannot parse {text!r}: {exc.msg}") from None
        self.variables = set()
        self.eig_indices = set()
        self._check(tree, set(allowed))
        if self.eig_indices and cfg is None:
            raise ParseError(f"{text!r} uses eig(n) but no spectral configuration was given")
        self._code = compile(tree, "<expr>", "eval")
        self._mode_count = max(self.eig_indices, default=-1) + 1

    def _check(self, tree, allowed):
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ParseError(f"{type(node).__name__} is not allowed in {self.text!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ParseError(f"only numeric literals are allowed, got {node.value!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.keywords or len(node.args) != 1:
                    raise ParseError(f"malformed call in {self.text!r}")
                name = node.func.id
                if name == "eig":
                    arg = node.args[0]
                    if not (isinstance(arg, ast.Constant) and type(arg.value) is int and 0 <= arg.value < MAX_EIG_INDEX):
                        raise ParseError("eig() takes one nonnegative integer literal")
                    self.eig_indices.add(arg.value)
                    if "x" not in allowed:
                        raise ParseError(f"eig(n) depends on x, which is not available here")
                elif name not in FUNCTIONS:
                    raise ParseError(f"unknown function {name!r}")
            if isinstance(node, ast.Name):
                name = node.id
                if name in FUNCTIONS or name == "eig" or name in CONSTANTS:
                    continue
                if name not in VARIABLES:
                    raise ParseError(f"unknown name {name!r} in {self.text!r}")
                if name not in allowed:
                    raise ParseError(f"{name!r} is not available in this descriptor (allowed: {sorted(allowed)})")
                self.variables.add(name)

    def __call__(self, x=0.0, t=0.0):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        modes = _modes(self.cfg, self._mode_count) if self._mode_count else ()

        def eig(n):
            return modes[n](x)

        env = {"__builtins__": {}, "x": x, "t": t, "eig": eig, **FUNCTIONS, **CONSTANTS}
        out = eval(self._code, env)  # noqa: S307 - tree whitelisted in _check
        return np.asarray(out, dtype=float) * np.ones(np.broadcast(x, t).shape)

    # role adapters used by the problem builders

    def of_x(self):
        return lambda x: self(x, 0.0)

    def of_t(self):
        return lambda t: self(0.0, t)

    def of_xt(self):
        return lambda x, t: self(x, t)

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse(text: str, cfg: SpectralConfig | None = None, role: str = "xt"):
    """Parse ``text`` for a role: ``"x"`` (phi), ``"t"`` (p, E) or ``"xt"`` (f)."""
    allowed = {"x": ("x",), "t": ("t",), "xt": VARIABLES}[role]
    expr = Expression(text, cfg, allowed)
    return {"x": expr.of_x, "t": expr.of_t, "xt": expr.of_xt}[role]()
