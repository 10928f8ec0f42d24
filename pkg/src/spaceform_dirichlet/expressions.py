"""Small arithmetic grammar for right-hand sides, boundary data and subsolutions.

Accepted: numbers, + - * / ^ (or **), parentheses, the constants pi and e,
the variables y1 y2 (gnomonic chart), z1 z2 z3 (point of S^2) and u, and the
functions exp log sqrt sin cos tan sinh cosh tanh arctan cot coth.

Expressions are compiled through sympy so that derivatives (in u for psi, in
the chart coordinates for fields) are exact.
"""

from __future__ import annotations

import ast
from functools import cached_property
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .discretization import GNOMONIC, PROJECTIVE, chart_jet, tangent_basis
from .errors import DomainError

Y1, Y2, Z1, Z2, Z3, U = sp.symbols("y1 y2 z1 z2 z3 u", real=True)
VARIABLES = {"y1": Y1, "y2": Y2, "z1": Z1, "z2": Z2, "z3": Z3, "u": U}
FUNCTIONS = {
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "arctan": sp.atan,
    "cot": sp.cot,
    "coth": sp.coth,
}
CONSTANTS = {"pi": sp.pi, "e": sp.E}


def _to_sympy(node):
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(
        node.value, bool
    ):
        return sp.Integer(node.value) if isinstance(node.value, int) else sp.Float(repr(node.value))
    if isinstance(node, ast.Name):
        if node.id in VARIABLES:
            return VARIABLES[node.id]
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise DomainError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _to_sympy(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _to_sympy(node.left), _to_sympy(node.right)
        ops = {ast.Add: sp.Add, ast.Sub: lambda x, y: x - y, ast.Mult: sp.Mul,
               ast.Div: lambda x, y: x / y, ast.Pow: sp.Pow}
        for kind, fn in ops.items():
            if isinstance(node.op, kind):
                return fn(a, b)
        raise DomainError(f"operator {type(node.op).__name__} not allowed")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None or len(node.args) != 1:
            raise DomainError(f"unknown function or arity: {node.func.id!r}")
        return fn(_to_sympy(node.args[0]))
    raise DomainError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_expression(text: str) -> sp.Expr:
    """Parse ``text`` into a sympy expression over the whitelisted names."""
    src = str(text).strip().replace("^", "**")
    if not src:
        raise DomainError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _to_sympy(tree)


def _lambdify(args, expr):
    f = sp.lambdify(args, expr, modules="numpy")

    def call(*xs):
        shape = np.broadcast(*xs).shape
        return np.broadcast_to(np.asarray(f(*xs), dtype=float), shape).copy()

    return call


def _sphere_in_chart(center, kind=GNOMONIC):
    c, e1, e2 = tangent_basis(center)
    q = Y1**2 + Y2**2
    if kind == GNOMONIC:
        mu = sp.sqrt(1 + q)
        z = [(Y1 * e1[k] + Y2 * e2[k] + c[k]) / mu for k in range(3)]
    elif kind == PROJECTIVE:
        mu = 4 + q
        z = [(4 * Y1 * e1[k] + 4 * Y2 * e2[k] + (4 - q) * c[k]) / mu for k in range(3)]
    else:
        raise DomainError(f"unknown chart kind {kind!r}")
    return mu, z


@dataclass(frozen=True)
class RhsExpression:
    """psi(z, u) (chart coordinates y1, y2 also allowed) with its u-derivative."""

    text: str
    expr: sp.Expr = field(repr=False, compare=False)

    @classmethod
    def parse(cls, text) -> "RhsExpression":
        return cls(str(text).strip(), parse_expression(text))

    @property
    def depends_on_u(self) -> bool:
        return U in self.expr.free_symbols

    @cached_property
    def _fns(self):
        args = (Y1, Y2, Z1, Z2, Z3, U)
        return _lambdify(args, self.expr), _lambdify(args, sp.diff(self.expr, U))

    def __call__(self, z, y, u):
        """(psi, d psi / du) at points z (N, 3), y (N, 2), values u (N,)."""
        f, df = self._fns
        a = (y[:, 0], y[:, 1], z[:, 0], z[:, 1], z[:, 2], np.asarray(u, dtype=float))
        return f(*a), df(*a)


@dataclass(frozen=True)
class FieldExpression:
    """A function of position (no u) used for boundary data and subsolutions."""

    text: str
    expr: sp.Expr = field(repr=False, compare=False)

    @classmethod
    def parse(cls, text) -> "FieldExpression":
        expr = parse_expression(text)
        if U in expr.free_symbols:
            raise DomainError(f"field expression {text!r} may not depend on u")
        return cls(str(text).strip(), expr)

    @cached_property
    def _fn(self):
        return _lambdify((Y1, Y2, Z1, Z2, Z3), self.expr)

    def values(self, z, y):
        f = self._fn
        return f(y[:, 0], y[:, 1], z[:, 0], z[:, 1], z[:, 2])

    def chart_derivatives(self, center, y, kind=GNOMONIC):
        """Exact u~ = mu u, D u~ and D^2 u~ in the chart ``kind`` at points y.

        Chart variables y1, y2 inside the expression always mean gnomonic
        coordinates, so they are rewritten through z before differentiating.
        """
        mu, z = _sphere_in_chart(center, kind)
        expr = self.expr
        if kind != GNOMONIC and (Y1 in expr.free_symbols or Y2 in expr.free_symbols):
            c, e1, e2 = tangent_basis(center)
            h = sum(z[k] * c[k] for k in range(3))
            gy1 = sum(z[k] * e1[k] for k in range(3)) / h
            gy2 = sum(z[k] * e2[k] for k in range(3)) / h
            expr = expr.subs({Y1: gy1, Y2: gy2}, simultaneous=True)
        ut = mu * expr.subs({Z1: z[0], Z2: z[1], Z3: z[2]})
        grad = [sp.diff(ut, v) for v in (Y1, Y2)]
        hess = [[sp.diff(g, v) for v in (Y1, Y2)] for g in grad]
        fs = [_lambdify((Y1, Y2), e) for e in [ut, *grad, *hess[0], *hess[1]]]
        vals = [f(y[:, 0], y[:, 1]) for f in fs]
        g = np.stack(vals[1:3], axis=-1)
        H = np.stack(vals[3:7], axis=-1).reshape(-1, 2, 2)
        return vals[0], g, H

    def jets(self, center, y, kind=GNOMONIC):
        """Exact orthonormal-frame jets of u at chart points y."""
        return chart_jet(kind, y, *self.chart_derivatives(center, y, kind))
