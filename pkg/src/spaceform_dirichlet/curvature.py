"""Curvature functions f on the positive cone built from elementary symmetric polynomials.

A curvature function is an expression tree whose leaves are ``sigma(k)`` (the
k-th elementary symmetric polynomial S_k, with S_0 = 1) and non-negative
constants, combined by sums, products, quotients and real powers.  Every node
returns its value together with the exact gradient in lambda.

Text syntax (``^`` and ``**`` both mean power, ``n`` is the dimension)::

    sigma(n)^(1/n)
    (sigma(2)/sigma(1))^(1)
    sigma(2)^(1/3) * (1 + 2*(sigma(3)/sigma(1))^(1/2))^(1/2) + sigma(1)
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConeViolationError, DomainError


def elementary_symmetric(lam: np.ndarray) -> np.ndarray:
    """All S_0..S_n of ``lam`` (last axis) by expanding prod_i (1 + lam_i x)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i : i + 1]
        e[..., 1 : i + 2] = e[..., 1 : i + 2] + li * e[..., 0 : i + 1]
    return e


def _check_cone(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        bad = np.argwhere(~(lam > 0).all(axis=-1)) if lam.ndim > 1 else None
        raise ConeViolationError(
            f"lambda outside the positive cone (min entry {np.min(lam)!r})",
            node=None if bad is None or len(bad) == 0 else tuple(bad[0]),
        )
    return lam


class Expr:
    """Base node; ``evaluate`` returns (value, gradient) over the last axis of lam."""

    def evaluate(self, lam, esym, esym_del):
        raise NotImplementedError

    def degree(self):
        """Homogeneity degree, or None when the node is not homogeneous."""
        raise NotImplementedError

    def has_top_sigma(self, n) -> bool:
        return False


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def evaluate(self, lam, esym, esym_del):
        shape = lam.shape[:-1]
        return np.full(shape, float(self.value)), np.zeros(lam.shape)

    def degree(self):
        return 0.0

    def __str__(self):
        return repr(float(self.value)) if self.value != int(self.value) else str(int(self.value))


@dataclass(frozen=True)
class Sigma(Expr):
    k: int

    def evaluate(self, lam, esym, esym_del):
        n = lam.shape[-1]
        if not 0 <= self.k <= n:
            raise DomainError(f"sigma({self.k}) undefined in dimension {n}")
        val = esym[..., self.k]
        if self.k == 0:
            return val, np.zeros(lam.shape)
        # dS_k/dlam_i = S_{k-1}(lam with lam_i removed)
        return val, esym_del[..., self.k - 1, :]

    def degree(self):
        return float(self.k)

    def has_top_sigma(self, n):
        return self.k == n

    def __str__(self):
        return f"sigma({self.k})"


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple

    def evaluate(self, lam, esym, esym_del):
        vals = [t.evaluate(lam, esym, esym_del) for t in self.terms]
        return sum(v for v, _ in vals), sum(g for _, g in vals)

    def degree(self):
        degs = [t.degree() for t in self.terms]
        if any(d is None for d in degs) or max(degs) - min(degs) > 1e-12:
            return None
        return degs[0]

    def has_top_sigma(self, n):
        return all(t.has_top_sigma(n) for t in self.terms)

    def __str__(self):
        return " + ".join(_wrap(t, Add) for t in self.terms)


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple

    def evaluate(self, lam, esym, esym_del):
        vals = [f.evaluate(lam, esym, esym_del) for f in self.factors]
        value = np.prod([v for v, _ in vals], axis=0)
        grad = np.zeros(lam.shape)
        for i, (_, gi) in enumerate(vals):
            others = np.prod([v for j, (v, _) in enumerate(vals) if j != i], axis=0) if len(vals) > 1 else 1.0
            grad = grad + np.asarray(others)[..., None] * gi
        return value, grad

    def degree(self):
        degs = [f.degree() for f in self.factors]
        return None if any(d is None for d in degs) else sum(degs)

    def has_top_sigma(self, n):
        return any(f.has_top_sigma(n) for f in self.factors)

    def __str__(self):
        return "*".join(_wrap(f, Mul) for f in self.factors)


@dataclass(frozen=True)
class Div(Expr):
    num: Expr
    den: Expr

    def evaluate(self, lam, esym, esym_del):
        a, ga = self.num.evaluate(lam, esym, esym_del)
        b, gb = self.den.evaluate(lam, esym, esym_del)
        if np.any(~(b > 0)):
            raise ConeViolationError("non-positive denominator in curvature function")
        return a / b, (ga * b[..., None] - a[..., None] * gb) / (b**2)[..., None]

    def degree(self):
        da, db = self.num.degree(), self.den.degree()
        return None if da is None or db is None else da - db

    def has_top_sigma(self, n):
        return self.num.has_top_sigma(n)

    def __str__(self):
        return f"{_wrap(self.num, Div)}/{_wrap(self.den, Div, right=True)}"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float

    def evaluate(self, lam, esym, esym_del):
        b, gb = self.base.evaluate(lam, esym, esym_del)
        if np.any(~(b > 0)):
            raise ConeViolationError("non-positive base under a real power")
        logb = np.log(b)
        val = np.exp(self.exponent * logb)
        dval = self.exponent * np.exp((self.exponent - 1.0) * logb)
        return val, dval[..., None] * gb

    def degree(self):
        d = self.base.degree()
        return None if d is None else d * self.exponent

    def has_top_sigma(self, n):
        return self.base.has_top_sigma(n) and self.exponent > 0

    def __str__(self):
        return f"{_wrap(self.base, Pow)}^({_fmt_num(self.exponent)})"


def _fmt_num(x):
    x = float(x)
    if x == int(x):
        return str(int(x))
    return repr(x)


def _wrap(node, parent, right=False):
    s = str(node)
    if isinstance(node, (Const, Sigma)):
        return s
    if parent is Add:
        return s
    if parent is Mul and isinstance(node, (Mul, Pow)):
        return s
    if parent is Div and not right and isinstance(node, (Mul, Pow)):
        return s
    if parent is Div and right and isinstance(node, Pow):
        return s
    return f"({s})"


@dataclass(frozen=True)
class CurvatureFunctionSpec:
    """A parsed curvature function for dimension ``n``."""

    expression: Expr
    n: int
    text: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("dimension must be at least 2")
        ones = np.ones((1, self.n))
        val = eval_f(self, ones)[0]
        if not np.isfinite(val) or val <= 0:
            raise DomainError(f"curvature function must be finite and positive at (1,...,1); got {val}")

    @property
    def homogeneous_degree(self):
        return self.expression.degree()

    @property
    def is_homogeneous_degree_one(self) -> bool:
        d = self.homogeneous_degree
        return d is not None and abs(d - 1.0) < 1e-12

    @property
    def vanishes_on_cone_boundary(self) -> bool:
        """True when every additive piece carries a positive power of S_n."""
        return self.expression.has_top_sigma(self.n)

    def __str__(self):
        return str(self.expression)


def _evaluate(spec, lam):
    lam = _check_cone(lam)
    if lam.shape[-1] != spec.n:
        raise DomainError(f"expected {spec.n} curvatures, got {lam.shape[-1]}")
    esym = elementary_symmetric(lam)
    n = spec.n
    # S_j of lam with entry i removed, stacked as (..., j, i)
    deleted = np.stack(
        [elementary_symmetric(np.delete(lam, i, axis=-1)) for i in range(n)], axis=-1
    )
    return spec.expression.evaluate(lam, esym, deleted)


def eval_f(spec: CurvatureFunctionSpec, lam) -> np.ndarray:
    """f(lambda) for lambda in the positive cone (last axis)."""
    return _evaluate(spec, lam)[0]


def grad_f(spec: CurvatureFunctionSpec, lam) -> np.ndarray:
    """Exact gradient (f_1, ..., f_n)."""
    return _evaluate(spec, lam)[1]


def eval_f_and_grad(spec: CurvatureFunctionSpec, lam):
    return _evaluate(spec, lam)


# ---------------------------------------------------------------------------
# parsing


def _const_value(node, n):
    """Fold a constant sub-expression (numbers, n, + - * / ^) to a float, or None."""
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "n":
        return float(n)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const_value(node.operand, n)
        if v is None:
            return None
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _const_value(node.left, n), _const_value(node.right, n)
        if a is None or b is None:
            return None
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return a**b
    return None


def _build(node, n):
    c = _const_value(node, n)
    if c is not None:
        if c < 0:
            raise DomainError("negative constants are not allowed in a curvature function")
        return Const(c)
    if isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in ("sigma", "S")) or len(node.args) != 1:
            raise DomainError("only sigma(k) calls are allowed")
        k = _const_value(node.args[0], n)
        if k is None or k != int(k) or not 0 <= k <= n:
            raise DomainError(f"sigma index must be an integer in [0, {n}]")
        return Sigma(int(k))
    if isinstance(node, ast.BinOp):
        op = node.op
        if isinstance(op, ast.Add):
            left, right = _build(node.left, n), _build(node.right, n)
            terms = (left.terms if isinstance(left, Add) else (left,)) + (
                right.terms if isinstance(right, Add) else (right,)
            )
            return Add(terms)
        if isinstance(op, ast.Mult):
            left, right = _build(node.left, n), _build(node.right, n)
            facs = (left.factors if isinstance(left, Mul) else (left,)) + (
                right.factors if isinstance(right, Mul) else (right,)
            )
            return Mul(facs)
        if isinstance(op, ast.Div):
            return Div(_build(node.left, n), _build(node.right, n))
        if isinstance(op, ast.Pow):
            e = _const_value(node.right, n)
            if e is None:
                raise DomainError("exponents must be constant")
            return Pow(_build(node.left, n), e)
        if isinstance(op, ast.Sub):
            raise DomainError("subtraction is only allowed inside constant sub-expressions")
    raise DomainError(f"unsupported syntax in curvature function: {ast.dump(node)}")


def parse_curvature(text: str, n: int) -> CurvatureFunctionSpec:
    """Parse the text syntax described in the module docstring."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"cannot parse curvature function {text!r}: {exc.msg}") from None
    return CurvatureFunctionSpec(_build(tree.body, n), n, text)


def quotient_family(n: int, pieces) -> CurvatureFunctionSpec:
    """Sum over l of S_n^{1/(n N_l)} prod_i (c_i + sum_k c_{i,k} S_{n,k}^{1/(n-k)})^{1/N_l}.

    ``pieces`` is a list; each piece is a list of (c_i, {k: c_ik}) factors, so
    N_l = len(piece) + 1.
    """
    terms = []
    for piece in pieces:
        N = len(piece) + 1
        factors = [Pow(Sigma(n), 1.0 / (n * N))]
        for c_i, coeffs in piece:
            inner = [Const(c_i)] if c_i > 0 else []
            for k, c_ik in sorted(coeffs.items()):
                if not 1 <= k <= n - 1:
                    raise DomainError("quotient index k must lie in [1, n-1]")
                if c_ik < 0:
                    raise DomainError("family coefficients must be non-negative")
                if c_ik > 0:
                    q = Pow(Div(Sigma(n), Sigma(k)), 1.0 / (n - k))
                    inner.append(q if c_ik == 1 else Mul((Const(c_ik), q)))
            if not inner:
                raise DomainError("each factor needs c_i + sum_k c_ik > 0")
            factors.append(Pow(Add(tuple(inner)) if len(inner) > 1 else inner[0], 1.0 / N))
        terms.append(Mul(tuple(factors)))
    expr = Add(tuple(terms)) if len(terms) > 1 else terms[0]
    return CurvatureFunctionSpec(expr, n, str(expr))


# ---------------------------------------------------------------------------
# structure-condition falsifier


@dataclass
class StructureReport:
    samples_requested: int
    samples_used: int
    samples_skipped: int
    sigma0_empirical: float
    growth_target: float
    growth_R: float | None
    growth_ok: bool
    concavity_max_eig: float
    concavity_ok: bool
    min_gradient: float


def _fd_hessian(spec, lam, rel_step):
    n = lam.shape[-1]
    H = np.empty(lam.shape + (n,))
    for j in range(n):
        h = rel_step * lam[..., j]
        e = np.zeros(n)
        e[j] = 1.0
        gp = grad_f(spec, lam + h[..., None] * e)
        gm = grad_f(spec, lam - h[..., None] * e)
        H[..., :, j] = (gp - gm) / (2 * h[..., None])
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def _scale_into_band(spec, directions, targets, s_lo=1e-8, s_hi=1e8, iters=200):
    """Bisect (in log scale) for s with f(s d) = target; f is increasing along rays."""
    lo = np.full(len(directions), np.log(s_lo))
    hi = np.full(len(directions), np.log(s_hi))
    f_hi = eval_f(spec, np.exp(hi)[:, None] * directions)
    f_lo = eval_f(spec, np.exp(lo)[:, None] * directions)
    ok = (f_lo <= targets) & (f_hi >= targets)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = eval_f(spec, np.exp(mid)[:, None] * directions)
        up = fm < targets
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return np.exp(0.5 * (lo + hi)), ok


def check_structure_conditions(
    spec: CurvatureFunctionSpec,
    sample_count: int,
    f_bounds,
    *,
    seed: int = 0,
    direction_box=(0.25, 4.0),
    growth_box=(0.5, 2.0),
    growth_target: float | None = None,
    growth_R_max: float = 1e8,
    concavity_tol: float = 1e-8,
    fd_rel_step: float = 5e-6,
) -> StructureReport:
    """Monte-Carlo falsifier for monotonicity, concavity and the growth conditions.

    Samples are rays drawn log-uniformly from ``direction_box`` and scaled so that
    f lands uniformly in [psi0, psi1].  Reports the smallest observed
    sum f_i lambda_i, the largest eigenvalue of finite-difference Hessians, and
    the smallest shift R with f(lambda_1, ..., lambda_n + R) >= C over a sample
    of ``growth_box``^n (None when no R up to ``growth_R_max`` works).
    """
    psi0, psi1 = f_bounds
    if sample_count < 1:
        raise DomainError("sample_count must be positive")
    if not 0 < psi0 < psi1:
        raise DomainError("need 0 < psi0 < psi1")
    rng = np.random.default_rng(seed)
    n = spec.n
    lo, hi = np.log(direction_box[0]), np.log(direction_box[1])
    dirs = np.exp(rng.uniform(lo, hi, size=(sample_count, n)))
    targets = rng.uniform(psi0, psi1, size=sample_count)
    scale, ok = _scale_into_band(spec, dirs, targets)
    lam = scale[:, None] * dirs
    fvals = np.where(ok, eval_f(spec, np.where(ok[:, None], lam, 1.0)), np.nan)
    ok &= (fvals >= psi0 * (1 - 1e-9)) & (fvals <= psi1 * (1 + 1e-9))
    lam = lam[ok]
    used = int(ok.sum())
    if used:
        _, g = eval_f_and_grad(spec, lam)
        sigma0 = float(np.min(np.sum(g * lam, axis=-1)))
        min_grad = float(np.min(g))
        H = _fd_hessian(spec, lam, fd_rel_step)
        cmax = float(np.max(np.linalg.eigvalsh(H)))
    else:
        sigma0, min_grad, cmax = math.nan, math.nan, math.nan

    C = 10.0 * psi1 if growth_target is None else growth_target
    box = rng.uniform(growth_box[0], growth_box[1], size=(256, n))
    corners = np.array(np.meshgrid(*[growth_box] * n)).reshape(n, -1).T
    box = np.vstack([box, corners])
    e_n = np.zeros(n)
    e_n[-1] = 1.0

    def worst(R):
        return float(np.min(eval_f(spec, box + R * e_n)))

    growth_R = None
    if worst(0.0) >= C:
        growth_R = 0.0
    elif worst(growth_R_max) >= C:
        a, b = 0.0, growth_R_max
        for _ in range(200):
            m = 0.5 * (a + b)
            if worst(m) >= C:
                b = m
            else:
                a = m
        growth_R = b

    return StructureReport(
        samples_requested=sample_count,
        samples_used=used,
        samples_skipped=sample_count - used,
        sigma0_empirical=sigma0,
        growth_target=C,
        growth_R=growth_R,
        growth_ok=growth_R is not None,
        concavity_max_eig=cmax,
        concavity_ok=bool(used) and cmax <= concavity_tol,
        min_gradient=min_grad,
    )
