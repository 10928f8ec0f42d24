"""Seeded invariant suites behind ``spaceform-dirichlet verify``.

Each suite samples random jets, compares two independent computations and
reports the worst residual against its tolerance.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from . import operator as op_mod
from .curvature import parse_curvature
from .discretization import (
    GNOMONIC,
    PROJECTIVE,
    build_domain,
    chart_to_sphere,
    tangent_basis,
)
from .expressions import FieldExpression
from .geometry import ScalarJet2, frame_from_rho, frame_from_u, frame_from_v, rho_jet_from_u, u_jet_from_v
from .operator import dG_t_dt, evaluate_G, evaluate_G_t, linearize_G
from .spaceform import SpaceFormModel

MODELS = (-1, 0, 1)
FD_FUNCTIONS = ("sigma(1)", "sigma(2)^(1/2)", "sigma(n)^(1/n)", "sigma(2)/sigma(1)")
# u ranges well inside the admissible interval of each model
U_RANGE = {0: (0.5, 2.0), 1: (0.3, 2.0), -1: (1.2, 3.0)}


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


# ----------------------------------------------------------------------------- samplers


def random_symmetric(rng, count, n, scale=1.0):
    A = rng.normal(scale=scale, size=(count, n, n))
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def random_spd(rng, count, n, lo=0.3, hi=2.0):
    Q, _ = np.linalg.qr(rng.normal(size=(count, n, n)))
    lam = rng.uniform(lo, hi, size=(count, n))
    return (Q * lam[:, None, :]) @ np.swapaxes(Q, -1, -2)


def random_v_jets(rng, K, count, n) -> ScalarJet2:
    """Generic v-jets (not necessarily convex) inside the admissible range."""
    v = rng.uniform(0.2, 1.5, size=count)
    return ScalarJet2(v, rng.normal(scale=0.5, size=(count, n)), random_symmetric(rng, count, n))


def random_convex_u_jets(rng, K, count, n, grad_scale=0.3) -> ScalarJet2:
    """u-jets with Hess u + u I positive definite."""
    lo, hi = U_RANGE[K]
    u = rng.uniform(lo, hi, size=count)
    p = rng.normal(scale=grad_scale, size=(count, n))
    H = random_spd(rng, count, n) - u[:, None, None] * np.eye(n)
    return ScalarJet2(u, p, H)


# ----------------------------------------------------------------------------- suites


def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def suite_formulation_equivalence(rng, samples=200, tol=1e-10) -> SuiteResult:
    worst = 0.0
    for K in MODELS:
        model = SpaceFormModel(K)
        for n in (2, 3):
            jv = random_v_jets(rng, K, samples, n)
            ju = u_jet_from_v(model, jv)
            jr = rho_jet_from_u(model, ju)
            kv = frame_from_v(model, jv).principal_curvatures
            ku = frame_from_u(model, ju).principal_curvatures
            kr = frame_from_rho(model, jr).principal_curvatures
            worst = max(worst, _rel(ku, kr), _rel(kv, kr))
    return SuiteResult("formulation-equivalence", worst <= tol, worst, tol, f"{samples} jets x 3 models x n=2,3")


def suite_square_root(rng, samples=200, tol=1e-12) -> SuiteResult:
    worst = 0.0
    for K in MODELS:
        model = SpaceFormModel(K)
        for n in (2, 3):
            jv = random_v_jets(rng, K, samples, n)
            ju = u_jet_from_v(model, jv)
            for fr in (frame_from_v(model, jv), frame_from_u(model, ju), frame_from_rho(model, rho_jet_from_u(model, ju))):
                g, gam, gi = fr.metric, fr.sqrt_metric, fr.inv_sqrt_metric
                scale = np.maximum(1.0, np.abs(g).max(axis=(-2, -1)))[:, None, None]
                worst = max(worst, float(np.max(np.abs(gam @ gam - g) / scale)))
                worst = max(worst, float(np.max(np.abs(gam @ gi - np.eye(n)))))
    return SuiteResult("square-root-metric", worst <= tol, worst, tol)


def _shift(jet, du=0.0, dp=None, dH=None):
    return ScalarJet2(
        jet.value + du,
        jet.gradient if dp is None else jet.gradient + dp,
        jet.hessian if dH is None else jet.hessian + dH,
    )


def linearization_fd_error(model, spec, jet, h=1e-5) -> float:
    """Worst relative mismatch of (G^ij, G^s, G_u) against central differences."""
    co = linearize_G(model, spec, jet)
    n = jet.dim
    count = jet.value.shape[0]
    G = co.operator_value

    def floor(a):
        return np.maximum(np.abs(a), 1e-3 * np.maximum(1.0, np.abs(G)))

    fd_u = (evaluate_G(model, spec, _shift(jet, du=h)) - evaluate_G(model, spec, _shift(jet, du=-h))) / (2 * h)
    worst = float(np.max(np.abs(co.zeroth_order - fd_u) / floor(co.zeroth_order)))
    for i in range(n):
        e = np.zeros((count, n))
        e[:, i] = h
        fd = (evaluate_G(model, spec, _shift(jet, dp=e)) - evaluate_G(model, spec, _shift(jet, dp=-e))) / (2 * h)
        a = co.first_order[:, i]
        worst = max(worst, float(np.max(np.abs(a - fd) / floor(a))))
        for j in range(i, n):
            E = np.zeros((count, n, n))
            E[:, i, j] = E[:, j, i] = h
            fd = (evaluate_G(model, spec, _shift(jet, dH=E)) - evaluate_G(model, spec, _shift(jet, dH=-E))) / (2 * h)
            a = co.second_order[:, i, j] * (1.0 if i == j else 2.0)
            worst = max(worst, float(np.max(np.abs(a - fd) / floor(a))))
    return worst


def suite_linearization_fd(rng, samples=100, tol=1e-6) -> SuiteResult:
    worst = 0.0
    for K in MODELS:
        model = SpaceFormModel(K)
        for n in (2, 3):
            jet = random_convex_u_jets(rng, K, samples, n)
            for text in FD_FUNCTIONS:
                worst = max(worst, linearization_fd_error(model, parse_curvature(text, n), jet))
    return SuiteResult("linearization-fd", worst <= tol, worst, tol, f"{len(FD_FUNCTIONS)} functions")


def suite_deformation_monotone(rng, samples=100, tol=1e-6, sign_tol=-1e-10) -> SuiteResult:
    ts = np.linspace(0.0, 1.0, 11)
    h = 1e-5
    worst_fd, min_dt, worst_end = 0.0, np.inf, 0.0
    for n in (2, 3):
        spec = parse_curvature("sigma(n)^(1/n)", n)
        jet = random_convex_u_jets(rng, 1, samples, n)
        for t in ts:
            d = dG_t_dt(t, spec, jet)
            min_dt = min(min_dt, float(d.min()))
            if 0.0 < t < 1.0:
                fd = (evaluate_G_t(t + h, spec, jet) - evaluate_G_t(t - h, spec, jet)) / (2 * h)
                G = evaluate_G_t(t, spec, jet)
                worst_fd = max(worst_fd, float(np.max(np.abs(d - fd) / np.maximum(np.abs(d), 1e-3 * np.abs(G)))))
        for t, K in ((0.0, 0), (1.0, 1)):
            a, b = evaluate_G_t(t, spec, jet), evaluate_G(SpaceFormModel(K), spec, jet)
            worst_end = max(worst_end, _rel(a, b))
    ok = worst_fd <= tol and min_dt >= sign_tol and worst_end <= 1e-12
    detail = f"min dG/dt {min_dt:.3e}, endpoint mismatch {worst_end:.1e}"
    return SuiteResult("deformation-monotone", ok, worst_fd, tol, detail)


def suite_chart_identity(rng, tol=1e-13) -> SuiteResult:
    worst = 0.0
    for R in (0.3, np.pi / 5, 1.2):
        c = rng.normal(size=3)
        dom = build_domain(c / np.linalg.norm(c), R, 9, 16)
        s, sq, isq = dom.sigma, dom.sqrt_sigma, dom.inv_sqrt_sigma
        worst = max(worst, float(np.max(np.abs(sq @ sq - s))), float(np.max(np.abs(isq @ sq - np.eye(2)))))
    # cross-chart: the same analytic field seen from the gnomonic and projective charts
    c = rng.normal(size=3)
    c /= np.linalg.norm(c)
    ex = FieldExpression.parse("(1 + 0.2*z1*z2 + 0.1*z3^2) * cosh(0.1*y1)")
    y = rng.uniform(-0.6, 0.6, size=(40, 2))
    z = chart_to_sphere(GNOMONIC, c, y)
    _, e1, e2 = tangent_basis(c)
    h = z @ c
    x = 2.0 * np.stack([z @ e1, z @ e2], axis=-1) / (1.0 + h)[:, None]
    jg, jp = ex.jets(c, y), ex.jets(c, x, PROJECTIVE)
    eye = np.eye(2)
    cross = max(
        _rel(jp.value, jg.value),
        _rel(np.linalg.norm(jp.gradient, axis=-1), np.linalg.norm(jg.gradient, axis=-1)),
        _rel(np.linalg.eigvalsh(jp.hessian + jp.value[:, None, None] * eye),
             np.linalg.eigvalsh(jg.hessian + jg.value[:, None, None] * eye)),
    )
    ok = worst <= tol and cross <= 1e-12
    return SuiteResult("chart-identity", ok, worst, tol, f"cross-chart invariants {cross:.1e}")


SUITES = {
    "formulation-equivalence": suite_formulation_equivalence,
    "square-root-metric": suite_square_root,
    "linearization-fd": suite_linearization_fd,
    "deformation-monotone": suite_deformation_monotone,
    "chart-identity": suite_chart_identity,
}


@contextlib.contextmanager
def first_order_sign_flipped():
    """Test hook: flip the sign of one term of the gradient-slot coefficient."""
    old = op_mod._FIRST_ORDER_SIGN
    op_mod._FIRST_ORDER_SIGN = -old
    try:
        yield
    finally:
        op_mod._FIRST_ORDER_SIGN = old


def run_suites(seed: int = 0, names=None, *, inject_sign_error: bool = False) -> list[SuiteResult]:
    names = list(SUITES) if names is None else list(names)
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    rngs = {k: np.random.default_rng(s) for k, s in zip(SUITES, children)}
    ctx = first_order_sign_flipped() if inject_sign_error else contextlib.nullcontext()
    with ctx:
        return [SUITES[k](rngs[k]) for k in names]


__all__ = ["SuiteResult", "SUITES", "run_suites", "first_order_sign_flipped", "linearization_fd_error",
           "random_convex_u_jets", "random_v_jets"]
