import numpy as np
import pytest
import sympy as sp

from spaceform_dirichlet.curvature import parse_curvature
from spaceform_dirichlet.discretization import (
    DiscreteField,
    GNOMONIC,
    OperatorConfig,
    build_domain,
    chart_jet,
    covariant_jet,
    covariant_jets,
    evaluate_residual,
    gnomonic_metric,
)
from spaceform_dirichlet.errors import BoundaryStencilError, ConeViolationError, DomainError, HemisphereError
from spaceform_dirichlet.expressions import FieldExpression
from spaceform_dirichlet.geometry import frame_from_u
from spaceform_dirichlet.solver import constant_rhs
from spaceform_dirichlet.spaceform import SpaceFormModel

GM2 = parse_curvature("sigma(n)^(1/n)", 2)
NORTH = (0.0, 0.0, 1.0)
X = sp.symbols("x1:4", real=True)


def homogeneous_oracle(F, z):
    """Eigenvalues of Hess u + u I for u = F|S^2 with F 1-homogeneous: D^2 F on the tangent plane."""
    D2 = sp.lambdify(X, sp.hessian(F, X), "numpy")
    out = []
    for zk in z:
        H = np.array(D2(*zk), dtype=float)
        # orthonormal basis of the tangent plane
        B = np.linalg.svd(np.eye(3) - np.outer(zk, zk))[0][:, :2]
        out.append(np.linalg.eigvalsh(B.T @ H @ B))
    return np.array(out)


def test_build_domain_examples():
    d = build_domain(NORTH, np.pi / 4, 9, 16)
    assert d.chart_radius == pytest.approx(1.0)
    assert d.r.max() == pytest.approx(1.0)
    assert np.count_nonzero(d.boundary) == 16
    mu, sig, *_ = gnomonic_metric(np.zeros(2))
    assert mu == 1.0 and np.allclose(sig, np.eye(2))
    k = d.node(8, 0)
    assert np.allclose(d.y[k], [1.0, 0.0])
    assert d.mu[k] == pytest.approx(np.sqrt(2))
    assert np.allclose(d.sigma[k], np.diag([0.25, 0.5]))
    assert np.allclose(np.linalg.norm(d.z, axis=-1), 1.0)
    assert np.allclose(np.arccos(d.z[d.boundary] @ d.center), np.pi / 4)


@pytest.mark.parametrize(
    "args,exc",
    [
        ((np.pi / 2, 9, 16), HemisphereError),
        ((1.6, 9, 16), HemisphereError),
        ((0.0, 9, 16), DomainError),
        ((0.5, 2, 16), DomainError),
        ((0.5, 9, 15), DomainError),
        ((0.5, 9, 6), DomainError),
    ],
)
def test_build_domain_errors(args, exc):
    with pytest.raises(exc):
        build_domain(NORTH, *args)


def test_chart_identity_quadratic_at_origin():
    """u~ = a + y^T Q y / 2 gives Hess u + u I = Q at the centre (no extra a I)."""
    a, Q = 0.7, np.array([[1.3, 0.2], [0.2, 0.9]])
    j = chart_jet(GNOMONIC, np.zeros(2), a, np.zeros(2), Q)
    assert np.allclose(j.hessian + j.value * np.eye(2), Q)
    F = a * X[2] + sp.Rational(1, 2) * (
        Q[0, 0] * X[0] ** 2 + 2 * Q[0, 1] * X[0] * X[1] + Q[1, 1] * X[1] ** 2
    ) / X[2]
    assert np.allclose(homogeneous_oracle(F, [np.array(NORTH)])[0], np.linalg.eigvalsh(Q))


def test_chart_identity_random_points():
    rng = np.random.default_rng(0)
    y = rng.uniform(-0.8, 0.8, size=(40, 2))
    ex = FieldExpression.parse("1.2 + 0.3*z1 + 0.2*z1*z2 + 0.1*z3^2")
    ut, g, H = ex.chart_derivatives(NORTH, y)
    j = chart_jet(GNOMONIC, y, ut, g, H)
    conv = j.hessian + j.value[:, None, None] * np.eye(2)
    # 1-homogeneous extension of u: F = |x| u(x/|x|)
    r = sp.sqrt(X[0] ** 2 + X[1] ** 2 + X[2] ** 2)
    F = r * (sp.Rational(6, 5) + 0.3 * X[0] / r + 0.2 * X[0] * X[1] / r**2 + 0.1 * X[2] ** 2 / r**2)
    mu = np.sqrt(1 + np.sum(y * y, axis=-1))
    z = np.column_stack([y, np.ones(len(y))]) / mu[:, None]
    assert np.allclose(np.linalg.eigvalsh(conv), homogeneous_oracle(F, z), rtol=1e-11, atol=1e-12)
    # Hess u + u sigma = D^2 u~ / mu in chart components
    _, sig, _, sq, _ = gnomonic_metric(y)
    assert np.allclose(sq @ conv @ sq, H / mu[:, None, None], atol=1e-12)


def _jet_errors(text, n_r, n_t, R=0.6):
    d = build_domain(NORTH, R, n_r, n_t)
    ex = FieldExpression.parse(text)
    fld = DiscreteField(ex.chart_derivatives(NORTH, d.y)[0], d)
    num = covariant_jets(fld)
    exact = ex.jets(NORTH, d.y[d.interior_nodes])
    return (
        np.max(np.abs(num.gradient - exact.gradient)),
        np.max(np.abs(num.hessian - exact.hessian)),
    )


def test_jet_convergence_order():
    text = "1.2 + 0.3*z1 + 0.2*z1*z2 + 0.1*z3^2 + 0.05*exp(z2)"
    errs = [_jet_errors(text, n, 2 * (n - 1)) for n in (9, 17, 33)]
    for k in range(2):
        e = [x[k] for x in errs]
        orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert np.all(orders >= 1.9), orders
    assert errs[-1][1] < 1e-4


def test_boundary_stencil_error():
    d = build_domain(NORTH, 0.5, 5, 8)
    fld = DiscreteField.from_u(d, 2.0)
    with pytest.raises(BoundaryStencilError):
        covariant_jet(fld, d.node(4, 3))
    with pytest.raises(BoundaryStencilError):
        covariant_jet(fld, d.size)
    j = covariant_jet(fld, d.node(1, 2))
    assert np.allclose(j.value, 2.0)


def _residual_setup(n_r=9, n_t=16):
    d = build_domain((0.3, 0.1, 1.0), 0.5, n_r, n_t)
    ex = FieldExpression.parse("2 + 0.3*z1 + 0.2*z2^2")
    return d, DiscreteField(ex.chart_derivatives(d.center, d.y)[0], d)


def test_jacobian_matches_directional_fd():
    d, fld = _residual_setup()
    op = OperatorConfig(SpaceFormModel(0), GM2)

    def rhs(z, y, u):
        return 0.5 * u + z[:, 0] ** 2, 0.5 * np.ones_like(u)

    res, J, _ = evaluate_residual(fld, op, rhs)
    v = np.where(d.boundary, 0.0, np.cos(d.y[:, 0]) * (1 + d.y[:, 1]))
    h = 1e-6
    rp, _, _ = evaluate_residual(fld.with_values(fld.values_hp + h * v), op, rhs, jacobian=False)
    rm, _, _ = evaluate_residual(fld.with_values(fld.values_hp - h * v), op, rhs, jacobian=False)
    fd = (rp - rm) / (2 * h)
    Jv = J @ v
    assert np.max(np.abs(Jv - fd)) <= 1e-5 * np.max(np.abs(fd))
    # boundary rows are the identity
    b = d.boundary
    e = np.zeros(d.size)
    e[b] = 1.0
    assert np.allclose((J @ e)[b], 1.0)


def test_cone_violation_reports_node():
    d = build_domain(NORTH, 0.5, 9, 16)
    vals = np.array(d.mu * 2.0, dtype=np.longdouble)
    k = d.node(4, 5)
    vals[k] += 0.05
    with pytest.raises(ConeViolationError) as info:
        evaluate_residual(DiscreteField(vals, d), OperatorConfig(SpaceFormModel(0), GM2), constant_rhs(2.0))
    assert info.value.node == k


def test_residual_on_constant_solutions():
    out = []
    for n in (9, 17, 33):
        d = build_domain(NORTH, np.pi / 5, n, 2 * (n - 1))
        res, _, _ = evaluate_residual(
            DiscreteField.from_u(d, 1.5), OperatorConfig(SpaceFormModel(0), GM2), constant_rhs(1.5), jacobian=False
        )
        assert np.all(res[d.boundary] == 0)
        out.append(np.max(np.abs(res)))
    assert out[-1] < 1e-5
    assert np.all(np.log2(np.array(out[:-1]) / np.array(out[1:])) >= 1.9)


def test_witness_matches_curvature_sign():
    d = build_domain(NORTH, 0.6, 9, 16)
    rng = np.random.default_rng(4)
    seen = set()
    for _ in range(20):
        c = rng.normal(scale=0.8, size=3)
        ex = FieldExpression.parse(f"2 + {c[0]}*y1^2 + {c[1]}*y1*y2 + {c[2]}*y2^2")
        fld = DiscreteField(d.mu * ex.values(d.z, d.y), d)
        mins, _ = fld.convexity_witness()
        kap = frame_from_u(SpaceFormModel(0), covariant_jets(fld)).principal_curvatures
        assert np.array_equal(kap[:, 0] > 0, mins > 0)
        seen.add(bool((mins > 0).all()))
    assert seen == {True, False}
