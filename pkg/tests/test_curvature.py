import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import esym_enumerate, fd_gradient
from spaceform_dirichlet.curvature import (
    check_structure_conditions,
    elementary_symmetric,
    eval_f,
    eval_f_and_grad,
    grad_f,
    quotient_family,
    parse_curvature,
)
from spaceform_dirichlet.errors import ConeViolationError, DomainError

FUNCS = ["sigma(1)", "sigma(2)^(1/2)", "sigma(n)^(1/n)", "sigma(2)/sigma(1)", "sigma(n)^(1/n) + sigma(1)"]


def test_eval_examples():
    assert eval_f(parse_curvature("sigma(1)", 3), [1, 1, 1]) == pytest.approx(3)
    assert eval_f(parse_curvature("sigma(n)^(1/n)", 2), [1, 4]) == pytest.approx(2)
    assert eval_f(parse_curvature("sigma(2)^(1/2)", 3), [1, 2, 3]) == pytest.approx(np.sqrt(11))


def test_grad_examples():
    assert np.allclose(grad_f(parse_curvature("sigma(1)", 3), [0.3, 2, 5]), 1)
    assert np.allclose(grad_f(parse_curvature("sigma(n)^(1/n)", 2), [1, 4]), [1, 0.25])
    assert np.allclose(grad_f(parse_curvature("sigma(2)/sigma(1)", 3), [1, 1, 1]), 1 / 3)


@settings(max_examples=50, deadline=None)
@given(lam=arrays(float, st.integers(2, 5), elements=st.floats(0.01, 50.0)))
def test_esym_against_enumeration(lam):
    e = elementary_symmetric(lam)
    for k in range(lam.size + 1):
        assert e[k] == pytest.approx(esym_enumerate(lam, k), rel=1e-12)


@pytest.mark.parametrize("text", FUNCS)
@pytest.mark.parametrize("n", [2, 3, 4])
def test_grad_matches_fd(text, n):
    spec = parse_curvature(text, n)
    rng = np.random.default_rng(n)
    lam = np.exp(rng.uniform(np.log(0.2), np.log(5), size=(100, n)))
    g = grad_f(spec, lam)
    assert np.all(g > 0)
    for k in range(100):
        fd = fd_gradient(lambda x: float(eval_f(spec, x)), lam[k])
        assert np.allclose(g[k], fd, rtol=1e-6)


@pytest.mark.parametrize("text", FUNCS)
def test_permutation_symmetry(text):
    spec = parse_curvature(text, 4)
    rng = np.random.default_rng(1)
    lam = rng.uniform(0.1, 3, size=(50, 4))
    perm = lam[:, rng.permutation(4)]
    assert np.array_equal(eval_f(spec, lam), eval_f(spec, perm)) or np.allclose(
        eval_f(spec, lam), eval_f(spec, perm), rtol=1e-15
    )


@pytest.mark.parametrize("text", ["sigma(1)", "sigma(n)^(1/n)", "sigma(2)^(1/2)", "sigma(2)/sigma(1)"])
def test_euler_identity_degree_one(text):
    spec = parse_curvature(text, 3)
    assert spec.is_homogeneous_degree_one
    lam = np.random.default_rng(2).uniform(0.1, 4, size=(50, 3))
    f, g = eval_f_and_grad(spec, lam)
    assert np.allclose(np.sum(g * lam, axis=-1), f, rtol=1e-10)


def test_vanishes_on_cone_boundary():
    for text in ("sigma(n)^(1/n)", "sigma(n)^(1/n) * (1 + sigma(n)/sigma(1))^(1/2)"):
        spec = parse_curvature(text, 3)
        assert spec.vanishes_on_cone_boundary
        assert eval_f(spec, [1e-12, 1, 1]) < 1e-3
    assert not parse_curvature("sigma(1)", 3).vanishes_on_cone_boundary


def test_cone_violation_and_parse_errors():
    spec = parse_curvature("sigma(2)^(1/2)", 2)
    with pytest.raises(ConeViolationError):
        eval_f(spec, [1.0, -0.1])
    with pytest.raises(ConeViolationError):
        eval_f(spec, [1.0, np.nan])
    for bad in ("sigma(4)", "sigma(1) - sigma(2)", "foo(1)", "sigma(1)^sigma(1)", "-1*sigma(1)", "sigma(1"):
        with pytest.raises(DomainError):
            parse_curvature(bad, 3)


def test_quotient_family():
    spec = quotient_family(3, [[(1.0, {1: 1.0, 2: 0.5})], [(0.0, {2: 1.0})]])
    lam = np.array([0.5, 1.0, 2.0])
    e = [esym_enumerate(lam, k) for k in range(4)]
    S = lambda k: e[k]
    f1 = S(3) ** (1 / 6) * (1 + (S(3) / S(1)) ** 0.5 + 0.5 * (S(3) / S(2))) ** 0.5
    f2 = S(3) ** (1 / 6) * (S(3) / S(2)) ** 0.5
    assert eval_f(spec, lam) == pytest.approx(f1 + f2, rel=1e-13)
    assert spec.homogeneous_degree is None  # c_1 = 1 mixes degrees
    assert quotient_family(3, [[(0.0, {2: 1.0})]]).is_homogeneous_degree_one


def test_structure_report():
    r = check_structure_conditions(parse_curvature("sigma(1)", 2), 200, (0.5, 2.0))
    # degree one: sum f_i lambda_i = f, so the empirical sigma_0 is the smallest sampled f >= psi0
    assert 0.5 <= r.sigma0_empirical < 0.55
    assert r.concavity_ok and r.growth_ok
    q = check_structure_conditions(parse_curvature("sigma(2)/sigma(1)", 2), 200, (0.5, 2.0))
    assert not q.growth_ok and q.growth_R is None
    g = check_structure_conditions(parse_curvature("sigma(n)^(1/n)", 3), 200, (0.5, 2.0))
    assert g.concavity_max_eig <= 1e-8
    with pytest.raises(DomainError):
        check_structure_conditions(parse_curvature("sigma(1)", 2), 10, (2.0, 1.0))


def test_structure_detects_convex_function():
    # S_2 (not a square root) is not concave: the falsifier must say so
    r = check_structure_conditions(parse_curvature("sigma(2)", 2), 200, (0.5, 2.0))
    assert not r.concavity_ok
