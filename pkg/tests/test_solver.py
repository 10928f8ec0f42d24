import json

import numpy as np
import pytest

from spaceform_dirichlet.config import ProblemConfig, load_config
from spaceform_dirichlet.curvature import parse_curvature
from spaceform_dirichlet.discretization import DiscreteField, OperatorConfig, build_domain, evaluate_residual
from spaceform_dirichlet.errors import ContinuationError, DomainError, PreconditionError
from spaceform_dirichlet.expressions import FieldExpression
from spaceform_dirichlet.solver import (
    NewtonConfig,
    auxiliary_path,
    constant_rhs,
    estimate_monitors,
    main_path,
    newton_solve,
    solve_pipeline,
    verify_subsolution,
    _discrete_G,
)
from spaceform_dirichlet.spaceform import SpaceFormModel

GM2 = parse_curvature("sigma(n)^(1/n)", 2)
NORTH = (0.0, 0.0, 1.0)
CONFIGS = "configs"


def _dome(d, c, amp=0.05):
    r2 = np.sum(d.y**2, axis=-1)
    return c * (1 + amp * (1 - r2 / d.chart_radius**2))


def test_newton_zero_iterations_at_solution():
    d = build_domain(NORTH, np.pi / 5, 9, 16)
    op = OperatorConfig(SpaceFormModel(0), GM2)
    f, _ = newton_solve(op, constant_rhs(0.8), DiscreteField.from_u(d, _dome(d, 0.8)))
    f2, rec = newton_solve(op, constant_rhs(0.8), f)
    assert rec.iterations == 0 and rec.converged
    assert f2 is f


def test_newton_constant_sphere_quadratic_tail():
    R = 1.25
    errs = []
    for n in (9, 17):
        d = build_domain(NORTH, np.pi / 5, n, 2 * (n - 1))
        f, rec = newton_solve(OperatorConfig(SpaceFormModel(0), GM2), constant_rhs(1 / R),
                              DiscreteField.from_u(d, _dome(d, 1 / R)))
        r = rec.residuals
        assert r[-1] <= 1e-10
        assert all(r[k + 1] <= 1.0 * r[k] ** 2 for k in range(len(r) - 3, len(r) - 1))
        assert all(s > 0 for s in rec.step_lengths)
        errs.append(np.max(np.abs(f.u - 1 / R)))
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_newton_rejects_nonconvex_start():
    d = build_domain(NORTH, 0.5, 9, 16)
    u = 1 - 0.5 * np.sum(d.y**2, axis=-1)
    with pytest.raises(PreconditionError):
        newton_solve(OperatorConfig(SpaceFormModel(0), GM2), constant_rhs(1.0), DiscreteField.from_u(d, u))


def test_verify_subsolution_examples():
    d = build_domain(NORTH, 0.5, 17, 32)
    c = 1.6
    rep = verify_subsolution(DiscreteField.from_u(d, c), SpaceFormModel(0), GM2, constant_rhs(c / 2))
    assert rep.verdict and rep.min_margin == pytest.approx(c / 2, abs=1e-5)
    # equality case: the discrete margin is the truncation error, either sign
    rep = verify_subsolution(DiscreteField.from_u(d, c), SpaceFormModel(0), GM2, constant_rhs(c))
    assert abs(rep.min_margin) < 1e-5
    bad = DiscreteField.from_u(d, 1 - 0.5 * np.sum(d.y**2, axis=-1))
    rep = verify_subsolution(bad, SpaceFormModel(0), GM2, constant_rhs(0.1))
    assert not rep.verdict and "cone violation" in rep.note and rep.worst_node is not None
    # exact jets: the pointwise inequality decides
    ex = FieldExpression.parse(str(c))
    rep = verify_subsolution(DiscreteField.from_u(d, c), SpaceFormModel(0), GM2, constant_rhs(c),
                             jets=ex.jets(d.center, d.y[d.interior_nodes]))
    assert rep.source == "analytic" and rep.verdict and abs(rep.min_margin) < 1e-13


def test_estimate_monitors_constant():
    d = build_domain(NORTH, 0.5, 17, 32)
    for K, c in ((0, 0.5), (0, 2.0), (-1, 1.5), (1, 0.7)):
        m = estimate_monitors(DiscreteField.from_u(d, c), SpaceFormModel(K))
        assert m["C0"] == pytest.approx(max(c, 1 / c), rel=1e-5)
        assert m["C1"] < 1e-5
        assert m["K0"] == pytest.approx(max(c, 1 / c), rel=1e-4)
        assert m["tau_min"] > 0
    with pytest.raises(PreconditionError):
        estimate_monitors(DiscreteField.from_u(d, 1 - 0.5 * np.sum(d.y**2, axis=-1)), SpaceFormModel(0))


def test_monitors_stabilize_under_refinement():
    ex = FieldExpression.parse("0.8 + 0.1*z1 + 0.05*z2^2")
    out = []
    for n in (17, 33):
        d = build_domain(NORTH, np.pi / 5, n, 2 * (n - 1))
        out.append(estimate_monitors(DiscreteField(ex.chart_derivatives(d.center, d.y)[0], d), SpaceFormModel(0)))
    for key in ("C0", "C1", "K0", "tau_min", "boundary_hessian_max"):
        assert abs(out[1][key] - out[0][key]) <= 0.02 * abs(out[1][key]), key


def _k0_problem(n_r=9, n_t=16, **kw):
    cfg = load_config(f"{CONFIGS}/sphere_k0.ini").with_grid(n_r, n_t)
    from dataclasses import replace

    return replace(cfg.build_problem(), **kw)


def test_pipeline_first_step_and_path_consistency():
    prob = _k0_problem()
    fld, rep = solve_pipeline(prob)
    acc = rep.accepted
    assert acc[0].phase == "auxiliary" and acc[0].t == 0.0 and acc[0].newton_iterations == 0
    phases = [r.phase for r in acc]
    assert phases.index("main") > 0
    for ph in ("auxiliary", "main"):
        ts = [r.t for r in acc if r.phase == ph]
        assert ts[0] == 0.0 and ts[-1] == 1.0 and np.all(np.diff(ts) > 0)
    assert all(r.kappa_min > 0 and r.min_convexity > 0 for r in acc)
    # auxiliary t = 1 and main t = 0 share the RHS eps xi(u)
    sub = prob.subsolution_field()
    idx = prob.domain.interior_nodes
    eps = rep.constants["epsilon"]
    aux = auxiliary_path(prob.model, prob.spec, _discrete_G(sub, prob.model, prob.spec), sub.u[idx], eps)
    mp = main_path(prob.model, prob.spec, prob.psi, eps)
    r1, _, _ = evaluate_residual(fld, *aux.at(1.0), jacobian=False)
    r0, _, _ = evaluate_residual(fld, *mp.at(0.0), jacobian=False)
    assert np.max(np.abs(r1 - r0)) <= 1e-14
    assert rep.outcome == "success" and rep.subsolution["verdict"]


def test_spherical_subsolution_margin_positive():
    cfg = load_config(f"{CONFIGS}/cap_k1.ini").with_grid(9, 16)
    fld, rep = solve_pipeline(cfg.build_problem())
    sph = [r for r in rep.accepted if r.phase == "spherical"]
    assert sph and sph[-1].t == 1.0
    assert all(r.subsolution_margin > 1e-12 for r in sph)
    assert {r.phase for r in rep.accepted} == {"euclidean-auxiliary", "spherical", "release"}
    assert rep.accepted[-1].phase == "release" and rep.accepted[-1].t == 1.0
    assert np.max(np.abs(fld.u - 1 / np.tan(np.pi / 5))) < 1e-4


def test_pipeline_path_errors():
    prob = _k0_problem()
    with pytest.raises(DomainError):
        solve_pipeline(prob, "spherical")
    with pytest.raises(DomainError):
        solve_pipeline(prob, "nonsense")
    cap = load_config(f"{CONFIGS}/cap_k1.ini").with_grid(9, 16).build_problem()
    with pytest.raises(DomainError):
        solve_pipeline(cap, "main")


def test_subsolution_failure_names_node():
    prob = _k0_problem(psi=constant_rhs(2.0))
    with pytest.raises(PreconditionError) as info:
        solve_pipeline(prob)
    assert info.value.node is not None


def test_continuation_failure_keeps_last_field():
    # Newton may not iterate, so every step past t = 0 is rejected
    prob = _k0_problem(newton=NewtonConfig(max_iterations=0), min_step=0.1)
    with pytest.raises(ContinuationError) as info:
        solve_pipeline(prob)
    exc = info.value
    assert exc.field is not None and exc.report.outcome == "failed"
    assert exc.report.failed_t is not None and exc.report.failure_reason
    acc = exc.report.accepted
    assert len(acc) == 1 and acc[0].t == 0.0
    assert any(not r.accepted and r.reason for r in exc.report.records)
    lines = [json.loads(x) for x in exc.report.to_jsonl("T").splitlines()]
    assert lines[-1]["outcome"] == "failed"


def test_report_jsonl_is_strict_json():
    _, rep = solve_pipeline(_k0_problem())
    text = rep.to_jsonl("2026-01-01T00:00:00Z")
    lines = text.splitlines()
    recs = [json.loads(x, parse_constant=lambda c: pytest.fail(f"non-strict JSON {c}")) for x in lines]
    assert recs[0] == {"type": "header", "timestamp": "2026-01-01T00:00:00Z"}
    assert recs[-1]["type"] == "summary" and recs[-1]["outcome"] == "success"
    steps = [r for r in recs if r["type"] == "step"]
    assert len(steps) == len(rep.records)
    for key in ("t", "newton_iterations", "residual", "min_convexity", "kappa_min", "kappa_max", "u_min",
                "u_max", "grad_max"):
        assert key in steps[0]
    for key in ("C0", "C1", "K0", "tau_min"):
        assert key in recs[-1]["diagnostics"]


def test_config_problem_uses_exact_subsolution_jets():
    cfg = ProblemConfig(model=0, curvature="sigma(2)^(1/2)", psi="1", radius=0.5, boundary="1", n_r=9, n_theta=16)
    prob = cfg.validate().build_problem()
    assert prob.subsolution_jets is not None
    assert np.allclose(prob.subsolution_jets.value, 1.0)
