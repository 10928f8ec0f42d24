"""Damped Newton with a convexity safeguard and homotopy continuation in t.

Three continuation paths are provided, all written for the unknown u on the
charted grid (v = eta^{-1}(u) is only used for the comparison check):

* ``auxiliary``  G[u] = (t eps + (1 - t) psi_sub / xi(u_sub)) xi(u)
* ``main``       G[u] = t psi(z, u) + (1 - t) eps xi(u)
* ``spherical``  G^t[u] = (1 - T) delta2 u^2 + T (psi(z, u) - eps),  T = t^p

``psi_sub`` is the discrete operator applied to the subsolution, so the
auxiliary path starts at an exact discrete solution.  For K = 1 the pipeline is
auxiliary (Euclidean, eps = delta2), then spherical, then a release phase
G[u] = psi - (1 - s) eps that removes the eps offset left at the end of the
spherical path.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from .curvature import CurvatureFunctionSpec
from .discretization import (
    ChartedDomain,
    DiscreteField,
    OperatorConfig,
    covariant_jets,
    evaluate_residual,
)
from .errors import (
    ConeViolationError,
    ContinuationError,
    DomainError,
    NonConvergenceError,
    PreconditionError,
)
from .geometry import frame_from_u
from .operator import evaluate_G
from .spaceform import DeformedModel, SpaceFormModel, eta_inverse, xi_of_u

log = logging.getLogger(__name__)

SUBSOLUTION_TOL = -1e-10
COMPARISON_TOL = -1e-8
PATHS = ("auxiliary", "main", "spherical")


@dataclass(frozen=True)
class NewtonConfig:
    max_iterations: int = 30
    tolerance: float = 1e-10
    armijo: float = 1e-4
    max_halvings: int = 30
    safeguard: float = 0.1


@dataclass(frozen=True)
class HomotopyConfig:
    """Path kind, its constants and the step-size policy."""

    path: str
    epsilon: float
    delta2: float | None = None
    delta1: float = 0.05
    T_exponent: int | None = None
    initial_step: float = 0.25
    min_step: float = 1e-4
    max_step: float = 1.0
    easy_iterations: int = 4
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.path not in PATHS + ("release",):
            raise DomainError(f"unknown path {self.path!r}; expected one of {PATHS}")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.path == "spherical":
            if self.delta2 is None or not self.delta2 > 0:
                raise DomainError("the spherical path needs delta2 > 0")
            if self.T_exponent is None or self.T_exponent < 1:
                raise DomainError("the spherical path needs an integer T exponent >= 1")
        if not 0 < self.min_step <= self.initial_step <= self.max_step <= 1:
            raise DomainError("step sizes must satisfy 0 < min <= initial <= max <= 1")

    def T(self, t):
        return t ** self.T_exponent


# ----------------------------------------------------------------------------- problems

RhsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]


def constant_rhs(values) -> RhsFn:
    """RHS that ignores u; ``values`` is a scalar or one value per interior node."""

    def rhs(z, y, u):
        v = np.broadcast_to(np.asarray(values, dtype=float), u.shape).copy()
        return v, np.zeros_like(u)

    return rhs


@dataclass(frozen=True, eq=False)
class PathProblem:
    """A one-parameter family t -> (operator, RHS) with fixed boundary data."""

    kind: str
    model: object
    spec: CurvatureFunctionSpec
    at: Callable[[float], tuple]
    subsolution_rhs_margin: Callable[[float, DiscreteField], float] | None = None


def _xi_rhs(model: SpaceFormModel, coef) -> RhsFn:
    def rhs(z, y, u):
        x, dx = xi_of_u(model, u)
        return coef * x, coef * dx

    return rhs


def auxiliary_path(model, spec, psi_sub, u_sub, eps) -> PathProblem:
    """(t eps + (1 - t) psi_sub / xi(u_sub)) xi(u); psi_sub, u_sub on interior nodes."""
    base = psi_sub / xi_of_u(model, u_sub)[0]
    op = OperatorConfig(model, spec)
    return PathProblem("auxiliary", model, spec, lambda t: (op, _xi_rhs(model, t * eps + (1 - t) * base)))


def main_path(model, spec, psi: RhsFn, eps) -> PathProblem:
    op = OperatorConfig(model, spec)

    def at(t):
        def rhs(z, y, u):
            p, dp = psi(z, y, u)
            x, dx = xi_of_u(model, u)
            return t * p + (1 - t) * eps * x, t * dp + (1 - t) * eps * dx

        return op, rhs

    return PathProblem("main", model, spec, at)


def spherical_path(spec, psi: RhsFn, eps, delta2, T) -> PathProblem:
    def at(t):
        Tt = T(t)

        def rhs(z, y, u):
            p, dp = psi(z, y, u)
            return (1 - Tt) * delta2 * u**2 + Tt * (p - eps), 2 * (1 - Tt) * delta2 * u + Tt * dp

        return OperatorConfig(DeformedModel(min(max(t, 0.0), 1.0)), spec), rhs

    return PathProblem("spherical", SpaceFormModel(1), spec, at)


def release_path(spec, psi: RhsFn, eps) -> PathProblem:
    op = OperatorConfig(SpaceFormModel(1), spec)

    def at(s):
        def rhs(z, y, u):
            p, dp = psi(z, y, u)
            return p - (1 - s) * eps, dp

        return op, rhs

    return PathProblem("release", SpaceFormModel(1), spec, at)


# ----------------------------------------------------------------------------- newton


@dataclass
class NewtonRecord:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    converged: bool = False


def newton_solve(op: OperatorConfig, rhs: RhsFn, initial: DiscreteField, config: NewtonConfig = NewtonConfig(),
                 *, on_accept=None):
    """Damped Newton on the discrete Dirichlet problem G[u] = rhs(z, u).

    Steps are halved until the residual sup-norm decreases by the Armijo
    fraction and min eig(D^2 u~) stays above ``safeguard`` times its value at
    the start of the iteration.  Cone or range violations count as rejected
    steps.  ``on_accept(field)`` is called on every accepted iterate.
    """
    mins, w0 = initial.convexity_witness()
    if not w0 > 0:
        node = int(initial.domain.interior_nodes[int(np.argmin(mins))])
        raise PreconditionError(f"initial field is not strictly locally convex (node {node}, min eig {w0!r})",
                                node=node)
    field_ = initial
    try:
        res, J, _ = evaluate_residual(field_, op, rhs)
    except (ConeViolationError, DomainError) as exc:
        raise PreconditionError(f"initial residual cannot be evaluated: {exc}") from exc
    rnorm = float(np.max(np.abs(res)))
    if not np.isfinite(rnorm):
        raise PreconditionError("initial residual is not finite")
    rec = NewtonRecord(residuals=[rnorm])
    while True:
        if rnorm <= config.tolerance:
            rec.converged = True
            return field_, rec
        if rec.iterations >= config.max_iterations:
            raise NonConvergenceError(
                f"no convergence after {rec.iterations} iterations (residual {rnorm:.3e})", field_, rec
            )
        delta = spla.spsolve(J, -res, permc_spec="MMD_ATA")
        if not np.all(np.isfinite(delta)):
            raise NonConvergenceError("singular Newton system", field_, rec)
        _, w_start = field_.convexity_witness()
        lam = 1.0
        for _ in range(config.max_halvings + 1):
            trial = field_.with_values(field_.values_hp + lam * delta.astype(np.longdouble))
            try:
                _, w_trial = trial.convexity_witness()
                if w_trial >= config.safeguard * w_start:
                    res_t, J_t, _ = evaluate_residual(trial, op, rhs)
                    r_t = float(np.max(np.abs(res_t)))
                    if r_t <= (1 - config.armijo * lam) * rnorm:
                        break
            except (ConeViolationError, DomainError):
                pass
            lam *= 0.5
        else:
            raise NonConvergenceError(
                f"damping exhausted at iteration {rec.iterations} (residual {rnorm:.3e})", field_, rec
            )
        field_, res, J, rnorm = trial, res_t, J_t, r_t
        rec.iterations += 1
        rec.residuals.append(rnorm)
        rec.step_lengths.append(lam)
        if on_accept is not None:
            on_accept(field_)


# ----------------------------------------------------------------------------- reports


@dataclass
class StepRecord:
    phase: str
    t: float
    accepted: bool
    newton_iterations: int
    residual: float | None
    min_convexity: float | None = None
    kappa_min: float | None = None
    kappa_max: float | None = None
    u_min: float | None = None
    u_max: float | None = None
    grad_max: float | None = None
    comparison_margin: float | None = None
    subsolution_margin: float | None = None
    reason: str | None = None


@dataclass
class SolveReport:
    records: list = field(default_factory=list)
    outcome: str = "running"
    failed_t: float | None = None
    failure_reason: str | None = None
    constants: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    subsolution: dict = field(default_factory=dict)

    def to_jsonl(self, timestamp: str | None = None) -> str:
        """Header line (timestamp only), one line per step, then a summary line."""
        ts = timestamp or datetime.now(timezone.utc).isoformat()
        lines = [json.dumps({"type": "header", "timestamp": ts})]
        lines += [json.dumps(_finite({"type": "step", **asdict(r)}), allow_nan=False) for r in self.records]
        summary = {
            "type": "summary",
            "outcome": self.outcome,
            "failed_t": self.failed_t,
            "failure_reason": self.failure_reason,
            "constants": self.constants,
            "diagnostics": self.diagnostics,
            "subsolution": self.subsolution,
        }
        lines.append(json.dumps(_finite(summary), default=_json_default, allow_nan=False))
        return "\n".join(lines) + "\n"

    @property
    def accepted(self):
        return [r for r in self.records if r.accepted]


def _finite(o):
    """Replace non-finite floats by None so every line is strict JSON."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return float(o) if math.isfinite(o) else None
    return o


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def estimate_monitors(field_: DiscreteField, model: SpaceFormModel) -> dict:
    """Empirical C0, C1, K0, min support function and near-boundary |Hess u|.

    The Hessian monitor is taken on the last interior ring, the closest ring
    with a full stencil.
    """
    mins, w = field_.convexity_witness()
    if not w > 0:
        node = int(field_.domain.interior_nodes[int(np.argmin(mins))])
        raise PreconditionError(f"field is not strictly locally convex (node {node})", node=node)
    d = field_.domain
    jets = covariant_jets(field_)
    fr = frame_from_u(model, jets)
    kap = fr.principal_curvatures
    u = field_.u
    ring = d.interior_nodes // d.n_theta
    outer = ring == d.n_r - 2
    hess_norm = np.max(np.abs(np.linalg.eigvalsh(jets.hessian[outer])), axis=-1)
    return {
        "C0": float(max(u.max(), 1.0 / u.min())),
        "C1": float(np.max(np.linalg.norm(jets.gradient, axis=-1))),
        "K0": float(max(kap.max(), 1.0 / kap.min())),
        "kappa_min": float(kap.min()),
        "kappa_max": float(kap.max()),
        "tau_min": float(fr.support_function.min()),
        "boundary_hessian_max": float(hess_norm.max()),
        "min_convexity": float(w),
    }


@dataclass
class SubsolutionReport:
    verdict: bool
    worst_node: int | None
    min_margin: float
    discrete_min_margin: float | None
    convex: bool
    boundary_mismatch: float
    source: str
    note: str = ""

    def as_dict(self):
        return asdict(self)


def verify_subsolution(field_: DiscreteField, model, spec, psi: RhsFn, *, jets=None,
                       boundary_values=None, tol: float = SUBSOLUTION_TOL) -> SubsolutionReport:
    """Node-wise margins G[u_sub] - psi(z, u_sub) with a verdict and worst node.

    With ``jets`` (exact jets of an analytic subsolution on the interior nodes)
    the verdict uses the pointwise inequality at the nodes; the margin of the
    discrete operator is always reported alongside.
    """
    d = field_.domain
    idx = d.interior_nodes
    mins, w = field_.convexity_witness()
    mismatch = 0.0
    if boundary_values is not None:
        mismatch = float(np.max(np.abs(field_.u[d.boundary] - boundary_values)))
    if not w > 0:
        k = int(np.argmin(mins))
        return SubsolutionReport(False, int(idx[k]), -math.inf, None, False, mismatch,
                                 "discrete", "cone violation: D^2 u~ not positive definite")
    disc = None
    try:
        res, _, _ = evaluate_residual(field_, OperatorConfig(model, spec), psi, jacobian=False)
        disc = res[idx]
    except (ConeViolationError, DomainError) as exc:
        return SubsolutionReport(False, getattr(exc, "node", None), -math.inf, None, False, mismatch,
                                 "discrete", f"cone violation: {exc}")
    if jets is not None:
        try:
            G = evaluate_G(model, spec, jets)
        except ConeViolationError as exc:
            node = None if exc.node is None else int(idx[exc.node])
            return SubsolutionReport(False, node, -math.inf, float(disc.min()), False, mismatch,
                                     "analytic", f"cone violation: {exc}")
        margins = G - psi(d.z[idx], d.y[idx], jets.value)[0]
        source = "analytic"
    else:
        margins = disc
        source = "discrete"
    k = int(np.argmin(margins))
    verdict = bool(margins[k] >= tol and mismatch <= 1e-12 * max(1.0, float(np.abs(field_.u).max())))
    return SubsolutionReport(verdict, int(idx[k]), float(margins[k]), float(disc.min()), True, mismatch, source)


# ----------------------------------------------------------------------------- continuation


def _step_record(phase, t, fld, ambient, newton_rec, comparison):
    jets = covariant_jets(fld)
    fr = frame_from_u(ambient, jets)
    _, w = fld.convexity_witness()
    return StepRecord(
        phase=phase,
        t=float(t),
        accepted=True,
        newton_iterations=newton_rec.iterations,
        residual=newton_rec.residuals[-1],
        min_convexity=float(w),
        kappa_min=float(fr.principal_curvatures.min()),
        kappa_max=float(fr.principal_curvatures.max()),
        u_min=float(fld.u.min()),
        u_max=float(fld.u.max()),
        grad_max=float(np.max(np.linalg.norm(jets.gradient, axis=-1))),
        comparison_margin=comparison,
    )


def comparison_margin(fld: DiscreteField, sub: DiscreteField, v_model: SpaceFormModel) -> float:
    """min over nodes of v - v_sub with v = eta^{-1}(u) for ``v_model``."""
    return float(np.min(eta_inverse(v_model, fld.u) - eta_inverse(v_model, sub.u)))


def continuation_run(path: PathProblem, config: HomotopyConfig, start: DiscreteField,
                     subsolution: DiscreteField, report: SolveReport | None = None, *,
                     v_model: SpaceFormModel | None = None, strict_comparison: bool = False):
    """Advance t from 0 to 1, correcting with Newton at each step.

    ``start`` must solve the t = 0 problem (it is re-solved first, which takes
    zero iterations when it already does).  Steps halve on failure and double
    after two consecutive easy successes.  At every accepted t the comparison
    margin min(v - v_sub) is recorded; ``strict_comparison`` turns a margin
    below -1e-8 into a failed step.
    """
    report = report if report is not None else SolveReport()
    v_model = v_model or path.model
    nc = config.newton
    phase = path.kind

    def solve_at(t, init):
        op, rhs = path.at(t)
        return newton_solve(op, rhs, init, nc)

    def accept(t, fld, rec):
        cm = comparison_margin(fld, subsolution, v_model)
        sr = _step_record(phase, t, fld, path.at(t)[0].ambient, rec, cm)
        if path.subsolution_rhs_margin is not None:
            sr.subsolution_margin = path.subsolution_rhs_margin(t, subsolution)
        report.records.append(sr)
        return cm

    try:
        fld, rec = solve_at(0.0, start)
    except (NonConvergenceError, PreconditionError) as exc:
        report.outcome = "failed"
        report.failed_t = 0.0
        report.failure_reason = f"{phase}: t=0 problem not solvable from the start field: {exc}"
        raise ContinuationError(report.failure_reason, start, report, 0.0) from exc
    accept(0.0, fld, rec)
    t, h, easy = 0.0, config.initial_step, 0
    while t < 1.0:
        t_new = min(1.0, t + h)
        reason = None
        try:
            cand, rec = solve_at(t_new, fld)
            cm = comparison_margin(cand, subsolution, v_model)
            if strict_comparison and cm < COMPARISON_TOL:
                reason = f"comparison check failed (min v - v_sub = {cm:.3e})"
        except (NonConvergenceError, PreconditionError, ConeViolationError, DomainError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
        if reason is None:
            accept(t_new, cand, rec)
            fld, t = cand, t_new
            easy = easy + 1 if rec.iterations <= config.easy_iterations else 0
            if easy >= 2:
                h, easy = min(2 * h, config.max_step), 0
            continue
        report.records.append(StepRecord(phase, float(t_new), False, 0, None, reason=reason))
        log.debug("%s: step to t=%.6g rejected: %s", phase, t_new, reason)
        h *= 0.5
        easy = 0
        if h < config.min_step:
            report.outcome = "failed"
            report.failed_t = float(t_new)
            report.failure_reason = f"{phase}: step size below {config.min_step} at t={t_new:.6g}: {reason}"
            raise ContinuationError(report.failure_reason, fld, report, t)
    return fld, report


# ----------------------------------------------------------------------------- pipelines


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Everything a solve needs: grid, model, f, psi, boundary data and subsolution."""

    domain: ChartedDomain
    model: SpaceFormModel
    spec: CurvatureFunctionSpec
    psi: RhsFn
    boundary_u: np.ndarray  # values of u on every node (only boundary entries are used)
    subsolution_u: np.ndarray  # values of u_sub on every node
    subsolution_jets: object = None  # exact interior jets of u_sub when available
    epsilon: float | None = None
    delta1: float = 0.05
    delta2: float | None = None
    T_exponent: int | None = None
    initial_step: float = 0.25
    min_step: float = 1e-4
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def subsolution_field(self) -> DiscreteField:
        return DiscreteField.from_u(self.domain, self.subsolution_u)


def _interior(problem, arr):
    return np.asarray(arr)[problem.domain.interior_nodes]


def _psi_at(problem, u_int):
    d = problem.domain
    idx = d.interior_nodes
    return problem.psi(d.z[idx], d.y[idx], u_int)[0]


def _discrete_G(fld, model, spec):
    res, _, _ = evaluate_residual(fld, OperatorConfig(model, spec), constant_rhs(0.0), jacobian=False)
    return res[fld.domain.interior_nodes]


def default_constants(problem: DiscreteProblem) -> dict:
    """eps, delta2 and the exponent p of T(t) = t^p at the centre of their admissible ranges."""
    sub = problem.subsolution_field()
    u_sub = _interior(problem, sub.u)
    K = problem.model.curvature_sign
    out = {}
    if K in (0, -1):
        psi_sub = _discrete_G(sub, problem.model, problem.spec)
        bound = float(np.min(psi_sub / xi_of_u(problem.model, u_sub)[0]))
        out["epsilon_bound"] = bound
        out["epsilon"] = problem.epsilon if problem.epsilon is not None else 0.5 * bound
        if not out["epsilon"] < bound:
            raise PreconditionError(f"epsilon {out['epsilon']!r} violates psi_sub > eps xi(v_sub) (bound {bound!r})")
        return out
    G0 = _discrete_G(sub, SpaceFormModel(0), problem.spec)
    psi_sub = _psi_at(problem, u_sub)
    bound = float(min(G0.min(), psi_sub.min()))
    eps = problem.epsilon if problem.epsilon is not None else 0.5 * bound
    if not 0 < eps < bound:
        raise PreconditionError(f"epsilon {eps!r} must lie in (0, {bound!r})")
    umax2 = float(np.max(sub.u) ** 2)
    d2 = problem.delta2 if problem.delta2 is not None else 0.25 * eps / umax2
    if not d2 * umax2 < eps / 2:
        raise PreconditionError(f"delta2 {d2!r} violates delta2 max u_sub^2 < eps/2")
    d1 = problem.delta1
    ratio = float(G0.min() / (2 * psi_sub.max()))
    if problem.T_exponent is not None:
        p = int(problem.T_exponent)
    else:
        if not 0 < ratio:
            raise PreconditionError("no T exponent: min G0[u_sub] must be positive")
        p = max(1, math.floor(math.log(ratio) / math.log(1 - d1)) + 1) if ratio < 1 else 1
    if not G0.min() > 2 * (1 - d1) ** p * psi_sub.max():
        raise PreconditionError(f"T exponent {p} violates min G0[u_sub] > 2 T(1 - delta1) max psi")
    out.update(epsilon_bound=bound, epsilon=eps, delta2=d2, delta1=d1, T_exponent=p)
    return out


def _check_subsolution(problem, report):
    sub = problem.subsolution_field()
    sr = verify_subsolution(sub, problem.model, problem.spec, problem.psi, jets=problem.subsolution_jets,
                            boundary_values=problem.boundary_u[problem.domain.boundary])
    report.subsolution = sr.as_dict()
    if not sr.verdict:
        report.outcome = "failed"
        report.failure_reason = f"subsolution check failed at node {sr.worst_node}: {sr.note or sr.min_margin}"
        raise PreconditionError(report.failure_reason, node=sr.worst_node)
    return sub


def _hconfig(problem, path, **kw):
    return HomotopyConfig(path=path, initial_step=problem.initial_step, min_step=problem.min_step,
                          max_step=1.0, newton=problem.newton, **kw)


def solve_pipeline(problem: DiscreteProblem, path: str = "auto", *, strict_comparison: bool = False):
    """Run the continuation pipeline; returns (field, report).

    ``path``: ``auto`` (auxiliary then main for K in {0, -1}, the Euclidean to
    spherical pipeline for K = 1), ``auxiliary`` (auxiliary path only),
    ``main`` (auxiliary then main) or ``spherical`` (K = 1 pipeline).
    """
    report = SolveReport()
    K = problem.model.curvature_sign
    if path == "auto":
        path = "spherical" if K == 1 else "main"
    if path in ("auxiliary", "main") and K == 1:
        raise DomainError("the auxiliary and main paths need K in {0, -1}; use the spherical pipeline")
    if path == "spherical" and K != 1:
        raise DomainError("the spherical pipeline is for K = 1")
    if path not in PATHS:
        raise DomainError(f"unknown path {path!r}")
    sub = _check_subsolution(problem, report)
    consts = default_constants(problem)
    report.constants = dict(consts)
    u_sub_int = _interior(problem, sub.u)
    try:
        if K in (0, -1):
            psi_sub = _discrete_G(sub, problem.model, problem.spec)
            eps = consts["epsilon"]
            aux = auxiliary_path(problem.model, problem.spec, psi_sub, u_sub_int, eps)
            fld, _ = continuation_run(aux, _hconfig(problem, "auxiliary", epsilon=eps), sub, sub, report,
                                      strict_comparison=strict_comparison)
            if path == "main":
                mp = main_path(problem.model, problem.spec, problem.psi, eps)
                fld, _ = continuation_run(mp, _hconfig(problem, "main", epsilon=eps), fld, sub, report,
                                          strict_comparison=strict_comparison)
        else:
            eps, d2, p = consts["epsilon"], consts["delta2"], consts["T_exponent"]
            e0 = SpaceFormModel(0)
            psi_sub0 = _discrete_G(sub, e0, problem.spec)
            aux = auxiliary_path(e0, problem.spec, psi_sub0, u_sub_int, d2)
            aux = replace(aux, kind="euclidean-auxiliary")
            fld, _ = continuation_run(aux, _hconfig(problem, "auxiliary", epsilon=d2), sub, sub, report,
                                      v_model=e0, strict_comparison=strict_comparison)
            hc = _hconfig(problem, "spherical", epsilon=eps, delta2=d2, delta1=consts["delta1"], T_exponent=p)
            sph = spherical_path(problem.spec, problem.psi, eps, d2, hc.T)

            def margin(t, s_field, _sph=sph):
                op, rhs = _sph.at(t)
                res, _, _ = evaluate_residual(s_field, op, rhs, jacobian=False)
                return float(res[problem.domain.interior_nodes].min())

            sph = replace(sph, subsolution_rhs_margin=margin)
            fld, _ = continuation_run(sph, hc, fld, sub, report, v_model=e0,
                                      strict_comparison=strict_comparison)
            rel = release_path(problem.spec, problem.psi, eps)
            fld, _ = continuation_run(rel, _hconfig(problem, "release", epsilon=eps), fld, sub, report,
                                      v_model=e0, strict_comparison=strict_comparison)
    except ContinuationError as exc:
        exc.report = report
        if exc.field is not None:
            try:
                report.diagnostics = estimate_monitors(exc.field, problem.model)
            except (PreconditionError, DomainError, ConeViolationError):
                pass
        raise
    report.outcome = "success"
    report.diagnostics = estimate_monitors(fld, problem.model)
    return fld, report
