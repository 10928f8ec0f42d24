"""The curvature operator G(Hess u, grad u, u) = f(kappa[u]) and its linearization.

Coefficients are evaluated from closed forms (no finite differences):

* second order  G^{ij} = (-phi zeta'/w) F^{kl} gamma^{ik} gamma^{jl}
* first order   G^s    (derivative in the gradient slot)
* zeroth order  G_u    (derivative in u, phi and zeta' following rho = zeta(u))

``ambient`` is a :class:`SpaceFormModel` or a :class:`DeformedModel`; the same
formulas hold for the deformed warping since only the structure of the
transforms enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureFunctionSpec, eval_f_and_grad
from .errors import ConeViolationError, StaleInputError, UnsupportedModelError
from .geometry import (
    ScalarJet2,
    _col,
    _frame_u,
    _outer,
    deformed_gamma_tilde,
    frame_deformed,
    frame_from_u,
    u_jet_from_v,
)
from .spaceform import DeformedModel, SpaceFormModel, ambient_scalars, eta, xi

# mutation hook for the verification suite: flips the sign of the second term of G^s
_FIRST_ORDER_SIGN = 1.0

PREMISE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LinearizationCoeffs:
    second_order: np.ndarray
    first_order: np.ndarray
    zeroth_order: np.ndarray
    operator_value: np.ndarray


def _require_convex(M):
    mins = np.linalg.eigvalsh(M)[..., 0]
    if np.any(~(mins > 0)):
        flat = np.atleast_1d(mins)
        bad = int(np.argmin(flat))
        raise ConeViolationError(
            f"jet is not strictly locally convex (min eig of Hess u + u I = {flat[bad]!r})",
            node=bad if np.ndim(mins) else None,
        )


def _spectral(spec, a):
    kappa, Q = np.linalg.eigh(a)
    fval, fk = eval_f_and_grad(spec, kappa)
    F = (Q * fk[..., None, :]) @ np.swapaxes(Q, -1, -2)
    return fval, 0.5 * (F + np.swapaxes(F, -1, -2))


def F_matrix(spec: CurvatureFunctionSpec, a) -> np.ndarray:
    """dF/da_ij for F(A) = f(lambda(A)): sum_k f_k(kappa) q_k q_k^T."""
    a = np.asarray(a, dtype=float)
    return _spectral(spec, 0.5 * (a + np.swapaxes(a, -1, -2)))[1]


def evaluate_G(ambient, spec: CurvatureFunctionSpec, jet: ScalarJet2):
    """f(kappa[u]); raises ConeViolationError unless Hess u + u I > 0."""
    fr = frame_from_u(ambient, jet)
    _require_convex(fr.convexity_matrix)
    return eval_f_and_grad(spec, fr.principal_curvatures)[0]


def evaluate_G_t(t: float, spec: CurvatureFunctionSpec, jet: ScalarJet2):
    """Deformed operator F(a^t)."""
    fr = frame_deformed(t, jet)
    _require_convex(fr.convexity_matrix)
    return eval_f_and_grad(spec, fr.principal_curvatures)[0]


def linearize_G(ambient, spec: CurvatureFunctionSpec, jet: ScalarJet2) -> LinearizationCoeffs:
    """Exact coefficients of the linearized operator at ``jet``."""
    u, p, H = jet.value, jet.gradient, jet.hessian
    s = ambient_scalars(ambient, u)
    f, df, dz, d2z = s.phi, s.dphi, s.dzeta, s.d2zeta
    fr = _frame_u(u, p, H, f, dz)
    _require_convex(fr.convexity_matrix)
    a = fr.curvature_matrix
    gaminv, ginv = fr.inv_sqrt_metric, fr.inverse_metric
    fval, F = _spectral(spec, a)

    c = dz**2
    w = np.sqrt(f**2 + c * np.sum(p * p, axis=-1))
    C = F @ a  # C_iq = F^{ij} a_{qj}
    trC = np.trace(C, axis1=-2, axis2=-1)

    second = _col(-f * dz / w) * (gaminv @ F @ gaminv)

    Cu = (C @ p[..., None])[..., 0]
    CTu = (np.swapaxes(C, -1, -2) @ p[..., None])[..., 0]
    t1 = w[..., None] * (gaminv @ Cu[..., None])[..., 0]
    t2 = _FIRST_ORDER_SIGN * f[..., None] * (gaminv @ CTu[..., None])[..., 0]
    first = -(2 * c / (w * (f + w)))[..., None] * (t1 + t2) - (c * trC / w**2)[..., None] * p

    X = _col(f * df * dz) * ginv + _col(dz * d2z / w**2) * _outer(p)
    zeroth = (
        -2.0 * np.sum(X * C, axis=(-2, -1))
        + (df * dz / f - f * df * dz / w**2 + f**2 * d2z / (dz * w**2)) * trC
        - (f * dz / w) * np.sum(F * ginv, axis=(-2, -1))
    )
    return LinearizationCoeffs(second, first, zeroth, fval)


def dG_t_dt(t: float, spec: CurvatureFunctionSpec, jet: ScalarJet2):
    """Closed-form t-derivative of the deformed operator; non-negative on convex jets."""
    u, p = jet.value, jet.gradient
    fr = frame_deformed(t, jet)
    _require_convex(fr.convexity_matrix)
    _, F = _spectral(spec, fr.curvature_matrix)
    n = jet.dim
    q = np.sum(p * p, axis=-1)
    s2 = u**2 + t**2
    gt = deformed_gamma_tilde(t, u, p)
    N = gt @ fr.convexity_matrix @ gt
    P = _col(q) * np.eye(n) + 2.0 * _outer(p)
    coef = t / (np.sqrt(s2) * (s2 + q) ** 1.5)
    return coef * np.sum(F * (P @ N), axis=(-2, -1))


def v_form_derivative(model: SpaceFormModel, spec, jet_v: ScalarJet2):
    """(script G, d script G/dv) at a v-jet, through u = eta(v)."""
    jet_u = u_jet_from_v(model, jet_v)
    co = linearize_G(model, spec, jet_u)
    _, de, d2e = eta(model, jet_v.value)
    d3e = de  # eta''' = eta' for all three branches
    pv, Hv = jet_v.gradient, jet_v.hessian
    dr = _col(d2e) * Hv + _col(d3e) * _outer(pv)
    Gv = (
        co.zeroth_order * de
        + np.sum(co.first_order * (d2e[..., None] * pv), axis=-1)
        + np.sum(co.second_order * dr, axis=(-2, -1))
    )
    return co.operator_value, Gv


def check_linearized_zeroth_sign(model: SpaceFormModel, spec, jet_v: ScalarJet2, psi_value):
    """Return script-G_v - psi xi'(v) at a point where script-G = psi xi(v).

    The caller asserts negativity.  Raises StaleInputError if the premise fails
    by more than 1e-8 (relative to max(1, psi xi)).
    """
    if model.curvature_sign == 1:
        raise UnsupportedModelError("the sign check is defined for K = 0 and K = -1")
    G, Gv = v_form_derivative(model, spec, jet_v)
    xv, dxv = xi(model, jet_v.value)
    target = psi_value * xv
    if np.any(np.abs(G - target) > PREMISE_RESIDUAL_TOL * np.maximum(1.0, np.abs(target))):
        raise StaleInputError(
            f"premise G[v] = psi xi(v) violated (residual {np.max(np.abs(G - target))!r})"
        )
    return Gv - psi_value * dxv


__all__ = [
    "DeformedModel",
    "LinearizationCoeffs",
    "F_matrix",
    "evaluate_G",
    "evaluate_G_t",
    "linearize_G",
    "dG_t_dt",
    "check_linearized_zeroth_sign",
    "v_form_derivative",
]
