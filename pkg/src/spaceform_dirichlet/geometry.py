"""Pointwise extrinsic geometry of radial graphs over domains of S^n.

Every kernel works on a :class:`ScalarJet2` whose arrays may carry leading batch
axes, so a whole grid is processed in one call.  Derivatives are taken in a
local orthonormal frame of S^n.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spaceform import (
    DeformedModel,
    SpaceFormModel,
    ambient_scalars,
    eta,
    phi,
    zeta,
)

SYMMETRY_WARN_TOL = 1e-8


@dataclass(frozen=True)
class ScalarJet2:
    """Value, gradient and Hessian of a scalar field (batched over leading axes)."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float)
        grad = np.asarray(self.gradient, dtype=float)
        hess = np.asarray(self.hessian, dtype=float)
        if grad.ndim < 1 or grad.shape[-1] < 2:
            raise DomainError("jet dimension must be at least 2")
        n = grad.shape[-1]
        if hess.shape[-2:] != (n, n):
            raise DomainError(f"hessian shape {hess.shape} inconsistent with gradient dimension {n}")
        if grad.shape[:-1] != value.shape or hess.shape[:-2] != value.shape:
            raise DomainError("value, gradient and hessian batch shapes differ")
        asym = np.max(np.abs(hess - np.swapaxes(hess, -1, -2)), initial=0.0)
        scale = max(1.0, np.max(np.abs(hess), initial=0.0))
        if asym > SYMMETRY_WARN_TOL * scale:
            warnings.warn(f"hessian asymmetry {asym:.3e} symmetrized", RuntimeWarning, stacklevel=3)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "gradient", grad)
        object.__setattr__(self, "hessian", hess)

    @property
    def dim(self) -> int:
        return self.gradient.shape[-1]

    def __getitem__(self, idx):
        return ScalarJet2(self.value[idx], self.gradient[idx], self.hessian[idx])


@dataclass(frozen=True)
class FrameQuantities:
    """Metric, square roots, second fundamental form and curvatures of a graph."""

    metric: np.ndarray
    inverse_metric: np.ndarray
    sqrt_metric: np.ndarray  # gamma_{ik}
    inv_sqrt_metric: np.ndarray  # gamma^{ik}
    second_fundamental_form: np.ndarray
    curvature_matrix: np.ndarray
    principal_curvatures: np.ndarray
    normal_radial_component: np.ndarray
    support_function: np.ndarray
    convexity_matrix: np.ndarray | None = None


def _eye(n):
    return np.eye(n)


def _outer(p):
    return p[..., :, None] * p[..., None, :]


def _col(x):
    return np.asarray(x)[..., None, None]


def _sandwich(left, mid, right=None):
    return left @ mid @ (left if right is None else right)


def _finish(g, ginv, gam, gaminv, h, a, tau, nu_r, conv=None):
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    kappa = np.linalg.eigvalsh(a)
    return FrameQuantities(g, ginv, gam, gaminv, h, a, kappa, nu_r, tau, conv)


def frame_from_rho(model: SpaceFormModel, jet: ScalarJet2) -> FrameQuantities:
    """Geometry of the graph rho over S^n directly from (rho, grad rho, Hess rho)."""
    rho, p, H = jet.value, jet.gradient, jet.hessian
    f, df, _ = phi(model, rho)
    n = jet.dim
    I = _eye(n)
    pp = _outer(p)
    W = np.sqrt(f**2 + np.sum(p * p, axis=-1))
    if np.any(W < 1e-300):
        raise DomainError("degenerate graph: sqrt(phi^2 + |grad rho|^2) vanishes")
    fc, Wc, dfc = _col(f), _col(W), _col(df)
    g = fc**2 * I + pp
    ginv = (I - pp / Wc**2) / fc**2
    gaminv = (I - pp / (Wc * (fc + Wc))) / fc
    gam = fc * I + pp / (fc + Wc)
    h = (fc / Wc) * (-H + (2 * dfc / fc) * pp + fc * dfc * I)
    a = _sandwich(gaminv, h)
    return _finish(g, ginv, gam, gaminv, h, a, f**2 / W, f / W)


def _frame_u(u, p, H, f, dz):
    n = p.shape[-1]
    I = _eye(n)
    c = dz**2
    w = np.sqrt(f**2 + c * np.sum(p * p, axis=-1))
    if np.any(w < 1e-300):
        raise DomainError("degenerate graph: w vanishes")
    fc, wc, cc = _col(f), _col(w), _col(c)
    pp = _outer(p)
    g = fc**2 * I + cc * pp
    ginv = (I - cc * pp / wc**2) / fc**2
    gaminv = (I - cc * pp / (wc * (fc + wc))) / fc
    gam = fc * I + cc * pp / (fc + wc)
    M = H + _col(u) * I
    h = _col(-dz * f / w) * M
    a = _sandwich(gaminv, h)
    return _finish(g, ginv, gam, gaminv, h, a, f**2 / w, f / w, M)


def frame_from_u(model, jet: ScalarJet2) -> FrameQuantities:
    """Geometry in terms of u with rho = zeta(u); also exposes grad^2 u + u I."""
    s = ambient_scalars(model, jet.value)
    return _frame_u(jet.value, jet.gradient, jet.hessian, s.phi, s.dzeta)


def frame_from_v(model: SpaceFormModel, jet: ScalarJet2) -> FrameQuantities:
    """Geometry in terms of v with u = eta(v).

    ``convexity_matrix`` holds eta I + eta' g~ Hess(v) g~, whose positivity is
    equivalent to strict local convexity.
    """
    v, p, H = jet.value, jet.gradient, jet.hessian
    u, de, _ = eta(model, v)
    rho, _, _ = zeta(model, u)
    f, _, _ = phi(model, rho)
    n = jet.dim
    I = _eye(n)
    pp = _outer(p)
    w = np.sqrt(1.0 + np.sum(p * p, axis=-1))
    wc, fc, uc, dec = _col(w), _col(f), _col(u), _col(de)
    gt = I - pp / (wc * (1.0 + wc))
    conv = uc * I + dec * _sandwich(gt, H)
    a = conv / wc
    g = fc**2 * (I + pp)
    ginv = (I - pp / wc**2) / fc**2
    gam = fc * (I + pp / (1.0 + wc))
    gaminv = dec * gt
    h = (dec * H + uc * pp + uc * I) / (dec**2 * wc)
    return _finish(g, ginv, gam, gaminv, h, a, f / w, 1.0 / w, conv)


def deformed_gamma_tilde(t, u, p):
    """The normalized inverse square root used in the deformed curvature matrix."""
    n = p.shape[-1]
    s2 = u**2 + t**2
    q = np.sum(p * p, axis=-1)
    S = np.sqrt(s2 + q)
    return _eye(n) - _outer(p) / _col(S * (np.sqrt(s2) + S))


def frame_deformed(t: float, jet: ScalarJet2) -> FrameQuantities:
    """Geometry for the background metric with warping sin(t rho)/t.

    The curvature matrix is evaluated by the simplified expression
    (1 + |grad u|^2/(u^2+t^2))^{-1/2} g~ (Hess u + u I) g~; the remaining fields
    come from the general u-form with the deformed transforms.
    """
    model = DeformedModel(t)
    u, p, H = jet.value, jet.gradient, jet.hessian
    s = ambient_scalars(model, u)
    base = _frame_u(u, p, H, s.phi, s.dzeta)
    q = np.sum(p * p, axis=-1)
    gt = deformed_gamma_tilde(t, u, p)
    a = _col((1.0 + q / (u**2 + t**2)) ** -0.5) * _sandwich(gt, base.convexity_matrix)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    return FrameQuantities(
        base.metric,
        base.inverse_metric,
        base.sqrt_metric,
        base.inv_sqrt_metric,
        base.second_fundamental_form,
        a,
        np.linalg.eigvalsh(a),
        base.normal_radial_component,
        base.support_function,
        base.convexity_matrix,
    )


def support_and_primitive(model: SpaceFormModel, jet: ScalarJet2):
    """Support function <V, nu> and Phi(rho) = int_0^rho phi."""
    rho = jet.value
    f, _, _ = phi(model, rho)
    W = np.sqrt(f**2 + np.sum(jet.gradient**2, axis=-1))
    K = model.curvature_sign
    if K == 0:
        prim = rho**2 / 2
    elif K == 1:
        prim = 1.0 - np.cos(rho)
    else:
        prim = np.cosh(rho) - 1.0
    return f**2 / W, prim


def rho_jet_from_u(model: SpaceFormModel, jet: ScalarJet2) -> ScalarJet2:
    """Chain rule image of a u-jet under rho = zeta(u)."""
    rho, dz, d2z = zeta(model, jet.value)
    p = jet.gradient
    return ScalarJet2(rho, _col1(dz) * p, _col(dz) * jet.hessian + _col(d2z) * _outer(p))


def u_jet_from_v(model: SpaceFormModel, jet: ScalarJet2) -> ScalarJet2:
    """Chain rule image of a v-jet under u = eta(v)."""
    u, de, d2e = eta(model, jet.value)
    p = jet.gradient
    return ScalarJet2(u, _col1(de) * p, _col(de) * jet.hessian + _col(d2e) * _outer(p))


def _col1(x):
    return np.asarray(x)[..., None]
