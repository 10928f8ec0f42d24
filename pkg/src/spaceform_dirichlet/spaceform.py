"""Ambient space forms N^{n+1}(K) as warped products d rho^2 + phi(rho)^2 sigma.

All scalar transforms return their derivatives in the same call so operator
assembly never mixes branches.  Inputs may be floats or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UnsupportedModelError

# below this deformation parameter the t -> 0 limits are used verbatim
T_LIMIT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SpaceFormModel:
    """Euclidean space (K=0), the upper hemisphere (K=1) or hyperbolic space (K=-1)."""

    curvature_sign: int

    def __post_init__(self):
        if self.curvature_sign not in (-1, 0, 1):
            raise DomainError(f"curvature_sign must be -1, 0 or 1, got {self.curvature_sign!r}")

    @property
    def rho_upper(self) -> float:
        return np.pi / 2 if self.curvature_sign == 1 else np.inf

    @property
    def u_lower(self) -> float:
        return 1.0 if self.curvature_sign == -1 else 0.0

    @property
    def v_lower(self) -> float:
        return -np.inf if self.curvature_sign == 0 else 0.0

    def __str__(self):
        return f"SpaceForm(K={self.curvature_sign})"


@dataclass(frozen=True)
class DeformedModel:
    """Background metric d rho^2 + (sin(t rho)/t)^2 sigma joining K=0 (t=0) to K=1 (t=1)."""

    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise DomainError(f"deformation parameter t must lie in [0, 1], got {self.t!r}")

    @property
    def rho_upper(self) -> float:
        return np.inf if self.t < T_LIMIT_THRESHOLD else np.pi / (2 * self.t)

    @property
    def u_lower(self) -> float:
        return 0.0


class AmbientScalars(NamedTuple):
    """phi, phi' at rho = zeta(u) together with zeta'(u), zeta''(u)."""

    phi: np.ndarray
    dphi: np.ndarray
    dzeta: np.ndarray
    d2zeta: np.ndarray


def _check_open_interval(x, lower, upper, name, bound_names):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    if np.any(x <= lower):
        raise DomainError(f"{name} must exceed {bound_names[0]} = {lower}; got min {np.min(x)!r}")
    if np.any(x >= upper):
        raise DomainError(f"{name} must stay below {bound_names[1]} = {upper}; got max {np.max(x)!r}")
    return x


def phi(model: SpaceFormModel, rho):
    """Warping function and its first two derivatives."""
    rho = _check_open_interval(rho, 0.0, model.rho_upper, "rho", ("0", "rho_U"))
    K = model.curvature_sign
    if K == 0:
        return rho, np.ones_like(rho), np.zeros_like(rho)
    if K == 1:
        s, c = np.sin(rho), np.cos(rho)
        return s, c, -s
    s, c = np.sinh(rho), np.cosh(rho)
    return s, c, s


def zeta(model: SpaceFormModel, u):
    """rho = zeta(u): 1/u, arccot u or artanh(1/u); returns (rho, zeta', zeta'')."""
    u = _check_open_interval(u, model.u_lower, np.inf, "u", ("u_L", "inf"))
    K = model.curvature_sign
    if K == 0:
        return 1.0 / u, -1.0 / u**2, 2.0 / u**3
    if K == 1:
        d = 1.0 + u**2
        # arctan2 gives the (0, pi) branch of arccot
        return np.arctan2(1.0, u), -1.0 / d, 2.0 * u / d**2
    d = u**2 - 1.0
    return np.arctanh(1.0 / u), -1.0 / d, 2.0 * u / d**2


def zeta_inverse(model: SpaceFormModel, rho):
    """u = zeta^{-1}(rho) = phi'(rho)/phi(rho)."""
    rho = _check_open_interval(rho, 0.0, model.rho_upper, "rho", ("0", "rho_U"))
    K = model.curvature_sign
    if K == 0:
        return 1.0 / rho
    if K == 1:
        return 1.0 / np.tan(rho)
    return 1.0 / np.tanh(rho)


def eta(model: SpaceFormModel, v):
    """u = eta(v): e^v, sinh v or cosh v; returns (u, eta', eta'')."""
    v = _check_open_interval(v, model.v_lower, np.inf, "v", ("v_L", "inf"))
    K = model.curvature_sign
    if K == 0:
        e = np.exp(v)
        return e, e, e
    if K == 1:
        s, c = np.sinh(v), np.cosh(v)
        return s, c, s
    s, c = np.sinh(v), np.cosh(v)
    return c, s, c


def eta_inverse(model: SpaceFormModel, u):
    """v = eta^{-1}(u)."""
    u = _check_open_interval(u, model.u_lower, np.inf, "u", ("u_L", "inf"))
    K = model.curvature_sign
    if K == 0:
        return np.log(u)
    if K == 1:
        return np.arcsinh(u)
    return np.arccosh(u)


def xi(model: SpaceFormModel, v):
    """Auxiliary weight e^{2v} (K=0) or sinh v (K=-1) with its derivative."""
    K = model.curvature_sign
    if K == 1:
        raise UnsupportedModelError("xi is only defined for K = 0 and K = -1")
    v = _check_open_interval(v, model.v_lower, np.inf, "v", ("v_L", "inf"))
    if K == 0:
        e = np.exp(2.0 * v)
        return e, 2.0 * e
    return np.sinh(v), np.cosh(v)


def xi_of_u(model: SpaceFormModel, u):
    """xi(eta^{-1}(u)) and its u-derivative, in closed form.

    K=0 gives u^2, K=-1 gives sqrt(u^2 - 1).
    """
    K = model.curvature_sign
    if K == 1:
        raise UnsupportedModelError("xi is only defined for K = 0 and K = -1")
    u = _check_open_interval(u, model.u_lower, np.inf, "u", ("u_L", "inf"))
    if K == 0:
        return u**2, 2.0 * u
    r = np.sqrt(u**2 - 1.0)
    return r, u / r


def deformed_phi(t: float, rho):
    """phi^t(rho) = sin(t rho)/t with its first two derivatives."""
    m = DeformedModel(t)
    rho = _check_open_interval(rho, 0.0, m.rho_upper, "rho", ("0", "pi/(2t)"))
    if t < T_LIMIT_THRESHOLD:
        return rho, np.ones_like(rho), np.zeros_like(rho)
    s, c = np.sin(t * rho), np.cos(t * rho)
    return s / t, c, -t * s


def deformed_zeta(t: float, u):
    """zeta^t(u) = arccot(u/t)/t with its first two derivatives."""
    DeformedModel(t)
    u = _check_open_interval(u, 0.0, np.inf, "u", ("0", "inf"))
    d = u**2 + t**2
    if t < T_LIMIT_THRESHOLD:
        return 1.0 / u, -1.0 / u**2, 2.0 / u**3
    return np.arctan2(t, u) / t, -1.0 / d, 2.0 * u / d**2


def deformed_transforms(t: float, x):
    """Evaluate (phi^t, (phi^t)', (phi^t)'') at rho = x and (zeta^t, ...) at u = x."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"deformation parameter t must lie in [0, 1], got {t!r}")
    x = np.asarray(x, dtype=float)
    rho_ok = np.all(x < DeformedModel(t).rho_upper)
    phi_t = deformed_phi(t, x) if rho_ok else None
    return phi_t, deformed_zeta(t, x)


def ambient_scalars(ambient, u) -> AmbientScalars:
    """phi, phi' at rho = zeta(u) and zeta', zeta'' for either model type."""
    if isinstance(ambient, DeformedModel):
        t = ambient.t
        u = _check_open_interval(u, 0.0, np.inf, "u", ("0", "inf"))
        s = np.sqrt(u**2 + t**2)
        # closed forms of sin(t zeta^t)/t and cos(t zeta^t)
        return AmbientScalars(1.0 / s, u / s, -1.0 / s**2, 2.0 * u / s**4)
    rho, dz, d2z = zeta(ambient, u)
    f, df, _ = phi(ambient, rho)
    return AmbientScalars(f, df, dz, d2z)
