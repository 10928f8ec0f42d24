"""Independent oracles for the test-suite.

Nothing here imports the package's geometry or operator code: curvatures come
from explicit ambient embeddings (sympy) or a straight-line mpmath transcription
of the graph formulas, chain rules are written out by hand, and derivatives
are checked against plain finite differences.
"""

from __future__ import annotations

import itertools

import mpmath as mp
import numpy as np
import sympy as sp

# ----------------------------------------------------------------------------- scalar branches


def phi_exact(K, rho):
    return {0: rho, 1: np.sin(rho), -1: np.sinh(rho)}[K]


def u_of_rho(K, rho):
    """u = phi'(rho) / phi(rho): 1/rho, cot rho, coth rho."""
    return {0: 1.0 / rho, 1: 1.0 / np.tan(rho), -1: 1.0 / np.tanh(rho)}[K]


def eta_exact(K, v):
    """(eta, eta', eta'') written independently of the package."""
    if K == 0:
        return np.exp(v), np.exp(v), np.exp(v)
    if K == 1:
        return np.sinh(v), np.cosh(v), np.sinh(v)
    return np.cosh(v), np.sinh(v), np.cosh(v)


def zeta_exact(K, u):
    if K == 0:
        return 1.0 / u, -1.0 / u**2, 2.0 / u**3
    if K == 1:
        return np.pi / 2 - np.arctan(u), -1.0 / (1 + u**2), 2 * u / (1 + u**2) ** 2
    return 0.5 * np.log((u + 1) / (u - 1)), -1.0 / (u**2 - 1), 2 * u / (u**2 - 1) ** 2


def push_jet(g, value, grad, hess):
    """Chain rule for w = g(x): (g, g' p, g' H + g'' p p^T) with g = (g, g', g'')."""
    g0, g1, g2 = g(value)
    return (
        g0,
        g1[..., None] * grad,
        g1[..., None, None] * hess + g2[..., None, None] * grad[..., :, None] * grad[..., None, :],
    )


# ----------------------------------------------------------------------------- curvature functions


def esym_enumerate(lam, k):
    """S_k by summing over k-subsets."""
    lam = list(lam)
    if k == 0:
        return 1.0
    return float(sum(np.prod(c) for c in itertools.combinations(lam, k)))


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# ----------------------------------------------------------------------------- rho-form transcription


def rho_form_mp(K, rho, p, H, dps=40):
    """Principal curvatures and support function from the rho-form, in mpmath.

    g = phi^2 I + p p^T, h = phi/W (-H + 2 phi'/phi p p^T + phi phi' I),
    gamma^{-1} = (I - p p^T / (W (phi + W))) / phi, a = gamma^{-1} h gamma^{-1},
    W = sqrt(phi^2 + |p|^2).  tau = <V, nu> is evaluated from the explicit
    normal with the warped metric diag(1, phi^2 I).
    """
    with mp.workdps(dps):
        n = len(p)
        rho = mp.mpf(rho)
        f = {0: rho, 1: mp.sin(rho), -1: mp.sinh(rho)}[K]
        df = {0: mp.mpf(1), 1: mp.cos(rho), -1: mp.cosh(rho)}[K]
        P = mp.matrix([mp.mpf(x) for x in p])
        Hm = mp.matrix([[mp.mpf(H[i][j]) for j in range(n)] for i in range(n)])
        I = mp.eye(n)
        pp = P * P.T
        q = (P.T * P)[0]
        W = mp.sqrt(f**2 + q)
        h = (f / W) * (-Hm + (2 * df / f) * pp + f * df * I)
        gi = (I - pp / (W * (f + W))) / f
        a = gi * h * gi
        a = (a + a.T) / 2
        ev = mp.eigsy(a)[0]
        kappa = sorted(float(ev[i]) for i in range(n))
        # nu = (-grad rho + phi^2 d/drho) / sqrt(phi^4 + phi^2 |grad rho|^2) in (rho, e_k) coordinates
        D = mp.sqrt(f**4 + f**2 * q)
        nu = [f**2 / D] + [-P[k] / D for k in range(n)]
        V = [f] + [mp.mpf(0)] * n
        G = [mp.mpf(1)] + [f**2] * n
        tau = float(sum(G[i] * V[i] * nu[i] for i in range(n + 1)))
        norm = float(sum(G[i] * nu[i] ** 2 for i in range(n + 1)))
        return np.array(kappa), tau, norm


# ----------------------------------------------------------------------------- embedded surfaces

_TH, _PH = sp.symbols("theta varphi", real=True)


def embedded_curvatures(K, rho_expr, theta0, phi0):
    """Principal curvatures (outward normal) of the radial graph rho(theta, varphi) over S^2.

    The surface is embedded explicitly: R^3 for K = 0, the unit sphere of R^4
    for K = 1 and the hyperboloid of Minkowski R^{1,3} for K = -1, with
    z = (sin th cos ph, sin th sin ph, cos th).  ``rho_expr`` is a sympy
    expression in ``TH`` and ``PH``.
    """
    th, ph = _TH, _PH
    z = sp.Matrix([sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)])
    r = rho_expr
    if K == 0:
        X = r * z
        ip = np.diag([1.0, 1.0, 1.0])
    elif K == 1:
        X = sp.Matrix([sp.cos(r), *(sp.sin(r) * z)])
        ip = np.diag([1.0, 1.0, 1.0, 1.0])
    else:
        X = sp.Matrix([sp.cosh(r), *(sp.sinh(r) * z)])
        ip = np.diag([-1.0, 1.0, 1.0, 1.0])
    subs = {th: theta0, ph: phi0}

    def ev(e):
        return np.array(sp.Matrix(e).evalf(30, subs=subs), dtype=float).ravel()

    X0 = ev(X)
    Xu, Xv = ev(X.diff(th)), ev(X.diff(ph))
    Xuu, Xuv, Xvv = ev(X.diff(th, 2)), ev(X.diff(th, ph)), ev(X.diff(ph, 2))
    # outward direction: d X / d rho at fixed z
    if K == 0:
        out = ev(z)
    elif K == 1:
        out = ev(sp.Matrix([-sp.sin(r), *(sp.cos(r) * z)]))
    else:
        out = ev(sp.Matrix([sp.sinh(r), *(sp.cosh(r) * z)]))

    def dot(a, b):
        return float(a @ ip @ b)

    # normal: tangent to the model space (orthogonal to X for K != 0) and to the surface
    basis = [Xu, Xv] if K == 0 else [Xu, Xv, X0]
    Gm = np.array([[dot(a, b) for b in basis] for a in basis])
    coef = np.linalg.solve(Gm, np.array([dot(a, out) for a in basis]))
    N = out - sum(c * b for c, b in zip(coef, basis))
    N = N / np.sqrt(dot(N, N))
    I = np.array([[dot(Xu, Xu), dot(Xu, Xv)], [dot(Xu, Xv), dot(Xv, Xv)]])
    II = -np.array([[dot(Xuu, N), dot(Xuv, N)], [dot(Xuv, N), dot(Xvv, N)]])
    return np.sort(np.linalg.eigvals(np.linalg.solve(I, II)).real)


def spherical_angles(z):
    z = np.asarray(z, dtype=float)
    return float(np.arccos(z[2])), float(np.arctan2(z[1], z[0]))


TH, PH = _TH, _PH
