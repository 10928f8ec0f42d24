"""Geodesic disks on S^2, their gnomonic chart and covariant finite differences.

The unknown is u~ = mu u on a boundary-fitted polar lattice in the chart
y = tangent-plane coordinates at the disk center.  In these variables the
convexity matrix reduces to Hess u + u sigma = D^2 u~ / mu, so strict local
convexity is plain Euclidean convexity of u~.

Lattice layout: rings r_i = (i + 1/2) dr, i = 0..n_r-1, with the last ring on
the boundary and no node at the pole.  Rings below 0 are read on the opposite
ray (u~(-r, th) = u~(r, th + pi)), so every interior stencil is centred.
Node index = i * n_theta + j.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryStencilError, ConeViolationError, DomainError, HemisphereError
from .geometry import ScalarJet2
from .operator import linearize_G

GNOMONIC = "gnomonic"
PROJECTIVE = "projective"


# ----------------------------------------------------------------------------- charts


def gnomonic_metric(y):
    """mu, sigma, sigma^{-1}, sigma^{1/2}, sigma^{-1/2} at chart points y (..., 2)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    I = np.eye(n)
    q = np.sum(y * y, axis=-1)
    mu = np.sqrt(1.0 + q)
    m = mu[..., None, None]
    yy = y[..., :, None] * y[..., None, :]
    sigma = (I - yy / m**2) / m**2
    sigma_inv = m**2 * (I + yy)
    sqrt_sigma = (I - yy / (m * (1.0 + m))) / m
    inv_sqrt_sigma = m * (I + yy / (1.0 + m))
    return mu, sigma, sigma_inv, sqrt_sigma, inv_sqrt_sigma


def gnomonic_christoffel(y):
    """Gamma^k_ij = -(delta_ik y_j + delta_jk y_i)/mu^2, indexed [..., k, i, j]."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    I = np.eye(n)
    mu2 = 1.0 + np.sum(y * y, axis=-1)
    G = -(I[:, :, None] * y[..., None, None, :] + I[:, None, :] * y[..., None, :, None])
    return G / mu2[..., None, None, None]


def projective_metric(x):
    """mu = 4 + |x|^2 and sigma = 16/mu^2 I for the stereographic chart."""
    x = np.asarray(x, dtype=float)
    mu = 4.0 + np.sum(x * x, axis=-1)
    sigma = (16.0 / mu**2)[..., None, None] * np.eye(x.shape[-1])
    return mu, sigma


def projective_christoffel(x):
    """Gamma^k_ij = -(2/mu)(delta_ik x_j + delta_jk x_i - delta_ij x_k), indexed [..., k, i, j]."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    I = np.eye(n)
    mu = 4.0 + np.sum(x * x, axis=-1)
    G = (
        I[:, :, None] * x[..., None, None, :]
        + I[:, None, :] * x[..., None, :, None]
        - I[None, :, :] * x[..., :, None, None]
    )
    return -(2.0 / mu)[..., None, None, None] * G


def tangent_basis(center):
    """Orthonormal (e1, e2) spanning the tangent plane of S^2 at ``center``."""
    c = np.asarray(center, dtype=float)
    nrm = np.linalg.norm(c)
    if c.shape != (3,) or nrm == 0:
        raise DomainError("center must be a nonzero 3-vector")
    c = c / nrm
    helper = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, c) * c
    e1 /= np.linalg.norm(e1)
    return c, e1, np.cross(c, e1)


def chart_to_sphere(kind, center, coords):
    """Sphere points z (..., 3) of chart coordinates; both charts send 0 to ``center``."""
    c, e1, e2 = tangent_basis(center)
    x = np.asarray(coords, dtype=float)
    q = np.sum(x * x, axis=-1)
    if kind == GNOMONIC:
        mu = np.sqrt(1.0 + q)
        a, b, h = x[..., 0] / mu, x[..., 1] / mu, 1.0 / mu
    elif kind == PROJECTIVE:
        mu = 4.0 + q
        a, b, h = 4 * x[..., 0] / mu, 4 * x[..., 1] / mu, (4.0 - q) / mu
    else:
        raise DomainError(f"unknown chart kind {kind!r}")
    return a[..., None] * e1 + b[..., None] * e2 + h[..., None] * c


def chart_jet(kind, coords, ut, dut, d2ut) -> ScalarJet2:
    """Orthonormal-frame jet of u from chart derivatives of u~ = mu u.

    Gnomonic: Hess u + u sigma = D^2 u~ / mu.
    Projective: Hess u + u sigma = D^2 u~ / mu + 2 I (u~ - x . D u~) / mu^2.
    Chart tensors are moved to the frame by conjugation with sigma^{-1/2}.
    """
    x = np.asarray(coords, dtype=float)
    ut = np.asarray(ut, dtype=float)
    dut = np.asarray(dut, dtype=float)
    d2ut = np.asarray(d2ut, dtype=float)
    n = x.shape[-1]
    I = np.eye(n)
    if kind == GNOMONIC:
        mu, _, _, _, isq = gnomonic_metric(x)
        u = ut / mu
        du = dut / mu[..., None] - (ut / mu**3)[..., None] * x
        Mc = d2ut / mu[..., None, None]
    elif kind == PROJECTIVE:
        mu, _ = projective_metric(x)
        isq = (mu / 4.0)[..., None, None] * I
        u = ut / mu
        du = dut / mu[..., None] - (2.0 * ut / mu**2)[..., None] * x
        corr = 2.0 * (ut - np.sum(x * dut, axis=-1)) / mu**2
        Mc = d2ut / mu[..., None, None] + corr[..., None, None] * I
    else:
        raise DomainError(f"unknown chart kind {kind!r}")
    p = (isq @ du[..., None])[..., 0]
    M = isq @ Mc @ isq
    return ScalarJet2(u, p, M - u[..., None, None] * I)


# ----------------------------------------------------------------------------- domain


@dataclass(frozen=True, eq=False)
class ChartedDomain:
    """Polar lattice over a geodesic disk, with per-node chart data precomputed."""

    center: np.ndarray
    geodesic_radius: float
    n_r: int
    n_theta: int
    dr: float
    dtheta: float
    r: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    z: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    sigma_inv: np.ndarray
    sqrt_sigma: np.ndarray
    inv_sqrt_sigma: np.ndarray
    christoffel: np.ndarray
    boundary: np.ndarray
    ops: dict = dc_field(repr=False)
    chart: str = GNOMONIC

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def chart_radius(self) -> float:
        return float(np.tan(self.geodesic_radius))

    @property
    def h(self) -> float:
        """Largest lattice spacing in chart units (radial or outer-ring arc)."""
        return max(self.dr, self.chart_radius * self.dtheta)

    def node(self, i, j) -> int:
        return int(i) * self.n_theta + int(j) % self.n_theta


def _polar_operators(n_r, n_t, dr, dth):
    """Sparse polar difference operators (rows of boundary nodes left empty).

    Five-point differences in both directions: centred radially wherever
    rings i-2..i+2 exist (rings below 0 are reached through the pole),
    off-centre on the last interior ring, periodic in the angle.  The higher
    order keeps the 1/r and 1/r^2 terms of the Cartesian conversion at least
    second order on the rings next to the pole, and removes the angular error
    that otherwise dominates on the outer rings.
    """
    N = n_r * n_t
    half = n_t // 2
    ii, jj = np.meshgrid(np.arange(n_r - 1), np.arange(n_t), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    row = ii * n_t + jj

    def nb(di, dj):
        i = ii + di
        j = jj + dj
        refl = i < 0
        i = np.where(refl, -i - 1, i)
        j = np.where(refl, j + half, j)
        return i * n_t + np.mod(j, n_t)

    def build(terms):
        rows, cols, vals = [], [], []
        for c, w in terms:
            rows.append(row)
            cols.append(c)
            vals.append(np.broadcast_to(w, row.shape))
        m = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        )
        m.eliminate_zeros()
        return m

    wide = ii + 2 <= n_r - 1
    offs = (-3, -2, -1, 0, 1, 2)
    # radial weights per offset: centred five-point where rings i+2 exist,
    # otherwise the off-centre five-point stencil on rings i-3..i+1
    c1 = {-2: 1, -1: -8, 0: 0, 1: 8, 2: -1}
    s1 = {-3: -1, -2: 6, -1: -18, 0: 10, 1: 3}
    c2 = {-2: -1, -1: 16, 0: -30, 1: 16, 2: -1}
    s2 = {-3: -1, -2: 4, -1: 6, 0: -20, 1: 11}
    rw = {k: np.where(wide, c1.get(k, 0), s1.get(k, 0)) / (12 * dr) for k in offs}
    r2 = {k: np.where(wide, c2.get(k, 0), s2.get(k, 0)) / (12 * dr**2) for k in offs}

    def rad(k, dj=0):
        # the +2 ring does not exist next to the boundary (its weight is zero there)
        return np.where(wide, nb(k, dj), row) if k == 2 else nb(k, dj)

    t1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    t2 = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}
    Dr = build([(rad(k), rw[k]) for k in offs])
    Drr = build([(rad(k), r2[k]) for k in offs])
    Dt = build([(nb(0, m), t1[m] / dth) for m in t1])
    Dtt = build([(nb(0, m), t2[m] / dth**2) for m in t2])
    Drt = build([(rad(k, m), rw[k] * t1[m] / dth) for k in offs for m in t1])
    return Dr, Drr, Dt, Dtt, Drt


def apply_stencil(op: sp.csr_matrix, U: np.ndarray) -> np.ndarray:
    """op @ U evaluated as sum_k w_k (U_k - U_row) in the precision of U.

    Every stencil annihilates constants, so this is the same number in exact
    arithmetic; in floating point the rounding is relative to the neighbour
    differences rather than to w_k U_k, which matters on the innermost ring
    where the weights scale like 1/(r dtheta)^2.
    """
    counts = np.diff(op.indptr)
    rows = np.repeat(np.arange(op.shape[0]), counts)
    vals = op.data.astype(U.dtype) * (U[op.indices] - U[rows])
    out = np.zeros(op.shape[0], dtype=U.dtype)
    nz = counts > 0
    if vals.size:
        out[nz] = np.add.reduceat(vals, op.indptr[:-1][nz])
    return out


def _cartesian_operators(r, theta, polar):
    Dr, Drr, Dt, Dtt, Drt = polar
    c, s = np.cos(theta), np.sin(theta)
    d = sp.diags
    L1 = d(c) @ Dr - d(s / r) @ Dt
    L2 = d(s) @ Dr + d(c / r) @ Dt
    L11 = (
        d(c * c) @ Drr + d(s * s / r) @ Dr + d(s * s / r**2) @ Dtt
        - d(2 * c * s / r) @ Drt + d(2 * c * s / r**2) @ Dt
    )
    L22 = (
        d(s * s) @ Drr + d(c * c / r) @ Dr + d(c * c / r**2) @ Dtt
        + d(2 * c * s / r) @ Drt - d(2 * c * s / r**2) @ Dt
    )
    L12 = (
        d(c * s) @ Drr - d(c * s / r) @ Dr - d(c * s / r**2) @ Dtt
        + d((c * c - s * s) / r) @ Drt - d((c * c - s * s) / r**2) @ Dt
    )
    return {k: v.tocsr() for k, v in dict(L1=L1, L2=L2, L11=L11, L12=L12, L22=L22).items()}


def build_domain(center, geodesic_radius: float, n_r: int, n_theta: int) -> ChartedDomain:
    """Polar lattice over the gnomonic image of a geodesic disk (a disk of radius tan R)."""
    R = float(geodesic_radius)
    if not R > 0:
        raise DomainError(f"geodesic radius must be positive, got {R!r}")
    if R >= np.pi / 2:
        raise HemisphereError(
            f"geodesic radius {R!r} >= pi/2: the disk is not contained in an open hemisphere"
        )
    if int(n_r) != n_r or n_r < 3:
        raise DomainError(f"n_r must be an integer >= 3, got {n_r!r}")
    if int(n_theta) != n_theta or n_theta < 8 or n_theta % 2:
        raise DomainError(f"n_theta must be an even integer >= 8, got {n_theta!r}")
    n_r, n_theta = int(n_r), int(n_theta)
    c, _, _ = tangent_basis(center)
    rmax = np.tan(R)
    dr = rmax / (n_r - 0.5)
    dth = 2 * np.pi / n_theta
    rr = (np.arange(n_r) + 0.5) * dr
    tt = np.arange(n_theta) * dth
    r = np.repeat(rr, n_theta)
    theta = np.tile(tt, n_r)
    y = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    mu, sig, sig_inv, sq, isq = gnomonic_metric(y)
    boundary = np.zeros(r.size, dtype=bool)
    boundary[(n_r - 1) * n_theta:] = True
    ops = _cartesian_operators(r, theta, _polar_operators(n_r, n_theta, dr, dth))
    return ChartedDomain(
        center=c,
        geodesic_radius=R,
        n_r=n_r,
        n_theta=n_theta,
        dr=dr,
        dtheta=dth,
        r=r,
        theta=theta,
        y=y,
        z=chart_to_sphere(GNOMONIC, c, y),
        mu=mu,
        sigma=sig,
        sigma_inv=sig_inv,
        sqrt_sigma=sq,
        inv_sqrt_sigma=isq,
        christoffel=gnomonic_christoffel(y),
        boundary=boundary,
        ops=ops,
    )


# ----------------------------------------------------------------------------- fields


class DiscreteField:
    """Nodal values of u~ = mu u; boundary nodes hold the Dirichlet data.

    Values are held in extended precision (``values_hp``).  Near the pole the
    stencil weights grow like 1/(r dtheta)^2, so with double-precision nodal
    values the smallest attainable residual on fine lattices sits above the
    Newton tolerance.  ``values`` is the rounded double view used everywhere
    else.
    """

    __slots__ = ("domain", "_hp", "_f64")

    def __init__(self, values, domain: ChartedDomain):
        hp = np.array(values, dtype=np.longdouble)
        if hp.shape != (domain.size,):
            raise DomainError(f"field has {hp.shape} values, domain has {domain.size} nodes")
        f64 = hp.astype(float)
        hp.setflags(write=False)
        f64.setflags(write=False)
        self.domain = domain
        self._hp = hp
        self._f64 = f64

    @property
    def values(self) -> np.ndarray:
        return self._f64

    @property
    def values_hp(self) -> np.ndarray:
        return self._hp

    @classmethod
    def from_u(cls, domain: ChartedDomain, u) -> "DiscreteField":
        u = np.broadcast_to(np.asarray(u, dtype=float), (domain.size,))
        return cls(domain.mu.astype(np.longdouble) * u, domain)

    @property
    def u(self) -> np.ndarray:
        return self.values / self.domain.mu

    @property
    def boundary_trace(self) -> np.ndarray:
        return self.values[self.domain.boundary]

    def with_values(self, values) -> "DiscreteField":
        return DiscreteField(values, self.domain)

    def chart_derivatives(self):
        """(D u~, D^2 u~) at interior nodes from the polar stencils."""
        ops, idx = self.domain.ops, self.domain.interior_nodes
        U = self._hp

        def ap(k):
            return apply_stencil(ops[k], U).astype(float)

        g = np.stack([ap("L1"), ap("L2")], axis=-1)[idx]
        h11, h12, h22 = ap("L11"), ap("L12"), ap("L22")
        H = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)[idx]
        return g, H

    def convexity_witness(self):
        """Node-wise min eigenvalue of D^2 u~ on interior nodes, and its minimum."""
        _, H = self.chart_derivatives()
        mins = np.linalg.eigvalsh(H)[:, 0]
        return mins, float(mins.min())


def covariant_jets(field: DiscreteField) -> ScalarJet2:
    """Frame jets of u at every interior node (batched)."""
    d = field.domain
    idx = d.interior_nodes
    g, H = field.chart_derivatives()
    return chart_jet(GNOMONIC, d.y[idx], field.values[idx], g, H)


def covariant_jet(field: DiscreteField, node: int) -> ScalarJet2:
    """Frame jet of u at one interior node."""
    d = field.domain
    if not 0 <= node < d.size:
        raise BoundaryStencilError(f"node {node} is outside the lattice")
    if d.boundary[node]:
        raise BoundaryStencilError(f"node {node} lies on the boundary ring and has no centred stencil")
    pos = int(np.searchsorted(d.interior_nodes, node))
    return covariant_jets(field)[pos]


# ----------------------------------------------------------------------------- assembly

RhsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]


@dataclass(frozen=True)
class OperatorConfig:
    """Ambient model (or deformation) and curvature function for assembly."""

    ambient: object
    spec: object


def _check_witness(field):
    mins, _ = field.convexity_witness()
    if not np.all(mins > 0):
        k = int(np.argmin(mins))
        node = int(field.domain.interior_nodes[k])
        raise ConeViolationError(
            f"D^2 u~ not positive definite at node {node} (min eig {mins[k]!r})", node=node
        )


def evaluate_residual(field: DiscreteField, op: OperatorConfig, rhs: RhsFn, *, jacobian=True):
    """Residual G[u] - RHS(z, u) on interior nodes (0 on boundary) and optional Jacobian.

    ``rhs(z, y, u)`` returns (value, d value / du) on the interior nodes.
    The Jacobian is with respect to the nodal values of u~; boundary rows are
    the identity.
    """
    d = field.domain
    _check_witness(field)
    idx = d.interior_nodes
    jets = covariant_jets(field)
    try:
        co = linearize_G(op.ambient, op.spec, jets)
    except ConeViolationError as exc:
        node = None if exc.node is None else int(idx[exc.node])
        raise ConeViolationError(str(exc), node=node) from exc
    r_val, r_du = rhs(d.z[idx], d.y[idx], jets.value)
    res = np.zeros(d.size)
    res[idx] = co.operator_value - r_val
    if not jacobian:
        return res, None, co
    mu = d.mu[idx]
    isq = d.inv_sqrt_sigma[idx]
    A = isq @ co.second_order @ isq / mu[:, None, None]
    b = (isq @ co.first_order[..., None])[..., 0] / mu[:, None]
    yq = (isq @ d.y[idx][..., None])[..., 0]
    trG = np.trace(co.second_order, axis1=-2, axis2=-1)
    diag = (co.zeroth_order - r_du - trG) / mu - np.sum(co.first_order * yq, axis=-1) / mu**3

    def full(v):
        out = np.zeros(d.size)
        out[idx] = v
        return sp.diags(out)

    ops = d.ops
    J = (
        full(A[:, 0, 0]) @ ops["L11"]
        + full(2 * A[:, 0, 1]) @ ops["L12"]
        + full(A[:, 1, 1]) @ ops["L22"]
        + full(b[:, 0]) @ ops["L1"]
        + full(b[:, 1]) @ ops["L2"]
    )
    dvec = np.zeros(d.size)
    dvec[idx] = diag
    dvec[d.boundary] = 1.0
    J = (J + sp.diags(dvec)).tocsc()
    return res, J, co


def assemble_residual_and_jacobian(field: DiscreteField, op: OperatorConfig, rhs: RhsFn):
    """Residual vector and sparse Jacobian (see :func:`evaluate_residual`)."""
    res, J, _ = evaluate_residual(field, op, rhs)
    return res, J
