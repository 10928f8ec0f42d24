"""Field tables, curvature tables and triangle meshes.

Field table (comma separated, ``#`` metadata lines first)::

    # spaceform-dirichlet field
    # model = 0
    # center = 0.0 0.0 1.0
    # radius = 0.6283185307179586
    # n_r = 17
    # n_theta = 32
    node,ring,y1,y2,ut,u,kappa1,kappa2

``ut`` is written with the shortest decimal that round-trips the extended
precision nodal value, every other number with ``repr``.  ``kappa`` is empty
on boundary nodes (no full stencil there).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .discretization import DiscreteField, build_domain, covariant_jets
from .errors import DomainError
from .geometry import frame_from_u
from .spaceform import SpaceFormModel, zeta

FIELD_COLUMNS = ("node", "ring", "y1", "y2", "ut", "u", "kappa1", "kappa2")
CURVATURE_COLUMNS = ("node", "y1", "y2", "u", "kappa1", "kappa2", "tau", "convexity_witness", "flag")
MAGIC = "spaceform-dirichlet field"


def _num(x) -> str:
    return repr(float(x))


def _hp(x) -> str:
    return np.format_float_scientific(np.longdouble(x), unique=True)


def node_curvatures(fld: DiscreteField, model: SpaceFormModel):
    """Interior (kappa (N_int, 2), tau, convexity witness) of a discrete field."""
    jets = covariant_jets(fld)
    fr = frame_from_u(model, jets)
    mins, _ = fld.convexity_witness()
    return fr.principal_curvatures, fr.support_function, mins


def _header(fld: DiscreteField, model: SpaceFormModel):
    d = fld.domain
    return [
        f"# {MAGIC}",
        f"# model = {model.curvature_sign}",
        "# center = " + " ".join(_num(c) for c in d.center),
        f"# radius = {_num(d.geodesic_radius)}",
        f"# n_r = {d.n_r}",
        f"# n_theta = {d.n_theta}",
    ]


def field_table(fld: DiscreteField, model: SpaceFormModel) -> str:
    d = fld.domain
    kappa = np.full((d.size, 2), np.nan)
    kappa[d.interior_nodes] = node_curvatures(fld, model)[0]
    buf = io.StringIO()
    buf.write("\n".join(_header(fld, model)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_COLUMNS)
    u = fld.u
    for k in range(d.size):
        ks = ["" if np.isnan(x) else _num(x) for x in kappa[k]]
        w.writerow([k, k // d.n_theta, _num(d.y[k, 0]), _num(d.y[k, 1]), _hp(fld.values_hp[k]), _num(u[k]), *ks])
    return buf.getvalue()


def write_field(path, fld: DiscreteField, model: SpaceFormModel):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(field_table(fld, model))


def parse_field(text: str):
    """Inverse of :func:`field_table`; returns (field, model)."""
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].partition("=")
            if sep:
                meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    try:
        model = SpaceFormModel(int(meta["model"]))
        center = np.array([float(x) for x in meta["center"].split()])
        domain = build_domain(center, float(meta["radius"]), int(meta["n_r"]), int(meta["n_theta"]))
    except (KeyError, ValueError) as exc:
        raise DomainError(f"malformed field header: {exc}") from None
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != FIELD_COLUMNS:
        raise DomainError(f"field table must start with columns {','.join(FIELD_COLUMNS)}")
    rows = rows[1:]
    if len(rows) != domain.size:
        raise DomainError(f"field table has {len(rows)} rows, grid has {domain.size} nodes")
    ut = np.empty(domain.size, dtype=np.longdouble)
    try:
        for r in rows:
            k = int(r[0])
            if not 0 <= k < domain.size:
                raise ValueError(f"node index {k} out of range")
            ut[k] = np.longdouble(r[4])
        if sorted(int(r[0]) for r in rows) != list(range(domain.size)):
            raise ValueError("node indices are not a permutation of the grid")
    except (ValueError, IndexError) as exc:
        raise DomainError(f"malformed field row: {exc}") from None
    if not np.all(np.isfinite(ut.astype(float))):
        raise DomainError("field values must be finite")
    return DiscreteField(ut, domain), model


def read_field(path):
    with open(path, encoding="utf-8") as fh:
        return parse_field(fh.read())


def curvature_table(fld: DiscreteField, model: SpaceFormModel) -> str:
    """Node-wise kappa, support function and convexity witness (interior nodes)."""
    d = fld.domain
    kappa, tau, mins = node_curvatures(fld, model)
    u = fld.u
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVATURE_COLUMNS)
    for m, k in enumerate(d.interior_nodes):
        flag = "ok" if mins[m] > 0 and kappa[m, 0] > 0 else "nonconvex"
        w.writerow([int(k), _num(d.y[k, 0]), _num(d.y[k, 1]), _num(u[k]), _num(kappa[m, 0]), _num(kappa[m, 1]),
                    _num(tau[m]), _num(mins[m]), flag])
    return buf.getvalue()


# ----------------------------------------------------------------------------- mesh

EMBEDDING_NOTES = {
    0: "Euclidean R^3: position = rho(z) z",
    1: "S^3 point cos(rho) e0 + sin(rho) z, centrally projected to R^3: position = tan(rho) z",
    -1: "hyperboloid point cosh(rho) e0 + sinh(rho) z, Poincare ball: position = tanh(rho/2) z",
}


def embed_positions(fld: DiscreteField, model: SpaceFormModel) -> np.ndarray:
    rho = zeta(model, fld.u)[0]
    K = model.curvature_sign
    if K == 0:
        r = rho
    elif K == 1:
        r = np.tan(rho)
    else:
        r = np.tanh(rho / 2)
    return r[:, None] * fld.domain.z


def mesh_faces(n_r: int, n_t: int) -> np.ndarray:
    """Triangles of the polar lattice (0-based): a fan on ring 0, two per quad outside."""
    faces = [(0, j, j + 1) for j in range(1, n_t - 1)]
    for i in range(n_r - 1):
        for j in range(n_t):
            a, b = i * n_t + j, i * n_t + (j + 1) % n_t
            c, d = a + n_t, b + n_t
            faces += [(a, c, b), (b, c, d)]
    return np.array(faces, dtype=int)


def mesh_obj(fld: DiscreteField, model: SpaceFormModel) -> str:
    d = fld.domain
    X = embed_positions(fld, model)
    lines = [
        "# spaceform-dirichlet radial graph",
        f"# model K = {model.curvature_sign}",
        f"# embedding: {EMBEDDING_NOTES[model.curvature_sign]}",
        "# z = point of S^2, rho = zeta(u); vertex k = grid node k (ring-major)",
        f"# grid n_r = {d.n_r}, n_theta = {d.n_theta}",
    ]
    lines += [f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in X]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh_faces(d.n_r, d.n_theta)]
    return "\n".join(lines) + "\n"


def write_mesh(path, fld: DiscreteField, model: SpaceFormModel):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mesh_obj(fld, model))


__all__ = [
    "FIELD_COLUMNS",
    "CURVATURE_COLUMNS",
    "node_curvatures",
    "field_table",
    "write_field",
    "parse_field",
    "read_field",
    "curvature_table",
    "embed_positions",
    "mesh_faces",
    "mesh_obj",
    "write_mesh",
]
