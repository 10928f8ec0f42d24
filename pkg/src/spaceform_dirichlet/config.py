"""Problem configuration files (INI-style sections of key = value pairs).

Schema (all keys optional except where marked)::

    [problem]
    model = 0                    # curvature sign K in {-1, 0, 1}   (required)
    curvature = sigma(2)^(1/2)   # curvature function text, n = 2   (required)
    psi = 1                      # right-hand side in y1 y2 z1 z2 z3 u (required)

    [domain]
    center = 0 0 1               # point of S^2 (normalized on load)
    radius = pi/5                # geodesic radius, < pi/2          (required)
    n_r = 17
    n_theta = 32

    [data]
    boundary = 1                 # boundary datum u on the boundary ring (required)
    subsolution = 1              # defaults to the boundary expression
    exact = 1                    # optional known solution, used for error reporting

    [homotopy]
    path = auto                  # auto | auxiliary | main | spherical
    epsilon, delta1, delta2, T_exponent, initial_step, min_step

    [output]
    report, field, mesh          # file paths

Numbers may be written as constant expressions (``pi/5``); they are stored as
floats and written back with ``repr``.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .curvature import parse_curvature
from .discretization import build_domain
from .errors import DomainError
from .expressions import FieldExpression, RhsExpression, parse_expression
from .solver import PATHS, DiscreteProblem
from .spaceform import SpaceFormModel, zeta

HOMOTOPY_KEYS = ("epsilon", "delta1", "delta2", "T_exponent", "initial_step", "min_step")
OUTPUT_KEYS = ("report", "field", "mesh")
DEFAULTS = {"n_r": 17, "n_theta": 32, "center": (0.0, 0.0, 1.0), "path": "auto",
            "delta1": 0.05, "initial_step": 0.25, "min_step": 1e-4}


def _number(text, name) -> float:
    expr = parse_expression(text)
    if expr.free_symbols:
        raise DomainError(f"{name} must be a constant, got {text!r}")
    val = float(expr.evalf(17))
    if not np.isfinite(val):
        raise DomainError(f"{name} is not finite: {text!r}")
    return val


def _integer(text, name) -> int:
    val = _number(text, name)
    if val != int(val):
        raise DomainError(f"{name} must be an integer, got {text!r}")
    return int(val)


@dataclass(frozen=True)
class ProblemConfig:
    model: int
    curvature: str
    psi: str
    radius: float
    boundary: str
    center: tuple = DEFAULTS["center"]
    n_r: int = DEFAULTS["n_r"]
    n_theta: int = DEFAULTS["n_theta"]
    subsolution: str | None = None
    exact: str | None = None
    path: str = DEFAULTS["path"]
    epsilon: float | None = None
    delta1: float = DEFAULTS["delta1"]
    delta2: float | None = None
    T_exponent: int | None = None
    initial_step: float = DEFAULTS["initial_step"]
    min_step: float = DEFAULTS["min_step"]
    outputs: dict = field(default_factory=dict)

    # ------------------------------------------------------------------ text

    @classmethod
    def parse(cls, text: str) -> "ProblemConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise DomainError(f"malformed config: {exc}") from None
        known = {"problem", "domain", "data", "homotopy", "output"}
        extra = set(cp.sections()) - known
        if extra:
            raise DomainError(f"unknown config sections: {sorted(extra)}")

        def get(sec, key, required=False):
            if cp.has_option(sec, key):
                return cp.get(sec, key).strip()
            if required:
                raise DomainError(f"missing required key [{sec}] {key}")
            return None

        allowed = {
            "problem": {"model", "curvature", "psi"},
            "domain": {"center", "radius", "n_r", "n_theta"},
            "data": {"boundary", "subsolution", "exact"},
            "homotopy": {"path", *HOMOTOPY_KEYS},
            "output": set(OUTPUT_KEYS),
        }
        for sec in cp.sections():
            bad = set(cp.options(sec)) - allowed[sec]
            if bad:
                raise DomainError(f"unknown keys in [{sec}]: {sorted(bad)}")

        kw = {
            "model": _integer(get("problem", "model", True), "model"),
            "curvature": get("problem", "curvature", True),
            "psi": get("problem", "psi", True),
            "radius": _number(get("domain", "radius", True), "radius"),
            "boundary": get("data", "boundary", True),
        }
        c = get("domain", "center")
        if c is not None:
            parts = c.replace(",", " ").split()
            if len(parts) != 3:
                raise DomainError(f"center needs three components, got {c!r}")
            kw["center"] = tuple(_number(p, "center") for p in parts)
        for key in ("n_r", "n_theta"):
            v = get("domain", key)
            if v is not None:
                kw[key] = _integer(v, key)
        for key in ("subsolution", "exact"):
            v = get("data", key)
            if v is not None:
                kw[key] = v
        v = get("homotopy", "path")
        if v is not None:
            kw["path"] = v
        for key in HOMOTOPY_KEYS:
            v = get("homotopy", key)
            if v is not None and v.lower() != "none":
                kw[key] = _integer(v, key) if key == "T_exponent" else _number(v, key)
        kw["outputs"] = {k: get("output", k) for k in OUTPUT_KEYS if get("output", k)}
        return cls(**kw)

    def serialize(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["problem"] = {"model": str(self.model), "curvature": self.curvature, "psi": self.psi}
        cp["domain"] = {
            "center": " ".join(repr(float(x)) for x in self.center),
            "radius": repr(float(self.radius)),
            "n_r": str(self.n_r),
            "n_theta": str(self.n_theta),
        }
        data = {"boundary": self.boundary}
        for key in ("subsolution", "exact"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        cp["data"] = data
        hom = {"path": self.path}
        for key in HOMOTOPY_KEYS:
            v = getattr(self, key)
            if v is not None:
                hom[key] = str(v) if key == "T_exponent" else repr(float(v))
        cp["homotopy"] = hom
        if self.outputs:
            cp["output"] = {k: self.outputs[k] for k in OUTPUT_KEYS if k in self.outputs}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # ------------------------------------------------------------ validation

    def validate(self) -> "ProblemConfig":
        """Check ranges and parse every expression; returns self."""
        SpaceFormModel(self.model)
        parse_curvature(self.curvature, 2)
        RhsExpression.parse(self.psi)
        if self.path not in ("auto", *PATHS):
            raise DomainError(f"unknown path {self.path!r}")
        dom = self.domain()
        model = SpaceFormModel(self.model)
        checks = [("boundary", self.boundary), ("subsolution", self.subsolution_text)]
        if self.exact is not None:
            checks.append(("exact", self.exact))
        for name, text in checks:
            vals = FieldExpression.parse(text).values(dom.z, dom.y)
            try:
                zeta(model, vals)
            except DomainError as exc:
                raise DomainError(f"{name} data out of range for K = {self.model}: {exc}") from None
        return self

    @property
    def subsolution_text(self) -> str:
        return self.subsolution if self.subsolution is not None else self.boundary

    def domain(self):
        c = np.asarray(self.center, dtype=float)
        nrm = np.linalg.norm(c)
        if not nrm > 0:
            raise DomainError("center must be a nonzero vector")
        return build_domain(c / nrm, self.radius, self.n_r, self.n_theta)

    def with_grid(self, n_r: int, n_theta: int) -> "ProblemConfig":
        return replace(self, n_r=n_r, n_theta=n_theta)

    def build_problem(self) -> DiscreteProblem:
        dom = self.domain()
        model = SpaceFormModel(self.model)
        spec = parse_curvature(self.curvature, 2)
        psi = RhsExpression.parse(self.psi)
        bnd = FieldExpression.parse(self.boundary).values(dom.z, dom.y)
        sub_ex = FieldExpression.parse(self.subsolution_text)
        sub = sub_ex.values(dom.z, dom.y)
        jets = sub_ex.jets(dom.center, dom.y[dom.interior_nodes])
        return DiscreteProblem(
            dom, model, spec, psi, bnd, sub, jets,
            epsilon=self.epsilon, delta1=self.delta1, delta2=self.delta2, T_exponent=self.T_exponent,
            initial_step=self.initial_step, min_step=self.min_step,
        )


def load_config(path) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return ProblemConfig.parse(fh.read()).validate()


def normalize(text: str) -> str:
    """Canonical text of a config: parse then serialize."""
    return ProblemConfig.parse(text).serialize()


__all__ = ["ProblemConfig", "load_config", "normalize", "DEFAULTS"]
