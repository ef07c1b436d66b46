"""Continuous Sturm-Liouville problems as data.

A :class:`ProblemSpec` bundles a domain (interval or axis-aligned rectangle),
pointwise coefficient fields and the Dirichlet part ``S`` of the boundary.
The operator is

    A u = -sum_ij d_i(a_ij d_j u) + sum_j a_j d_j u + (a00 + delta_a0) u

with the Robin-type boundary operator ``b1 d_c + d_t + (b00 + delta_b0)``.
Coefficient fields take a point ``x`` (an ndarray of shape ``(d,)``) and return
a scalar, a vector or a matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "BUILTIN_PROBLEMS",
    "Condition",
    "Interval",
    "ProblemError",
    "ProblemSpec",
    "Rectangle",
    "UnknownProblemError",
    "ValidationReport",
    "builtin_problem",
    "validate",
]

B1_FLOOR = 1e-12


class ProblemError(ValueError):
    """Raised for malformed problems or out-of-range parameters."""


class UnknownProblemError(ProblemError):
    pass


class CoefficientError(ProblemError):
    """A coefficient field failed to evaluate at a sample point."""

    def __init__(self, name: str, point, cause: Exception):
        super().__init__(f"coefficient {name!r} failed at point {list(point)}: {cause}")
        self.name = name
        self.point = np.asarray(point)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Interval:
    x0: float = 0.0
    x1: float = 1.0

    dim = 1
    faces = ("left", "right")

    def __post_init__(self):
        if not self.x1 > self.x0:
            raise ProblemError(f"empty interval [{self.x0}, {self.x1}]")

    @property
    def volume(self) -> float:
        return self.x1 - self.x0

    def face_point(self, face: str) -> np.ndarray:
        return np.array([self.x0 if face == "left" else self.x1])

    def normal(self, face: str) -> np.ndarray:
        return np.array([-1.0 if face == "left" else 1.0])


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    dim = 2
    # counterclockwise order
    faces = ("bottom", "right", "top", "left")

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ProblemError("degenerate rectangle")

    @property
    def volume(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def face_endpoints(self, face: str) -> tuple[np.ndarray, np.ndarray]:
        """Start and end of a face, traversed counterclockwise."""
        a, b, c, d = self.x0, self.x1, self.y0, self.y1
        corners = {
            "bottom": ((a, c), (b, c)),
            "right": ((b, c), (b, d)),
            "top": ((b, d), (a, d)),
            "left": ((a, d), (a, c)),
        }
        p, q = corners[face]
        return np.array(p, dtype=float), np.array(q, dtype=float)

    def tangent(self, face: str) -> np.ndarray:
        p, q = self.face_endpoints(face)
        return (q - p) / np.linalg.norm(q - p)

    def normal(self, face: str) -> np.ndarray:
        t = self.tangent(face)
        return np.array([t[1], -t[0]])

    def face_length(self, face: str) -> float:
        p, q = self.face_endpoints(face)
        return float(np.linalg.norm(q - p))


Domain = Interval | Rectangle


# ---------------------------------------------------------------------------
# problem data


def _const(value):
    return lambda x: value


@dataclass(frozen=True)
class ProblemSpec:
    """A variational Sturm-Liouville boundary value problem.

    ``t_field`` may return a complex vector: the builtins scale a real unit
    tangent by a complex constant (the oblique-derivative coefficient).
    """

    name: str
    domain: Domain
    a_matrix: Callable[[np.ndarray], np.ndarray]
    a_vec: Callable[[np.ndarray], np.ndarray]
    a00: Callable[[np.ndarray], float]
    delta_a0: Callable[[np.ndarray], complex]
    dirichlet_part: tuple[str, ...]
    b1: Callable[[np.ndarray], complex]
    b00: Callable[[np.ndarray], float]
    delta_b0: Callable[[np.ndarray], complex]
    t_field: Callable[[np.ndarray], np.ndarray]
    s_exponent: float = 1.0
    ellipticity_m: float = 1.0
    params: Mapping[str, complex] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.s_exponent <= 1.0:
            raise ProblemError(f"s_exponent must lie in (0, 1], got {self.s_exponent}")
        if not self.ellipticity_m > 0:
            raise ProblemError("ellipticity_m must be positive")
        bad = [f for f in self.dirichlet_part if f not in self.domain.faces]
        if bad:
            raise ProblemError(f"unknown boundary faces {bad}; expected some of {self.domain.faces}")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def free_faces(self) -> tuple[str, ...]:
        return tuple(f for f in self.domain.faces if f not in self.dirichlet_part)


class Condition(str, Enum):
    S_NONEMPTY = "S_nonempty"
    A00_POSITIVE_MASS = "a00_positive_mass"
    B00_POSITIVE_MASS = "b00_positive_mass"
    NONE = "none"


@dataclass(frozen=True)
class ValidationReport:
    strongly_elliptic: bool
    coercive: bool
    condition_one_of_three: Condition
    # the c < sin(pi s / n) test needs the discrete c; filled in by the spectral report
    completeness_angle_ok: bool | None = None
    hermitian: bool = True
    boundary_ok: bool = True
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "strongly_elliptic": self.strongly_elliptic,
            "coercive": self.coercive,
            "condition_one_of_three": self.condition_one_of_three.value,
            "completeness_angle_ok": self.completeness_angle_ok,
            "hermitian": self.hermitian,
            "boundary_ok": self.boundary_ok,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ValidationReport":
        return cls(
            strongly_elliptic=d["strongly_elliptic"],
            coercive=d["coercive"],
            condition_one_of_three=Condition(d["condition_one_of_three"]),
            completeness_angle_ok=d["completeness_angle_ok"],
            hermitian=d["hermitian"],
            boundary_ok=d["boundary_ok"],
            notes=tuple(d["notes"]),
        )


# ---------------------------------------------------------------------------
# builtins


def _as_complex(key: str, value) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, Mapping) and set(value) == {"re", "im"}:
        return complex(float(value["re"]), float(value["im"]))
    if isinstance(value, bool):
        raise ProblemError(f"parameter {key!r} must be numeric")
    try:
        return complex(value)
    except (TypeError, ValueError):
        raise ProblemError(f"parameter {key!r} must be numeric, got {value!r}") from None


def _as_real(key: str, value) -> float:
    z = _as_complex(key, value)
    if z.imag != 0:
        raise ProblemError(f"parameter {key!r} must be real, got {value!r}")
    return z.real


# name -> {param: (kind, default)}; kind is "nonneg", "positive" or "complex"
_PARAMS: dict[str, dict[str, tuple[str, complex]]] = {
    "neumann_1d": {"a00": ("nonneg", 1.0), "delta_a0": ("complex", 0.0)},
    "robin_1d": {
        "a00": ("nonneg", 0.0),
        "b00": ("nonneg", 1.0),
        "delta_a0": ("complex", 0.0),
        "delta_b0": ("complex", 0.0),
    },
    "zaremba_1d": {"a00": ("nonneg", 0.0), "delta_a0": ("complex", 0.0)},
    "convection_1d": {
        "b": ("complex", 0.5),
        "a00": ("nonneg", 1.0),
        "delta_a0": ("complex", 0.0),
    },
    "zaremba_2d": {
        "a00": ("nonneg", 0.0),
        "eps": ("complex", 0.0),
        "delta_a0": ("complex", 0.0),
    },
    "convection_2d": {
        "bx": ("complex", 0.5),
        "by": ("complex", 0.0),
        "a00": ("nonneg", 1.0),
        "delta_a0": ("complex", 0.0),
    },
    "dbar_noncoercive_2d": {
        "b00": ("positive", 1.0),
        "a": ("complex", 0.0),
        "delta_a0": ("complex", 0.0),
    },
}

BUILTIN_PROBLEMS: tuple[str, ...] = tuple(_PARAMS)


def builtin_parameters(name: str) -> dict[str, complex]:
    """Default parameter values of a builtin problem."""
    if name not in _PARAMS:
        raise UnknownProblemError(f"unknown problem {name!r}")
    return {k: default for k, (_, default) in _PARAMS[name].items()}


def _resolve_params(name: str, params: Mapping) -> dict[str, complex]:
    schema = _PARAMS[name]
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ProblemError(f"unknown parameters {unknown} for {name}; allowed: {sorted(schema)}")
    out = {}
    for key, (kind, default) in schema.items():
        raw = params.get(key, default)
        if kind == "complex":
            out[key] = _as_complex(key, raw)
            continue
        value = _as_real(key, raw)
        if not math.isfinite(value) or value < 0 or (kind == "positive" and value == 0):
            raise ProblemError(f"parameter {key!r} of {name} must be {kind}, got {raw!r}")
        out[key] = value
    return out


def builtin_problem(name: str, params: Mapping | None = None) -> ProblemSpec:
    """Build one of the canned problems on the unit interval or unit square.

    The 1D problems use ``[0, 1]``; the 2D ones ``[0, 1]^2``. ``params``
    overrides the free constants listed in :data:`BUILTIN_PROBLEMS`.
    """
    if name not in _PARAMS:
        raise UnknownProblemError(f"unknown problem {name!r}; known: {', '.join(BUILTIN_PROBLEMS)}")
    p = _resolve_params(name, params or {})
    one = np.eye(1)
    eye2 = np.eye(2)
    zero1 = np.zeros(1, dtype=complex)
    zero2 = np.zeros(2, dtype=complex)
    common = dict(delta_a0=_const(p.get("delta_a0", 0.0)), params=dict(p))

    if name == "neumann_1d":
        return ProblemSpec(
            name=name, domain=Interval(), a_matrix=_const(one), a_vec=_const(zero1),
            a00=_const(p["a00"]), dirichlet_part=(), b1=_const(1.0), b00=_const(0.0),
            delta_b0=_const(0.0), t_field=_const(zero1), **common,
        )
    if name == "robin_1d":
        return ProblemSpec(
            name=name, domain=Interval(), a_matrix=_const(one), a_vec=_const(zero1),
            a00=_const(p["a00"]), dirichlet_part=(), b1=_const(1.0), b00=_const(p["b00"]),
            delta_b0=_const(p["delta_b0"]), t_field=_const(zero1), **common,
        )
    if name == "zaremba_1d":
        dom = Interval()
        # b1 and b0 are the indicators of the free end and of S = {x0}
        return ProblemSpec(
            name=name, domain=dom, a_matrix=_const(one), a_vec=_const(zero1),
            a00=_const(p["a00"]), dirichlet_part=("left",),
            b1=lambda x: 0.0 if x[0] == dom.x0 else 1.0,
            b00=lambda x: 1.0 if x[0] == dom.x0 else 0.0,
            delta_b0=_const(0.0), t_field=_const(zero1), **common,
        )
    if name == "convection_1d":
        vec = np.array([p["b"]], dtype=complex)
        return ProblemSpec(
            name=name, domain=Interval(), a_matrix=_const(one), a_vec=_const(vec),
            a00=_const(p["a00"]), dirichlet_part=(), b1=_const(1.0), b00=_const(0.0),
            delta_b0=_const(0.0), t_field=_const(zero1), **common,
        )
    if name == "zaremba_2d":
        dom = Rectangle()
        eps = p["eps"]
        tangents = {f: dom.tangent(f) for f in dom.faces}

        def on_left(x):
            return x[0] == dom.x0

        def t_field(x):
            # boundary points are classified by the face they lie on; S = left face
            if on_left(x):
                return zero2
            face = _face_of(dom, x)
            return eps * tangents[face]

        return ProblemSpec(
            name=name, domain=dom, a_matrix=_const(eye2), a_vec=_const(zero2),
            a00=_const(p["a00"]), dirichlet_part=("left",),
            b1=lambda x: 0.0 if on_left(x) else 1.0,
            b00=lambda x: 1.0 if on_left(x) else 0.0,
            delta_b0=_const(0.0), t_field=t_field, **common,
        )
    if name == "convection_2d":
        vec = np.array([p["bx"], p["by"]], dtype=complex)
        return ProblemSpec(
            name=name, domain=Rectangle(), a_matrix=_const(eye2), a_vec=_const(vec),
            a00=_const(p["a00"]), dirichlet_part=(), b1=_const(1.0), b00=_const(0.0),
            delta_b0=_const(0.0), t_field=_const(zero2), **common,
        )
    # dbar_noncoercive_2d: -Laplace + a d/dzbar + a0 with the complex normal derivative
    amat = np.array([[1.0, 1j], [-1j, 1.0]])
    vec = p["a"] * np.array([0.5, 0.5j])
    return ProblemSpec(
        name=name, domain=Rectangle(), a_matrix=_const(amat), a_vec=_const(vec),
        a00=_const(1.0), dirichlet_part=(), b1=_const(1.0), b00=_const(p["b00"]),
        delta_b0=_const(0.0), t_field=_const(zero2), s_exponent=0.5, **common,
    )


def _face_of(dom: Rectangle, x) -> str:
    if x[1] == dom.y0:
        return "bottom"
    if x[0] == dom.x1:
        return "right"
    if x[1] == dom.y1:
        return "top"
    return "left"


# ---------------------------------------------------------------------------
# validation


def _eval(spec: ProblemSpec, name: str, x):
    fn = getattr(spec, name)
    try:
        return fn(x)
    except Exception as exc:  # noqa: BLE001 - re-raised with the sample point
        raise CoefficientError(name, x, exc) from exc


def _interior_samples(dom: Domain, n: int) -> list[np.ndarray]:
    # cell midpoints of a uniform n-grid: never on the boundary
    if dom.dim == 1:
        xs = dom.x0 + (np.arange(n) + 0.5) / n * (dom.x1 - dom.x0)
        return [np.array([x]) for x in xs]
    xs = dom.x0 + (np.arange(n) + 0.5) / n * (dom.x1 - dom.x0)
    ys = dom.y0 + (np.arange(n) + 0.5) / n * (dom.y1 - dom.y0)
    return [np.array([x, y]) for x in xs for y in ys]


def _face_samples(dom: Domain, face: str, n: int) -> list[np.ndarray]:
    if dom.dim == 1:
        return [dom.face_point(face)]
    p, q = dom.face_endpoints(face)
    s = (np.arange(n) + 0.5) / n
    return [p + si * (q - p) for si in s]


def _real_directions(dim: int) -> list[np.ndarray]:
    if dim == 1:
        return [np.array([1.0])]
    angles = np.arange(32) * np.pi / 32
    return [np.array([math.cos(a), math.sin(a)]) for a in angles]


def validate(spec: ProblemSpec, n_samples: int = 16) -> ValidationReport:
    """Check the standing hypotheses on a deterministic sample of points.

    Strong ellipticity is tested on a fixed fan of real unit directions.
    Coercivity minimises ``conj(z) . a z`` over all complex unit ``z`` (the
    smallest eigenvalue of the Hermitian coefficient matrix), which subsumes
    any finite set of complex test gradients.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    dom = spec.domain
    notes: list[str] = []
    m = spec.ellipticity_m
    hermitian = True
    elliptic = True
    coercive = True
    directions = _real_directions(dom.dim)
    for x in _interior_samples(dom, n_samples):
        a = np.asarray(_eval(spec, "a_matrix", x), dtype=complex).reshape(dom.dim, dom.dim)
        defect = np.max(np.abs(a - a.conj().T))
        if defect > 0:
            if hermitian:
                notes.append(f"a_matrix not Hermitian at {x.tolist()} (defect {defect:.3g})")
            hermitian = False
        scale = max(1.0, float(np.max(np.abs(a))))
        for xi in directions:
            q = xi @ a @ xi
            if q.real < m * (1 - 1e-12) or abs(q.imag) > 1e-12 * scale:
                elliptic = False
        lam_min = float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])
        if lam_min <= 1e-12 * scale:
            coercive = False
        a00 = _eval(spec, "a00", x)
        if np.real(a00) < 0 or np.imag(a00) != 0:
            notes.append(f"a00 negative or complex at {x.tolist()}")
    elliptic = elliptic and hermitian
    coercive = coercive and elliptic
    if not elliptic:
        notes.append("strong ellipticity fails on the sampled points")
    elif not coercive:
        notes.append("strongly elliptic but not coercive: the Hermitian form degenerates on complex gradients")

    boundary_ok = True
    for face in spec.dirichlet_part:
        for x in _face_samples(dom, face, n_samples):
            if _eval(spec, "b1", x) != 0:
                boundary_ok = False
                notes.append(f"b1 does not vanish on S at {x.tolist()}")
                break
    for face in spec.free_faces:
        for x in _face_samples(dom, face, n_samples):
            b1 = complex(_eval(spec, "b1", x))
            if abs(b1) < B1_FLOOR:
                boundary_ok = False
                notes.append(f"|b1| below floor {B1_FLOOR} on the free boundary at {x.tolist()}")
                break
            ratio = complex(_eval(spec, "b00", x)) / b1
            if ratio.real < 0 or abs(ratio.imag) > 1e-12 * max(1.0, abs(ratio)):
                boundary_ok = False
                notes.append(f"b00/b1 not a nonnegative real at {x.tolist()}")
                break

    condition = _condition_one_of_three(spec, n_samples)
    if condition is Condition.NONE:
        notes.append("none of S nonempty, a00 mass, b00/b1 mass holds: the SL form may be degenerate")
    return ValidationReport(
        strongly_elliptic=elliptic,
        coercive=coercive,
        condition_one_of_three=condition,
        completeness_angle_ok=None,
        hermitian=hermitian,
        boundary_ok=boundary_ok,
        notes=tuple(notes),
    )


def _condition_one_of_three(spec: ProblemSpec, n: int) -> Condition:
    if spec.dirichlet_part:
        return Condition.S_NONEMPTY
    dom = spec.domain
    # midpoint-rule quadrature on the sample grid
    cell = dom.volume / n**dom.dim
    mass = sum(float(np.real(_eval(spec, "a00", x))) for x in _interior_samples(dom, n)) * cell
    if mass > 0:
        return Condition.A00_POSITIVE_MASS
    bmass = 0.0
    for face in spec.free_faces:
        weight = 1.0 if dom.dim == 1 else dom.face_length(face) / n
        for x in _face_samples(dom, face, n):
            b1 = complex(_eval(spec, "b1", x))
            if abs(b1) >= B1_FLOOR:
                bmass += (complex(_eval(spec, "b00", x)) / b1).real * weight
    if bmass > 0:
        return Condition.B00_POSITIVE_MASS
    return Condition.NONE
