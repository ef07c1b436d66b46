"""Conforming Galerkin discretisation: mesh, basis, quadrature and the
mass / SL-Gram / perturbation matrices.

Discrete dictionary used throughout the package: a coefficient vector ``x``
represents ``u = sum_i x_i phi_i``, so ``||u||_SL^2 = x^H K0 x`` and
``||u||_L2^2 = x^H M x``.  A functional vector ``g`` (``g_i = (phi_i, f)``)
represents ``f`` in the dual space with ``||f||^2 = g^H K0^{-1} g``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .problem import B1_FLOOR, ProblemSpec, Rectangle

__all__ = [
    "AssembledSystem",
    "Basis",
    "DiscretizationError",
    "Quadrature",
    "discretize",
    "dump_matrix",
    "dump_system",
    "gauss_legendre",
    "interpolate",
    "load_matrix",
    "load_system_matrices",
]

SYMMETRY_DEFECT = 1e-12
PIVOT_FLOOR = 1e-12


class DiscretizationError(ValueError):
    pass


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray


def gauss_legendre(npoints: int) -> Quadrature:
    """Gauss-Legendre rule on [-1, 1], exact up to degree ``2*npoints - 1``."""
    if not 1 <= npoints <= 16:
        raise ValueError(f"npoints must be in [1, 16], got {npoints}")
    x, w = leggauss(npoints)
    return Quadrature(x, w)


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class Basis:
    """Lagrange basis on a uniform mesh with the Dirichlet nodes removed.

    ``nodes`` holds the coordinates of every mesh node, ``dofs`` the global
    indices of the retained ones (in increasing order).
    """

    dim: int
    degree: int
    counts: tuple[int, ...]
    nodes: np.ndarray
    dofs: np.ndarray
    domain: object = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.dofs)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def dof_nodes(self) -> np.ndarray:
        return self.nodes[self.dofs]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "degree": self.degree,
            "counts": list(self.counts),
            "N": self.N,
            "removed_nodes": sorted(set(range(self.n_nodes)) - set(self.dofs.tolist())),
        }


def _build_basis(spec: ProblemSpec, resolution: int, degree: int) -> Basis:
    dom = spec.domain
    if dom.dim == 1:
        n_nodes = degree * resolution + 1
        nodes = np.linspace(dom.x0, dom.x1, n_nodes).reshape(-1, 1)
        removed = set()
        if "left" in spec.dirichlet_part:
            removed.add(0)
        if "right" in spec.dirichlet_part:
            removed.add(n_nodes - 1)
        counts = (resolution,)
    else:
        nx = ny = resolution
        xs = np.linspace(dom.x0, dom.x1, nx + 1)
        ys = np.linspace(dom.y0, dom.y1, ny + 1)
        X, Y = np.meshgrid(xs, ys)  # node (i, j) -> j*(nx+1) + i
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
        face_nodes = {
            "bottom": idx[0, :], "top": idx[-1, :], "left": idx[:, 0], "right": idx[:, -1],
        }
        removed = set()
        for face in spec.dirichlet_part:
            removed.update(face_nodes[face].tolist())
        counts = (nx, ny)
    dofs = np.array(sorted(set(range(len(nodes))) - removed), dtype=int)
    if len(dofs) == 0:
        raise DiscretizationError("empty basis after Dirichlet restriction")
    return Basis(dim=dom.dim, degree=degree, counts=counts, nodes=nodes, dofs=dofs, domain=dom)


def interpolate(fn: Callable[[np.ndarray], complex], basis: Basis) -> np.ndarray:
    """Nodal interpolant of ``fn`` on the retained degrees of freedom."""
    return np.array([complex(fn(x)) for x in basis.dof_nodes], dtype=complex)


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class AssembledSystem:
    M: np.ndarray
    K0: np.ndarray
    D: np.ndarray
    basis: Basis
    spec: ProblemSpec = field(repr=False)
    quad_points: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.basis.N

    def with_perturbation(self, D: np.ndarray, label: str = "custom") -> "AssembledSystem":
        D = np.array(D, dtype=complex)
        if D.shape != self.K0.shape:
            raise ValueError(f"perturbation shape {D.shape} != {self.K0.shape}")
        D.setflags(write=False)
        return replace(self, D=D, metadata={**self.metadata, "perturbation": label})


def _shape_1d(degree: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and reference derivatives, shape (len(xi), degree+1)."""
    if degree == 1:
        v = np.column_stack([(1 - xi) / 2, (1 + xi) / 2])
        d = np.column_stack([np.full_like(xi, -0.5), np.full_like(xi, 0.5)])
    else:
        v = np.column_stack([xi * (xi - 1) / 2, 1 - xi**2, xi * (xi + 1) / 2])
        d = np.column_stack([xi - 0.5, -2 * xi, xi + 0.5])
    return v, d


def _hermitize(X: np.ndarray, name: str) -> np.ndarray:
    defect = np.linalg.norm(X - X.conj().T)
    scale = np.linalg.norm(X)
    if defect > SYMMETRY_DEFECT * max(scale, np.finfo(float).tiny):
        raise DiscretizationError(f"{name} assembly not Hermitian (defect {defect:.3e})")
    return (X + X.conj().T) / 2


def _eval_all(fn, points, name, shape=()):
    out = np.empty((len(points),) + shape, dtype=complex)
    for k, x in enumerate(points):
        try:
            out[k] = np.asarray(fn(x), dtype=complex).reshape(shape)
        except Exception as exc:  # noqa: BLE001
            raise DiscretizationError(f"coefficient {name!r} failed at {x.tolist()}: {exc}") from exc
    return out


def _b1_checked(spec, points):
    b1 = _eval_all(spec.b1, points, "b1")
    low = np.abs(b1) < B1_FLOOR
    if np.any(low):
        x = points[np.argmax(low)]
        raise DiscretizationError(f"|b1| below {B1_FLOOR} at retained boundary point {x.tolist()}")
    return b1


def _assemble_1d(spec, basis, npts):
    dom = spec.domain
    p = basis.degree
    R = basis.counts[0]
    h = (dom.x1 - dom.x0) / R
    q = gauss_legendre(npts)
    v, dref = _shape_1d(p, q.nodes)
    dphi = dref * (2.0 / h)
    w = q.weights * (h / 2)
    n = basis.n_nodes
    M = np.zeros((n, n), complex)
    K = np.zeros((n, n), complex)
    D = np.zeros((n, n), complex)

    elems = np.arange(R)[:, None] * p + np.arange(p + 1)[None, :]
    left = dom.x0 + np.arange(R) * h
    pts = (left[:, None] + (q.nodes[None, :] + 1) * (h / 2)).reshape(-1, 1)
    a = _eval_all(spec.a_matrix, pts, "a_matrix").reshape(R, npts)
    av = _eval_all(spec.a_vec, pts, "a_vec").reshape(R, npts)
    a00 = _eval_all(spec.a00, pts, "a00").reshape(R, npts)
    da0 = _eval_all(spec.delta_a0, pts, "delta_a0").reshape(R, npts)

    # local[e, i, j] = sum_q w_q c_eq f_qj g_qi ; i = test (row), j = trial (column)
    Me = np.einsum("q,qi,qj->ij", w, v, v)
    Ke = np.einsum("eq,q,qi,qj->eij", a, w, dphi, dphi)
    Ke += np.einsum("eq,q,qi,qj->eij", a00, w, v, v)
    De = np.einsum("eq,q,qi,qj->eij", av, w, v, dphi)
    De += np.einsum("eq,q,qi,qj->eij", da0, w, v, v)
    rows = np.repeat(elems, p + 1, axis=1)
    cols = np.tile(elems, (1, p + 1))
    np.add.at(M, (rows, cols), np.broadcast_to(Me.ravel(), (R, (p + 1) ** 2)))
    np.add.at(K, (rows, cols), Ke.reshape(R, -1))
    np.add.at(D, (rows, cols), De.reshape(R, -1))

    for face in spec.free_faces:
        x = dom.face_point(face)
        node = 0 if face == "left" else n - 1
        b1 = _b1_checked(spec, x[None, :])[0]
        K[node, node] += complex(spec.b00(x)) / b1
        # no tangential directions on a 0-dimensional boundary
        D[node, node] += complex(spec.delta_b0(x)) / b1
    return M, K, D


def _assemble_2d(spec, basis, npts):
    dom: Rectangle = spec.domain
    nx, ny = basis.counts
    hx = (dom.x1 - dom.x0) / nx
    hy = (dom.y1 - dom.y0) / ny
    q = gauss_legendre(npts)
    n = basis.n_nodes

    # local node order: (0,0), (1,0), (1,1), (0,1) in reference corners
    corner = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)

    def shapes(xi, eta):
        v = 0.25 * (1 + xi[:, None] * corner[None, :, 0]) * (1 + eta[:, None] * corner[None, :, 1])
        gx = 0.25 * corner[None, :, 0] * (1 + eta[:, None] * corner[None, :, 1]) * (2 / hx)
        gy = 0.25 * corner[None, :, 1] * (1 + xi[:, None] * corner[None, :, 0]) * (2 / hy)
        return v, np.stack([gx, gy], axis=-1)

    XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    xi, eta = XI.ravel(), ETA.ravel()
    w = np.outer(q.weights, q.weights).ravel() * (hx * hy / 4)
    v, g = shapes(xi, eta)  # (nq, 4), (nq, 4, 2)

    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ex, ey = ex.ravel(), ey.ravel()
    n0 = ey * (nx + 1) + ex
    elems = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])
    ne = len(elems)
    cx = dom.x0 + (ex + 0.5) * hx
    cy = dom.y0 + (ey + 0.5) * hy
    pts = np.stack(
        [cx[:, None] + xi[None, :] * hx / 2, cy[:, None] + eta[None, :] * hy / 2], axis=-1
    ).reshape(-1, 2)
    nq = len(w)
    a = _eval_all(spec.a_matrix, pts, "a_matrix", (2, 2)).reshape(ne, nq, 2, 2)
    av = _eval_all(spec.a_vec, pts, "a_vec", (2,)).reshape(ne, nq, 2)
    a00 = _eval_all(spec.a00, pts, "a00").reshape(ne, nq)
    da0 = _eval_all(spec.delta_a0, pts, "delta_a0").reshape(ne, nq)

    Me = np.einsum("q,qi,qj->ij", w, v, v)
    # sum_kl a_kl d_l phi_j d_k phi_i
    Ke = np.einsum("eqkl,q,qjl,qik->eij", a, w, g, g)
    Ke += np.einsum("eq,q,qi,qj->eij", a00, w, v, v)
    De = np.einsum("eql,q,qjl,qi->eij", av, w, g, v)
    De += np.einsum("eq,q,qi,qj->eij", da0, w, v, v)

    M = np.zeros((n, n), complex)
    K = np.zeros((n, n), complex)
    D = np.zeros((n, n), complex)
    rows = np.repeat(elems, 4, axis=1)
    cols = np.tile(elems, (1, 4))
    np.add.at(M, (rows, cols), np.broadcast_to(Me.ravel(), (ne, 16)))
    np.add.at(K, (rows, cols), Ke.reshape(ne, -1))
    np.add.at(D, (rows, cols), De.reshape(ne, -1))

    # boundary faces: reference coordinate fixed at +-1 on the adjacent elements
    s = q.nodes
    for face in spec.free_faces:
        if face in ("bottom", "top"):
            sel = ey == (0 if face == "bottom" else ny - 1)
            bxi, beta = s, np.full_like(s, -1.0 if face == "bottom" else 1.0)
            length = hx
        else:
            sel = ex == (0 if face == "left" else nx - 1)
            bxi, beta = np.full_like(s, -1.0 if face == "left" else 1.0), s
            length = hy
        bw = q.weights * (length / 2)
        bv, bg = shapes(bxi, beta)
        belems = elems[sel]
        bpts = np.stack(
            [cx[sel][:, None] + bxi[None, :] * hx / 2, cy[sel][:, None] + beta[None, :] * hy / 2],
            axis=-1,
        )
        # snap to the face so coefficient fields can classify the points exactly
        if face == "bottom":
            bpts[..., 1] = dom.y0
        elif face == "top":
            bpts[..., 1] = dom.y1
        elif face == "left":
            bpts[..., 0] = dom.x0
        else:
            bpts[..., 0] = dom.x1
        flat = bpts.reshape(-1, 2)
        m = len(belems)
        b1 = _b1_checked(spec, flat).reshape(m, -1)
        b00 = _eval_all(spec.b00, flat, "b00").reshape(m, -1)
        db0 = _eval_all(spec.delta_b0, flat, "delta_b0").reshape(m, -1)
        t = _eval_all(spec.t_field, flat, "t_field", (2,)).reshape(m, -1, 2)
        Kb = np.einsum("eq,q,qi,qj->eij", b00 / b1, bw, bv, bv)
        Db = np.einsum("eql,q,qjl,qi->eij", t / b1[..., None], bw, bg, bv)
        Db += np.einsum("eq,q,qi,qj->eij", db0 / b1, bw, bv, bv)
        brows = np.repeat(belems, 4, axis=1)
        bcols = np.tile(belems, (1, 4))
        np.add.at(K, (brows, bcols), Kb.reshape(m, -1))
        np.add.at(D, (brows, bcols), Db.reshape(m, -1))
    return M, K, D


def discretize(spec: ProblemSpec, resolution: int, degree: int = 1) -> AssembledSystem:
    """Assemble ``(M, K0, D)`` on a uniform mesh.

    1D supports Lagrange P1/P2 elements, 2D bilinear elements on a
    ``resolution x resolution`` grid. Dirichlet conditions on ``S`` are imposed
    by deleting the nodes on the closure of ``S``.
    """
    if resolution < 2:
        raise DiscretizationError("resolution must be >= 2")
    if degree not in (1, 2):
        raise DiscretizationError("degree must be 1 or 2")
    if spec.dim == 2 and degree != 1:
        raise DiscretizationError("degree 2 is only available in 1D")
    basis = _build_basis(spec, resolution, degree)
    npts = 2 * degree + 2
    if spec.dim == 1:
        M, K, D = _assemble_1d(spec, basis, npts)
    else:
        M, K, D = _assemble_2d(spec, basis, npts)
    keep = np.ix_(basis.dofs, basis.dofs)
    M = _hermitize(M[keep], "M")
    K = _hermitize(K[keep], "K0")
    D = np.ascontiguousarray(D[keep])
    try:
        pivots = np.abs(np.diag(np.linalg.cholesky(K))) ** 2
    except np.linalg.LinAlgError:
        pivots = np.zeros(1)
    # a singular form (e.g. pure Neumann without mass) leaves a roundoff-sized pivot
    if pivots.min() <= PIVOT_FLOOR * np.abs(np.diag(K)).max():
        raise DiscretizationError(
            "K0 is not positive definite: the SL form is degenerate for this problem"
        )
    for X in (M, K, D):
        X.setflags(write=False)
    meta = {"tangent_orientation": "counterclockwise"} if spec.dim == 2 else {}
    return AssembledSystem(M=M, K0=K, D=D, basis=basis, spec=spec, quad_points=npts, metadata=meta)


# ---------------------------------------------------------------------------
# matrix archive


def dump_matrix(A: np.ndarray) -> dict:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix archive holds square matrices only")
    flat = A.ravel(order="C")
    return {
        "n": int(A.shape[0]),
        "format": "dense-rowmajor",
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def load_matrix(doc: dict) -> np.ndarray:
    if doc.get("format") != "dense-rowmajor":
        raise ValueError(f"unsupported matrix format {doc.get('format')!r}")
    n = int(doc["n"])
    re = np.array(doc["re"], dtype=float)
    im = np.array(doc["im"], dtype=float)
    if re.size != n * n or im.size != n * n:
        raise ValueError("matrix archive size mismatch")
    return (re + 1j * im).reshape(n, n)


def dump_system(sys: AssembledSystem, out_dir: str | Path) -> list[Path]:
    """Write ``M.json``, ``K0.json`` and ``D.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("M", "K0", "D"):
        path = out / f"{name}.json"
        tmp = path.with_suffix(".json.tmp")
        # json writes floats with repr(), which round-trips bit-exactly
        tmp.write_text(json.dumps(dump_matrix(getattr(sys, name))), encoding="utf-8")
        tmp.replace(path)
        paths.append(path)
    return paths


def load_system_matrices(in_dir: str | Path) -> dict[str, np.ndarray]:
    src = Path(in_dir)
    return {
        name: load_matrix(json.loads((src / f"{name}.json").read_text(encoding="utf-8")))
        for name in ("M", "K0", "D")
    }
