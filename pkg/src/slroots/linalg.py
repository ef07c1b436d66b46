"""Dense complex linear algebra: Cholesky, eigen/singular values, pencil
reduction and Jordan-chain extraction.

The default eigensolver path calls LAPACK through scipy; ``method="qr"``
runs the package's own Hessenberg + shifted-QR code (see ``_qr``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _qr

__all__ = [
    "LinalgError",
    "NoConvergence",
    "NotPositiveDefinite",
    "RankAmbiguous",
    "Spectrum",
    "cholesky",
    "cluster_eigenvalues",
    "eig",
    "jordan_chains",
    "pencil_eig",
    "root_structure",
    "svd_values",
]

MAX_N = 4096
CLUSTER_RADIUS = 1e-6


class LinalgError(ArithmeticError):
    pass


class NotPositiveDefinite(LinalgError):
    pass


class NoConvergence(LinalgError):
    pass


class RankAmbiguous(LinalgError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs sorted by ascending modulus, ties by ascending argument."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _check_finite(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _check_square(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    A = _check_finite(A, name)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got {A.shape}")
    return A


def cholesky(H: np.ndarray) -> np.ndarray:
    """Lower-triangular ``G`` with ``H = G G^H``."""
    H = _check_square(H)
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > 1e-12 * scale:
        raise ValueError("cholesky: matrix is not Hermitian")
    try:
        return sla.cholesky((H + H.conj().T) / 2, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite ({exc})") from None


def _order(values: np.ndarray) -> np.ndarray:
    return np.lexsort((np.angle(values), np.abs(values)))


def eig(A: np.ndarray, tol: float = 1e-10, method: str = "lapack") -> Spectrum:
    """All eigenpairs of a dense complex matrix.

    Every reported pair satisfies ``||A v - lam v|| <= tol ||A||_F`` or
    :class:`NoConvergence` is raised.
    """
    A = _check_square(A)
    n = A.shape[0]
    if n > MAX_N:
        raise ValueError(f"eig supports n <= {MAX_N}")
    if tol < 1e-14:
        raise ValueError("tol must be >= 1e-14")
    if n == 0:
        return Spectrum(np.zeros(0, complex), np.zeros((0, 0), complex), np.zeros(0))
    if method == "lapack":
        w, V = sla.eig(A)
    elif method == "qr":
        try:
            T, Z = _qr.schur(A)
        except _qr.QRNoConvergence as exc:
            raise NoConvergence(str(exc)) from None
        w = np.diag(T).copy()
        V = Z @ _qr.triangular_eigvecs(T)
    else:
        raise ValueError(f"unknown method {method!r}")
    V = V / np.linalg.norm(V, axis=0)
    idx = _order(w)
    w, V = w[idx], V[:, idx]
    res = np.linalg.norm(A @ V - V * w, axis=0)
    bound = tol * np.linalg.norm(A)
    if not np.all(res <= bound):
        raise NoConvergence(f"eigenpair residual {res.max():.3e} exceeds {bound:.3e}")
    return Spectrum(w, V, res)


def svd_values(A: np.ndarray) -> np.ndarray:
    """Singular values (s-numbers) in descending order."""
    A = _check_finite(A)
    if A.size == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None


def pencil_eig(L: np.ndarray, M: np.ndarray, tol: float = 1e-10, method: str = "lapack") -> Spectrum:
    """Eigenpairs of ``L x = lam M x`` with ``M`` Hermitian positive definite.

    Reduces to ``C = G^-1 L G^-H`` with ``M = G G^H``; eigenvectors are mapped
    back as ``x = G^-H y``. Residuals are backward errors
    ``||L x - lam M x|| / ((||L||_F + |lam| ||M||_F) ||x||)``. An exactly
    Hermitian ``L`` takes the Hermitian path, so its eigenvalues are real.
    """
    L = _check_square(L, "L")
    M = _check_square(M, "M")
    if L.shape != M.shape:
        raise ValueError("L and M must have the same shape")
    G = cholesky(M)
    C = sla.solve_triangular(G, L, lower=True)
    C = sla.solve_triangular(G, C.conj().T, lower=True).conj().T
    if np.array_equal(L, L.conj().T):
        w, Y = sla.eigh((C + C.conj().T) / 2)
        w = w.astype(complex)
        idx = _order(w)
        w, Y = w[idx], Y[:, idx]
    else:
        spec = eig(C, tol=max(tol, 1e-14), method=method)
        w, Y = spec.eigenvalues, spec.vectors
    X = sla.solve_triangular(G.conj().T, Y, lower=False)
    X = X / np.linalg.norm(X, axis=0)
    R = L @ X - (M @ X) * w
    res = np.linalg.norm(R, axis=0) / (np.linalg.norm(L) + np.abs(w) * np.linalg.norm(M))
    if not np.all(res <= tol):
        raise NoConvergence(f"pencil residual {res.max():.3e} exceeds {tol:.3e}")
    return Spectrum(w, X, res)


def cluster_eigenvalues(values: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage clusters of eigenvalues closer than ``radius``.

    Returns integer labels numbered in order of first appearance.
    """
    values = np.asarray(values)
    n = len(values)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        close = np.abs(values[:, None] - values[None, :]) <= radius
        for i, j in zip(*np.nonzero(np.triu(close, 1))):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    relabel: dict[int, int] = {}
    return np.array([relabel.setdefault(r, len(relabel)) for r in roots], dtype=int)


def _rank(X: np.ndarray, threshold: float) -> int:
    s = np.linalg.svd(X, compute_uv=False) if X.size else np.zeros(0)
    band = (s >= threshold / 10) & (s <= threshold * 10)
    if np.any(band):
        raise RankAmbiguous(
            f"singular value {s[band][0]:.3e} inside the rank band "
            f"[{threshold / 10:.1e}, {threshold * 10:.1e}]; adjust tol"
        )
    return int(np.sum(s > threshold))


def _null_space(X: np.ndarray, threshold: float) -> np.ndarray:
    _, s, Vh = np.linalg.svd(X)
    r = int(np.sum(s > threshold))
    return Vh[r:].conj().T


def jordan_chains(A: np.ndarray, lam: complex, tol: float = 1e-8) -> list[list[np.ndarray]]:
    """Jordan chains of ``A`` at the eigenvalue ``lam``.

    Each chain ``[u1, ..., um]`` satisfies ``(A - lam) u1 ~ 0`` and
    ``(A - lam) u_{k+1} ~ u_k``. Kernel dimensions of ``(A - lam)^k`` are read
    off singular values with threshold ``tol * max(1, ||A||_2)^k`` until they
    stop growing; chain heads are then picked level by level from the
    complement of the lower kernels and of the images of longer chains.
    """
    A = _check_square(A)
    n = A.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    scale = max(1.0, np.linalg.norm(A, 2))
    B = A - lam * np.eye(n)
    kernels = [np.zeros((n, 0), complex)]
    dims = [0]
    P = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        P = B @ P
        threshold = tol * scale**k
        d = n - _rank(P, threshold)
        if d == dims[-1]:
            break
        dims.append(d)
        kernels.append(_null_space(P, threshold))
    depth = len(dims) - 1
    if depth == 0:
        raise ValueError(f"{lam} is not within tol of an eigenvalue")
    # number of chains of length >= j, then exactly j
    at_least = [dims[j] - dims[j - 1] for j in range(1, depth + 1)] + [0]
    exact = {j: at_least[j - 1] - at_least[j] for j in range(1, depth + 1)}

    heads: list[tuple[int, np.ndarray]] = []
    for j in range(depth, 0, -1):
        if exact[j] <= 0:
            continue
        occupied = [kernels[j - 1]]
        for length, h in heads:
            occupied.append((np.linalg.matrix_power(B, length - j) @ h)[:, None])
        W = np.hstack(occupied)
        Kj = kernels[j]
        if W.shape[1]:
            Qw, _ = np.linalg.qr(W)
            Kj = Kj - Qw @ (Qw.conj().T @ Kj)
        U, _, _ = np.linalg.svd(Kj, full_matrices=False)
        heads.extend((j, U[:, c]) for c in range(exact[j]))
    chains = []
    for length, h in heads:
        vecs = [h]
        for _ in range(length - 1):
            vecs.append(B @ vecs[-1])
        chains.append(vecs[::-1])
    return chains


def root_structure(
    A, spectrum: Spectrum, tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Cluster labels, per-eigenvalue chain length and per-cluster root bases.

    Clusters whose eigenvectors are numerically independent are semisimple
    and need no chain extraction; only defective clusters go through
    :func:`jordan_chains`. ``A`` may be a zero-argument callable, evaluated
    only when a defective cluster needs it. The cluster radius is
    ``CLUSTER_RADIUS * max(1, max |lam|)``.
    """
    w, V = spectrum.eigenvalues, spectrum.vectors
    scale = max(1.0, float(np.abs(w).max())) if len(w) else 1.0
    labels = cluster_eigenvalues(w, CLUSTER_RADIUS * scale)
    chain_len = np.ones(len(w), dtype=int)
    bases: list[np.ndarray] = []
    for c in range(labels.max() + 1 if len(w) else 0):
        members = np.nonzero(labels == c)[0]
        Vc = V[:, members]
        if len(members) == 1:
            bases.append(Vc)
            continue
        s = np.linalg.svd(Vc, compute_uv=False)
        if s[-1] > np.sqrt(tol):
            bases.append(Vc)
            continue
        if callable(A):
            A = A()
        chains = jordan_chains(A, np.mean(w[members]), tol)
        bases.append(np.column_stack([v for ch in chains for v in ch]))
        chain_len[members] = max(len(ch) for ch in chains)
    return labels, chain_len, bases
