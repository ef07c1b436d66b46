"""Reference complex Schur decomposition: Householder reduction to Hessenberg
form followed by Wilkinson-shifted QR sweeps with Givens rotations.

Pure numpy, O(n^3) with O(n^2) Python-level steps. Used as the independent
route behind ``eig(method="qr")`` and in tests against the LAPACK path.
"""

from __future__ import annotations

import numpy as np


class QRNoConvergence(RuntimeError):
    pass


def hessenberg(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H, Q)`` with ``A = Q H Q^H`` and ``H`` upper Hessenberg."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        Q[:, k + 1 :] -= 2.0 * np.outer(Q[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H, Q


def _givens(a: complex, b: complex) -> np.ndarray:
    """Unitary G with G @ [a, b] = [r, 0]."""
    if b == 0:
        return np.eye(2, dtype=complex)
    if a == 0:
        s = np.conj(b) / abs(b)
        return np.array([[0.0, s], [-np.conj(s), 0.0]], dtype=complex)
    r = np.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return np.array([[c, s], [-np.conj(s), c]], dtype=complex)


def _wilkinson(H: np.ndarray, hi: int) -> complex:
    a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
    c, d = H[hi, hi - 1], H[hi, hi]
    half = (a - d) / 2
    root = np.sqrt(half * half + b * c)
    mu1, mu2 = (a + d) / 2 + root, (a + d) / 2 - root
    return mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2


def schur(A: np.ndarray, deflation: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form ``A = Z T Z^H`` by shifted QR on the Hessenberg form.

    Raises :class:`QRNoConvergence` after ``30 n`` sweeps.
    """
    T, Z = hessenberg(A)
    n = T.shape[0]
    if n <= 1:
        return T, Z
    scale = np.linalg.norm(T)
    hi = n - 1
    sweeps = 0
    stalled = 0
    while hi > 0:
        # locate the start of the active unreduced block
        lo = hi
        while lo > 0:
            ref = abs(T[lo - 1, lo - 1]) + abs(T[lo, lo])
            if ref == 0.0:
                ref = scale
            if abs(T[lo, lo - 1]) <= deflation * ref:
                T[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            stalled = 0
            continue
        sweeps += 1
        stalled += 1
        if sweeps > 30 * n:
            raise QRNoConvergence(f"QR iteration did not converge in {30 * n} sweeps")
        if stalled % 11 == 10:
            # exceptional shift breaks cycles
            sigma = T[hi, hi] + 0.75 * abs(T[hi, hi - 1])
        else:
            sigma = _wilkinson(T, hi)
        idx = np.arange(lo, hi + 1)
        T[idx, idx] -= sigma
        rots = []
        for k in range(lo, hi):
            G = _givens(T[k, k], T[k + 1, k])
            T[k : k + 2, k:] = G @ T[k : k + 2, k:]
            T[k + 1, k] = 0.0
            rots.append(G)
        for k, G in zip(range(lo, hi), rots):
            Gh = G.conj().T
            T[: k + 2, k : k + 2] = T[: k + 2, k : k + 2] @ Gh
            Z[:, k : k + 2] = Z[:, k : k + 2] @ Gh
        T[idx, idx] += sigma
    return np.triu(T), Z


def triangular_eigvecs(T: np.ndarray) -> np.ndarray:
    """Eigenvectors of an upper triangular matrix by back substitution.

    Near-zero pivots (repeated eigenvalues) are perturbed to ``eps ||T||``,
    which is inverse iteration on the triangular factor.
    """
    n = T.shape[0]
    X = np.zeros((n, n), dtype=complex)
    norm = np.linalg.norm(T)
    small = np.finfo(float).eps * (norm if norm > 0 else 1.0)
    for k in range(n):
        lam = T[k, k]
        x = np.zeros(n, dtype=complex)
        x[k] = 1.0
        for i in range(k - 1, -1, -1):
            piv = T[i, i] - lam
            if abs(piv) < small:
                piv = small
            x[i] = -(T[i, i + 1 : k + 1] @ x[i + 1 : k + 1]) / piv
            big = np.abs(x[i : k + 1]).max()
            if big > 1e150:
                # rescale to keep the back substitution finite
                x[i : k + 1] /= big
        X[:, k] = x / np.linalg.norm(x)
    return X
