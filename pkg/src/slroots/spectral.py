"""Spectral quantities of an assembled system.

Every computation happens in the ``K0``-geometry. With ``K0 = G G^H``:

* ``P = G^-1 M G^-H`` realises the compact self-adjoint operators shared by
  the three embeddings; its eigenvalues are the s-numbers ``mu_k``;
* ``E = G^-1 D G^-H`` is the perturbation, and ``c = ||E||_2``;
* the pencil ``(K0 + D) x = lam M x`` is ``(I + E) y = lam P y`` in ``y = G^H x``;
* the resolvent in the dual norm is ``P (I + E - lam P)^-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .discretize import AssembledSystem
from .linalg import (
    CLUSTER_RADIUS,
    Spectrum,
    cholesky,
    cluster_eigenvalues,
    eig,
    pencil_eig,
    root_structure,
    svd_values,
)

__all__ = [
    "AngularStats",
    "BitsadzeRow",
    "CompletenessRow",
    "ResolventSample",
    "ResolventScan",
    "SpectralData",
    "SpectralReport",
    "analyze",
    "bitsadze_witness",
    "completeness_angle_ok",
    "completeness_residual",
    "decompose",
    "default_fit_window",
    "keldysh_lab",
    "make_rng",
    "perturbation_norm",
    "random_perturbation",
    "resolvent_scan",
]

ARG_TOL = 1e-8
SINGULAR_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Philox-4x64 counter-based generator keyed by ``SeedSequence(seed)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class SpectralData:
    """Factorisations and the pencil spectrum of one system, computed once."""

    sys: AssembledSystem
    G: np.ndarray
    P: np.ndarray
    E: np.ndarray
    mu: np.ndarray
    spectrum: Spectrum
    clusters: np.ndarray
    chain_lengths: np.ndarray
    root_bases: list = field(repr=False)


def _congruence(G: np.ndarray, X: np.ndarray) -> np.ndarray:
    Y = sla.solve_triangular(G, X, lower=True)
    return sla.solve_triangular(G, Y.conj().T, lower=True).conj().T


def decompose(sys: AssembledSystem, tol: float = 1e-10, root_tol: float = 1e-8) -> SpectralData:
    G = cholesky(sys.K0)
    P = _congruence(G, sys.M)
    P = (P + P.conj().T) / 2
    E = _congruence(G, sys.D)
    mu = sla.eigh(P, eigvals_only=True)[::-1]
    L = sys.K0 + sys.D
    spectrum = pencil_eig(L, sys.M, tol)
    if np.array_equal(L, L.conj().T):
        # self-adjoint pencil: semisimple, the eigenvectors are the root basis
        w = spectrum.eigenvalues
        labels = cluster_eigenvalues(w, CLUSTER_RADIUS * max(1.0, np.abs(w).max()))
        chain = np.ones(len(w), dtype=int)
        bases = [spectrum.vectors[:, labels == c] for c in range(labels.max() + 1)]
    else:
        labels, chain, bases = root_structure(
            lambda: np.linalg.solve(sys.M, L), spectrum, root_tol
        )
    return SpectralData(sys, G, P, E, mu, spectrum, labels, chain, bases)


# ---------------------------------------------------------------------------
# perturbation norm and the sector report


def perturbation_norm(sys: AssembledSystem) -> float:
    """Smallest ``c`` with ``|v^H D u| <= c ||u||_K0 ||v||_K0``."""
    if not np.any(sys.D):
        return 0.0
    G = cholesky(sys.K0)
    return float(svd_values(_congruence(G, sys.D))[0])


def random_perturbation(sys: AssembledSystem, c: float, rng: np.random.Generator) -> AssembledSystem:
    """Replace ``D`` by a random complex matrix with discrete norm exactly ``c``."""
    N = sys.N
    E = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    E *= c / svd_values(E)[0]
    G = cholesky(sys.K0)
    return sys.with_perturbation(G @ E @ G.conj().T, label=f"random(c={c!r})")


def completeness_angle_ok(c: float, s: float, n: int) -> bool:
    return bool(c < abs(math.sin(math.pi * s / n)))


def default_fit_window(N: int) -> tuple[int, int]:
    return max(1, min(N // 8, 10)), min(N // 2, 50)


def fit_decay(mu: np.ndarray, window: tuple[int, int]) -> float:
    """Least-squares slope of ``log mu_k`` against ``log k`` for k in the window.

    ``k`` is the zero-based position in the descending list.
    """
    lo, hi = window
    hi = min(hi, len(mu) - 1)
    if lo < 1 or hi - lo < 1:
        return float("nan")
    k = np.arange(lo, hi + 1)
    slope, _ = np.polyfit(np.log(k), np.log(mu[lo : hi + 1]), 1)
    return float(slope)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    clusters: np.ndarray
    chain_lengths: np.ndarray
    s_numbers: np.ndarray
    c: float
    max_abs_arg: float
    sector_bound: float
    violations: int
    decay_exponent: float
    fit_window: tuple[int, int]
    completeness_angle_ok: bool
    s_exponent: float
    ambient_dim: int
    schatten_predictions: dict

    @property
    def cluster_count(self) -> int:
        return int(self.clusters.max() + 1) if len(self.clusters) else 0

    @property
    def max_chain_length(self) -> int:
        return int(self.chain_lengths.max()) if len(self.chain_lengths) else 0


def _schatten_predictions(s: float, n: int, measured: float) -> dict:
    # order p predicts mu_k ~ k^(-1/p)
    preds = {"real_dimension": -2.0 * s / n}
    if s < 1 and n % 2 == 0:
        # reading with the complex dimension n/2 in place of the real one
        preds["complex_dimension"] = -1.0 / (n // 2)
    out = {"predicted_exponents": preds}
    if math.isfinite(measured):
        out["closest"] = min(preds, key=lambda k: abs(preds[k] - measured))
    return out


def analyze(
    sys: AssembledSystem,
    tol: float = 1e-10,
    fit_window: tuple[int, int] | None = None,
    data: SpectralData | None = None,
) -> SpectralReport:
    data = data or decompose(sys, tol)
    w = data.spectrum.eigenvalues
    c = float(svd_values(data.E)[0]) if np.any(sys.D) else 0.0
    args = np.abs(np.angle(w))
    bound = math.asin(min(c, 1.0))
    window = tuple(fit_window) if fit_window else default_fit_window(sys.N)
    decay = fit_decay(data.mu, window)
    s, n = sys.spec.s_exponent, sys.spec.dim
    return SpectralReport(
        eigenvalues=w,
        clusters=data.clusters,
        chain_lengths=data.chain_lengths,
        s_numbers=data.mu,
        c=c,
        max_abs_arg=float(args.max()),
        sector_bound=bound,
        violations=int(np.sum(args > bound + ARG_TOL)),
        decay_exponent=decay,
        fit_window=window,
        completeness_angle_ok=completeness_angle_ok(c, s, n),
        s_exponent=s,
        ambient_dim=n,
        schatten_predictions=_schatten_predictions(s, n, decay),
    )


# ---------------------------------------------------------------------------
# resolvent along rays


@dataclass(frozen=True)
class ResolventSample:
    r: float
    lam: complex
    norm: float | None
    bound: float | None
    ok: bool | None
    singular: bool = False


@dataclass(frozen=True)
class ResolventScan:
    theta: float
    c: float
    samples: tuple[ResolventSample, ...]

    @property
    def all_ok(self) -> bool:
        return all(s.ok is not False for s in self.samples)


def theoretical_bound(lam: complex, c: float) -> float | None:
    """Resolvent bound on the ray through ``lam``; ``None`` where none applies.

    With ``m = |sin arg|`` for ``|arg| < pi/2`` and ``m = 1`` otherwise, the
    bound is ``1 / (m |lam|)`` for ``c = 0`` and ``1 / ((m - c) |lam|)`` for
    ``c < m``.
    """
    theta = abs(np.angle(lam))
    if theta == 0.0:
        return None
    m = math.sin(theta) if theta < math.pi / 2 else 1.0
    if c >= m:
        return None
    return 1.0 / ((m - c) * abs(lam))


def resolvent_norm(data: SpectralData, lam: complex) -> float:
    N = data.P.shape[0]
    X = np.eye(N) + data.E - lam * data.P
    return float(svd_values(data.P @ np.linalg.solve(X, np.eye(N)))[0])


def resolvent_scan(
    sys: AssembledSystem,
    theta: float,
    radii: Sequence[float],
    data: SpectralData | None = None,
) -> ResolventScan:
    """Dual-norm resolvent ``||R(lam; T)||`` at ``lam = r e^{i theta}``."""
    if not -math.pi < theta <= math.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    data = data or decompose(sys)
    c = float(svd_values(data.E)[0]) if np.any(sys.D) else 0.0
    w = data.spectrum.eigenvalues
    samples = []
    for r in radii:
        if r <= 0:
            raise ValueError("radii must be positive")
        lam = r * complex(math.cos(theta), math.sin(theta))
        if np.min(np.abs(w - lam)) <= SINGULAR_TOL * max(1.0, abs(lam)):
            samples.append(ResolventSample(float(r), lam, None, None, None, singular=True))
            continue
        norm = resolvent_norm(data, lam)
        bound = theoretical_bound(lam, c)
        ok = None if bound is None else bool(norm <= bound * (1 + 1e-9))
        samples.append(ResolventSample(float(r), lam, norm, bound, ok))
    return ResolventScan(theta=float(theta), c=c, samples=tuple(samples))


# ---------------------------------------------------------------------------
# completeness of root vectors


@dataclass(frozen=True)
class CompletenessRow:
    m: int
    dual: float
    l2: float
    sl: float


def _weighted_residual(W: np.ndarray, V: np.ndarray, t: np.ndarray) -> float:
    """``min_c ||W (t - V c)|| / ||W t||``."""
    b = W @ t
    A = W @ V
    coef, *_ = sla.lstsq(A, b)
    return float(np.linalg.norm(b - A @ coef) / np.linalg.norm(b))


def completeness_residual(
    sys: AssembledSystem,
    target: np.ndarray,
    m_list: Sequence[int],
    data: SpectralData | None = None,
) -> list[CompletenessRow]:
    """Relative distance from ``target`` to the span of the first ``m`` root
    clusters (ascending modulus), in the dual, L2 and SL norms."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (sys.N,) or not np.any(target):
        raise ValueError("target must be a nonzero coefficient vector of length N")
    data = data or decompose(sys)
    GM = cholesky(sys.M)
    GK = data.G
    Wsl = GK.conj().T
    Wl2 = GM.conj().T
    # dual norm of the functional M t: ||G^-1 M t||
    Wdual = sla.solve_triangular(GK, sys.M, lower=True)
    rows = []
    n_clusters = len(data.root_bases)
    for m in m_list:
        if not 1 <= m <= sys.N:
            raise ValueError(f"m must be in [1, N], got {m}")
        V = np.hstack(data.root_bases[: min(m, n_clusters)])
        rows.append(
            CompletenessRow(
                m=int(m),
                dual=_weighted_residual(Wdual, V, target),
                l2=_weighted_residual(Wl2, V, target),
                sl=_weighted_residual(Wsl, V, target),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# random-operator lab


@dataclass(frozen=True)
class AngularStats:
    N: int
    p: float
    delta_norm: float
    seed: int
    eigenvalues: np.ndarray
    eps_list: tuple[float, ...]
    outside_counts: tuple[int, ...]
    negative_corner_counts: tuple[int, ...]
    max_abs_imag: float
    root_rank: int


def keldysh_lab(N: int, p: float, delta_norm: float, eps_list: Sequence[float], seed: int) -> AngularStats:
    """Eigenvalue angles of ``A0 (I + dA)`` for a random positive compact ``A0``.

    ``A0 = U^H diag(k^-p) U`` with a Haar unitary ``U``, ``dA`` a complex
    Gaussian matrix scaled to spectral norm ``delta_norm``.
    """
    if not 1 <= N <= 1024:
        raise ValueError("N must be in [1, 1024]")
    if delta_norm < 0:
        raise ValueError("delta_norm must be >= 0")
    rng = make_rng(seed)
    Z = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    Q, R = np.linalg.qr(Z)
    U = Q * (np.diag(R) / np.abs(np.diag(R)))
    A0 = (U.conj().T * (np.arange(1, N + 1, dtype=float) ** -p)) @ U
    dA = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    if delta_norm > 0:
        dA *= delta_norm / svd_values(dA)[0]
    else:
        dA[:] = 0
    T = A0 @ (np.eye(N) + dA)
    spectrum = eig(T)
    w = spectrum.eigenvalues
    absarg = np.abs(np.angle(w))
    outside, negative = [], []
    for eps in eps_list:
        near_neg = (math.pi - absarg) < eps
        outside.append(int(np.sum((absarg >= eps) & ~near_neg)))
        negative.append(int(np.sum(near_neg)))
    _, _, bases = root_structure(T, spectrum)
    stacked = np.hstack(bases)
    s = svd_values(stacked)
    rank = int(np.sum(s > 1e-10 * s[0]))
    return AngularStats(
        N=N, p=float(p), delta_norm=float(delta_norm), seed=int(seed), eigenvalues=w,
        eps_list=tuple(float(e) for e in eps_list), outside_counts=tuple(outside),
        negative_corner_counts=tuple(negative), max_abs_imag=float(np.abs(w.imag).max()),
        root_rank=rank,
    )


# ---------------------------------------------------------------------------
# Bitsadze sequence on the upper half-disk

LOG_HUGE = math.log(1e300)


@dataclass(frozen=True)
class BitsadzeRow:
    k: int
    l2_norm: float
    sup_abs: float
    sup_dx: float
    boundary_max: float


def _log_l2_norm(k: int, s: float, npts: int) -> float:
    """log ||u_k||_{L2(half-disk)} with sin(kz) in exponentially scaled form."""
    x, w = np.polynomial.legendre.leggauss(npts)
    r = (x + 1) / 2
    wr = w / 2
    th = (x + 1) * math.pi / 2
    wt = w * math.pi / 2
    R, TH = np.meshgrid(r, th, indexing="ij")
    X, Y = R * np.cos(TH), R * np.sin(TH)
    # e^{-2k} |sin(kz)|^2 = (e^{2k(y-1)} + e^{-2k(y+1)})/4 - e^{-2k} cos(2kx)/2
    scaled = (np.exp(2 * k * (Y - 1)) + np.exp(-2 * k * (Y + 1))) / 4 - math.exp(-2 * k) * np.cos(2 * k * X) / 2
    integrand = (R**2 - 1) ** 2 * scaled * R
    total = float(wr @ integrand @ wt)
    return 0.5 * (2 * k - 2 * s * math.log(k) + math.log(total))


def bitsadze_witness(s: float, k_list: Sequence[int], resolution: int = 64) -> list[BitsadzeRow]:
    """Norms of ``u_k(z) = (|z|^2 - 1) sin(kz) / k^s`` on the upper half-disk.

    ``u_k`` vanishes on the upper half-circle while its L2 norm over the
    half-disk blows up and its restriction to ``[-1, 1]`` shrinks with all
    derivatives of order below ``s``.
    """
    if s <= 1:
        raise ValueError("s must exceed 1")
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    ks = [int(k) for k in k_list]
    if any(k < 1 for k in ks) or ks != sorted(ks):
        raise ValueError("k_list must be ascending positive integers")
    rows = []
    for k in ks:
        if k - s * math.log(k) >= LOG_HUGE:
            raise OverflowError(f"k={k}: |u_k| exceeds 1e300 on the half-disk")
        log_norm = _log_l2_norm(k, s, max(resolution, 3 * k + 32))
        if log_norm >= LOG_HUGE:
            raise OverflowError(f"k={k}: L2 norm exceeds 1e300")
        xs = np.linspace(-1.0, 1.0, max(resolution, 64 * k) + 1)
        u = (xs**2 - 1) * np.sin(k * xs) / k**s
        du = (2 * xs * np.sin(k * xs) + (xs**2 - 1) * k * np.cos(k * xs)) / k**s
        # polar form on the half-circle: the factor r^2 - 1 is exactly zero
        th = np.linspace(0.0, math.pi, resolution + 1)
        r = 1.0
        z = r * np.exp(1j * th)
        on_circle = (r * r - 1.0) * np.abs(np.sin(k * z)) / k**s
        rows.append(
            BitsadzeRow(
                k=k,
                l2_norm=math.exp(log_norm),
                sup_abs=float(np.abs(u).max()),
                sup_dx=float(np.abs(du).max()),
                boundary_max=float(on_circle.max()),
            )
        )
    return rows
