"""Period operator V = U(p) on the truncated mean-zero Fourier basis.

Column j of the period matrix holds the lattice coefficients of the basis
mode e_j = exp(2 pi i k_j . x) after one period of inviscid transport. The
columns share one backward trace of the collocation nodes, so a build costs
one characteristic integration plus one FFT per column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .flows import FlowSpec
from .models import (
    FOUR_PI_SQ,
    DecompositionError,
    EigenPair,
    EigenReport,
    NotAnEigenfunction,
    RoughnessProfile,
    RoughnessRow,
)
from .spectral import (
    SpectralField,
    collocation_resolution,
    inner,
    project_low,
    sobolev_norm_sq,
)
from .transport import backward_nodes, free_evolve

logger = logging.getLogger("relaxlab.floquet")

CLUSTER_TOL = 1e-6
LARGE_CLUSTER = 8
DEPENDENT_PIVOT = 1e-6
MODULUS_LIMIT = 1.5         # |eigenvalue| beyond 1 + 0.5 marks a broken build
POWER_ITERATIONS = 20
EXACT_DEFECT_DIM = 1200
BLOCK = 256
EIGEN_RESIDUAL_TOL = 1e-6


# ---------------------------------------------------------------------------
# Basis and matrix
# ---------------------------------------------------------------------------

def mean_zero_basis(n_trunc: int) -> np.ndarray:
    """Wavenumbers (k1, k2) of the basis, row-major in k1 then k2, (0, 0) skipped."""
    k = np.arange(-n_trunc, n_trunc + 1)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    keep = (k1 != 0) | (k2 != 0)
    return np.stack([k1[keep], k2[keep]], axis=-1)


@dataclass
class PeriodMatrix:
    """Dense approximation of the period operator."""
    n_trunc: int
    entries: np.ndarray = field(repr=False)
    flow: FlowSpec
    dt: float
    basis: np.ndarray = field(repr=False)
    defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def symbol(self) -> np.ndarray:
        """Laplacian eigenvalue of every basis vector."""
        return FOUR_PI_SQ * np.sum(self.basis**2, axis=1)


def build_period_matrix(
    flow: FlowSpec,
    n_trunc: int,
    dt: float,
    resolution: int | None = None,
) -> PeriodMatrix:
    """Assemble V column by column from one backward trace over [0, p]."""
    resolution = resolution or collocation_resolution(n_trunc)
    basis = mean_zero_basis(n_trunc)
    dim = basis.shape[0]
    logger.info("build_period_matrix: flow=%s N=%d dim=%d dt=%.3g", flow.kind, n_trunc, dim, dt)

    y1, y2 = backward_nodes(flow, 0.0, flow.period, dt, resolution)
    k = np.arange(-n_trunc, n_trunc + 1)
    phase1 = np.exp(2j * np.pi * y1[..., None] * k)     # (R, R, 2N+1)
    phase2 = np.exp(2j * np.pi * y2[..., None] * k)
    idx = k % resolution

    entries = np.empty((dim, dim), dtype=complex)
    row_index = (basis[:, 0] + n_trunc, basis[:, 1] + n_trunc)
    for start in range(0, dim, BLOCK):
        block = basis[start:start + BLOCK]
        values = phase1[..., block[:, 0] + n_trunc] * phase2[..., block[:, 1] + n_trunc]
        spectrum = np.fft.fft2(values, axes=(0, 1)) / (resolution * resolution)
        lattice = spectrum[np.ix_(idx, idx)]                # (2N+1, 2N+1, B)
        entries[:, start:start + block.shape[0]] = lattice[row_index]

    matrix = PeriodMatrix(n_trunc, entries, flow, dt, basis)
    matrix.defect = unitarity_defect(matrix)
    logger.info("build_period_matrix: defect=%.3e", matrix.defect)
    return matrix


def unitarity_defect(V: PeriodMatrix, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """||V^H V - I||_op: exact from singular values up to EXACT_DEFECT_DIM, power iteration above."""
    a = V.entries
    if V.dim <= EXACT_DEFECT_DIM:
        sigma = scipy.linalg.svdvals(a)
        return float(np.abs(sigma * sigma - 1.0).max(initial=0.0))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(V.dim) + 1j * rng.standard_normal(V.dim)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = a.conj().T @ (a @ x) - x
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return 0.0
        x = y / estimate
    return estimate


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

def _clusters(eigenvalues: np.ndarray, tol: float) -> list[np.ndarray]:
    """Single-linkage groups of eigenvalues closer than tol in the complex plane."""
    n = eigenvalues.size
    parent = np.arange(n)

    def root(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return int(i)

    order = np.argsort(eigenvalues.real, kind="stable")
    re = eigenvalues.real[order]
    for a in range(n):
        b = a + 1
        while b < n and re[b] - re[a] < tol:
            i, j = int(order[a]), int(order[b])
            if abs(eigenvalues[i] - eigenvalues[j]) < tol:
                parent[root(i)] = root(j)
            b += 1
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def _cluster_basis(entries: np.ndarray, eigenvalues: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the invariant subspace belonging to one cluster.

    Well-conditioned eigenvectors are orthonormalised directly. Large or
    nearly dependent ones are replaced by the right singular vectors of
    V - mu I with the smallest singular values.
    """
    size = vectors.shape[1]
    q, r = np.linalg.qr(vectors)
    pivots = np.abs(np.diag(r))
    if size < LARGE_CLUSTER and pivots.min() >= DEPENDENT_PIVOT * pivots.max():
        return q
    mu = complex(eigenvalues.mean())
    shifted = entries - mu * np.eye(entries.shape[0])
    _, sigma, vh = scipy.linalg.svd(shifted)
    logger.debug("cluster at %.6g%+.6gi: size=%d smallest sigma=%.3e", mu.real, mu.imag, size, sigma[-1])
    return vh[-size:].conj().T


def _entropy(weights: np.ndarray) -> float:
    p = weights[weights > 0.0]
    return float(-np.sum(p * np.log(p)))


def eigen_report(V: PeriodMatrix, cluster_tol: float = CLUSTER_TOL) -> EigenReport:
    """Dense eigen-decomposition with H^1 Rayleigh quotients of unit eigenvectors.

    Inside a degenerate cluster the eigenvector choice is arbitrary, so an
    orthonormal basis of the cluster's invariant subspace is re-diagonalised
    in the H^1 form; the reported vectors are the H^1-extremal ones. Clusters
    are linked by complex distance, with the tolerance widened by the
    recorded unitarity defect.
    """
    try:
        eigenvalues, vectors = scipy.linalg.eig(V.entries)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionError(f"eigen-decomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(eigenvalues)) and np.all(np.isfinite(vectors))):
        raise DecompositionError("eigen-decomposition produced non-finite values")
    worst = float(np.abs(eigenvalues).max(initial=0.0))
    if worst > MODULUS_LIMIT:
        raise DecompositionError(f"eigenvalue modulus {worst:.3f} exceeds {MODULUS_LIMIT}")

    vectors = vectors / np.linalg.norm(vectors, axis=0)
    lam = V.symbol()
    h1 = np.sum(lam[:, None] * np.abs(vectors) ** 2, axis=0)

    tol = cluster_tol * (1.0 + V.defect)
    for group in _clusters(eigenvalues, tol):
        if group.size < 2:
            continue
        q = _cluster_basis(V.entries, eigenvalues[group], vectors[:, group])
        form = (q.conj().T * lam) @ q
        values, rotation = scipy.linalg.eigh(form)
        vectors[:, group] = q @ rotation
        h1[group] = values

    pairs = [
        EigenPair(
            eigenvalue=complex(eigenvalues[j]),
            modulus=float(abs(eigenvalues[j])),
            phase=float(np.angle(eigenvalues[j])),
            h1_rayleigh=float(h1[j]),
            participation_entropy=_entropy(np.abs(vectors[:, j]) ** 2),
            vector=vectors[:, j],
        )
        for j in range(V.dim)
    ]
    pairs.sort(key=lambda pair: pair.h1_rayleigh)
    report = EigenReport(V.n_trunc, V.defect, pairs)
    logger.debug("eigen_report N=%d min_h1=%.6g median_h1=%.6g", V.n_trunc, report.min_h1, report.median_h1)
    return report


ROUGH_GROWTH = 2.0
STABLE_SPREAD = 0.10


def roughness_verdict(minima: list[float]) -> str:
    m = np.asarray(minima, dtype=float)
    if m.max() / m.min() - 1.0 < STABLE_SPREAD:
        return "H1_EIGENFUNCTION_CANDIDATE"
    if np.all(np.diff(m) >= 0.0) and m[-1] >= ROUGH_GROWTH * m[0]:
        return "ROUGH"
    return "INCONCLUSIVE"


def roughness_profile(
    flow: FlowSpec, truncations: list[int], dt: float
) -> RoughnessProfile:
    """Minimum and median eigenvector H^1 quotients across truncations."""
    if len(truncations) < 2 or any(b <= a for a, b in zip(truncations, truncations[1:])):
        raise ValueError("truncations must be increasing with at least two entries")
    rows = []
    for n in truncations:
        report = eigen_report(build_period_matrix(flow, n, dt))
        rows.append(RoughnessRow(n, report.min_h1, report.median_h1, report.defect))
        logger.info("roughness N=%d min_h1=%.6g defect=%.3e", n, report.min_h1, report.defect)
    verdict = roughness_verdict([row.min_h1 for row in rows])
    logger.info("roughness_profile: flow=%s verdict=%s", flow.kind, verdict)
    return RoughnessProfile(rows, verdict)


# ---------------------------------------------------------------------------
# Time averages and eigenfunction checks
# ---------------------------------------------------------------------------

def _time_average(flow: FlowSpec, f: SpectralField, T: float, dt: float, functional) -> float:
    if abs(f.norm() - 1.0) > 1e-10:
        raise ValueError(f"time averages need a unit field, got norm {f.norm():.12g}")
    if T <= 0.0 or dt <= 0.0:
        raise ValueError("T and dt must be positive")
    n_samples = max(1, round(T / dt))
    h = T / n_samples
    values = [functional(f)]
    for j in range(1, n_samples + 1):
        values.append(functional(free_evolve(flow, f, 0.0, j * h, h)))
    return float(np.trapezoid(values, dx=h) / T)


def rage_average(flow: FlowSpec, f: SpectralField, K: int, T: float, dt: float) -> float:
    """Time average of the mass left in the K lowest modes under free evolution."""
    return _time_average(flow, f, T, dt, lambda g: project_low(g, K).norm_sq())


def averaged_h1(flow: FlowSpec, f: SpectralField, K: int, T: float, dt: float) -> float:
    """Time average of the H^1 mass of the K lowest modes under free evolution."""
    return _time_average(flow, f, T, dt, lambda g: sobolev_norm_sq(project_low(g, K), 1))


def eigen_residual(flow: FlowSpec, psi: SpectralField, dt: float) -> tuple[complex, float]:
    """Rayleigh eigenvalue of psi under V and the relative residual ||V psi - mu psi||."""
    if psi.variance_sq() <= 1e-24:
        raise NotAnEigenfunction("constant fields are excluded")
    image = free_evolve(flow, psi, 0.0, flow.period, dt)
    mu = inner(image, psi) / inner(psi, psi)
    residual = (image.coeffs - mu * psi.coeffs)
    return mu, float(np.linalg.norm(residual) / psi.norm())


def require_eigenfunction(flow: FlowSpec, psi: SpectralField, dt: float,
                          tol: float = EIGEN_RESIDUAL_TOL) -> tuple[complex, float]:
    mu, residual = eigen_residual(flow, psi, dt)
    if residual > tol:
        raise NotAnEigenfunction(f"residual {residual:.3e} exceeds {tol:.1e}")
    return mu, residual
