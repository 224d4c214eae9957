"""Fourier representation of real scalar fields on the unit torus [0,1)^2.

Coefficients are stored on a centred lattice: ``coeffs[k1 + N, k2 + N]`` is the
amplitude of exp(2*pi*i*(k1*x1 + k2*x2)) for |k1|, |k2| <= N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .models import (
    FOUR_PI_SQ,
    TWO_PI,
    GridField,
    ResolutionError,
    TruncationMismatch,
    WaveIndex,
)

logger = logging.getLogger("relaxlab.spectral")

HERMITIAN_TOL = 1e-9


# ---------------------------------------------------------------------------
# Lattice helpers
# ---------------------------------------------------------------------------

def lattice_shape(n_trunc: int) -> tuple[int, int]:
    return (2 * n_trunc + 1, 2 * n_trunc + 1)


def wavenumbers(n_trunc: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer wavenumber arrays (K1, K2) on the centred lattice."""
    k = np.arange(-n_trunc, n_trunc + 1)
    return np.meshgrid(k, k, indexing="ij")


def laplacian_symbol(n_trunc: int) -> np.ndarray:
    """Eigenvalues 4*pi^2*|k|^2 of -Laplacian on the lattice."""
    k1, k2 = wavenumbers(n_trunc)
    return FOUR_PI_SQ * (k1 * k1 + k2 * k2)


def collocation_resolution(n_trunc: int) -> int:
    """Smallest grid that round-trips a truncation losslessly."""
    return 2 * n_trunc + 1


def dealiased_resolution(n_trunc: int) -> int:
    """Grid on which quadratic products of truncated fields are alias-free.

    Keeping |k| <= M/3 on an M-grid is the 2/3 rule; M = 3N + 1 is the smallest
    such grid for truncation N.
    """
    return 3 * n_trunc + 1


def _check_resolution(resolution: int, n_trunc: int) -> None:
    if resolution < 2 * n_trunc + 1:
        raise ResolutionError(
            f"resolution {resolution} cannot carry truncation {n_trunc} "
            f"(need at least {2 * n_trunc + 1})"
        )


def lattice_to_grid(coeffs: np.ndarray, resolution: int, real: bool = True) -> np.ndarray:
    """Inverse transform of a centred lattice onto a resolution x resolution grid."""
    n_trunc = (coeffs.shape[0] - 1) // 2
    _check_resolution(resolution, n_trunc)
    idx = np.arange(-n_trunc, n_trunc + 1) % resolution
    padded = np.zeros((resolution, resolution), dtype=complex)
    padded[np.ix_(idx, idx)] = coeffs
    values = np.fft.ifft2(padded) * (resolution * resolution)
    return values.real if real else values


def grid_to_lattice(values: np.ndarray, n_trunc: int) -> np.ndarray:
    """Forward transform of grid samples, keeping the centred truncation square."""
    resolution = values.shape[0]
    _check_resolution(resolution, n_trunc)
    idx = np.arange(-n_trunc, n_trunc + 1) % resolution
    full = np.fft.fft2(values) / (resolution * resolution)
    return full[np.ix_(idx, idx)]


def hermitian_part(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the real part of the field with the given coefficients."""
    return 0.5 * (coeffs + np.conj(coeffs[::-1, ::-1]))


def grid_coordinates(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.arange(resolution) / resolution
    return np.meshgrid(x, x, indexing="ij")


# ---------------------------------------------------------------------------
# SpectralField
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralField:
    """A real scalar on the torus, truncated to |k1|, |k2| <= n_trunc.

    Instances are immutable: the coefficient array is copied and locked on
    construction, and every operation returns a new field.
    """
    n_trunc: int
    coeffs: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        if self.n_trunc < 0:
            raise ValueError(f"n_trunc must be nonnegative, got {self.n_trunc}")
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != lattice_shape(self.n_trunc):
            raise ValueError(
                f"coefficient lattice {coeffs.shape} does not match n_trunc={self.n_trunc}"
            )
        scale = max(1.0, float(np.abs(coeffs).max(initial=0.0)))
        asym = float(np.abs(coeffs - np.conj(coeffs[::-1, ::-1])).max(initial=0.0))
        if asym > HERMITIAN_TOL * scale:
            raise ValueError(f"coefficients are not Hermitian-symmetric (defect {asym:.3e})")
        centre = self.n_trunc
        if self.mean_zero and abs(coeffs[centre, centre]) > HERMITIAN_TOL * scale:
            raise ValueError("mean_zero field has a nonzero (0,0) coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    # -- constructors --

    @classmethod
    def zeros(cls, n_trunc: int, mean_zero: bool = True) -> SpectralField:
        return cls(n_trunc, np.zeros(lattice_shape(n_trunc), dtype=complex), mean_zero)

    @classmethod
    def from_lattice(cls, n_trunc: int, coeffs: np.ndarray, mean_zero: bool = False) -> SpectralField:
        """Build the real field whose coefficients are the Hermitian part of *coeffs*."""
        sym = hermitian_part(np.asarray(coeffs, dtype=complex))
        if mean_zero:
            sym[n_trunc, n_trunc] = 0.0
        return cls(n_trunc, sym, mean_zero)

    @classmethod
    def mode(
        cls,
        n_trunc: int,
        k1: int,
        k2: int,
        kind: str = "sin",
        amplitude: float = 1.0,
    ) -> SpectralField:
        """amplitude * sin or cos of 2*pi*(k1*x1 + k2*x2)."""
        if max(abs(k1), abs(k2)) > n_trunc:
            raise ValueError(f"mode ({k1},{k2}) lies outside truncation {n_trunc}")
        coeffs = np.zeros(lattice_shape(n_trunc), dtype=complex)
        if (k1, k2) == (0, 0):
            if kind == "cos":
                coeffs[n_trunc, n_trunc] = amplitude
            return cls(n_trunc, coeffs, mean_zero=False)
        if kind == "sin":
            coeffs[n_trunc + k1, n_trunc + k2] = -0.5j * amplitude
            coeffs[n_trunc - k1, n_trunc - k2] = 0.5j * amplitude
        elif kind == "cos":
            coeffs[n_trunc + k1, n_trunc + k2] = 0.5 * amplitude
            coeffs[n_trunc - k1, n_trunc - k2] = 0.5 * amplitude
        else:
            raise ValueError(f"unknown mode kind {kind!r}")
        return cls(n_trunc, coeffs, mean_zero=True)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray, np.ndarray], np.ndarray],
        n_trunc: int,
        resolution: int | None = None,
        remove_mean: bool = False,
    ) -> SpectralField:
        """Sample func(x1, x2) on a grid and transform."""
        resolution = resolution or dealiased_resolution(n_trunc)
        x1, x2 = grid_coordinates(resolution)
        return to_spectral(GridField(func(x1, x2)), n_trunc, remove_mean)

    # -- accessors --

    def coeff(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[self.n_trunc + k1, self.n_trunc + k2])

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.n_trunc, self.n_trunc].real)

    def norm_sq(self) -> float:
        """Squared L^2 norm including the mean (Parseval on the unit torus)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def variance_sq(self) -> float:
        """Squared L^2 norm of the mean-zero part."""
        return self.norm_sq() - self.mean**2

    def without_mean(self) -> SpectralField:
        return SpectralField.from_lattice(self.n_trunc, self.coeffs, mean_zero=True)

    def normalized(self) -> SpectralField:
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalise the zero field")
        return self.scaled(1.0 / norm)

    def scaled(self, factor: float) -> SpectralField:
        return SpectralField(self.n_trunc, self.coeffs * factor, self.mean_zero)

    def support(self) -> list[WaveIndex]:
        k1, k2 = wavenumbers(self.n_trunc)
        nz = np.abs(self.coeffs) > 0
        return [WaveIndex(int(a), int(b)) for a, b in zip(k1[nz], k2[nz])]

    def _check_same(self, other: SpectralField) -> None:
        if other.n_trunc != self.n_trunc:
            raise TruncationMismatch(
                f"truncations differ: {self.n_trunc} vs {other.n_trunc}"
            )

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check_same(other)
        return SpectralField(
            self.n_trunc, self.coeffs + other.coeffs, self.mean_zero and other.mean_zero
        )

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check_same(other)
        return SpectralField(
            self.n_trunc, self.coeffs - other.coeffs, self.mean_zero and other.mean_zero
        )

    def __mul__(self, factor: float) -> SpectralField:
        return self.scaled(float(factor))

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def to_spectral(g: GridField, n_trunc: int, remove_mean: bool = False) -> SpectralField:
    """Forward transform of grid samples, discarding modes outside the truncation."""
    coeffs = grid_to_lattice(g.values, n_trunc)
    return SpectralField.from_lattice(n_trunc, coeffs, mean_zero=remove_mean)


def to_grid(f: SpectralField, resolution: int) -> GridField:
    """Inverse transform of *f* sampled on a resolution x resolution grid."""
    return GridField(lattice_to_grid(f.coeffs, resolution))


def sobolev_norm_sq(f: SpectralField, m: int) -> float:
    """sum_k (4 pi^2 |k|^2)^m |c_k|^2; m=0 is the squared L^2 norm."""
    lam = laplacian_symbol(f.n_trunc)
    power = np.abs(f.coeffs) ** 2
    if m == 0:
        return float(power.sum())
    if m < 0:
        if not f.mean_zero and abs(f.mean) > 0.0:
            raise ValueError("negative Sobolev index needs a mean-zero field")
        nz = lam > 0
        return float(np.sum(lam[nz] ** m * power[nz]))
    return float(np.sum(lam**m * power))


def low_mode_threshold(n_trunc: int, count: int) -> float:
    """The count-th smallest nonzero Laplacian eigenvalue, multiplicity included."""
    if count < 1:
        raise ValueError(f"projection rank must be positive, got {count}")
    lam = laplacian_symbol(n_trunc)
    ordered = np.sort(lam[lam > 0], axis=None)
    if count >= ordered.size:
        return float("inf")
    return float(ordered[count - 1])


def project_low(f: SpectralField, K: int) -> SpectralField:
    """Keep the K lowest Laplacian modes; ties at the cut are kept together."""
    threshold = low_mode_threshold(f.n_trunc, K)
    if np.isinf(threshold):
        return f
    lam = laplacian_symbol(f.n_trunc)
    coeffs = np.where(lam <= threshold * (1 + 1e-12), f.coeffs, 0.0)
    return SpectralField(f.n_trunc, coeffs, f.mean_zero)


def inner(f: SpectralField, g: SpectralField) -> complex:
    """L^2 inner product sum_k c_f(k) * conj(c_g(k))."""
    if f.n_trunc != g.n_trunc:
        raise TruncationMismatch(f"truncations differ: {f.n_trunc} vs {g.n_trunc}")
    return complex(np.sum(f.coeffs * np.conj(g.coeffs)))


def evaluate_lattice(coeffs: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Direct trigonometric summation of a lattice at arbitrary points.

    Separable in the two axes, so the cost is O(P * (2N+1)^2) for P points.
    """
    n_trunc = (coeffs.shape[0] - 1) // 2
    k = np.arange(-n_trunc, n_trunc + 1)
    shape = np.shape(x1)
    p1 = np.exp(1j * TWO_PI * np.outer(np.ravel(x1), k))
    p2 = np.exp(1j * TWO_PI * np.outer(np.ravel(x2), k))
    values = np.einsum("pa,ab,pb->p", p1, coeffs, p2, optimize=True)
    return values.reshape(shape)


def evaluate_at(f: SpectralField, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Values of the real field *f* at arbitrary points."""
    return evaluate_lattice(f.coeffs, x1, x2).real


# ---------------------------------------------------------------------------
# Seeded random data
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(seed: int) -> Iterator[int]:
    """The splitmix64 sequence.

    state <- state + 0x9E3779B97F4A7C15 (mod 2^64)
    z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    yield z ^ (z >> 31)
    """
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def _symmetric_uniform(stream: Iterator[int]) -> float:
    # top 53 bits -> [0, 1) -> [-1, 1)
    return 2.0 * ((next(stream) >> 11) * 2.0**-53) - 1.0


def random_field(n_trunc: int, seed: int, band: int | None = None) -> SpectralField:
    """Unit-norm mean-zero field with reproducible coefficients.

    Modes with max(|k1|, |k2|) <= band are visited in row-major order over the
    half lattice (k1 > 0, or k1 == 0 and k2 > 0). Each draws a real then an
    imaginary part uniform in [-1, 1), weighted by 1/|k|^2; the conjugate
    mode is filled by symmetry.
    """
    band = min(n_trunc, 4) if band is None else band
    if not 1 <= band <= n_trunc:
        raise ValueError(f"band must lie in [1, {n_trunc}], got {band}")
    stream = splitmix64(seed)
    coeffs = np.zeros(lattice_shape(n_trunc), dtype=complex)
    for k1 in range(0, band + 1):
        for k2 in range(-band, band + 1):
            if k1 == 0 and k2 <= 0:
                continue
            re = _symmetric_uniform(stream)
            im = _symmetric_uniform(stream)
            value = complex(re, im) / (k1 * k1 + k2 * k2)
            coeffs[n_trunc + k1, n_trunc + k2] = value
            coeffs[n_trunc - k1, n_trunc - k2] = value.conjugate()
    field = SpectralField(n_trunc, coeffs, mean_zero=True)
    logger.debug("random_field seed=%d band=%d norm=%.6f", seed, band, field.norm())
    return field.normalized()
