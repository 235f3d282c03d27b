"""Pseudo-spectral toolbox on a periodic square box.

Fields live on an N x N grid covering [-L/2, L/2)^2. Real-space fields are
plain float arrays; coefficient tables are full complex FFT arrays in the
standard FFT layout (mode ordering 0..N/2-1, -N/2..-1 on each axis). All
operators here are pure functions of immutable inputs and can be evaluated
concurrently; the FFT backend is stateless.

Conventions
-----------
* ``k1``/``k2`` are the differentiation multiplier tables. The Nyquist
  entry is zeroed there so the tables are antisymmetric under index
  reflection and odd derivatives of real fields stay real.
* ``ksq`` keeps the true squared magnitudes (Nyquist included) and drives
  the heat multiplier and Poisson solves.
* The dealias mask keeps integer modes with max(|m1|, |m2|) <= N/3, so
  products of two masked fields are alias-free after masking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic box descriptor with precomputed wavenumber tables."""

    n: int
    length: float
    h: float
    x1: np.ndarray
    x2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    ksq: np.ndarray
    dealias_mask: np.ndarray
    ksq_grad: np.ndarray
    inv_ksq: np.ndarray
    inv_ksq_grad: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def radius_sq(self) -> np.ndarray:
        return self.x1 ** 2 + self.x2 ** 2


def make_grid(n: int, length: float) -> Grid:
    """Build a grid with wavenumber tables and the 2/3-rule dealias mask.

    Parameters
    ----------
    n : even integer >= 16, modes per axis.
    length : positive box side length.
    """
    if n % 2 != 0:
        raise ValueError(f"grid size must be even, got N={n}")
    if n < 16:
        raise ValueError(f"grid size must be at least 16, got N={n}")
    if not length > 0:
        raise ValueError(f"box length must be positive, got L={length}")

    h = length / n
    x = -0.5 * length + h * np.arange(n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")

    m = np.fft.fftfreq(n, d=1.0 / n)  # integer modes 0..N/2-1, -N/2..-1
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    scale = 2.0 * np.pi / length
    ksq = (scale * m1) ** 2 + (scale * m2) ** 2

    # differentiation tables: Nyquist zeroed (antisymmetric under reflection)
    md = m.copy()
    md[n // 2] = 0.0
    d1, d2 = np.meshgrid(md, md, indexing="ij")
    k1 = scale * d1
    k2 = scale * d2
    ksq_grad = k1 ** 2 + k2 ** 2

    dealias_mask = np.maximum(np.abs(m1), np.abs(m2)) <= n / 3.0

    inv_ksq = np.zeros_like(ksq)
    nz = ksq > 0
    inv_ksq[nz] = 1.0 / ksq[nz]
    inv_ksq_grad = np.zeros_like(ksq_grad)
    nz = ksq_grad > 0
    inv_ksq_grad[nz] = 1.0 / ksq_grad[nz]

    for arr in (x1, x2, k1, k2, ksq, dealias_mask, ksq_grad, inv_ksq, inv_ksq_grad):
        arr.setflags(write=False)
    return Grid(n, float(length), h, x1, x2, k1, k2, ksq, dealias_mask,
                ksq_grad, inv_ksq, inv_ksq_grad)


def fft2(values: np.ndarray) -> np.ndarray:
    return sfft.fft2(values)


def ifft2(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifft2(coeffs)


def to_real(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifft2(coeffs).real


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex coefficient table representing a real field on ``grid``."""

    grid: Grid
    coeffs: np.ndarray

    @classmethod
    def from_real(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        return cls(grid, fft2(values))

    def to_real(self) -> np.ndarray:
        return to_real(self.coeffs)

    def conjugate_symmetry_defect(self) -> float:
        """Relative deviation from Hermitian symmetry c[-m] == conj(c[m])."""
        c = self.coeffs
        reflected = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        scale = np.max(np.abs(c))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(reflected - np.conj(c))) / scale)


def gradient(grid: Grid, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral gradient of a real scalar field; exact for band-limited input."""
    fh = fft2(f)
    fx = ifft2(1j * grid.k1 * fh).real
    fy = ifft2(1j * grid.k2 * fh).real
    return fx, fy


def divergence(grid: Grid, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    return ifft2(1j * grid.k1 * fft2(u1) + 1j * grid.k2 * fft2(u2)).real


def curl(grid: Grid, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Scalar curl d1(u2) - d2(u1) of a planar vector field."""
    return ifft2(1j * grid.k1 * fft2(u2) - 1j * grid.k2 * fft2(u1)).real


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return ifft2(-grid.ksq * fft2(f)).real


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"heat semigroup requires t >= 0, got t={t}")
    return np.exp(-grid.ksq * t)


def heat_semigroup(grid: Grid, f: np.ndarray, t: float) -> np.ndarray:
    """Evolve ``f`` by the heat flow for time ``t`` (exact per Fourier mode)."""
    if t == 0:
        return f
    return ifft2(heat_multiplier(grid, t) * fft2(f)).real


def leray_project_hat(grid: Grid, u1h: np.ndarray, u2h: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Mode-wise projection onto divergence-free fields; k=0 untouched."""
    div = grid.k1 * u1h + grid.k2 * u2h
    factor = div * grid.inv_ksq_grad
    return u1h - grid.k1 * factor, u2h - grid.k2 * factor


def leray_project(grid: Grid, u1: np.ndarray, u2: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    p1h, p2h = leray_project_hat(grid, fft2(u1), fft2(u2))
    return ifft2(p1h).real, ifft2(p2h).real


def dealias_coeffs(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return coeffs * grid.dealias_mask


def dealias(field: SpectralField) -> SpectralField:
    """Apply the 2/3-rule mask to a coefficient table."""
    return SpectralField(field.grid, dealias_coeffs(field.grid, field.coeffs))


def l2_norm(grid: Grid, *components: np.ndarray) -> float:
    """Continuum-normalized L2 norm of a scalar or vector field."""
    total = 0.0
    for f in components:
        total += float(np.sum(np.abs(f) ** 2))
    return float(np.sqrt(grid.cell_area * total))


def coeff_l2_norm(grid: Grid, coeffs: np.ndarray) -> float:
    """L2 norm evaluated from FFT coefficients (Parseval)."""
    return float(np.sqrt(grid.cell_area * np.sum(np.abs(coeffs) ** 2)) / grid.n)


@lru_cache(maxsize=32)
def _band_masks(n: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.fft.fftfreq(n, d=1.0 / n)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    mmax = np.maximum(np.abs(m1), np.abs(m2))
    kept = (mmax <= n / 3.0) & (mmax > 0)
    tail = kept & (mmax > 2.0 * n / 9.0)
    kept.setflags(write=False)
    tail.setflags(write=False)
    return kept, tail


def spectral_tail_fraction(grid: Grid, f: np.ndarray) -> float:
    """Fraction of non-mean spectral energy in the top third of the kept band.

    Resolution monitor: the retained band is max|m| <= N/3; the tail is the
    part of it with max|m| > 2N/9. Values near one mean the field no longer
    fits on the grid.
    """
    fh = fft2(f)
    kept, tail = _band_masks(grid.n)
    denom = float(np.sum(np.abs(fh[kept]) ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(np.abs(fh[tail]) ** 2) / denom)
