"""Field containers and initial-data generators.

Density generators are nonnegative by construction and renormalized so the
grid quadrature mass is exact; velocity generators are divergence-free by
construction (analytically or via projection). No clipping happens here:
positivity during evolution is the stepper's business.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .elliptic import PERIODIC_MEANFREE, PoissonVariant, solve_chemo
from .spectral import Grid, fft2, ifft2, l2_norm


@dataclass(frozen=True, eq=False)
class DensityField:
    """Cell samples of a nonnegative density (cells per unit area)."""

    grid: Grid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.grid.cell_area * np.sum(self.values))

    def validate(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density contains non-finite samples")
        peak = float(np.max(self.values, initial=0.0))
        if float(np.min(self.values)) < -1e-12 * max(peak, 1e-300):
            raise ValueError("density has negative samples beyond roundoff")


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Two-component solenoidal velocity samples."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray

    def energy(self) -> float:
        """Kinetic energy (1/2)||u||_2^2."""
        return 0.5 * l2_norm(self.grid, self.u1, self.u2) ** 2

    def validate(self) -> None:
        if not (np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2))):
            raise ValueError("velocity contains non-finite samples")
        norm = l2_norm(self.grid, self.u1, self.u2)
        div = l2_norm(self.grid, spectral.divergence(self.grid, self.u1, self.u2))
        if div > 1e-10 * max(norm, 1e-300):
            raise ValueError(f"velocity is not divergence-free: |div|={div:.3e}")


@dataclass(frozen=True, eq=False)
class SimState:
    """Time-stamped (n, u) pair with the cached chemoattractant."""

    t: float
    n: DensityField
    u: VelocityField
    c: np.ndarray
    variant: PoissonVariant | None = None
    pressure: np.ndarray | None = None

    @property
    def grid(self) -> Grid:
        return self.n.grid

    def chemo_residual(self) -> float:
        """Relative inconsistency of the cached c against the tagged solve."""
        if self.variant is None:
            raise ValueError("state carries no Poisson variant tag")
        fresh = solve_chemo(self.grid, self.n.values, self.variant)
        scale = max(float(np.max(np.abs(fresh))), 1e-300)
        return float(np.max(np.abs(self.c - fresh)) / scale)


def make_state(grid: Grid, n_values: np.ndarray, u1: np.ndarray, u2: np.ndarray,
               t: float = 0.0, variant: PoissonVariant = PERIODIC_MEANFREE) -> SimState:
    """Assemble a SimState, solving for the chemoattractant cache."""
    return SimState(
        t=t,
        n=DensityField(grid, n_values),
        u=VelocityField(grid, u1, u2),
        c=solve_chemo(grid, n_values, variant),
        variant=variant,
    )


def _renormalize(grid: Grid, values: np.ndarray, mass: float) -> np.ndarray:
    raw = float(grid.cell_area * np.sum(values))
    if raw <= 0.0:
        raise ValueError("cannot renormalize a field with nonpositive mass")
    return values * (mass / raw)


def init_gaussian_density(mass: float, sigma: float, center: tuple[float, float],
                          grid: Grid) -> DensityField:
    """Isotropic Gaussian blob of exact grid mass ``mass``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if sigma > grid.length / 6.0:
        raise ValueError(f"sigma={sigma} too large for box L={grid.length}; "
                         "need sigma <= L/6 so tails clear the boundary")
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    if mass == 0.0:
        field = DensityField(grid, np.zeros(grid.shape))
        field.validate()
        return field
    rsq = (grid.x1 - center[0]) ** 2 + (grid.x2 - center[1]) ** 2
    values = np.exp(-rsq / (2.0 * sigma ** 2)) / (2.0 * np.pi * sigma ** 2)
    field = DensityField(grid, _renormalize(grid, values, mass))
    field.validate()
    return field


def init_critical_profile(lam: float, grid: Grid, renormalize: bool = True
                          ) -> DensityField:
    """Stationary aggregation/diffusion profile 8*lam^2/(lam^2+|x|^2)^2.

    Its whole-plane mass is exactly 8*pi. With ``renormalize`` the grid
    sample is scaled so the quadrature mass is exactly 8*pi (the raw
    deficit is the measured box-truncation error). Note the trade-off:
    the aggregation term is quadratic, so amplitude scaling by (1+eps)
    injects an O(eps) imbalance into the otherwise-stationary balance;
    pass ``renormalize=False`` when stationarity matters more than exact
    mass (the raw sample is stationary up to discretization alone, its
    mass short of 8*pi by exactly the box truncation).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rsq = grid.radius_sq()
    values = 8.0 * lam ** 2 / (lam ** 2 + rsq) ** 2
    if renormalize:
        values = _renormalize(grid, values, 8.0 * np.pi)
    field = DensityField(grid, values)
    field.validate()
    return field


def raw_critical_mass(lam: float, grid: Grid) -> float:
    """Grid quadrature mass of the unrenormalized critical profile."""
    rsq = grid.radius_sq()
    return float(grid.cell_area * np.sum(8.0 * lam ** 2 / (lam ** 2 + rsq) ** 2))


def init_taylor_green(amplitude: float, grid: Grid) -> VelocityField:
    """Single-mode cellular flow; an exact viscous eigenflow of the box."""
    kappa = 2.0 * np.pi / grid.length
    u1 = amplitude * np.sin(kappa * grid.x1) * np.cos(kappa * grid.x2)
    u2 = -amplitude * np.cos(kappa * grid.x1) * np.sin(kappa * grid.x2)
    field = VelocityField(grid, u1, u2)
    field.validate()
    return field


def init_random_solenoidal(energy: float, seed: int, band: int, grid: Grid
                           ) -> VelocityField:
    """Band-limited random divergence-free field with exact kinetic energy.

    ``band`` is the largest integer mode magnitude kept per axis; keeping it
    well below N/3 leaves the field smooth enough for the mild-solution
    oracle's quadrature.
    """
    if energy < 0:
        raise ValueError("energy must be nonnegative")
    if band < 1 or band > grid.n // 3:
        raise ValueError("band must lie in [1, N/3]")
    if energy == 0.0:
        z = np.zeros(grid.shape)
        return VelocityField(grid, z, z.copy())
    rng = np.random.default_rng(seed)
    m = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    keep = (np.maximum(np.abs(m1), np.abs(m2)) <= band) & ((m1 != 0) | (m2 != 0))

    def component() -> np.ndarray:
        noise = rng.standard_normal(grid.shape)
        return ifft2(fft2(noise) * keep).real

    u1, u2 = spectral.leray_project(grid, component(), component())
    raw_energy = 0.5 * l2_norm(grid, u1, u2) ** 2
    if raw_energy == 0.0:
        raise ValueError("random draw produced a null field; change the seed")
    scale = np.sqrt(energy / raw_energy)
    field = VelocityField(grid, u1 * scale, u2 * scale)
    field.validate()
    return field


def init_random_density(mass: float, seed: int, grid: Grid, band: int = 6,
                        envelope: float | None = None) -> DensityField:
    """Random smooth nonnegative density, interior-supported, of exact mass.

    Squares a band-limited Gaussian random field and applies a Gaussian
    envelope so freespace solves and moment quadratures see no boundary
    mass. Used by the inequality sweeps and property tests.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    rng = np.random.default_rng(seed)
    m = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    keep = np.maximum(np.abs(m1), np.abs(m2)) <= band
    noise = ifft2(fft2(rng.standard_normal(grid.shape)) * keep).real
    if envelope is None:
        # L/14 keeps the boundary ring below 1e-8 of peak for any draw
        envelope = grid.length / 14.0
    bump = np.exp(-grid.radius_sq() / (2.0 * envelope ** 2))
    values = (noise ** 2 + 1e-3 * float(np.max(noise ** 2))) * bump
    field = DensityField(grid, _renormalize(grid, values, mass))
    field.validate()
    return field
