"""Scalar functionals and identity-residual evaluators.

Everything here is a pure quadrature of immutable snapshots: masses,
moments, entropies, the free energy and its modified variant, dissipations,
windowed entropies, vorticity quantities, and the per-interval residuals of
the balance laws they satisfy along trajectories.

Conventions for rough fields: entropy integrands use 0*log(0) = 0 via a
1e-300 floor, grad(log n) is evaluated as grad(n)/max(n, 1e-12*max n), and
negative roundoff samples of a density count as vacuum.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields
from typing import Iterable, NamedTuple

import numpy as np

from . import spectral
from .elliptic import chemo_fields
from .spectral import Grid, fft2, gradient, ifft2
from .state import SimState

ENTROPY_FLOOR = 1e-300
GRADLOG_FLOOR_FACTOR = 1e-12

CSV_COLUMNS = (
    "t", "mass", "m1x", "m1y", "m2", "coupling", "entropy", "mod_entropy",
    "free_energy", "mod_free_energy", "kinetic", "dissipation_n",
    "dissipation_u", "enstrophy", "linf_n", "linf_u", "min_n",
    "l43_n", "l2_n", "l3_n", "l4_n", "log_moment",
)


# ---------------------------------------------------------------------------
# basic quadratures

def integrate(grid: Grid, f: np.ndarray) -> float:
    return float(grid.cell_area * np.sum(f))


def mass(grid: Grid, n: np.ndarray) -> float:
    return integrate(grid, n)


def lp_norm(grid: Grid, f: np.ndarray, p: float) -> float:
    """Continuum-normalized Lp norm; p = inf gives the grid sup."""
    if p == np.inf:
        return float(np.max(np.abs(f)))
    if p < 1:
        raise ValueError(f"Lp norm requires p >= 1, got p={p}")
    return float((grid.cell_area * np.sum(np.abs(f) ** p)) ** (1.0 / p))


def lp_norm_vec(grid: Grid, u1: np.ndarray, u2: np.ndarray, p: float) -> float:
    """Lp norm of the pointwise magnitude of a planar vector field."""
    return lp_norm(grid, np.hypot(u1, u2), p)


def entropy(grid: Grid, n: np.ndarray) -> float:
    """integral of n log n, with 0 log 0 = 0 and negatives as vacuum."""
    pos = np.maximum(n, 0.0)
    integrand = np.where(pos > ENTROPY_FLOOR, pos * np.log(np.maximum(pos, ENTROPY_FLOOR)), 0.0)
    return integrate(grid, integrand)


def modified_entropy(grid: Grid, n: np.ndarray) -> float:
    """integral of (1+n) log(1+n); nonnegative for nonnegative density."""
    pos = np.maximum(n, 0.0)
    return integrate(grid, (1.0 + pos) * np.log1p(pos))


def kinetic_energy(grid: Grid, u1: np.ndarray, u2: np.ndarray) -> float:
    return 0.5 * integrate(grid, u1 ** 2 + u2 ** 2)


def log_moment(grid: Grid, n: np.ndarray) -> float:
    """integral of n log(1 + |x|^2)."""
    return integrate(grid, n * np.log1p(grid.radius_sq()))


# ---------------------------------------------------------------------------
# energies

class TaggedValue(NamedTuple):
    """Scalar plus the Poisson-variant tag of the potential it used."""

    value: float
    variant: str


def _variant_tag(variant) -> str:
    return getattr(variant, "kind", str(variant) if variant is not None else "untagged")


def free_energy(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                c: np.ndarray, variant=None) -> TaggedValue:
    """F = integral of n(log n - c/2) + |u|^2/2, tagged by the c variant.

    The torus and whole-plane potentials differ by a constant per unit
    mass, so F is only comparable between runs that share a variant; the
    tag keeps that explicit.
    """
    value = entropy(grid, n) - 0.5 * integrate(grid, n * c) \
        + kinetic_energy(grid, u1, u2)
    return TaggedValue(value, _variant_tag(variant))


def modified_free_energy(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                         c: np.ndarray, variant=None) -> TaggedValue:
    """H = integral of (1+n)log(1+n) - nc/2 + |u|^2/2."""
    value = modified_entropy(grid, n) - 0.5 * integrate(grid, n * c) \
        + kinetic_energy(grid, u1, u2)
    return TaggedValue(value, _variant_tag(variant))


def grad_log_density(grid: Grid, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """grad(log n) guarded by the floor 1e-12 * max(n)."""
    nx, ny = gradient(grid, n)
    floor = GRADLOG_FLOOR_FACTOR * max(float(np.max(n)), ENTROPY_FLOOR)
    denom = np.maximum(n, floor)
    return nx / denom, ny / denom


def dissipation(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                cx: np.ndarray, cy: np.ndarray) -> tuple[float, float]:
    """(D_n, D_u) = (int n |grad(log n - c)|^2, ||grad u||_2^2)."""
    gx, gy = grad_log_density(grid, n)
    pos = np.maximum(n, 0.0)
    d_n = integrate(grid, pos * ((gx - cx) ** 2 + (gy - cy) ** 2))
    du11, du12 = gradient(grid, u1)
    du21, du22 = gradient(grid, u2)
    d_u = integrate(grid, du11 ** 2 + du12 ** 2 + du21 ** 2 + du22 ** 2)
    return d_n, d_u


def chemo_gradient(state: SimState) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the chemoattractant, accurate for the state's variant."""
    if state.variant is not None and state.variant.kind == "freespace_logkernel":
        _, cx, cy = chemo_fields(state.grid, state.n.values, state.variant)
        return cx, cy
    return gradient(state.grid, state.c)


# ---------------------------------------------------------------------------
# moments

@dataclass(frozen=True)
class MomentReport:
    m1x: float
    m1y: float
    m2: float
    coupling: float
    theory_rate: float
    boundary_mass_fraction: float
    boundary_warning: bool


def second_moment_rate(total_mass: float) -> float:
    """Whole-plane drift of the second moment at zero fluid coupling."""
    return 4.0 * total_mass - total_mass ** 2 / (2.0 * np.pi)


def boundary_mass_fraction(grid: Grid, n: np.ndarray) -> float:
    """Mass share in the frame max(|x1|,|x2|) > 0.45 L."""
    total = float(np.sum(np.abs(n)))
    if total == 0.0:
        return 0.0
    frame = np.maximum(np.abs(grid.x1), np.abs(grid.x2)) > 0.45 * grid.length
    return float(np.sum(np.abs(n[frame])) / total)


def moment_report(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray
                  ) -> MomentReport:
    """First/second moments, fluid coupling 2 int n u.x, and the theory rate."""
    total = mass(grid, n)
    frac = boundary_mass_fraction(grid, n)
    return MomentReport(
        m1x=integrate(grid, n * grid.x1),
        m1y=integrate(grid, n * grid.x2),
        m2=integrate(grid, n * grid.radius_sq()),
        coupling=2.0 * integrate(grid, n * (u1 * grid.x1 + u2 * grid.x2)),
        theory_rate=second_moment_rate(total),
        boundary_mass_fraction=frac,
        boundary_warning=frac > 1e-8,
    )


# ---------------------------------------------------------------------------
# windowed diagnostics

@dataclass(frozen=True)
class Cutoff:
    """Smooth radial window: 1 inside |x-center|<=R, 0 outside 2R (ball),
    or its complement (exterior). The transition is a C^2 quintic ramp."""

    kind: str  # "ball" | "exterior"
    radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.kind not in ("ball", "exterior"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("cutoff radius must be positive")

    def values(self, grid: Grid) -> np.ndarray:
        if max(abs(self.center[0]), abs(self.center[1])) + 2.0 * self.radius \
                > 0.5 * grid.length:
            raise ValueError("cutoff support extends outside the box")
        r = np.hypot(grid.x1 - self.center[0], grid.x2 - self.center[1])
        s = np.clip((r - self.radius) / self.radius, 0.0, 1.0)
        ball = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
        return ball if self.kind == "ball" else 1.0 - ball


def windowed_modified_entropy(grid: Grid, n: np.ndarray, cutoff: Cutoff) -> float:
    """Windowed quadrature of (1+n)log(1+n) - n (nonnegative integrand)."""
    pos = np.maximum(n, 0.0)
    return integrate(grid, ((1.0 + pos) * np.log1p(pos) - pos) * cutoff.values(grid))


def windowed_h_int(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                   c_m: np.ndarray, cutoff: Cutoff) -> float:
    """Interior-window energy: windowed modified entropy - (1/2) int n c_m psi
    + (1/2) int |u|^2 psi, with c_m the ball-mean-shifted potential."""
    psi = cutoff.values(grid)
    pos = np.maximum(n, 0.0)
    ent = integrate(grid, ((1.0 + pos) * np.log1p(pos) - pos) * psi)
    return ent - 0.5 * integrate(grid, n * c_m * psi) \
        + 0.5 * integrate(grid, (u1 ** 2 + u2 ** 2) * psi)


# ---------------------------------------------------------------------------
# vorticity

def vorticity(grid: Grid, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Scalar vorticity d1(u2) - d2(u1), spectrally."""
    return spectral.curl(grid, u1, u2)


def enstrophy(grid: Grid, u1: np.ndarray, u2: np.ndarray) -> float:
    return lp_norm(grid, vorticity(grid, u1, u2), 2) ** 2


def velocity_from_stream(grid: Grid, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """u = (d2 psi, -d1 psi); gives vorticity(u) = -lap(psi)."""
    px, py = gradient(grid, psi)
    return py, -px


@dataclass(frozen=True)
class VorticityBalance:
    enstrophy: float
    grad_omega_sq: float
    forcing: float


def vorticity_balance_terms(state: SimState) -> VorticityBalance:
    """Terms of (1/2) d/dt ||w||^2 + ||grad w||^2 = -int (n grad c).(perp grad w)."""
    grid = state.grid
    w = vorticity(grid, state.u.u1, state.u.u2)
    wx, wy = gradient(grid, w)
    cx, cy = chemo_gradient(state)
    n = state.n.values
    forcing = -integrate(grid, n * (cx * (-wy) + cy * wx))
    return VorticityBalance(
        enstrophy=integrate(grid, w ** 2),
        grad_omega_sq=integrate(grid, wx ** 2 + wy ** 2),
        forcing=forcing,
    )


def vorticity_balance_residual(t: np.ndarray, terms: Iterable[VorticityBalance]
                               ) -> np.ndarray:
    """Per-interval defect of the enstrophy balance on a recorded cadence."""
    terms = list(terms)
    ens = np.array([v.enstrophy for v in terms])
    dss = np.array([v.grad_omega_sq for v in terms])
    frc = np.array([v.forcing for v in terms])
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    return 0.5 * np.diff(ens) / dt + 0.5 * (dss[:-1] + dss[1:]) \
        - 0.5 * (frc[:-1] + frc[1:])


# ---------------------------------------------------------------------------
# diagnostics rows and series

@dataclass(frozen=True)
class DiagnosticsRow:
    """One time sample of every recorded functional (CSV row order)."""

    t: float
    mass: float
    m1x: float
    m1y: float
    m2: float
    coupling: float
    entropy: float
    mod_entropy: float
    free_energy: float
    mod_free_energy: float
    kinetic: float
    dissipation_n: float
    dissipation_u: float
    enstrophy: float
    linf_n: float
    linf_u: float
    min_n: float
    l43_n: float
    l2_n: float
    l3_n: float
    l4_n: float
    log_moment: float

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in CSV_COLUMNS)


assert tuple(f.name for f in dataclass_fields(DiagnosticsRow)) == CSV_COLUMNS


def diagnostics_row(state: SimState) -> DiagnosticsRow:
    grid = state.grid
    n = state.n.values
    u1, u2 = state.u.u1, state.u.u2
    cx, cy = chemo_gradient(state)
    d_n, d_u = dissipation(grid, n, u1, u2, cx, cy)
    mom = moment_report(grid, n, u1, u2)
    return DiagnosticsRow(
        t=state.t,
        mass=mass(grid, n),
        m1x=mom.m1x,
        m1y=mom.m1y,
        m2=mom.m2,
        coupling=mom.coupling,
        entropy=entropy(grid, n),
        mod_entropy=modified_entropy(grid, n),
        free_energy=free_energy(grid, n, u1, u2, state.c, state.variant).value,
        mod_free_energy=modified_free_energy(grid, n, u1, u2, state.c,
                                             state.variant).value,
        kinetic=kinetic_energy(grid, u1, u2),
        dissipation_n=d_n,
        dissipation_u=d_u,
        enstrophy=enstrophy(grid, u1, u2),
        linf_n=float(np.max(np.abs(n))),
        linf_u=float(np.max(np.hypot(u1, u2))),
        min_n=float(np.min(n)),
        l43_n=lp_norm(grid, n, 4.0 / 3.0),
        l2_n=lp_norm(grid, n, 2),
        l3_n=lp_norm(grid, n, 3),
        l4_n=lp_norm(grid, n, 4),
        log_moment=log_moment(grid, n),
    )


@dataclass
class DiagnosticsSeries:
    rows: list[DiagnosticsRow]

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in CSV_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(row, name) for row in self.rows])

    def append(self, row: DiagnosticsRow) -> None:
        self.rows.append(row)


# ---------------------------------------------------------------------------
# balance-law residuals along a series

@dataclass(frozen=True)
class FreeEnergyResiduals:
    """Interval residuals of dF/dt = -(D_n + D_u) and the integrated
    one-sided bound F(t) + int (D_n + D_u/2) <= F(0)."""

    t_mid: np.ndarray
    residuals: np.ndarray
    inequality_slack: np.ndarray
    max_residual: float
    max_slack: float


def free_energy_identity_residual(series: DiagnosticsSeries) -> FreeEnergyResiduals:
    t = series.column("t")
    if len(t) < 2:
        raise ValueError("need at least two samples to form interval residuals")
    f = series.column("free_energy")
    d = series.column("dissipation_n") + series.column("dissipation_u")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("series must be sampled at increasing times")
    residuals = np.diff(f) / dt + 0.5 * (d[:-1] + d[1:])

    d_half = series.column("dissipation_n") + 0.5 * series.column("dissipation_u")
    cumulative = np.concatenate(
        [[0.0], np.cumsum(0.5 * (d_half[:-1] + d_half[1:]) * dt)])
    slack = f + cumulative - f[0]
    return FreeEnergyResiduals(
        t_mid=0.5 * (t[:-1] + t[1:]),
        residuals=residuals,
        inequality_slack=slack,
        max_residual=float(np.max(np.abs(residuals))),
        max_slack=float(np.max(slack)),
    )


def modified_energy_balance_terms(state: SimState) -> tuple[float, float, float, float]:
    """Terms whose combination gives dH/dt along the flow.

    Returns (T1, T2, T3, D_u) with
      T1 = int |grad log(1+n) - grad(c)/2|^2,
      T2 = int n |grad log(1+n) - grad c|^2,
      T3 = int |grad c|^2,
    so that dH/dt = -T1 - T2 + T3/4 - D_u.

    Note the T3 coefficient: expanding -T1 - T2 against the flow leaves
    +T3/4, and the kinetic part of H contributes the viscous -D_u.
    """
    grid = state.grid
    n = np.maximum(state.n.values, 0.0)
    cx, cy = chemo_gradient(state)
    nx, ny = gradient(grid, state.n.values)
    denom = 1.0 + n
    ax, ay = nx / denom, ny / denom
    t1 = integrate(grid, (ax - 0.5 * cx) ** 2 + (ay - 0.5 * cy) ** 2)
    t2 = integrate(grid, n * ((ax - cx) ** 2 + (ay - cy) ** 2))
    t3 = integrate(grid, cx ** 2 + cy ** 2)
    du11, du12 = gradient(grid, state.u.u1)
    du21, du22 = gradient(grid, state.u.u2)
    d_u = integrate(grid, du11 ** 2 + du12 ** 2 + du21 ** 2 + du22 ** 2)
    return t1, t2, t3, d_u
