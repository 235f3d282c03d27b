"""Time integration of the coupled cell/fluid system.

The stiff diffusion is integrated exactly through the heat multiplier;
quadratic terms (drift n grad c, transport n u, advection u.u, forcing
n grad c) are treated explicitly with second-order exponential time
differencing by default. Every quadratic product is 2/3-dealiased, the
density tendency is kept in divergence form so the k=0 density mode is
never touched (exact discrete mass conservation), and the velocity
tendency is Leray-projected so incompressibility survives every step.

One run owns its state; independent runs share nothing mutable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import spectral
from .elliptic import PERIODIC_MEANFREE, PoissonVariant, chemo_fields, solve_chemo
from .functionals import DiagnosticsRow, DiagnosticsSeries, diagnostics_row
from .spectral import Grid, fft2, ifft2
from .state import DensityField, SimState, VelocityField

SCHEMES = ("etdrk2", "imex_euler")
POSITIVITY_MODES = ("off", "clip_report")


class NumericsError(RuntimeError):
    """Non-finite field detected; carries the first offending quantity."""

    def __init__(self, message: str, step_index: int | None = None,
                 series: DiagnosticsSeries | None = None):
        super().__init__(message)
        self.step_index = step_index
        self.series = series


@dataclass(frozen=True)
class StepperConfig:
    dt: float | str = "auto"
    cfl_safety: float = 0.5
    scheme: str = "etdrk2"
    positivity: str = "off"
    poisson: PoissonVariant = PERIODIC_MEANFREE
    dt_max: float = 1e-2
    speed_floor: float = 1e-8
    coupling: bool = True
    monitor: bool = False
    tail_threshold: float = 1e-6

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.positivity not in POSITIVITY_MODES:
            raise ValueError(f"unknown positivity mode {self.positivity!r}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.dt != "auto":
            if not (isinstance(self.dt, (int, float)) and self.dt > 0):
                raise ValueError("dt must be 'auto' or a positive number")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericsError(f"non-finite values in {name}")


def _nonlinear_hat(grid: Grid, n: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                   cx: np.ndarray, cy: np.ndarray, coupling: bool
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masked spectral tendencies of the non-diffusive terms.

    Density: -div(n (grad c + u)) in divergence form (k=0 exactly zero).
    Velocity: P(-div(u x u) + n grad c).
    """
    mask = grid.dealias_mask
    drift1 = cx + u1 if coupling else u1
    drift2 = cy + u2 if coupling else u2
    f1_hat = mask * fft2(n * drift1)
    f2_hat = mask * fft2(n * drift2)
    nn_hat = -(1j * grid.k1 * f1_hat + 1j * grid.k2 * f2_hat)

    t11 = mask * fft2(u1 * u1)
    t12 = mask * fft2(u1 * u2)
    t22 = mask * fft2(u2 * u2)
    adv1 = 1j * grid.k1 * t11 + 1j * grid.k2 * t12
    adv2 = 1j * grid.k1 * t12 + 1j * grid.k2 * t22
    nu1_hat = -adv1
    nu2_hat = -adv2
    if coupling:
        nu1_hat = nu1_hat + mask * fft2(n * cx)
        nu2_hat = nu2_hat + mask * fft2(n * cy)
    nu1_hat, nu2_hat = spectral.leray_project_hat(grid, nu1_hat, nu2_hat)
    return nn_hat, nu1_hat, nu2_hat


def rhs(state: SimState, coupling: bool = True
        ) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Instantaneous tendencies (dn/dt, du/dt) of the resolved band.

    All terms, including the diffusion, are restricted to the dealias band
    so the balance between the Laplacian and the masked quadratic fluxes is
    band-consistent. Modes above the band carry no reported tendency; the
    stepper decays them by pure diffusion.
    """
    grid = state.grid
    n, u1, u2 = state.n.values, state.u.u1, state.u.u2
    _check_finite("density", n)
    _check_finite("velocity", u1, u2)
    _check_finite("chemoattractant", state.c)
    if coupling:
        _, cx, cy = chemo_fields(grid, n, state.variant or PERIODIC_MEANFREE)
    else:
        cx = cy = np.zeros(grid.shape)
    nn, nu1, nu2 = _nonlinear_hat(grid, n, u1, u2, cx, cy, coupling)
    mask = grid.dealias_mask
    dn = ifft2(nn - mask * grid.ksq * fft2(n)).real
    du1 = ifft2(nu1 - mask * grid.ksq * fft2(u1)).real
    du2 = ifft2(nu2 - mask * grid.ksq * fft2(u2)).real
    return dn, (du1, du2)


def cfl_dt(state: SimState, cfg: StepperConfig) -> float:
    """dt = safety * h / max(|u|_inf + |grad c|_inf, floor), capped by dt_max."""
    grid = state.grid
    speed = float(np.max(np.hypot(state.u.u1, state.u.u2)))
    if cfg.coupling:
        cx, cy = spectral.gradient(grid, state.c)
        speed += float(np.max(np.hypot(cx, cy)))
    dt = cfg.cfl_safety * grid.h / max(speed, cfg.speed_floor)
    return min(dt, cfg.dt_max)


_phi_cache: dict[tuple[int, float, float], tuple[np.ndarray, ...]] = {}


def _etdrk2_tables(grid: Grid, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(e^{z}, dt*phi1(z), dt*phi2(z)) for z = -|k|^2 dt, series-guarded."""
    key = (grid.n, grid.length, dt)
    tables = _phi_cache.get(key)
    if tables is not None:
        return tables
    z = -grid.ksq * dt
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)  # placeholder to avoid 0/0
    phi1 = np.where(small, 1.0 + z / 2.0 + z ** 2 / 6.0, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6.0 + z ** 2 / 24.0,
                    (np.expm1(zs) - zs) / zs ** 2)
    tables = (np.exp(z), dt * phi1, dt * phi2)
    if len(_phi_cache) > 64:
        _phi_cache.clear()
    _phi_cache[key] = tables
    return tables


@dataclass(frozen=True)
class StepInfo:
    dt: float
    min_density: float
    clipped_mass: float


def _chemo_for(grid: Grid, n: np.ndarray, cfg: StepperConfig
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if cfg.coupling:
        return chemo_fields(grid, n, cfg.poisson)
    z = np.zeros(grid.shape)
    return solve_chemo(grid, n, cfg.poisson), z, z


def step(state: SimState, cfg: StepperConfig, dt: float | None = None
         ) -> tuple[SimState, StepInfo]:
    """Advance one time step; returns the new state and step bookkeeping."""
    grid = state.grid
    if dt is None:
        dt = cfg.dt if cfg.dt != "auto" else cfl_dt(state, cfg)
    dt = float(dt)
    if dt <= 0:
        raise ValueError("step size must be positive")

    n = state.n.values
    u1, u2 = state.u.u1, state.u.u2
    if cfg.coupling:
        if cfg.poisson.kind == "periodic_meanfree" and state.variant == cfg.poisson:
            cx, cy = spectral.gradient(grid, state.c)
        else:
            _, cx, cy = chemo_fields(grid, n, cfg.poisson)
    else:
        cx = cy = np.zeros(grid.shape)

    nh, u1h, u2h = fft2(n), fft2(u1), fft2(u2)
    pure_heat = not cfg.coupling and not (u1.any() or u2.any())
    if pure_heat:
        zero = np.zeros(grid.shape, dtype=complex)
        n1 = (zero, zero, zero)
    else:
        n1 = _nonlinear_hat(grid, n, u1, u2, cx, cy, cfg.coupling)

    if cfg.scheme == "etdrk2":
        e, p1, p2 = _etdrk2_tables(grid, dt)
        a_n = e * nh + p1 * n1[0]
        a_u1 = e * u1h + p1 * n1[1]
        a_u2 = e * u2h + p1 * n1[2]
        if pure_heat:
            new_nh, new_u1h, new_u2h = a_n, a_u1, a_u2
        else:
            na = ifft2(a_n).real
            ua1 = ifft2(a_u1).real
            ua2 = ifft2(a_u2).real
            _check_finite("predictor stage", na, ua1, ua2)
            _, cax, cay = _chemo_for(grid, na, cfg)
            n2 = _nonlinear_hat(grid, na, ua1, ua2, cax, cay, cfg.coupling)
            new_nh = a_n + p2 * (n2[0] - n1[0])
            new_u1h = a_u1 + p2 * (n2[1] - n1[1])
            new_u2h = a_u2 + p2 * (n2[2] - n1[2])
    else:  # imex_euler: implicit diffusion, explicit nonlinearity
        denom = 1.0 + grid.ksq * dt
        new_nh = (nh + dt * n1[0]) / denom
        new_u1h = (u1h + dt * n1[1]) / denom
        new_u2h = (u2h + dt * n1[2]) / denom

    new_n = ifft2(new_nh).real
    new_u1 = ifft2(new_u1h).real
    new_u2 = ifft2(new_u2h).real
    _check_finite("density", new_n)
    _check_finite("velocity", new_u1, new_u2)

    min_density = float(np.min(new_n))
    clipped = 0.0
    if cfg.positivity == "clip_report" and min_density < 0.0:
        target = float(grid.cell_area * np.sum(new_n))
        clippedfield = np.maximum(new_n, 0.0)
        clipped = float(grid.cell_area * np.sum(clippedfield)) - target
        if target > 0:
            new_n = clippedfield * (target / float(grid.cell_area * np.sum(clippedfield)))
        else:
            new_n = clippedfield

    new_c = solve_chemo(grid, new_n, cfg.poisson)
    new_state = SimState(
        t=state.t + dt,
        n=DensityField(grid, new_n),
        u=VelocityField(grid, new_u1, new_u2),
        c=new_c,
        variant=cfg.poisson,
    )
    return new_state, StepInfo(dt=dt, min_density=min_density, clipped_mass=clipped)


@dataclass
class RunResult:
    state: SimState
    series: DiagnosticsSeries
    status: str               # "ok" | "under_resolved"
    steps: int
    clipped_mass: float
    min_density: float


def run(state0: SimState, t_end: float, cfg: StepperConfig, *,
        sample_dt: float | None = None,
        on_sample=None, snapshot_every: int = 0, on_snapshot=None,
        max_steps: int = 10 ** 7) -> RunResult:
    """Integrate to ``t_end`` recording diagnostics on a uniform cadence.

    Steps are clamped so that samples land exactly on multiples of
    ``sample_dt`` past the start time. ``on_sample(state, row)`` fires at
    every recorded sample (the partial series survives aborts: it is
    attached to the raised NumericsError). ``t_end <= t0`` returns an
    empty, headered series.
    """
    series = DiagnosticsSeries(rows=[])
    if t_end <= state0.t:
        return RunResult(state0, series, "ok", 0, 0.0, float(np.min(state0.n.values)))

    if sample_dt is None:
        sample_dt = (t_end - state0.t) / 50.0
    if sample_dt <= 0:
        raise ValueError("sample_dt must be positive")

    def record(st: SimState, count: int) -> None:
        row = diagnostics_row(st)
        series.append(row)
        if on_sample is not None:
            on_sample(st, row)
        if snapshot_every and on_snapshot is not None and count % snapshot_every == 0:
            on_snapshot(st)

    state = state0
    status = "ok"
    steps = 0
    clipped_total = 0.0
    min_density = float(np.min(state0.n.values))
    record(state, 0)
    samples = 1
    next_sample = state0.t + sample_dt

    while state.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        target = min(next_sample, t_end)
        base_dt = cfg.dt if cfg.dt != "auto" else cfl_dt(state, cfg)
        dt = min(float(base_dt), target - state.t)
        try:
            state, info = step(state, cfg, dt=dt)
        except NumericsError as err:
            raise NumericsError(f"{err} at step {steps}", step_index=steps,
                                series=series) from None
        steps += 1
        clipped_total += info.clipped_mass
        min_density = min(min_density, info.min_density)
        if steps >= max_steps:
            raise NumericsError(f"exceeded {max_steps} steps before t_end",
                                step_index=steps, series=series)

        landed = abs(state.t - target) <= 1e-12 * max(1.0, abs(target))
        if landed:
            state = replace(state, t=target)  # kill accumulated roundoff
            if target == next_sample or target >= t_end:
                record(state, samples)
                samples += 1
                next_sample = state0.t + (samples) * sample_dt
        if cfg.monitor:
            tail = spectral.spectral_tail_fraction(state.grid, state.n.values)
            if tail > cfg.tail_threshold:
                if not landed:
                    record(state, samples)
                status = "under_resolved"
                break

    return RunResult(state, series, status, steps, clipped_total, min_density)
