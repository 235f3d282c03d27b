"""Run configuration: flat `key = value` files, presets, state assembly.

Config files are UTF-8 text, one dotted key per line, `#` comments::

    grid.N = 128
    grid.L = 40
    physics.init_n = gaussian
    physics.mass = 12.566370614359172
    stepper.dt = auto
    run.t_end = 1.0

Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .elliptic import PERIODIC_MEANFREE, PoissonVariant
from .evolve import StepperConfig
from .spectral import make_grid
from .state import (DensityField, SimState, init_critical_profile,
                    init_gaussian_density, init_random_density,
                    init_random_solenoidal, init_taylor_green, make_state)


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    # grid
    n: int = 128
    length: float = 40.0
    # physics
    init_n: str = "gaussian"          # gaussian | critical | random | zero
    mass: float = 4.0 * np.pi
    sigma: float = 1.0
    lam: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    renormalize: bool = True          # exact-mass scaling for the profile
    init_u: str = "zero"              # zero | taylor_green | random
    amplitude: float = 1.0
    energy: float = 0.0
    band: int = 4
    poisson: str = "periodic"         # periodic | freespace
    pad_factor: int = 2
    coupling: bool = True
    # stepper
    scheme: str = "etdrk2"
    dt: float | str = "auto"
    cfl_safety: float = 0.5
    dt_max: float = 1e-2
    positivity: str = "off"
    monitor: bool = False
    tail_threshold: float = 1e-6
    # run & output
    t_end: float = 1.0
    cadence: float = 0.02
    series_path: str = "series.csv"
    snapshot_every: int = 0
    snapshot_dir: str = "snapshots"
    seed: int = 1234

    def variant(self) -> PoissonVariant:
        if self.poisson == "periodic":
            return PERIODIC_MEANFREE
        if self.poisson == "freespace":
            return PoissonVariant("freespace_logkernel", self.pad_factor)
        raise ConfigError(f"unknown poisson variant {self.poisson!r}")

    def stepper(self) -> StepperConfig:
        try:
            return StepperConfig(
                dt=self.dt, cfl_safety=self.cfl_safety, scheme=self.scheme,
                positivity=self.positivity, poisson=self.variant(),
                dt_max=self.dt_max, coupling=self.coupling,
                monitor=self.monitor, tail_threshold=self.tail_threshold)
        except ValueError as err:
            raise ConfigError(str(err)) from None


_KEY_MAP = {
    "grid.N": ("n", int),
    "grid.L": ("length", float),
    "physics.init_n": ("init_n", str),
    "physics.mass": ("mass", float),
    "physics.sigma": ("sigma", float),
    "physics.lambda": ("lam", float),
    "physics.center_x": ("center_x", float),
    "physics.center_y": ("center_y", float),
    "physics.renormalize": ("renormalize", "bool"),
    "physics.init_u": ("init_u", str),
    "physics.amplitude": ("amplitude", float),
    "physics.energy": ("energy", float),
    "physics.band": ("band", int),
    "physics.poisson": ("poisson", str),
    "physics.pad_factor": ("pad_factor", int),
    "physics.coupling": ("coupling", "bool"),
    "stepper.scheme": ("scheme", str),
    "stepper.dt": ("dt", "dt"),
    "stepper.cfl_safety": ("cfl_safety", float),
    "stepper.dt_max": ("dt_max", float),
    "stepper.positivity": ("positivity", str),
    "stepper.monitor": ("monitor", "bool"),
    "stepper.tail_threshold": ("tail_threshold", float),
    "run.t_end": ("t_end", float),
    "output.cadence": ("cadence", float),
    "output.series_path": ("series_path", str),
    "output.snapshot_every": ("snapshot_every", int),
    "output.snapshot_dir": ("snapshot_dir", str),
    "seed": ("seed", int),
}


def _coerce(kind, raw: str, key: str):
    if kind is str:
        return raw
    if kind == "bool":
        low = raw.lower()
        if low in ("on", "true", "1", "yes"):
            return True
        if low in ("off", "false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected on/off, got {raw!r}")
    if kind == "dt":
        if raw == "auto":
            return "auto"
        kind = float
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key = value lines into a raw string mapping."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(mapping: dict[str, str], base: RunConfig | None = None
                        ) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    updates: dict[str, object] = {}
    center = list(cfg.center)
    for key, raw in mapping.items():
        if key not in _KEY_MAP:
            raise ConfigError(f"unknown config key {key!r}")
        name, kind = _KEY_MAP[key]
        value = _coerce(kind, raw, key)
        if name == "center_x":
            center[0] = value
        elif name == "center_y":
            center[1] = value
        else:
            updates[name] = value
    updates["center"] = (center[0], center[1])
    return replace(cfg, **updates)


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_mapping(parse_config_text(fh.read()), base=base)


def build_initial_state(cfg: RunConfig) -> SimState:
    """Grid plus generated initial data, with the chemoattractant cached."""
    grid = make_grid(cfg.n, cfg.length)
    if cfg.init_n == "gaussian":
        n = init_gaussian_density(cfg.mass, cfg.sigma, cfg.center, grid)
    elif cfg.init_n == "critical":
        n = init_critical_profile(cfg.lam, grid, renormalize=cfg.renormalize)
    elif cfg.init_n == "random":
        n = init_random_density(cfg.mass, cfg.seed, grid, band=cfg.band)
    elif cfg.init_n == "zero":
        n = DensityField(grid, np.zeros(grid.shape))
    else:
        raise ConfigError(f"unknown density generator {cfg.init_n!r}")

    if cfg.init_u == "zero":
        u1 = np.zeros(grid.shape)
        u2 = np.zeros(grid.shape)
    elif cfg.init_u == "taylor_green":
        tg = init_taylor_green(cfg.amplitude, grid)
        u1, u2 = tg.u1, tg.u2
    elif cfg.init_u == "random":
        rnd = init_random_solenoidal(cfg.energy, cfg.seed, cfg.band, grid)
        u1, u2 = rnd.u1, rnd.u2
    else:
        raise ConfigError(f"unknown velocity generator {cfg.init_u!r}")
    return make_state(grid, n.values, u1, u2, t=0.0, variant=cfg.variant())


# ---------------------------------------------------------------------------
# presets

PRESET_DESCRIPTIONS = {
    "subcritical_radial": "mass 4pi Gaussian, no flow, freespace potential; "
                          "second moment grows at 8pi",
    "critical_radial": "mass 8pi stationary profile, no flow, freespace "
                       "potential; second moment conserved",
    "critical_coupled": "mass 8pi Gaussian with random solenoidal flow, "
                        "periodic potential",
    "supercritical_radial": "mass 10pi Gaussian, freespace potential, "
                            "resolution monitor armed; m2 shrinks at 10pi",
    "heat_sanity": "pure diffusion of a narrow Gaussian (coupling off)",
    "ns_sanity": "pure fluid: single-mode cellular flow at exact viscous decay",
    "picard_smalldata": "small-mass Gaussian plus weak random flow for the "
                        "integral-equation oracle",
}


def presets() -> dict[str, RunConfig]:
    base = RunConfig()
    return {
        "subcritical_radial": replace(
            base, n=128, length=40.0, init_n="gaussian", mass=4.0 * np.pi,
            sigma=1.0, init_u="zero", poisson="freespace", t_end=0.5,
            cadence=0.02, seed=11),
        # raw (unrenormalized) profile: exact-mass amplitude scaling would
        # inject an O(truncation) imbalance into the stationary balance
        "critical_radial": replace(
            base, n=256, length=40.0, init_n="critical", lam=1.0,
            renormalize=False, init_u="zero", poisson="freespace",
            t_end=1.0, cadence=0.05, seed=12),
        "critical_coupled": replace(
            base, n=128, length=40.0, init_n="gaussian", mass=8.0 * np.pi,
            sigma=1.2, init_u="random", energy=0.5, band=4,
            poisson="periodic", t_end=1.0, cadence=0.05, seed=13),
        "supercritical_radial": replace(
            base, n=256, length=40.0, init_n="gaussian", mass=10.0 * np.pi,
            sigma=1.0, init_u="zero", poisson="freespace", monitor=True,
            tail_threshold=1e-6, t_end=2.0, cadence=0.02, seed=14),
        "heat_sanity": replace(
            base, n=512, length=40.0, init_n="gaussian", mass=1.0, sigma=0.25,
            init_u="zero", coupling=False, poisson="periodic", dt=0.5,
            dt_max=0.5, t_end=60.0, cadence=3.0, seed=15),
        "ns_sanity": replace(
            base, n=64, length=2.0 * np.pi, init_n="zero", mass=0.0,
            init_u="taylor_green", amplitude=0.1, poisson="periodic",
            dt=1e-3, t_end=1.0, cadence=0.05, seed=16),
        "picard_smalldata": replace(
            base, n=64, length=20.0, init_n="gaussian", mass=0.8 * np.pi,
            sigma=1.0, init_u="random", energy=0.01, band=3,
            poisson="periodic", t_end=0.01, cadence=0.001, seed=17),
    }
