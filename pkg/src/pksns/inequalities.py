"""Numerical verification of explicit-constant functional inequalities.

Each check evaluates both sides of a theorem-backed inequality on a
concrete field and reports lhs, rhs, the constant used, and the signed
margin. Since every inequality here is a theorem, a failure beyond
quadrature tolerance indicates a discretization bug, and the sweeps treat
it as a hard failure.

Suites (seeded, deterministic):
  loghls   entropy + 2/M * double log-interaction >= -C(M),
           C(M) = M (1 + log pi - log M)
  nagai    sup |grad c| <= C_q |n|_1^{(q-2)/(2(q-1))} |n|_q^{q/(2(q-1))}
  entropy  the two-sided comparison between int f|log f| and
           int (1+f)log(1+f) with constants 2, 2 log 2, 2 alpha, 1/e
  bm       radial disk version of the exponential-integrability bound
           int e^{|v|} <= 4 pi^2 d(Omega)^2 / (4 pi - |g|_1) e^{sup |v|}
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import functionals, spectral
from .elliptic import FREESPACE_LOGKERNEL, chemo_fields, solve_chemo
from .spectral import Grid, make_grid
from .state import init_random_density

SUITES = ("loghls", "nagai", "entropy", "bm")

REPORT_HEADER = "name,seed,lhs,rhs,constant,margin,pass"


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    constant_used: float
    margin: float        # rhs - lhs, or lhs - bound for lower bounds
    passed: bool
    tol: float
    field_descriptor: str

    def csv_row(self, seed: int | str = "") -> str:
        return (f"{self.name},{seed},{self.lhs:.17g},{self.rhs:.17g},"
                f"{self.constant_used:.17g},{self.margin:.17g},"
                f"{'true' if self.passed else 'false'}")


def _report(name: str, lhs: float, rhs: float, constant: float, margin: float,
            tol: float, descriptor: str) -> InequalityReport:
    for value in (lhs, rhs, constant, margin):
        if not np.isfinite(value):
            raise ValueError(f"{name}: non-finite report value")
    return InequalityReport(name, lhs, rhs, constant, margin,
                            margin >= -tol, tol, descriptor)


# ---------------------------------------------------------------------------
# logarithmic interaction bound

def log_hls_constant(total_mass: float) -> float:
    """C(M) = M (1 + log pi - log M)."""
    return total_mass * (1.0 + np.log(np.pi) - np.log(total_mass))


def log_interaction(grid: Grid, n: np.ndarray) -> float:
    """Double integral of n(x) n(y) log|x-y|, via the freespace potential.

    Equal to -2 pi int n c with c the decaying logarithmic potential; the
    diagonal cell uses the same cell-averaged kernel as the solver, which
    is the second-order-consistent way through the integrable singularity.
    """
    c = solve_chemo(grid, n, FREESPACE_LOGKERNEL)
    return -2.0 * np.pi * functionals.integrate(grid, n * c)


def check_log_hls(grid: Grid, n: np.ndarray, descriptor: str = "custom"
                  ) -> InequalityReport:
    """Lower bound: int n log n + (2/M) * log-interaction >= -C(M)."""
    total = functionals.mass(grid, n)
    if total <= 0:
        raise ValueError("log-HLS check requires positive mass")
    constant = log_hls_constant(total)
    lhs = functionals.entropy(grid, n) + (2.0 / total) * log_interaction(grid, n)
    bound = -constant
    tol = 1e-6 * (1.0 + abs(constant))
    return _report("loghls", lhs, bound, constant, lhs - bound, tol, descriptor)


# ---------------------------------------------------------------------------
# gradient-of-potential bound

def nagai_constant(q: float) -> float:
    if q <= 2:
        raise ValueError("the gradient bound needs q > 2")
    ratio = q / (q - 1.0)
    e1 = (q - 2.0) / (2.0 * (q - 1.0))
    e2 = q / (2.0 * (q - 1.0))
    return float(np.sqrt(2.0 * np.pi) * np.sqrt((q - 1.0) / (q - 2.0))
                 * (ratio ** e1 + ratio ** (-e2)))


def nagai_gradc_bound(grid: Grid, n: np.ndarray, q: float,
                      descriptor: str = "custom") -> InequalityReport:
    """sup |grad c| <= C_q |n|_1^{(q-2)/(2(q-1))} |n|_q^{q/(2(q-1))}."""
    cq = nagai_constant(q)
    _, cx, cy = chemo_fields(grid, n, FREESPACE_LOGKERNEL)
    lhs = float(np.max(np.hypot(cx, cy)))
    l1 = functionals.lp_norm(grid, n, 1)
    lq = functionals.lp_norm(grid, n, q)
    rhs = cq * l1 ** ((q - 2.0) / (2.0 * (q - 1.0))) * lq ** (q / (2.0 * (q - 1.0)))
    tol = 1e-6 * max(rhs, 1e-300)
    return _report(f"nagai_q{q:g}", lhs, rhs, cq, rhs - lhs, tol, descriptor)


# ---------------------------------------------------------------------------
# entropy equivalence

def entropy_equivalence(grid: Grid, f: np.ndarray, alpha: float = 3.0,
                        descriptor: str = "custom"
                        ) -> tuple[InequalityReport, InequalityReport]:
    """Both comparisons between int (1+f)log(1+f) and int f|log f|.

    Upper: int (1+f)log(1+f) <= 2 int f|log f| + (2 log 2) int f.
    Lower: int f|log f| <= int (1+f)log(1+f) + 2a int f log(2+|x|)
           + (1/e) int (2+|x|)^{-a}, valid for a > 2 in the plane.
    """
    if alpha <= 2:
        raise ValueError("alpha must exceed the dimension (2)")
    pos = np.maximum(f, 0.0)
    mod_ent = functionals.modified_entropy(grid, f)
    flogf = functionals.integrate(
        grid, np.where(pos > 1e-300, pos * np.abs(np.log(np.maximum(pos, 1e-300))), 0.0))
    total = functionals.integrate(grid, pos)

    rhs1 = 2.0 * flogf + 2.0 * np.log(2.0) * total
    tol = 1e-8 * (1.0 + abs(rhs1))
    first = _report("entropy_equiv_upper", mod_ent, rhs1, 2.0 * np.log(2.0),
                    rhs1 - mod_ent, tol, descriptor)

    radius = np.sqrt(grid.radius_sq())
    weight = functionals.integrate(grid, pos * np.log(2.0 + radius))
    decay = functionals.integrate(grid, (2.0 + radius) ** (-alpha))
    rhs2 = mod_ent + 2.0 * alpha * weight + decay / np.e
    tol2 = 1e-8 * (1.0 + abs(rhs2))
    second = _report("entropy_equiv_lower", flogf, rhs2, 2.0 * alpha,
                     rhs2 - flogf, tol2, descriptor)
    return first, second


# ---------------------------------------------------------------------------
# exponential integrability on the unit disk (radial)

def _radial_poisson_disk(g: Callable[[np.ndarray], np.ndarray], samples: int
                         ) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve -lap(v) = g radially on the unit disk with v(1) = 0.

    v(r) = int_r^1 (1/s) int_0^s g(rho) rho drho ds by cumulative
    trapezoid on a fine radial mesh. Returns (r, v, |g|_L1).
    """
    r = np.linspace(0.0, 1.0, samples)
    gr = g(r)
    if not np.all(np.isfinite(gr)):
        raise ValueError("radial profile must be finite on [0, 1]")
    inner = np.concatenate([[0.0], np.cumsum(0.5 * (gr[1:] * r[1:] + gr[:-1] * r[:-1])
                                             * np.diff(r))])
    with np.errstate(invalid="ignore", divide="ignore"):
        integrand = np.where(r > 0, inner / np.where(r > 0, r, 1.0), 0.0)
    tail = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1])
                                            * np.diff(r))])
    v = tail[-1] - tail
    g_l1 = 2.0 * np.pi * float(np.sum(0.5 * (np.abs(gr[1:]) * r[1:]
                                             + np.abs(gr[:-1]) * r[:-1]) * np.diff(r)))
    return r, v, g_l1


def brezis_merle_radial(g: Callable[[np.ndarray], np.ndarray],
                        samples: int = 4097, descriptor: str = "custom"
                        ) -> InequalityReport:
    """int_disk e^{|v|} <= 4 pi^2 d^2 / (4 pi - |g|_1), radial, v|_boundary = 0."""
    r, v, g_l1 = _radial_poisson_disk(g, samples)
    if g_l1 >= 4.0 * np.pi:
        raise ValueError(f"|g|_1 = {g_l1:.6f} >= 4 pi; the bound degenerates")
    integrand = np.exp(np.abs(v)) * r
    lhs = 2.0 * np.pi * float(np.sum(0.5 * (integrand[1:] + integrand[:-1])
                                     * np.diff(r)))
    rhs = 4.0 * np.pi ** 2 * 4.0 / (4.0 * np.pi - g_l1)  # diameter 2, sup_bdry v = 0
    tol = 1e-8 * rhs
    return _report("brezis_merle", lhs, rhs, g_l1, rhs - lhs, tol, descriptor)


# ---------------------------------------------------------------------------
# empirical interpolation constants (no explicit constant to assert)

@dataclass(frozen=True)
class InterpolationConstants:
    eps: float
    c2: float   # implied constant for the L2 bound
    c3: float   # implied constant for the L3 bound


def interpolation_l2_l3(grid: Grid, fields: Sequence[np.ndarray],
                        eps_values: Sequence[float]) -> list[InterpolationConstants]:
    """Implied constants for |f|_2 <= eps |(1+f)log(1+f)|_1^{1/2} |grad f|_2^{1/2}
    + C(eps) |f|_1^{1/2} and its L3 analogue, maximized over the family.

    The constants are reported, never asserted: only finiteness and the
    growth trend as eps decreases are meaningful.
    """
    out = []
    for eps in eps_values:
        c2 = 0.0
        c3 = 0.0
        for f in fields:
            ent = functionals.modified_entropy(grid, f)
            fx, fy = spectral.gradient(grid, f)
            grad2 = float(np.sqrt(grid.cell_area * np.sum(fx ** 2 + fy ** 2)))
            l1 = functionals.lp_norm(grid, f, 1)
            if l1 == 0:
                continue
            gap2 = functionals.lp_norm(grid, f, 2) - eps * ent ** 0.5 * grad2 ** 0.5
            gap3 = functionals.lp_norm(grid, f, 3) \
                - eps * ent ** (1.0 / 3.0) * grad2 ** (2.0 / 3.0)
            c2 = max(c2, gap2 / l1 ** 0.5)
            c3 = max(c3, gap3 / l1 ** (1.0 / 3.0))
        out.append(InterpolationConstants(eps, c2, c3))
    return out


# ---------------------------------------------------------------------------
# seeded sweeps

_DEF_GRID = (96, 30.0)


def _sweep_grid(grid: Grid | None) -> Grid:
    return grid if grid is not None else make_grid(*_DEF_GRID)


def _loghls_instance(grid: Grid, seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    mass = float(rng.uniform(1.0, 12.0 * np.pi))
    n = init_random_density(mass, seed, grid, band=int(rng.integers(3, 8)))
    return check_log_hls(grid, n.values, descriptor=f"random_density[seed={seed}]")


def _nagai_instance(grid: Grid, seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    q = float(rng.choice([3.0, 4.0, 8.0]))
    mass = float(rng.uniform(0.5, 8.0 * np.pi))
    n = init_random_density(mass, seed, grid, band=int(rng.integers(3, 10)))
    return nagai_gradc_bound(grid, n.values, q,
                             descriptor=f"random_density[seed={seed}]")


def _entropy_instance(grid: Grid, seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    mass = float(rng.uniform(0.2, 40.0))
    scale = float(rng.uniform(0.05, 20.0))
    n = init_random_density(mass, seed, grid, band=int(rng.integers(2, 9)))
    first, second = entropy_equivalence(grid, scale * n.values,
                                        descriptor=f"random_density[seed={seed}]")
    # fold the two one-sided reports into the tighter one for sweep output
    return first if first.margin / (1 + abs(first.rhs)) \
        <= second.margin / (1 + abs(second.rhs)) else second


def _bm_instance(grid: Grid, seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    target = float(rng.uniform(0.05, 0.97)) * 4.0 * np.pi
    shape = float(rng.uniform(0.3, 4.0))
    kind = int(rng.integers(0, 2))

    def profile(r: np.ndarray) -> np.ndarray:
        if kind == 0:
            return (1.0 - r ** 2) ** shape
        return np.exp(-(r / (0.2 + 0.2 * shape)) ** 2)

    r_fine = np.linspace(0.0, 1.0, 4097)
    base = profile(r_fine)
    raw_l1 = 2.0 * np.pi * float(np.sum(0.5 * (np.abs(base[1:]) * r_fine[1:]
                                               + np.abs(base[:-1]) * r_fine[:-1])
                                        * np.diff(r_fine)))
    amp = target / raw_l1
    return brezis_merle_radial(lambda r: amp * profile(r),
                               descriptor=f"radial[kind={kind},seed={seed}]")


_INSTANCES = {
    "loghls": _loghls_instance,
    "nagai": _nagai_instance,
    "entropy": _entropy_instance,
    "bm": _bm_instance,
}


def worker_count() -> int:
    """Worker cap from PKSNS_THREADS; absent means one per CPU."""
    env = os.environ.get("PKSNS_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def sweep(suite: str, count: int, seed: int, grid: Grid | None = None
          ) -> list[InequalityReport]:
    """Run ``count`` seeded instances of a suite; deterministic in ``seed``.

    Instances are independent and evaluated by a worker pool capped by
    PKSNS_THREADS; results are ordered by instance index regardless of the
    pool size.
    """
    if suite not in _INSTANCES:
        raise ValueError(f"unknown suite {suite!r}; pick from {SUITES} or 'all'")
    g = _sweep_grid(grid)
    make = _INSTANCES[suite]
    seeds = [seed + 7919 * i for i in range(count)]
    workers = min(worker_count(), max(1, count))
    if workers == 1:
        return [make(g, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: make(g, s), seeds))


def sweep_csv(reports: Sequence[InequalityReport], seed: int) -> str:
    lines = [REPORT_HEADER]
    for i, rep in enumerate(reports):
        lines.append(rep.csv_row(seed=seed + 7919 * i))
    return "\n".join(lines) + "\n"
