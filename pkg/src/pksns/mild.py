"""Duhamel integral-equation oracle for the coupled system.

The pair (n, u) solves

    n(t) = e^{t lap} n0 - int_0^t e^{(t-s) lap} div(n grad c + n u) ds,
    u(t) = e^{t lap} u0 - int_0^t e^{(t-s) lap} P div(grad c x grad c + u x u) ds,

and the right-hand side defines a quadratic fixed-point map whose Picard
iterates from the bare heat flow converge for small data / short horizons.
This module discretizes the time integrals on a graded mesh (nodes pushed
toward s=0 like (i/Q)^4 to absorb the initial-layer weights), exposes the
two bilinear forms, the Picard iteration with per-sweep contraction
distances, the weighted trajectory norm governing local well-posedness,
and smoothing-rate tables.

The chemoattractant inside the bilinear forms uses the periodic mean-free
solve; stepper-vs-oracle comparisons must fix the same variant on both
sides. Quadrature-node evaluations are independent; the sweeps themselves
are sequential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functionals, spectral
from .elliptic import PERIODIC_MEANFREE, PoissonVariant, chemo_fields
from .spectral import Grid, fft2, ifft2

DEFAULT_NODES = 32
DEFAULT_ITERATIONS = 8
GRADING_POWER = 4.0


class PicardDivergenceError(RuntimeError):
    """Successive iterates grew repeatedly; the horizon T is too large."""


@dataclass(frozen=True, eq=False)
class TimeQuadrature:
    """Nodes in (0, t] with positive weights summing to t.

    Weights are composite trapezoid over the graded nodes; the untouched
    initial cell [0, s1] (length t/Q^power, far below everything else)
    is folded into the first node as a rectangle.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def graded(cls, t: float, count: int = DEFAULT_NODES,
               power: float = GRADING_POWER) -> "TimeQuadrature":
        if t <= 0:
            raise ValueError("quadrature horizon must be positive")
        if count < 2:
            raise ValueError("need at least two quadrature nodes")
        nodes = t * (np.arange(1, count + 1) / count) ** power
        return cls(nodes=nodes, weights=chain_weights(nodes))

    def validate(self) -> None:
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")
        t = float(self.nodes[-1])
        if abs(float(np.sum(self.weights)) - t) > 1e-10 * max(t, 1.0):
            raise ValueError("quadrature weights must sum to the horizon")


def chain_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid weights on [0, nodes[-1]] using only the given nodes."""
    s = np.asarray(nodes, dtype=float)
    w = np.zeros_like(s)
    if s.size == 1:
        w[0] = s[0]
        return w
    w[0] = s[0] + 0.5 * (s[1] - s[0])
    w[-1] = 0.5 * (s[-1] - s[-2])
    if s.size > 2:
        w[1:-1] = 0.5 * (s[2:] - s[:-2])
    return w


@dataclass(eq=False)
class MildTrajectory:
    """(n, u) samples at times[0] = 0 followed by the quadrature nodes."""

    grid: Grid
    times: np.ndarray
    n: np.ndarray   # (len(times), N, N)
    u1: np.ndarray
    u2: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def validate(self) -> None:
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        for name, arr in (("n", self.n), ("u1", self.u1), ("u2", self.u2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory field {name} has non-finite samples")


def heat_flow_trajectory(grid: Grid, n0: np.ndarray, u1_0: np.ndarray,
                         u2_0: np.ndarray, times: np.ndarray) -> MildTrajectory:
    """Sample the bare heat/Stokes flow of the data at the given times."""
    n0h, u1h, u2h = fft2(n0), fft2(u1_0), fft2(u2_0)
    n = np.empty((len(times), grid.n, grid.n))
    u1 = np.empty_like(n)
    u2 = np.empty_like(n)
    for i, t in enumerate(times):
        mult = np.exp(-grid.ksq * t)
        n[i] = ifft2(mult * n0h).real
        u1[i] = ifft2(mult * u1h).real
        u2[i] = ifft2(mult * u2h).real
    return MildTrajectory(grid, np.asarray(times, dtype=float), n, u1, u2)


def _node_index(traj: MildTrajectory, t: float) -> int:
    idx = int(np.argmin(np.abs(traj.times - t)))
    if abs(traj.times[idx] - t) > 1e-12 * max(1.0, t):
        raise ValueError(f"time {t} is not a sample time of the trajectory")
    return idx


def _density_flux_hat(grid: Grid, m: np.ndarray, c_source: np.ndarray,
                      u1: np.ndarray, u2: np.ndarray, variant: PoissonVariant
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Masked transform of m grad(c) + m u with c solved from c_source."""
    mask = grid.dealias_mask
    _, cx, cy = chemo_fields(grid, c_source, variant)
    return mask * fft2(m * (cx + u1)), mask * fft2(m * (cy + u2))


def _momentum_flux_hat(grid: Grid, b_source: np.ndarray, v1: np.ndarray,
                       v2: np.ndarray, c_source: np.ndarray, u1: np.ndarray,
                       u2: np.ndarray, variant: PoissonVariant) -> np.ndarray:
    """Masked transforms of grad(b) x grad(c) + v x u, index [j, i]."""
    mask = grid.dealias_mask
    _, bx, by = chemo_fields(grid, b_source, variant)
    _, cx, cy = chemo_fields(grid, c_source, variant)
    out = np.empty((2, 2, grid.n, grid.n), dtype=complex)
    bb = (bx, by)
    cc = (cx, cy)
    vv = (v1, v2)
    uu = (u1, u2)
    for j in range(2):
        for i in range(2):
            out[j, i] = mask * fft2(bb[j] * cc[i] + vv[j] * uu[i])
    return out


def b1(pair1: MildTrajectory, pair2: MildTrajectory, t: float,
       quad: TimeQuadrature, variant: PoissonVariant = PERIODIC_MEANFREE
       ) -> np.ndarray:
    """First bilinear form: int_0^t e^{(t-s) lap} div(m grad c + m u) ds.

    ``m`` comes from pair1's density; c and u come from pair2. Both
    trajectories must be sampled at the quadrature nodes.
    """
    grid = pair1.grid
    acc = np.zeros(grid.shape, dtype=complex)
    for s, w in zip(quad.nodes, quad.weights):
        i1 = _node_index(pair1, s)
        i2 = _node_index(pair2, s)
        f1h, f2h = _density_flux_hat(grid, pair1.n[i1], pair2.n[i2],
                                     pair2.u1[i2], pair2.u2[i2], variant)
        div_hat = 1j * grid.k1 * f1h + 1j * grid.k2 * f2h
        acc += w * np.exp(-grid.ksq * (t - s)) * div_hat
    return ifft2(acc).real


def b2(pair1: MildTrajectory, pair2: MildTrajectory, t: float,
       quad: TimeQuadrature, variant: PoissonVariant = PERIODIC_MEANFREE
       ) -> tuple[np.ndarray, np.ndarray]:
    """Second bilinear form: the projected Duhamel integral of
    div(grad b x grad c + v x u)."""
    grid = pair1.grid
    acc1 = np.zeros(grid.shape, dtype=complex)
    acc2 = np.zeros(grid.shape, dtype=complex)
    for s, w in zip(quad.nodes, quad.weights):
        i1 = _node_index(pair1, s)
        i2 = _node_index(pair2, s)
        flux = _momentum_flux_hat(grid, pair1.n[i1], pair1.u1[i1], pair1.u2[i1],
                                  pair2.n[i2], pair2.u1[i2], pair2.u2[i2], variant)
        d1 = 1j * grid.k1 * flux[0, 0] + 1j * grid.k2 * flux[1, 0]
        d2 = 1j * grid.k1 * flux[0, 1] + 1j * grid.k2 * flux[1, 1]
        p1, p2 = spectral.leray_project_hat(grid, d1, d2)
        mult = w * np.exp(-grid.ksq * (t - s))
        acc1 += mult * p1
        acc2 += mult * p2
    return ifft2(acc1).real, ifft2(acc2).real


# ---------------------------------------------------------------------------
# trajectory norms

def _weighted_sums(traj: MildTrajectory) -> tuple[float, float]:
    grid = traj.grid
    weighted = 0.0
    plain = 0.0
    for i, t in enumerate(traj.times):
        l1 = functionals.lp_norm(grid, traj.n[i], 1)
        l2u = functionals.lp_norm_vec(grid, traj.u1[i], traj.u2[i], 2)
        plain = max(plain, l1 + l2u)
        if t > 0:
            l43 = functionals.lp_norm(grid, traj.n[i], 4.0 / 3.0)
            l4u = functionals.lp_norm_vec(grid, traj.u1[i], traj.u2[i], 4)
            weighted = max(weighted, t ** 0.25 * (l43 + l4u))
    return weighted, plain


def et_norm(traj: MildTrajectory) -> float:
    """sup_t t^{1/4}(|n|_{4/3} + |u|_4) + sup_t (|n|_1 + |u|_2) over samples."""
    weighted, plain = _weighted_sums(traj)
    return weighted + plain


def et_distance(a: MildTrajectory, b: MildTrajectory) -> float:
    diff = MildTrajectory(a.grid, a.times, a.n - b.n, a.u1 - b.u1, a.u2 - b.u2)
    return et_norm(diff)


# ---------------------------------------------------------------------------
# Picard iteration

@dataclass
class PicardResult:
    trajectory: MildTrajectory
    distances: list[float]          # successive iterate gaps in the E_T norm
    fixed_point_residual: float


def picard_iterate(grid: Grid, n0: np.ndarray, u1_0: np.ndarray, u2_0: np.ndarray,
                   t_end: float, iterations: int = DEFAULT_ITERATIONS,
                   node_count: int = DEFAULT_NODES,
                   variant: PoissonVariant = PERIODIC_MEANFREE) -> PicardResult:
    """Run the fixed-point sweeps from the heat flow of the data.

    Each sweep replaces the trajectory at every node t_i by
    heat_flow(t_i) - B(cur, cur)(t_i), with the Duhamel integral over
    (0, t_i] taken on the shared graded node set. Divergence (three
    consecutive growing gaps) raises PicardDivergenceError.
    """
    quad = TimeQuadrature.graded(t_end, node_count)
    quad.validate()
    times = np.concatenate([[0.0], quad.nodes])
    base = heat_flow_trajectory(grid, n0, u1_0, u2_0, times)
    prefix_weights = [chain_weights(quad.nodes[: i + 1]) for i in range(node_count)]

    cur = base
    distances: list[float] = []
    grow_streak = 0
    for _ in range(iterations):
        new = _picard_sweep(grid, base, cur, quad, prefix_weights, variant)
        d = et_distance(new, cur)
        if distances and d > distances[-1]:
            grow_streak += 1
            if grow_streak >= 3:
                raise PicardDivergenceError(
                    "Picard iterates diverging: T too large for this data")
        else:
            grow_streak = 0
        distances.append(d)
        cur = new

    final = _picard_sweep(grid, base, cur, quad, prefix_weights, variant)
    residual = et_distance(final, cur)
    return PicardResult(trajectory=cur, distances=distances,
                        fixed_point_residual=residual)


def _picard_sweep(grid: Grid, base: MildTrajectory, cur: MildTrajectory,
                  quad: TimeQuadrature, prefix_weights: list[np.ndarray],
                  variant: PoissonVariant) -> MildTrajectory:
    count = len(quad.nodes)
    # flux transforms at every node of the current iterate, computed once
    dens_flux = np.empty((count, 2, grid.n, grid.n), dtype=complex)
    mom_flux = np.empty((count, 2, 2, grid.n, grid.n), dtype=complex)
    for i in range(count):
        j = i + 1  # trajectory index (times[0] = 0)
        f1h, f2h = _density_flux_hat(grid, cur.n[j], cur.n[j], cur.u1[j],
                                     cur.u2[j], variant)
        dens_flux[i, 0], dens_flux[i, 1] = f1h, f2h
        mom_flux[i] = _momentum_flux_hat(grid, cur.n[j], cur.u1[j], cur.u2[j],
                                         cur.n[j], cur.u1[j], cur.u2[j], variant)

    n_new = base.n.copy()
    u1_new = base.u1.copy()
    u2_new = base.u2.copy()
    for i, t in enumerate(quad.nodes):
        w = prefix_weights[i]
        acc_n = np.zeros(grid.shape, dtype=complex)
        acc_1 = np.zeros(grid.shape, dtype=complex)
        acc_2 = np.zeros(grid.shape, dtype=complex)
        for ip in range(i + 1):
            s = quad.nodes[ip]
            mult = w[ip] * np.exp(-grid.ksq * (t - s))
            acc_n += mult * (1j * grid.k1 * dens_flux[ip, 0]
                             + 1j * grid.k2 * dens_flux[ip, 1])
            d1 = 1j * grid.k1 * mom_flux[ip, 0, 0] + 1j * grid.k2 * mom_flux[ip, 1, 0]
            d2 = 1j * grid.k1 * mom_flux[ip, 0, 1] + 1j * grid.k2 * mom_flux[ip, 1, 1]
            acc_1 += mult * d1
            acc_2 += mult * d2
        acc_1, acc_2 = spectral.leray_project_hat(grid, acc_1, acc_2)
        n_new[i + 1] = base.n[i + 1] - ifft2(acc_n).real
        u1_new[i + 1] = base.u1[i + 1] - ifft2(acc_1).real
        u2_new[i + 1] = base.u2[i + 1] - ifft2(acc_2).real
    return MildTrajectory(grid, base.times, n_new, u1_new, u2_new)


# ---------------------------------------------------------------------------
# smoothing rates

@dataclass(frozen=True)
class SmoothingRate:
    """sup_t t^{1-1/p} |n(t)|_p and the velocity companion
    sup_t t^{1-1/p} |u(t)|_{2p/(2-p)} (only defined for p <= 2)."""

    p: float
    density_sup: float
    velocity_sup: float
    density_refinement_flag: bool
    velocity_refinement_flag: bool


def _still_growing(values: np.ndarray) -> bool:
    """True when the weighted quantity peaks at the last sample and rose by
    more than 1% over the final quarter of the window: its sup is not yet
    saturated and refining/extending the sampling would raise it."""
    if values.size < 4:
        return False
    if values[-1] < np.max(values):
        return False
    anchor = values[-1 - values.size // 4]
    return anchor > 0 and values[-1] / anchor - 1.0 > 0.01


def smoothing_rates(traj: MildTrajectory, p_list: list[float]) -> list[SmoothingRate]:
    """Weighted-supremum table over the trajectory samples.

    A rate is flagged when its weighted quantity is still growing at the
    end of the window (see ``_still_growing``); finite saturated sups stay
    unflagged.
    """
    grid = traj.grid
    out = []
    tpos = traj.times > 0
    times = traj.times[tpos]
    for p in p_list:
        if p < 1:
            raise ValueError("smoothing rates need p >= 1")
        wn = np.array([times[k] ** (1.0 - 1.0 / p)
                       * functionals.lp_norm(grid, traj.n[1 + k], p)
                       for k in range(len(times))]) if len(times) else np.zeros(0)
        if p < 2:
            q = 2.0 * p / (2.0 - p)
        elif p == 2:
            q = np.inf
        else:
            q = None
        if q is None:
            wu = np.zeros(0)
            u_sup = float("nan")
            u_flag = False
        else:
            wu = np.array([
                times[k] ** (1.0 - 1.0 / p)
                * functionals.lp_norm_vec(grid, traj.u1[1 + k], traj.u2[1 + k], q)
                for k in range(len(times))])
            u_sup = float(np.max(wu)) if wu.size else 0.0
            u_flag = _still_growing(wu)
        n_sup = float(np.max(wn)) if wn.size else 0.0
        n_flag = _still_growing(wn)
        out.append(SmoothingRate(p, n_sup, u_sup, n_flag, u_flag))
    return out
