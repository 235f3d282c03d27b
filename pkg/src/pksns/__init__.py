"""Structure-preserving pseudo-spectral solver for 2D chemotaxis-fluid flow.

A periodic-box simulator for the coupled cell-density / chemoattractant /
incompressible-flow system, with an integral-equation (fixed-point) oracle
and numerical verifiers for the free-energy, moment, and functional-
inequality structure of the dynamics.
"""

from .spectral import Grid, SpectralField, make_grid
from .elliptic import (FREESPACE_LOGKERNEL, PERIODIC_MEANFREE, PoissonVariant,
                       grad_chemo, mean_shifted_potential, recover_pressure,
                       solve_chemo)
from .state import (DensityField, SimState, VelocityField,
                    init_critical_profile, init_gaussian_density,
                    init_random_density, init_random_solenoidal,
                    init_taylor_green, make_state)
from .evolve import NumericsError, RunResult, StepperConfig, cfl_dt, rhs, run, step
from .functionals import (Cutoff, DiagnosticsRow, DiagnosticsSeries,
                          diagnostics_row, dissipation, enstrophy, entropy,
                          free_energy, free_energy_identity_residual,
                          log_moment, lp_norm, mass, modified_entropy,
                          modified_free_energy, moment_report, vorticity)
from .mild import (MildTrajectory, PicardResult, TimeQuadrature, b1, b2,
                   et_norm, picard_iterate, smoothing_rates)
from .inequalities import (InequalityReport, brezis_merle_radial,
                           check_log_hls, entropy_equivalence,
                           interpolation_l2_l3, nagai_gradc_bound, sweep)
from .config import RunConfig, build_initial_state, load_config, presets
from .snapshots import read_snapshot, write_snapshot
from .series import SeriesWriter, read_series, write_series

__version__ = "0.1.0"
