import numpy as np
import pytest

from pksns import spectral
from pksns.elliptic import FREESPACE_LOGKERNEL, PERIODIC_MEANFREE
from pksns.functionals import entropy, lp_norm, mass
from pksns.spectral import l2_norm, make_grid
from pksns.state import (DensityField, VelocityField, init_critical_profile,
                         init_gaussian_density, init_random_density,
                         init_random_solenoidal, init_taylor_green, make_state,
                         raw_critical_mass)


class TestGaussianDensity:
    def test_mass_is_exact_after_renormalization(self):
        g = make_grid(64, 40.0)
        n = init_gaussian_density(8 * np.pi, 1.0, (0, 0), g)
        assert n.mass == pytest.approx(8 * np.pi, rel=1e-10)

    def test_zero_mass_gives_zero_field(self):
        g = make_grid(32, 10.0)
        n = init_gaussian_density(0.0, 1.0, (0, 0), g)
        assert np.max(np.abs(n.values)) == 0.0

    def test_entropy_of_unit_gaussian_closed_form(self):
        # int n log n for the unit-mass sigma=1 blob is -1 - log(2 pi)
        g = make_grid(256, 40.0)
        n = init_gaussian_density(1.0, 1.0, (0, 0), g)
        assert entropy(g, n.values) == pytest.approx(-1.0 - np.log(2 * np.pi),
                                                     abs=1e-6)

    def test_oversized_sigma_rejected(self):
        g = make_grid(32, 10.0)
        with pytest.raises(ValueError):
            init_gaussian_density(1.0, 2.0, (0, 0), g)  # sigma > L/6

    def test_renormalization_preserves_shape(self):
        g = make_grid(64, 40.0)
        n = init_gaussian_density(3.0, 1.2, (1.0, -2.0), g).values
        raw = np.exp(-((g.x1 - 1.0) ** 2 + (g.x2 + 2.0) ** 2) / (2 * 1.2 ** 2))
        ratio = n[raw > raw.max() * 1e-6] / raw[raw > raw.max() * 1e-6]
        assert np.max(ratio) - np.min(ratio) <= 1e-12 * np.max(ratio)


class TestCriticalProfile:
    def test_raw_mass_close_to_8pi(self):
        g = make_grid(256, 40.0)
        raw = raw_critical_mass(1.0, g)
        assert abs(raw - 8 * np.pi) <= 5e-3 * 8 * np.pi
        assert raw < 8 * np.pi  # deficit is box truncation

    def test_renormalized_mass_exact(self):
        g = make_grid(256, 40.0)
        n = init_critical_profile(1.0, g)
        assert n.mass == pytest.approx(8 * np.pi, rel=1e-12)

    def test_formula_peak_value_at_origin(self):
        # 8 lam^2 / lam^4 = 8 at the origin for lam = 1
        g = make_grid(256, 40.0)
        raw = init_critical_profile(1.0, g, renormalize=False)
        i0 = g.n // 2
        assert raw.values[i0, i0] == pytest.approx(8.0, rel=1e-14)
        renorm = init_critical_profile(1.0, g)
        assert renorm.values.max() == pytest.approx(8.0, rel=5e-3)

    def test_steady_state_residual(self):
        # raw profile: residual is discretization + truncation only
        from pksns.evolve import rhs
        g = make_grid(256, 40.0)
        n = init_critical_profile(1.0, g, renormalize=False)
        z = np.zeros(g.shape)
        with pytest.warns(Warning):
            state = make_state(g, n.values, z, z, variant=FREESPACE_LOGKERNEL)
            dn, _ = rhs(state)
        assert l2_norm(g, dn) <= 1e-3 * l2_norm(g, n.values)


class TestVelocityGenerators:
    def test_zero_amplitude(self):
        g = make_grid(32, 5.0)
        u = init_taylor_green(0.0, g)
        assert np.max(np.abs(u.u1)) == 0.0 and np.max(np.abs(u.u2)) == 0.0

    def test_taylor_green_is_solenoidal(self):
        g = make_grid(64, 2 * np.pi)
        u = init_taylor_green(1.0, g)
        div = spectral.divergence(g, u.u1, u.u2)
        assert np.max(np.abs(div)) < 1e-13

    def test_taylor_green_energy_closed_form(self):
        # kinetic energy of the cellular flow is a^2 L^2 / 4
        g = make_grid(64, 2 * np.pi)
        a = 0.4
        u = init_taylor_green(a, g)
        assert u.energy() == pytest.approx(a * a * g.length ** 2 / 4, rel=1e-13)

    def test_random_solenoidal_energy_and_reproducibility(self):
        g = make_grid(64, 20.0)
        u = init_random_solenoidal(0.37, 42, 4, g)
        assert u.energy() == pytest.approx(0.37, rel=1e-12)
        again = init_random_solenoidal(0.37, 42, 4, g)
        assert np.array_equal(u.u1, again.u1) and np.array_equal(u.u2, again.u2)
        other = init_random_solenoidal(0.37, 43, 4, g)
        assert not np.array_equal(u.u1, other.u1)

    def test_random_solenoidal_is_divergence_free_and_band_limited(self):
        g = make_grid(64, 20.0)
        u = init_random_solenoidal(1.0, 7, 5, g)
        u.validate()
        coeffs = spectral.fft2(u.u1)
        m = np.fft.fftfreq(g.n, d=1.0 / g.n)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        outside = np.maximum(np.abs(m1), np.abs(m2)) > 5
        assert np.max(np.abs(coeffs[outside])) < 1e-10 * np.max(np.abs(coeffs))


class TestRandomDensity:
    @pytest.mark.parametrize("seed", range(8))
    def test_nonnegative_interior_supported_exact_mass(self, seed):
        g = make_grid(96, 30.0)
        n = init_random_density(2.5, seed, g)
        n.validate()
        assert n.mass == pytest.approx(2.5, rel=1e-10)
        from pksns.elliptic import boundary_tail_fraction
        assert boundary_tail_fraction(g, n.values) < 1e-8


class TestContainers:
    def test_density_invariant_rejects_negative_samples(self):
        g = make_grid(16, 1.0)
        values = np.ones(g.shape)
        values[0, 0] = -0.5
        with pytest.raises(ValueError):
            DensityField(g, values).validate()

    def test_velocity_invariant_rejects_divergent_fields(self):
        g = make_grid(32, 5.0)
        with pytest.raises(ValueError):
            VelocityField(g, g.x1 ** 2, np.zeros(g.shape)).validate()

    def test_state_chemo_residual_detects_staleness(self):
        g = make_grid(32, 10.0)
        n = init_gaussian_density(1.0, 1.0, (0, 0), g)
        z = np.zeros(g.shape)
        state = make_state(g, n.values, z, z, variant=PERIODIC_MEANFREE)
        assert state.chemo_residual() < 1e-12
        from dataclasses import replace
        stale = replace(state, c=state.c + 1e-3 * np.cos(2 * np.pi * g.x1 / g.length))
        assert stale.chemo_residual() > 1e-6
