import numpy as np
import pytest

from pksns import spectral
from pksns.spectral import (SpectralField, coeff_l2_norm, dealias, gradient,
                            heat_semigroup, l2_norm, leray_project, make_grid)


def random_field(grid, seed):
    return np.random.default_rng(seed).standard_normal(grid.shape)


class TestMakeGrid:
    def test_unit_spacing_when_box_is_two_pi(self):
        g = make_grid(16, 2 * np.pi)
        vals = np.unique(g.k1)
        # integer wavenumbers; the Nyquist slot is zeroed in the derivative
        # tables so the set is {-7..7}
        assert np.allclose(sorted(vals), np.arange(-7, 8))

    def test_spacing_matches_box(self):
        g = make_grid(64, 40.0)
        nonzero = np.unique(np.abs(g.k1))
        assert nonzero[1] == pytest.approx(2 * np.pi / 40.0, rel=1e-15)

    def test_rejects_odd_small_or_bad_box(self):
        with pytest.raises(ValueError):
            make_grid(15, 1.0)
        with pytest.raises(ValueError):
            make_grid(8, 1.0)
        with pytest.raises(ValueError):
            make_grid(32, 0.0)

    def test_wavenumber_tables_antisymmetric_under_reflection(self):
        g = make_grid(32, 5.0)
        for table in (g.k1, g.k2):
            reflected = np.roll(table[::-1, ::-1], 1, axis=(0, 1))
            assert np.array_equal(reflected, -table)

    def test_dealias_mask_is_exactly_the_two_thirds_rule(self):
        g = make_grid(48, 7.0)
        m = np.fft.fftfreq(48, d=1.0 / 48)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        expected = np.maximum(np.abs(m1), np.abs(m2)) <= 48 / 3.0
        assert np.array_equal(g.dealias_mask, expected)


class TestGradient:
    def test_single_mode(self):
        g = make_grid(32, 13.0)
        k = 2 * np.pi / g.length
        f = np.sin(k * g.x1)
        fx, fy = gradient(g, f)
        assert np.allclose(fx, k * np.cos(k * g.x1), atol=1e-13)
        assert np.allclose(fy, 0.0, atol=1e-14)

    def test_constant_field(self):
        g = make_grid(16, 1.0)
        fx, fy = gradient(g, np.full(g.shape, 3.7))
        assert np.max(np.abs(fx)) < 1e-14
        assert np.max(np.abs(fy)) < 1e-14

    def test_gaussian_against_analytic_derivative(self):
        g = make_grid(128, 20.0)
        f = np.exp(-g.radius_sq())
        fx, fy = gradient(g, f)
        assert np.max(np.abs(fx - (-2.0 * g.x1 * f))) < 1e-10
        assert np.max(np.abs(fy - (-2.0 * g.x2 * f))) < 1e-10


class TestHeatSemigroup:
    def test_zero_time_is_identity(self):
        g = make_grid(32, 3.0)
        f = random_field(g, 0)
        assert heat_semigroup(g, f, 0.0) is f

    def test_single_mode_decay(self):
        g = make_grid(32, 2 * np.pi)
        f = np.cos(3 * g.x1)
        out = heat_semigroup(g, f, 0.2)
        assert np.allclose(out, np.exp(-9 * 0.2) * f, atol=1e-14)

    def test_gaussian_sup_norm_follows_heat_kernel(self):
        # mass M spreading from initial half-width t0: sup = M/(4 pi (t0+t))
        g = make_grid(128, 20.0)
        t0, mass = 0.5, 2.0
        n = mass / (4 * np.pi * t0) * np.exp(-g.radius_sq() / (4 * t0))
        for t in (0.25, 0.5, 1.0):
            sup = heat_semigroup(g, n, t).max()
            assert sup == pytest.approx(mass / (4 * np.pi * (t0 + t)), rel=1e-2)

    def test_negative_time_rejected(self):
        g = make_grid(16, 1.0)
        with pytest.raises(ValueError):
            heat_semigroup(g, np.zeros(g.shape), -0.1)

    def test_semigroup_law(self):
        g = make_grid(48, 11.0)
        f = random_field(g, 5)
        one = heat_semigroup(g, f, 0.7)
        two = heat_semigroup(g, heat_semigroup(g, f, 0.3), 0.4)
        assert np.max(np.abs(one - two)) <= 1e-12 * np.max(np.abs(one))

    def test_commutes_with_gradient(self):
        g = make_grid(48, 11.0)
        f = heat_semigroup(g, random_field(g, 6), 0.05)  # smooth it first
        a = gradient(g, heat_semigroup(g, f, 0.2))[0]
        b = heat_semigroup(g, gradient(g, f)[0], 0.2)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(a)), 1.0)


class TestLerayProjection:
    def test_gradient_fields_are_annihilated(self):
        g = make_grid(32, 9.0)
        phi = heat_semigroup(g, random_field(g, 7), 0.01)
        phi -= phi.mean()
        gx, gy = gradient(g, phi)
        p1, p2 = leray_project(g, gx, gy)
        scale = l2_norm(g, gx, gy)
        assert l2_norm(g, p1, p2) <= 1e-12 * scale

    def test_divergence_free_fields_unchanged(self):
        g = make_grid(32, 9.0)
        psi = random_field(g, 8)
        px, py = gradient(g, psi)
        u1, u2 = py, -px  # perpendicular gradient is solenoidal
        p1, p2 = leray_project(g, u1, u2)
        assert np.max(np.abs(p1 - u1)) <= 1e-13 * np.max(np.abs(u1))
        assert np.max(np.abs(p2 - u2)) <= 1e-13 * np.max(np.abs(u2))

    @pytest.mark.parametrize("seed", range(100))
    def test_idempotence_and_divergence_on_random_fields(self, seed):
        g = make_grid(32, 5.0)
        u1, u2 = random_field(g, 2 * seed), random_field(g, 2 * seed + 1)
        p1, p2 = leray_project(g, u1, u2)
        q1, q2 = leray_project(g, p1, p2)
        norm = l2_norm(g, u1, u2)
        assert l2_norm(g, q1 - p1, q2 - p2) <= 1e-13 * norm
        div = spectral.divergence(g, p1, p2)
        assert l2_norm(g, div) <= 1e-12 * norm

    def test_mean_flow_untouched(self):
        g = make_grid(16, 1.0)
        u1 = np.full(g.shape, 0.8)
        u2 = np.full(g.shape, -0.3)
        p1, p2 = leray_project(g, u1, u2)
        assert np.allclose(p1, u1, atol=1e-15)
        assert np.allclose(p2, u2, atol=1e-15)


class TestDealias:
    def test_band_limited_field_unchanged(self):
        g = make_grid(48, 2 * np.pi)
        f = np.cos(5 * g.x1) * np.sin(3 * g.x2)  # max mode 5 <= 48/3
        sf = SpectralField.from_real(g, f)
        assert np.allclose(dealias(sf).to_real(), f, atol=1e-13)

    def test_mode_outside_mask_zeroed(self):
        g = make_grid(48, 2 * np.pi)
        f = np.cos(20 * g.x1)  # 20 > 16 = 48/3
        out = dealias(SpectralField.from_real(g, f)).to_real()
        assert np.max(np.abs(out)) < 1e-13

    def test_masked_products_have_no_energy_above_the_band(self):
        g = make_grid(48, 2 * np.pi)
        rng = np.random.default_rng(3)
        a = dealias(SpectralField.from_real(g, rng.standard_normal(g.shape)))
        b = dealias(SpectralField.from_real(g, rng.standard_normal(g.shape)))
        prod = dealias(SpectralField.from_real(g, a.to_real() * b.to_real()))
        coeffs = prod.coeffs
        assert np.max(np.abs(coeffs[~g.dealias_mask])) < 1e-12 * np.max(np.abs(coeffs))


class TestSpectralFieldInvariants:
    @pytest.mark.parametrize("seed", range(10))
    def test_conjugate_symmetry_after_operations(self, seed):
        g = make_grid(32, 4.0)
        f = random_field(g, seed)
        sf = SpectralField.from_real(g, f)
        assert sf.conjugate_symmetry_defect() < 1e-13
        evolved = SpectralField(g, sf.coeffs * np.exp(-g.ksq * 0.1))
        assert evolved.conjugate_symmetry_defect() < 1e-13
        assert dealias(evolved).conjugate_symmetry_defect() < 1e-13

    @pytest.mark.parametrize("seed", range(10))
    def test_roundtrip_identity(self, seed):
        g = make_grid(32, 4.0)
        f = random_field(g, 100 + seed)
        back = SpectralField.from_real(g, f).to_real()
        assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))

    @pytest.mark.parametrize("seed", range(20))
    def test_parseval(self, seed):
        g = make_grid(48, 17.0)
        f = random_field(g, 200 + seed)
        sf = SpectralField.from_real(g, f)
        assert coeff_l2_norm(g, sf.coeffs) == pytest.approx(l2_norm(g, f), rel=1e-12)


def test_spectral_tail_fraction_detects_band_edge_content():
    g = make_grid(48, 2 * np.pi)
    smooth = np.cos(2 * g.x1)
    assert spectral.spectral_tail_fraction(g, smooth) < 1e-20
    rough = np.cos(2 * g.x1) + 0.5 * np.cos(14 * g.x1)  # 14 in (2N/9, N/3]
    frac = spectral.spectral_tail_fraction(g, rough)
    assert 0.1 < frac < 1.0
