"""Field representation, projection, semigroup, fractional powers, norms."""

import numpy as np
import pytest

from jumpns.fields import (
    Grid,
    SpectralField,
    conj_reflect,
    expand_half,
    from_physical,
    gradient_field,
    random_field,
    single_mode,
    taylor_green,
    to_physical,
    zero_field,
)
from jumpns.spectral import (
    SobolevOrder,
    divergence_linf,
    fractional_power_apply,
    grad_l2_norm,
    l2_inner,
    l2_norm_spectral,
    leray_project,
    lp_norm,
    semigroup_apply,
    sobolev_norm,
    stokes_apply,
)

TWO_PI = 2.0 * np.pi


def quadrature_oracle(func, power, samples=512):
    """Brute-force box integral of |func(x1, x2)|^power on a fine grid."""
    x = TWO_PI * np.arange(samples) / samples
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    values = func(x1, x2)
    return (TWO_PI / samples) ** 2 * np.sum(values**power)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError, match="n >= 8"):
            Grid(6)
        with pytest.raises(ValueError, match="even"):
            Grid(9)

    def test_cutoff_is_two_thirds(self):
        for n in (8, 16, 32, 64):
            g = Grid(n)
            assert g.cutoff == n // 3
            assert g.cutoff < n // 2

    def test_wavenumbers_are_integers(self, grid16):
        assert grid16.kx[1, 0] == 1.0
        assert grid16.kx[-1, 0] == -1.0
        assert grid16.ky[0, grid16.n // 2] == -grid16.n // 2


class TestFieldRepresentation:
    def test_random_field_is_hermitian_and_mean_zero(self, grid32, rng):
        f = random_field(grid32, rng, slope=1.0)
        assert np.abs(f.coeffs - conj_reflect(f.coeffs)).max() < 1e-14
        assert np.all(f.mean_coefficient == 0)

    def test_physical_roundtrip(self, grid16, rng):
        f = random_field(grid16, rng, slope=0.8)
        back = from_physical(grid16, to_physical(f))
        assert np.abs(back.coeffs - f.coeffs).max() < 1e-13

    def test_expand_half_roundtrip(self, grid16, rng):
        f = random_field(grid16, rng, slope=1.0)
        half = f.coeffs[..., : grid16.half]
        assert np.abs(expand_half(grid16, half) - f.coeffs).max() == 0.0

    def test_single_mode_is_real(self, grid16):
        f = single_mode(grid16, (2, -1), (0.3 + 0.1j, -0.7))
        phys = np.fft.ifft2(f.coeffs, axes=(-2, -1)) * grid16.n**2
        assert np.abs(phys.imag).max() < 1e-12

    def test_arithmetic_requires_matching_grids(self, grid16, grid32, rng):
        with pytest.raises(ValueError, match="grid mismatch"):
            _ = random_field(grid16, rng) + random_field(grid32, rng)


class TestLerayProjection:
    def test_hand_applied_matrix_at_k10(self, grid16):
        # At k = (1, 0) the projector I - k k^T/|k|^2 kills the first
        # component: (1, 1) -> (0, 1).
        f = single_mode(grid16, (1, 0), (1.0, 1.0))
        p = leray_project(f)
        assert p.coeffs[0, 1, 0] == pytest.approx(0.0, abs=1e-15)
        assert p.coeffs[1, 1, 0] == pytest.approx(1.0, abs=1e-15)

    def test_idempotent_and_contractive(self, grid32, rng):
        for _ in range(50):
            f = random_field(grid32, rng, slope=0.7, solenoidal=False)
            p = leray_project(f)
            pp = leray_project(p)
            scale = max(l2_norm_spectral(p), 1e-30)
            assert l2_norm_spectral(pp - p) <= 1e-10 * scale
            assert lp_norm(p, 2) <= lp_norm(f, 2) * (1 + 1e-10)
            assert divergence_linf(p) <= 1e-12 * max(np.abs(p.coeffs).max(), 1e-30)

    def test_idempotent_many_small(self, grid16, rng):
        # The 1000-field variant at a small grid: projection identity.
        for _ in range(1000):
            f = random_field(grid16, rng, slope=0.5, solenoidal=False)
            p = leray_project(f)
            pp = leray_project(p)
            scale = max(np.abs(p.coeffs).max(), 1e-300)
            assert np.abs(pp.coeffs - p.coeffs).max() <= 1e-10 * scale

    def test_annihilates_gradients(self, grid32, rng):
        phi = (rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32)))
        phi = 0.5 * (phi + np.conj(np.roll(np.roll(phi[::-1, ::-1], 1, 0), 1, 1)))
        phi *= grid32.dealias_mask
        grad = gradient_field(grid32, phi)
        proj = leray_project(grad)
        assert np.abs(proj.coeffs).max() <= 1e-12 * max(np.abs(grad.coeffs).max(), 1)

    def test_solenoidal_fixed_point(self, grid16):
        f = taylor_green(grid16)
        p = leray_project(f)
        assert np.abs(p.coeffs - f.coeffs).max() < 1e-14


class TestStokesOperator:
    def test_single_mode_eigenvalue_two(self, grid16):
        f = single_mode(grid16, (1, 1), (1.0, -1.0))
        assert np.abs(stokes_apply(f).coeffs - 2.0 * f.coeffs).max() < 1e-14

    def test_mode_34_eigenvalue(self, grid16):
        f = single_mode(grid16, (3, 4), (0.0, 1.0))
        assert np.abs(stokes_apply(f).coeffs - 25.0 * f.coeffs).max() < 1e-13

    def test_zero_field(self, grid16):
        assert np.abs(stokes_apply(zero_field(grid16)).coeffs).max() == 0.0


class TestSemigroup:
    def test_time_zero_is_identity(self, grid16, rng):
        f = random_field(grid16, rng)
        assert np.abs(semigroup_apply(f, 0.0).coeffs - f.coeffs).max() == 0.0

    def test_single_mode_decay(self, grid16):
        f = single_mode(grid16, (1, 0), (0.0, 1.0))
        g = semigroup_apply(f, 1.0)
        assert g.coeffs[1, 1, 0] == pytest.approx(np.exp(-1.0), rel=1e-14)

    def test_semigroup_law(self, grid32, rng):
        f = random_field(grid32, rng)
        a = semigroup_apply(semigroup_apply(f, 0.3), 0.7)
        b = semigroup_apply(f, 1.0)
        assert np.abs(a.coeffs - b.coeffs).max() <= 1e-14 * np.abs(f.coeffs).max()

    def test_negative_time_rejected(self, grid16, rng):
        with pytest.raises(ValueError, match="nonnegative"):
            semigroup_apply(random_field(grid16, rng), -0.1)

    def test_smoothing_estimate_sharp_constant(self, grid32, rng):
        # || A^theta e^{-tA} u ||_2 <= (theta/(e t))^theta ||u||_2: per-mode
        # the multiplier lambda^theta e^{-lambda t} is maximized at
        # lambda = theta/t.
        lam = grid32.ksq[grid32.ksq > 0]
        for theta in (0.25, 0.5, 1.0):
            for t in (0.01, 0.1, 0.3, 1.0):
                # mode-wise sharp bound on the multiplier itself
                mult = lam**theta * np.exp(-lam * t)
                assert np.all(mult <= (theta / (np.e * t)) ** theta * (1 + 1e-12))
                u = random_field(grid32, rng, slope=0.6)
                v = fractional_power_apply(semigroup_apply(u, t), 2.0 * theta)
                bound = (theta / (np.e * t)) ** theta * l2_norm_spectral(u)
                assert l2_norm_spectral(v) <= bound * (1 + 1e-12)


class TestFractionalPowers:
    def test_zero_exponent_identity(self, grid16, rng):
        f = random_field(grid16, rng)
        assert np.abs(fractional_power_apply(f, 0.0).coeffs - f.coeffs).max() == 0.0

    def test_inverse_sqrt_halves_mode_two(self, grid16):
        f = single_mode(grid16, (2, 0), (0.0, 1.0))
        g = fractional_power_apply(f, -1.0)
        assert g.coeffs[1, 2, 0] == pytest.approx(0.5, rel=1e-14)

    def test_round_trip(self, grid32, rng):
        f = random_field(grid32, rng)
        back = fractional_power_apply(fractional_power_apply(f, 1.0), -1.0)
        assert (
            np.abs(back.coeffs - f.coeffs).max()
            <= 1e-12 * np.abs(f.coeffs).max()
        )

    def test_composition_adds_exponents(self, grid32, rng):
        f = random_field(grid32, rng)
        a = fractional_power_apply(fractional_power_apply(f, 0.7), 0.55)
        b = fractional_power_apply(f, 1.25)
        assert np.abs(a.coeffs - b.coeffs).max() <= 1e-12 * np.abs(b.coeffs).max()

    def test_nonzero_mean_rejected_for_negative_power(self, grid16):
        coeffs = np.zeros((2, 16, 16), np.complex128)
        coeffs[0, 0, 0] = 1.0
        with pytest.raises(ValueError, match="mean-zero"):
            fractional_power_apply(SpectralField(Grid(16), coeffs), -0.5)


class TestLebesgueNorms:
    def test_zero_field(self, grid16):
        assert lp_norm(zero_field(grid16), 2) == 0.0
        assert lp_norm(zero_field(grid16), 4) == 0.0

    def test_sine_l2_against_quadrature_oracle(self, grid32):
        f = single_mode(grid32, (1, 0), (-0.5j, 0.0))  # u = (sin x1, 0)
        oracle = np.sqrt(quadrature_oracle(lambda a, b: np.sin(a), 2))
        assert lp_norm(f, 2) == pytest.approx(oracle, rel=1e-12)
        # closed form: integral of sin^2 is vol/2 over the box
        assert lp_norm(f, 2) == pytest.approx(np.sqrt(0.5) * TWO_PI, rel=1e-12)

    def test_sine_l4_against_quadrature_oracle(self, grid32):
        f = single_mode(grid32, (1, 0), (-0.5j, 0.0))
        oracle = quadrature_oracle(lambda a, b: np.sin(a), 4) ** 0.25
        assert lp_norm(f, 4) == pytest.approx(oracle, rel=1e-12)
        assert lp_norm(f, 4) == pytest.approx((3.0 / 8.0 * TWO_PI**2) ** 0.25, rel=1e-12)

    def test_unsupported_exponent(self, grid16, rng):
        with pytest.raises(ValueError, match="p=3"):
            lp_norm(random_field(grid16, rng), 3)

    def test_parseval_consistency(self, grid32, rng):
        for _ in range(50):
            f = random_field(grid32, rng, slope=0.9)
            assert lp_norm(f, 2) == pytest.approx(l2_norm_spectral(f), rel=1e-10)


class TestSobolevNorms:
    def test_order_zero_is_l4(self, grid16, rng):
        f = random_field(grid16, rng)
        assert sobolev_norm(f, SobolevOrder(0.0, 4)) == pytest.approx(
            lp_norm(f, 4), rel=1e-14
        )

    def test_unit_shell_negative_order(self, grid16):
        f = single_mode(grid16, (1, 0), (0.0, 1.0))
        alpha = 0.1
        assert sobolev_norm(f, SobolevOrder(-2 * alpha, 4)) == pytest.approx(
            lp_norm(f, 4), rel=1e-13
        )

    def test_mode_two_half_inverse(self, grid16):
        f = single_mode(grid16, (2, 0), (0.0, 1.0))
        assert sobolev_norm(f, SobolevOrder(-0.5, 2)) == pytest.approx(
            lp_norm(f, 2) * 2**-0.5, rel=1e-13
        )

    def test_invalid_exponent(self):
        with pytest.raises(ValueError, match="p=3"):
            SobolevOrder(0.5, 3)


class TestDirichletNorm:
    def test_zero(self, grid16):
        assert grad_l2_norm(zero_field(grid16)) == 0.0

    def test_diagonal_mode_scaling(self, grid16):
        f = single_mode(grid16, (1, 1), (1.0, -1.0))
        assert grad_l2_norm(f) == pytest.approx(
            np.sqrt(2.0) * l2_norm_spectral(f), rel=1e-13
        )

    def test_unit_mode_equals_l2(self, grid16):
        f = single_mode(grid16, (0, 1), (0.5j, 0.0))  # u = (sin x2 ..., 0)
        assert grad_l2_norm(f) == pytest.approx(lp_norm(f, 2), rel=1e-12)


class TestInnerProduct:
    def test_matches_physical_quadrature(self, grid16, rng):
        u = random_field(grid16, rng)
        v = random_field(grid16, rng)
        pu, pv = to_physical(u), to_physical(v)
        quad = (TWO_PI / grid16.n) ** 2 * np.sum(pu * pv)
        assert l2_inner(u, v) == pytest.approx(quad, rel=1e-10)
