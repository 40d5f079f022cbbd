"""Reference integrator and the inequality auditors."""

import numpy as np
import pytest

from jumpns.calibration import DEFAULT_CONSTANTS, MARGIN
from jumpns.fields import Grid, random_field, single_mode, taylor_green, zero_field
from jumpns.noise import JumpNoiseModel, MarkLaw, sample_jumps
from jumpns.paths import FieldPath, PathGrid, l4l4_norm, node_l2_norms
from jumpns.solver import continue_solution, decay_path
from jumpns.spectral import leray_project, lp_norm
from jumpns.verify import (
    BlowUpError,
    NormReport,
    OracleConfig,
    chain_rule_identity_gap,
    duhamel_bound_audit,
    energy_audit,
    gronwall_audit,
    imex_oracle,
    lemma_sob1_audit,
    relative_l4l4_gap,
    sobolev_embedding_audit,
    subsample,
)

C = DEFAULT_CONSTANTS


def noise_model(grid, rate=8.0, sigma=0.4, seed=3):
    return JumpNoiseModel(
        grid, rate=rate, mark_law=MarkLaw.symmetric_two_point(),
        gamma=1.5, sigma=sigma, alpha=0.1, profile_seed=seed,
    )


def solved_path(grid, rate=8.0, sigma=0.4, steps=128, horizon=0.5, seed=5):
    model = noise_model(grid, rate=rate, sigma=sigma)
    record = sample_jumps(model, horizon, seed)
    tg = PathGrid(0.0, horizon, steps)
    sol = continue_solution(
        model, record, zero_field(grid), horizon, tg, m_ball=C.m_ball
    )
    return sol, model, record


class TestOracleConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="positive"):
            OracleConfig(dt=0.0)
        with pytest.raises(ValueError, match="scheme"):
            OracleConfig(dt=1e-3, scheme="leapfrog")


class TestImexOracle:
    def test_zero_data_stays_zero(self, grid16):
        model = noise_model(grid16, rate=0.0)
        record = sample_jumps(model, 1.0, 1)
        path = imex_oracle(model, record, zero_field(grid16), 1.0, OracleConfig(5e-3))
        assert np.abs(path.coeffs).max() == 0.0

    def test_taylor_green_matches_closed_form(self, grid32):
        model = noise_model(grid32, rate=0.0)
        record = sample_jumps(model, 1.0, 1)
        u0 = taylor_green(grid32, 0.5)
        dt = 1e-3
        path = imex_oracle(model, record, u0, 1.0, OracleConfig(dt))
        norms = node_l2_norms(path)
        expected = norms[0] * np.exp(-2.0 * path.tgrid.times)
        assert np.max(np.abs(norms - expected) / expected) <= 20 * dt

    def test_blow_up_detected(self, grid16):
        model = noise_model(grid16, rate=0.0)
        record = sample_jumps(model, 1.0, 1)
        wild = taylor_green(grid16, 1e8)
        with pytest.raises(BlowUpError):
            imex_oracle(model, record, wild, 1.0, OracleConfig(0.05))

    def test_cross_method_gap_small_and_refining(self, grid32):
        sol, model, record = solved_path(grid32, steps=500, horizon=0.5, seed=43)
        oracle = imex_oracle(
            model, record, zero_field(grid32), 0.5, OracleConfig(0.5 / 1000)
        )
        gap = relative_l4l4_gap(sol.u, subsample(oracle, 2))
        assert gap <= 0.05
        sol2, _, _ = solved_path(grid32, steps=1000, horizon=0.5, seed=43)
        oracle2 = imex_oracle(
            model, record, zero_field(grid32), 0.5, OracleConfig(0.5 / 2000)
        )
        gap2 = relative_l4l4_gap(sol2.u, subsample(oracle2, 2))
        assert gap2 < gap


class TestSubsampleHelpers:
    def test_subsample_stride(self, grid16, rng):
        tg = PathGrid(0.0, 1.0, 8)
        path = FieldPath(
            grid16,
            tg,
            np.stack([random_field(grid16, rng).coeffs for _ in range(9)]),
        )
        half = subsample(path, 2)
        assert half.tgrid.m == 4
        assert np.array_equal(half.coeffs, path.coeffs[::2])
        with pytest.raises(ValueError, match="divide"):
            subsample(path, 3)

    def test_relative_gap_zero_for_identical(self, grid16, rng):
        tg = PathGrid(0.0, 1.0, 4)
        path = FieldPath(
            grid16,
            tg,
            np.stack([random_field(grid16, rng).coeffs for _ in range(5)]),
        )
        assert relative_l4l4_gap(path, path) == 0.0


class TestEnergyAudit:
    def test_trivial_zero_paths(self, grid16):
        tg = PathGrid(0.0, 1.0, 8)
        zero = FieldPath.zeros(grid16, tg)
        res = energy_audit(zero, zero, C.c1, C.c2)
        assert res.margin >= 0.0

    def test_chain_rule_term_identity(self, grid32, rng):
        # -b(Y,Y,Z) - b(Z,Y,Z) equals b(Y+Z, Y+Z, Y) by the cancellation
        # property; both sides evaluated by quadrature.
        for _ in range(25):
            y = random_field(grid32, rng, solenoidal=True)
            zh = random_field(grid32, rng, solenoidal=True)
            gap, scale = chain_rule_identity_gap(y, zh)
            assert gap <= 1e-10 * max(scale, 1e-30)

    def test_solved_path_margin(self, grid32):
        sol, _, _ = solved_path(grid32, seed=47)
        for seg in sol.segments:
            res = energy_audit(seg.y, seg.zhat, C.c1, C.c2)
            scale = max(np.abs(res.lhs).max(), np.abs(res.rhs).max(), 1e-300)
            assert res.margin >= -1e-6 * scale

    def test_grid_mismatch(self, grid16):
        a = FieldPath.zeros(grid16, PathGrid(0.0, 1.0, 4))
        b = FieldPath.zeros(grid16, PathGrid(0.0, 2.0, 4))
        with pytest.raises(ValueError, match="time grid"):
            energy_audit(a, b, 1.0, 1.0)


class TestGronwallAudit:
    def test_trivial_zero_paths(self, grid16):
        tg = PathGrid(0.0, 1.0, 8)
        zero = FieldPath.zeros(grid16, tg)
        res = gronwall_audit(zero, zero, C.c1, C.c2)
        assert res.sup_margin == 0.0
        assert res.vbudget_margin == 0.0

    def test_solved_path_margins(self, grid32):
        sol, _, _ = solved_path(grid32, seed=53)
        for seg in sol.segments:
            res = gronwall_audit(seg.y, seg.zhat, C.c1, C.c2)
            scale = max(res.bound.max(), res.value.max(), 1e-300)
            assert res.sup_margin >= -1e-6 * scale
            assert res.vbudget_margin >= -1e-6 * max(abs(res.vbudget_margin), scale)


class TestLemmaSob1Audit:
    def test_zero_path(self, grid16):
        v = FieldPath.zeros(grid16, PathGrid(0.0, 1.0, 8))
        assert lemma_sob1_audit(v, C.c_sob1) >= 0.0

    def test_constant_single_mode_strict(self, grid16):
        mode = leray_project(single_mode(grid16, (1, 0), (0.0, 1.0)))
        tg = PathGrid(0.0, 1.0, 16)
        v = FieldPath(grid16, tg, np.repeat(mode.coeffs[None], tg.m + 1, 0))
        assert lemma_sob1_audit(v, MARGIN * C.c_sob1) > 0.0

    def test_solver_outputs(self, grid32):
        for seed in (3, 5, 7):
            sol, _, _ = solved_path(grid32, seed=seed, steps=64)
            for seg in sol.segments:
                margin = lemma_sob1_audit(seg.y, MARGIN * C.c_sob1)
                assert margin >= -1e-8 * max(abs(margin), 1.0)


class TestDuhamelBoundAudit:
    def test_fresh_paths(self, grid32, rng):
        for i in range(50):
            tg = PathGrid(0.0, (0.5, 1.0)[i % 2], 10)
            f = FieldPath(
                grid32,
                tg,
                np.stack(
                    [random_field(grid32, rng).coeffs for _ in range(tg.m + 1)]
                ),
            )
            assert duhamel_bound_audit(f, MARGIN * C.c_dul) >= 0.0


class TestEmbeddingAudit:
    def test_single_mode_interpolation_is_exactly_one(self, grid16):
        mode = leray_project(single_mode(grid16, (2, 1), (0.4, -0.8)))
        _, interp = sobolev_embedding_audit([mode])
        assert interp == pytest.approx(1.0, rel=1e-12)

    def test_scaling_invariance(self, grid16, rng):
        v = random_field(grid16, rng)
        a = sobolev_embedding_audit([v])
        b = sobolev_embedding_audit([v * 17.0])
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        assert a[1] == pytest.approx(b[1], rel=1e-12)

    def test_two_batches_agree_within_five_percent(self, grid32):
        def batch(seed):
            rng = np.random.default_rng(seed)
            fields = [
                random_field(grid32, rng, slope=0.6 + 0.45 * (i % 4))
                for i in range(1000)
            ]
            return sobolev_embedding_audit(fields)

        emb_a, interp_a = batch(101)
        emb_b, interp_b = batch(202)
        assert abs(emb_a - emb_b) <= 0.05 * max(emb_a, emb_b)
        assert abs(interp_a - interp_b) <= 0.05 * max(interp_a, interp_b)


class TestNormReport:
    def test_json_round_trip_and_diff(self):
        rep = NormReport()
        rep.constants = {"c_b": 0.3}
        rep.contraction_ratios = [0.1, 0.2]
        rep.u_l4l4 = 1.5
        back = NormReport.from_json(rep.to_json())
        assert back.diff(rep) == []
        back.u_l4l4 *= 1 + 1e-3
        assert any("u_l4l4" in line for line in back.diff(rep))

    def test_schema_version_guard(self):
        rep = NormReport()
        text = rep.to_json().replace('"schema_version": 1', '"schema_version": 99')
        with pytest.raises(ValueError, match="schema"):
            NormReport.from_json(text)
