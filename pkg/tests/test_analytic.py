"""Closed-form picture-frame solution tests.

Verifies: load-program parsing and validation, the direction-aware elastic
range, the interval consistency solve against a bisection oracle, exact
interval chaining (splitting a monotone leg anywhere changes nothing), the
pull-force formula, curve generation over multi-leg programs, and CSV
round trips.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wovenshear import (
    ConvergenceError,
    IntervalState,
    LoadProgram,
    ShearCurve,
    advance_interval,
    crosshead_rate,
    f_iso,
    frame_force,
    gamma_to_theta,
    interval_solve,
    program_theta_grid,
    return_map,
    run_program,
    yield_angle,
)
from wovenshear.material import PlasticState

import oracles


class TestLoadProgram:
    def test_from_string(self):
        lp = LoadProgram.from_string("50,20,50")
        assert lp.gamma_targets_deg == pytest.approx((50.0, 20.0, 50.0))
        assert lp.targets[0] == pytest.approx(gamma_to_theta(50.0))

    def test_rejects_empty_and_repeated(self):
        with pytest.raises(ValueError):
            LoadProgram(targets=())
        with pytest.raises(ValueError):
            LoadProgram.from_gamma_degrees([20.0, 20.0])
        with pytest.raises(ValueError):
            LoadProgram.from_gamma_degrees([0.0])     # zero-length first leg

    def test_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            LoadProgram.from_gamma_degrees([95.0])
        with pytest.raises(ValueError):
            LoadProgram(targets=(np.pi / 2.0, 0.4))   # theta must move

    def test_samples_per_interval_validated(self):
        with pytest.raises(ValueError):
            LoadProgram.from_gamma_degrees([30.0], samples_per_interval=0)

    def test_parse_error(self):
        with pytest.raises(ValueError):
            LoadProgram.from_string("50,x,20")


class TestYieldAngle:
    def test_virgin_glass_exact(self, glass_params):
        ya = yield_angle(IntervalState(), glass_params)
        assert abs(ya - 2.0e-5) <= 1e-15

    def test_widens_with_carried_stress(self, soft_params):
        st0 = IntervalState()
        st1 = advance_interval(st0, 0.3, soft_params)
        assert st1.tau0 > 0.0
        ya = yield_angle(st1, soft_params)
        expect = (f_iso(st1.q0, soft_params) + st1.tau0) / soft_params.mu_f
        assert ya == pytest.approx(expect, rel=1e-15)


class TestIntervalSolve:
    def test_zero_increment_is_identity(self, soft_params):
        st0 = IntervalState(tau0=0.05, q0=0.2, alpha_p0=0.2)
        sol = interval_solve(0.0, st0, soft_params)
        assert sol.tau == st0.tau0 and not sol.plastic
        assert sol.q == st0.q0 and sol.delta_alpha == 0.0

    def test_elastic_branch_exact(self, soft_params):
        sol = interval_solve(0.05, IntervalState(), soft_params)
        assert not sol.plastic
        assert sol.tau == soft_params.mu_f * 0.05

    def test_zero_yield_immediately_plastic(self, demo_params):
        sol = interval_solve(1e-6, IntervalState(), demo_params)
        assert sol.plastic
        assert sol.delta_alpha > 0.0

    def test_plastic_frozen_oracle(self, demo_params):
        sol = interval_solve(0.3, IntervalState(), demo_params)
        assert sol.delta_alpha == pytest.approx(
            oracles.DELTA_ALPHA_DEMO_PHIBAR0P3, rel=1e-12)
        assert sol.tau == pytest.approx(oracles.TAU_DEMO_PHIBAR0P3, rel=1e-12)

    def test_matches_bisection_oracle(self, glass_params, rng):
        p = glass_params
        for pb in rng.uniform(0.05, 0.7, size=10):
            sol = interval_solve(float(pb), IntervalState(), p)
            root = oracles.bisect_root(
                lambda x: p.mu_f * (pb - x) - oracles.f_iso_ref(
                    x, p.tau_y, p.A_h, p.a_h, p.B_h, p.b_h, p.C_h, p.c_h),
                0.0, float(pb))
            assert sol.delta_alpha == pytest.approx(root, rel=1e-10)

    def test_matches_return_map_one_step(self, glass_params):
        # single backward-Euler step from virgin state solves the same
        # consistency equation
        for phi in (0.1, 0.45, -0.3):
            sol = interval_solve(phi, IntervalState(), glass_params)
            sr = return_map(phi, PlasticState(), glass_params)
            assert sol.tau == pytest.approx(sr.tau, rel=1e-12)
            assert sol.q == pytest.approx(sr.new_state.q, rel=1e-12, abs=1e-15)

    @given(phi_bar=st.floats(0.02, 0.75), frac=st.floats(0.05, 0.95))
    @settings(max_examples=80, deadline=None)
    def test_splitting_an_interval_is_exact(self, phi_bar, frac, demo_params):
        """Chaining through any intermediate point reproduces the direct
        solve to machine precision."""
        # each solve stops at |g| <= 1e-12 * scale, so tau inherits a few
        # 1e-12 of absolute slack per chained solve
        direct = interval_solve(phi_bar, IntervalState(), demo_params)
        mid = frac * phi_bar
        st1 = advance_interval(IntervalState(), mid, demo_params)
        rest = interval_solve(phi_bar - mid, st1, demo_params)
        assert rest.tau == pytest.approx(direct.tau, abs=5e-12)
        assert st1.Q0 + rest.delta_alpha == pytest.approx(
            direct.delta_alpha, abs=5e-12)

    def test_split_through_yield_onset(self, soft_params):
        # split inside the elastic range, finish in the plastic range
        direct = interval_solve(0.4, IntervalState(), soft_params)
        st1 = advance_interval(IntervalState(), 0.05, soft_params)   # elastic
        rest = interval_solve(0.35, st1, soft_params)
        assert rest.tau == pytest.approx(direct.tau, rel=1e-12)

    def test_direction_aware_reversal_range(self, soft_params):
        st1 = advance_interval(IntervalState(), 0.4, soft_params)
        assert st1.tau0 > 0.0
        wide = yield_angle(st1, soft_params)
        back = interval_solve(-0.999 * wide, st1, soft_params)
        assert not back.plastic
        again = interval_solve(-1.001 * wide, st1, soft_params)
        assert again.plastic
        # continued loading re-yields immediately (stress already on the
        # surface), so the forward elastic range is zero
        fwd = interval_solve(1e-9, st1, soft_params)
        assert fwd.plastic

    def test_residual_reported(self, glass_params):
        sol = interval_solve(0.3, IntervalState(), glass_params)
        scale = max(glass_params.mu_f, f_iso(sol.q, glass_params))
        assert sol.residual <= 1e-12 * scale
        assert sol.iterations > 0

    def test_convergence_error(self, glass_params):
        with pytest.raises(ConvergenceError):
            interval_solve(0.5, IntervalState(), glass_params, max_iter=1)


class TestAdvanceInterval:
    def test_bookkeeping(self, demo_params):
        st1 = advance_interval(IntervalState(), 0.3, demo_params)
        sol = interval_solve(0.3, IntervalState(), demo_params)
        assert st1.tau0 == sol.tau and st1.q0 == sol.q
        assert st1.alpha_p0 == sol.delta_alpha
        assert st1.Q0 == sol.delta_alpha
        st2 = advance_interval(st1, -0.1, demo_params)
        assert st2.alpha_p0 >= st1.alpha_p0


class TestFrameForce:
    def test_closed_form(self):
        # the work-conjugate force reduces to 2 L0 tau cos(theta/2)
        for theta in (0.3, 0.9, 1.5):
            for L0 in (1.0, 2.5):
                F = frame_force(0.7, theta, L0)
                assert F == pytest.approx(
                    2.0 * L0 * 0.7 * np.cos(theta / 2.0), rel=1e-13)

    def test_sign_follows_stress(self):
        assert frame_force(0.1, 1.0, 1.0) > 0.0
        assert frame_force(-0.1, 1.0, 1.0) < 0.0
        assert frame_force(0.0, 1.0, 1.0) == 0.0

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            frame_force(0.1, 0.0, 1.0)

    def test_rate_consistency(self):
        # force * crosshead rate equals the angle-energy rate A0 tau dcos
        theta, tau, L0 = 1.1, 0.4, 1.3
        lhs = frame_force(tau, theta, L0) * crosshead_rate(theta, L0)
        rhs = -L0 * L0 * np.sin(theta) * tau
        assert lhs == pytest.approx(rhs, rel=1e-14)


class TestProgramGrid:
    def test_counts_and_targets(self, cycle_program):
        grids = program_theta_grid(cycle_program, steps_per_degree=2.0)
        assert [g.size for g in grids] == [100, 60, 60]
        assert grids[0][-1] == cycle_program.targets[0]
        assert grids[1][-1] == cycle_program.targets[1]
        assert grids[0][0] != np.pi / 2.0     # interval start excluded

    def test_samples_override(self):
        lp = LoadProgram.from_gamma_degrees([30.0, 10.0],
                                            samples_per_interval=7)
        grids = program_theta_grid(lp)
        assert [g.size for g in grids] == [7, 7]


class TestRunProgram:
    def test_initial_row_is_zero(self, demo_params, cycle_program):
        c = run_program(cycle_program, demo_params)
        assert c.gamma_deg[0] == 0.0 and c.tau[0] == 0.0
        assert c.theta12[0] == 0.0 and c.frame_force_normalized[0] == 0.0

    def test_monotone_loading_monotone_stress(self, glass_params):
        lp = LoadProgram.from_gamma_degrees([50.0])
        c = run_program(lp, glass_params)
        assert np.all(np.diff(c.tau) > 0.0)

    def test_angle_split_columns(self, demo_params, cycle_program):
        c = run_program(cycle_program, demo_params)
        assert np.abs(c.theta12 - (c.phi_e + c.phi_p)).max() <= 1e-15
        assert np.abs(c.tau - demo_params.mu_f * c.phi_e).max() <= 1e-15

    def test_unloading_slope_is_mu_f(self, demo_params, cycle_program):
        # rows 101..160 are the unloading leg; it stays elastic until the
        # widened reverse range (f_iso(q0) + tau0) / mu_f is used up, then
        # re-yields in reverse before reaching the 20 deg target
        c = run_program(cycle_program, demo_params)
        rev_range = c.tau[100] * 2.0 / demo_params.mu_f
        leg = slice(100, 161)
        elastic = np.abs(c.theta12[leg] - c.theta12[100]) < 0.98 * rev_range
        dtau = np.diff(c.tau[leg][elastic])
        dt12 = np.diff(c.theta12[leg][elastic])
        assert elastic.sum() >= 30
        assert not elastic[-1]
        assert np.allclose(dtau / dt12, demo_params.mu_f, rtol=1e-10)

    def test_sampling_modes_agree_at_targets(self, demo_params):
        lp = LoadProgram.from_gamma_degrees([40.0, 15.0])
        ct = run_program(lp, demo_params, sampling="theta12")
        cg = run_program(lp, demo_params, sampling="gamma")
        assert ct.tau[-1] == pytest.approx(cg.tau[-1], rel=1e-13)
        assert ct.gamma_deg[-1] == pytest.approx(cg.gamma_deg[-1], abs=1e-10)

    def test_force_column_definition(self, demo_params):
        lp = LoadProgram.from_gamma_degrees([30.0])
        L0, mu0 = 2.0, 3.0
        c = run_program(lp, demo_params, L0=L0, mu0=mu0)
        k = 25
        theta = gamma_to_theta(c.gamma_deg[k])
        expect = frame_force(c.tau[k], float(theta), L0) / (L0 * mu0)
        assert c.frame_force_normalized[k] == pytest.approx(expect, rel=1e-13)

    def test_normalized_force_independent_of_size(self, demo_params):
        lp = LoadProgram.from_gamma_degrees([30.0])
        c1 = run_program(lp, demo_params, L0=1.0)
        c2 = run_program(lp, demo_params, L0=2.5)
        assert np.allclose(c1.frame_force_normalized,
                           c2.frame_force_normalized, rtol=1e-13)

    def test_unknown_sampling_rejected(self, demo_params, cycle_program):
        with pytest.raises(ValueError):
            run_program(cycle_program, demo_params, sampling="steps")


class TestShearCurveCSV:
    def test_round_trip_exact(self, demo_params, cycle_program, tmp_path):
        c = run_program(cycle_program, demo_params)
        path = tmp_path / "curve.csv"
        c.to_csv(path)
        c2 = ShearCurve.from_csv(path)
        for name in ("gamma_deg", "theta12", "tau", "phi_e", "phi_p", "q",
                     "frame_force_normalized"):
            assert np.array_equal(getattr(c, name), getattr(c2, name)), name

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("gamma,tau\n0,0\n")
        with pytest.raises(ValueError, match="header"):
            ShearCurve.from_csv(path)
