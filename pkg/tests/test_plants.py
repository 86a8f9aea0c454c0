"""Tests for the three simulated plants and their nominal models."""

import numpy as np
import pytest

from madapt.errors import ContractViolationError, SimulationError
from madapt.plants import pbr, quadratic, williams_otto


def _central_diff(fn, u, h=1e-6):
    u = np.asarray(u, dtype=float)
    cols = []
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        cols.append((np.asarray(fn(u + e)) - np.asarray(fn(u - e))) / (2 * h))
    return np.array(cols).T


class TestQuadratic:
    def test_plant_at_origin(self):
        np.testing.assert_allclose(
            quadratic.quadratic_plant([0.0, 0.0]), [0.0, 1.0]
        )

    def test_plant_optimum_from_reference(self):
        y = quadratic.quadratic_plant([0.368, -0.393])
        assert y[0] == pytest.approx(0.145, abs=0.005)
        assert abs(y[1]) <= 2e-3

    def test_nominal_at_ones(self):
        np.testing.assert_allclose(
            quadratic.quadratic_nominal([1.0, 1.0]), [2.0, 1.0]
        )

    def test_reference_point_near_kkt(self):
        # Constraint active and stationarity residual small at the quoted
        # 3-decimal optimum.
        u = np.array([0.368, -0.393])
        g = quadratic.quadratic_plant_gradients(u)
        # grad y1 + lambda * grad y2 = 0 for some lambda >= 0.
        lam = -g[0][0] / g[1][0]
        residual = g[0] + lam * g[1]
        assert lam >= 0
        assert np.linalg.norm(residual) <= 1e-2

    def test_gradients_match_fd(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            u = rng.uniform(-2, 2, size=2)
            fd = _central_diff(quadratic.quadratic_nominal, u)
            np.testing.assert_allclose(
                quadratic.quadratic_nominal_gradients(u), fd,
                rtol=1e-6, atol=1e-7,
            )

    def test_oracle_determinism_and_independent_draws(self):
        a = quadratic.make_oracle(seed=7)
        b = quadratic.make_oracle(seed=7)
        u = np.array([0.5, -0.5])
        m1, m2 = a.measure(u), a.measure(u)
        assert not np.allclose(m1, m2)  # stream advances
        np.testing.assert_array_equal(m1, b.measure(u))  # same position
        # Per-function draws are independent: noise on y1 differs from y2.
        truth = quadratic.quadratic_plant(u)
        noise = m1 - truth
        assert abs(noise[0] - noise[1]) > 1e-12


class TestWilliamsOtto:
    def test_mass_fractions_closed_and_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(8):
            fb = rng.uniform(4, 7)
            tr = rng.uniform(70, 100)
            for plant in (True, False):
                x = williams_otto.steady_state(fb, tr, plant=plant)
                assert x.sum() == pytest.approx(1.0, abs=1e-8)
                assert np.all(x >= -1e-12)
                assert np.all(x <= 1.0 + 1e-12)

    def test_steady_state_residual_small(self):
        x = williams_otto.steady_state(5.5, 88.0, plant=True)
        res = williams_otto.steady_state_residual(x, 5.5, 88.0, plant=True)
        assert np.max(np.abs(res)) <= 1e-9

    def test_profit_decreases_with_feed_price(self):
        x = williams_otto.steady_state(5.0, 85.0, plant=True)
        xp, xe = x[5], x[3]
        f = williams_otto.FEED_A + 5.0

        def profit(price_a):
            return (1043.38 * xp + 20.92 * xe) * f \
                - price_a * williams_otto.FEED_A - 118.34 * 5.0

        assert profit(100.0) < profit(79.23)

    @pytest.mark.parametrize("plant", [True, False])
    def test_gradients_match_fd(self, plant):
        fn = (williams_otto._plant_fn if plant
              else williams_otto._nominal_fn)
        grads_fn = (williams_otto.plant_gradients if plant
                    else williams_otto.nominal_gradients)
        rng = np.random.default_rng(2)
        for _ in range(4):
            u = np.array([rng.uniform(4.2, 6.8), rng.uniform(72, 98)])
            fd = _central_diff(fn, u)
            g = grads_fn(u)
            err = np.abs(g - fd) / (1.0 + np.abs(fd))
            assert np.max(err) <= 1e-5

    def test_noise_stds(self):
        oracle = williams_otto.make_oracle(seed=0)
        np.testing.assert_array_equal(
            oracle.noise_std, [0.5, 0.0005, 0.0005]
        )


class TestPBRSimulate:
    def test_zero_growth_reduces_to_linear_nitrate_accumulation(self):
        params = pbr.PBRParams(
            u_m=0.0, u_d=0.0, K_N=393.1, Y_NX=504.5, k_m=0.0, k_d=0.0,
            k_s=178.9, k_i=447.1, k_sq=23.51, k_iq=800.0, K_Np=16.89,
        )
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((np.full(6, 200.0), np.full(6, 10.0)))
        states = pbr.pbr_simulate(
            controls, "plant", parameterization=par, params=params
        )
        np.testing.assert_allclose(states[:, 0], 1.0, rtol=1e-12)
        np.testing.assert_allclose(states[:, 2], 0.0, atol=1e-12)
        # C_N integrates F_N exactly: +10 mg/L/h for 240 h on top of 150.
        assert states[-1, 1] == pytest.approx(150.0 + 2400.0, rel=1e-12)
        # ... which exercises the path constraint: 2550 > 800.
        g = pbr.assemble_outputs(states, par)
        assert np.max(g[7:13]) > 0

    def test_rk4_fourth_order_on_exponential_decay(self):
        # u_d = 1/120 makes C_X follow exactly dx/dt = -x/120.
        params = pbr.PBRParams(
            u_m=0.0, u_d=1.0 / 120.0, K_N=393.1, Y_NX=504.5, k_m=0.0,
            k_d=0.0, k_s=178.9, k_i=447.1, k_sq=23.51, k_iq=800.0, K_Np=16.89,
        )
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((np.full(6, 200.0), np.zeros(6)))
        exact = np.exp(-240.0 / 120.0)
        errs = []
        for steps in (25, 50):
            states = pbr.pbr_simulate(
                controls, "plant", parameterization=par,
                steps_per_stage=steps, params=params,
            )
            errs.append(abs(states[-1, 0] - exact))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_agrees_with_high_resolution_oracle(self):
        # Profile chosen so C_N stays well away from zero (the relative
        # comparison is meaningless on a state decaying to ~1e-5).
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((
            np.full(6, 280.0), [20.0, 15.0, 10.0, 8.0, 8.0, 8.0]
        ))
        coarse = pbr.pbr_simulate(controls, "plant", parameterization=par)
        fine = pbr.pbr_simulate(
            controls, "plant", parameterization=par, steps_per_stage=1000
        )
        np.testing.assert_allclose(coarse, fine, rtol=1e-6)

    def test_trajectory_regression_pin(self):
        # Frozen from the first verified run (cross-checked against the
        # 1000-steps-per-stage integration in the test above).
        par = pbr.ControlParameterization(3)
        controls = np.array([300.0, 300.0, 300.0, 20.0, 10.0, 0.0])
        states = pbr.pbr_simulate(controls, "plant", parameterization=par)
        expected_final = np.array(
            [6.054509391646552, 1.1914314546929129e-05, 0.045453203081322294]
        )
        np.testing.assert_allclose(states[-1], expected_final, rtol=1e-12)

    def test_nitrate_nonincreasing_without_feed(self):
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((np.full(6, 300.0), np.zeros(6)))
        states = pbr.pbr_simulate(controls, "plant", parameterization=par)
        assert np.all(np.diff(states[:, 1]) <= 1e-12)

    def test_biomass_nondecreasing_without_decay(self):
        # Default parameters have u_d = 0; biomass cannot shrink while
        # nitrate remains positive.
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((np.full(6, 250.0), np.full(6, 5.0)))
        states = pbr.pbr_simulate(controls, "plant", parameterization=par)
        assert np.all(np.diff(states[:, 0]) >= -1e-12)

    def test_negative_concentration_raises(self):
        # Stiff degradation with a coarse step makes the RK4 update
        # overshoot C_P far below the physical tolerance.
        params = pbr.PBRParams(
            u_m=0.0, u_d=0.0, K_N=393.1, Y_NX=504.5, k_m=0.001, k_d=1e6,
            k_s=178.9, k_i=447.1, k_sq=23.51, k_iq=800.0, K_Np=16.89,
        )
        par = pbr.ControlParameterization(3)
        controls = np.concatenate((np.full(3, 200.0), np.zeros(3)))
        with pytest.raises(SimulationError):
            pbr.pbr_simulate(
                controls, "plant", parameterization=par, params=params,
                steps_per_stage=2,
            )


class TestPBRProblem:
    def test_constraint_count_bookkeeping(self):
        par = pbr.ControlParameterization(6)
        assert par.n_u == 12
        assert par.n_g == 13  # 6 ratio + 6 nitrate path + 1 terminal
        g = pbr.pbr_problem(pbr.default_initial_center(6), "plant")
        assert g.shape == (14,)

    def test_zero_feed_minimum_light_meets_terminal_nitrate(self):
        par = pbr.ControlParameterization(6)
        controls = np.concatenate((np.full(6, 120.0), np.zeros(6)))
        g = pbr.pbr_problem(controls, "plant", parameterization=par)
        assert g[13] < 0  # C_N(240) < 150 with no nitrate inflow

    def test_nominal_gradients_match_fd(self):
        nominal = pbr.make_nominal(3)
        u = np.array([250.0, 300.0, 200.0, 15.0, 5.0, 2.0])
        fd = _central_diff(nominal.eval, u, h=1e-4)
        g = nominal.gradients(u)
        err = np.abs(g - fd) / (1.0 + np.abs(fd))
        assert np.max(err) <= 1e-5

    def test_oracle_noise_enters_through_states(self):
        oracle = pbr.make_oracle(3, seed=5)
        u = pbr.default_initial_center(3)
        m = oracle.measure(u)
        truth = oracle.true_eval(u)
        # Terminal nitrate constraint and final-boundary path constraint
        # share the same noisy C_N draw.
        s = 3
        noise_path = (m - truth)[s + s]  # nitrate path at final boundary
        noise_term = (m - truth)[2 * s + 1]
        assert noise_path == pytest.approx(noise_term, abs=1e-12)

    def test_stage_control_length_validated(self):
        with pytest.raises(ContractViolationError):
            pbr.pbr_simulate(np.zeros(5), "plant",
                             parameterization=pbr.ControlParameterization(3))
