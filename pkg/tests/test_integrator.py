import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import beam_inputs, beam_system, random_state, rod_inputs, rod_system
from phsvk.integrator import (
    IntegratorConfig,
    NewtonDiverged,
    NewtonRecord,
    StepFailed,
    _Stage,
    newton_solve,
    run,
    step_midpoint,
    step_times,
)
from phsvk.system import BoundaryInput


def flat(state, with_f=True):
    parts = [state.v, state.S] + ([state.F] if with_f else [])
    return np.concatenate(parts)


# --------------------------------------------------------------- newton core


class TestNewton:
    def test_scalar_quadratic(self):
        x, rec = newton_solve(
            lambda x: x**2 - 4.0, lambda x: np.array([[2.0 * x[0]]]), np.array([3.0]), 1e-12, 6
        )
        assert x[0] == pytest.approx(2.0, abs=1e-12)
        assert rec.converged and rec.iterations <= 6

    def test_quadratic_convergence(self):
        _, rec = newton_solve(
            lambda x: x**2 - 4.0, lambda x: np.array([[2.0 * x[0]]]), np.array([3.0]), 1e-14, 10
        )
        r = rec.residual_norms
        # e_{k+1} ~ e_k^2 / (2 x) once close
        assert r[3] < 10 * r[2] ** 2

    def test_divergence_keeps_history(self):
        with pytest.raises(NewtonDiverged) as err:
            newton_solve(lambda x: x**2 + 1.0, lambda x: np.array([[2.0 * x[0]]]), np.array([0.5]), 1e-12, 4)
        assert len(err.value.history) == 5

    def test_exact_start_needs_no_update(self):
        calls = []
        _, rec = newton_solve(lambda x: x - 1.0, lambda x: calls.append(1) or np.eye(1), np.array([1.0]), 1e-10, 3)
        assert rec.iterations == 0 and not calls

    def test_small_residual_still_updates(self):
        _, rec = newton_solve(lambda x: x - 1e-13, lambda x: np.eye(1), np.array([0.0]), 1e-10, 3)
        assert rec.iterations == 1

    def test_tail_ratio(self):
        assert NewtonRecord([1.0, 1e-3, 1e-9]).tail_ratio() == pytest.approx(1e-6)
        assert NewtonRecord([1.0]).tail_ratio() == 0.0

    def test_sparse_jacobian(self):
        A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        b = np.array([1.0, 2.0])
        x, rec = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(2), 1e-14, 2)
        np.testing.assert_allclose(A @ x, b, atol=1e-14)
        assert rec.iterations == 1


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(dt=-1.0), dict(newton_tol=0.0), dict(max_newton_iter=0), dict(jacobian_mode="x"), dict(linear_solver="x")],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)

    def test_step_times_short_final_step(self):
        steps = step_times(0.3, 1.0)
        assert steps[:3] == [0.3, 0.3, 0.3]
        assert len(steps) == 4 and steps[3] == pytest.approx(0.1)

    def test_step_times_exact_multiple(self):
        assert len(step_times(1e-3, 1.0)) == 1000

    def test_step_times_zero_dt(self):
        with pytest.raises(ValueError):
            step_times(0.0, 1.0)


# ---------------------------------------------------------------- one step


class TestStep:
    def test_zero_step_returns_start(self, rng):
        s = beam_system(nx=3, ny=1, inputs=beam_inputs())
        st0 = random_state(s, rng)
        new, info = step_midpoint(s, st0, IntegratorConfig(), dt=0.0)
        np.testing.assert_array_equal(flat(new), flat(st0))
        assert info.newton.iterations == 0

    def test_linear_model_single_iteration(self, rng):
        s = beam_system(nx=4, ny=2, inputs=beam_inputs(), linear=True)
        _, info = step_midpoint(s, random_state(s, rng), IntegratorConfig(dt=1e-3))
        assert info.newton.iterations == 1

    def test_analytic_jacobian_matches_finite_difference(self, rng):
        s = beam_system(nx=2, ny=1, inputs=beam_inputs(10.0))
        st0 = random_state(s, rng)
        stage = _Stage(s, st0, 1e-2)
        x = stage.x0 + 0.01 * rng.standard_normal(stage.x0.size)
        exact = stage.jacobian(x).toarray()
        approx = stage.fd_jacobian(x)
        assert np.abs(exact - approx).max() / np.abs(exact).max() < 1e-6

    @pytest.mark.parametrize("linear", [False, True])
    def test_block_solve_matches_direct(self, rng, linear):
        s = beam_system(nx=3, ny=2, inputs=beam_inputs(5.0), linear=linear)
        stage = _Stage(s, random_state(s, rng), 1e-2)
        x = stage.x0 + 0.01 * rng.standard_normal(stage.x0.size)
        r = rng.standard_normal(x.size)
        direct = np.linalg.solve(stage.jacobian(x).toarray(), r)
        np.testing.assert_allclose(stage.block_solve(x, r), direct, rtol=1e-9, atol=1e-12)

    def test_block_and_direct_steps_agree(self, rng):
        s = rod_system(n=6, inputs=rod_inputs())
        st0 = random_state(s, rng, 0.01)
        a, _ = step_midpoint(s, st0, IntegratorConfig(dt=1e-3, linear_solver="block"))
        b, _ = step_midpoint(s, st0, IntegratorConfig(dt=1e-3, linear_solver="direct"))
        np.testing.assert_allclose(flat(a), flat(b), rtol=1e-9, atol=1e-12)

    def test_finite_difference_mode_step(self, rng):
        s = beam_system(nx=2, ny=1, inputs=beam_inputs())
        st0 = random_state(s, rng, 0.05)
        a, _ = step_midpoint(s, st0, IntegratorConfig(dt=1e-3))
        b, _ = step_midpoint(s, st0, IntegratorConfig(dt=1e-3, jacobian_mode="finite_difference"))
        np.testing.assert_allclose(flat(a), flat(b), rtol=1e-8, atol=1e-10)

    def test_displacement_uses_midpoint_velocity(self, rng):
        s = rod_system(n=4, inputs=rod_inputs())
        st0 = random_state(s, rng, 0.01)
        new, _ = step_midpoint(s, st0, IntegratorConfig(dt=1e-3))
        np.testing.assert_allclose(new.u, st0.u + 1e-3 * 0.5 * (st0.v + new.v), rtol=1e-15)


# -------------------------------------------------------------- trajectories


class TestRun:
    def test_zero_inputs_zero_state_stay_zero(self):
        s = beam_system(nx=3, ny=1)
        traj = run(s, s.initial_state(), IntegratorConfig(dt=1e-2, t_end=0.1))
        f = traj.final_state
        assert not np.any(f.v) and not np.any(f.S) and not np.any(f.u)
        np.testing.assert_array_equal(f.F, s.F_identity)
        assert max(traj.H) == 0.0

    @pytest.mark.parametrize("linear", [False, True])
    def test_zero_input_energy_conserved(self, rng, linear):
        s = beam_system(nx=4, ny=1, linear=linear)
        traj = run(s, random_state(s, rng, 0.05), IntegratorConfig(dt=1e-3, t_end=0.05))
        H = np.array(traj.H)
        assert np.abs(H - H[0]).max() <= 1e-9 * max(1.0, H[0])

    def test_linear_time_reversible(self, rng):
        s = beam_system(nx=4, ny=2, linear=True)
        st0 = random_state(s, rng)
        cfg = IntegratorConfig(dt=1e-3, t_end=0.02)
        fwd = run(s, st0, cfg).final_state
        back = fwd.copy()
        back.v = -back.v
        back.t = 0.0
        ret = run(s, back, cfg).final_state
        x0 = np.concatenate([st0.v, st0.S])
        x1 = np.concatenate([-ret.v, ret.S])
        assert np.abs(x1 - x0).max() <= 1e-9 * np.abs(x0).max()

    def test_short_final_step(self):
        s = rod_system(n=4, inputs=rod_inputs())
        traj = run(s, s.initial_state(velocity=0.5), IntegratorConfig(dt=1e-3, t_end=0.0105))
        assert traj.short_step[-1] and not any(traj.short_step[:-1])
        assert traj.t[-1] == 0.0105 and len(traj.t) == 12

    def test_recorders_called_per_step(self):
        s = rod_system(n=4)
        seen = []
        run(s, s.initial_state(), IntegratorConfig(dt=1e-3, t_end=5e-3), [lambda k, st_, info: seen.append((k, info is None))])
        assert seen == [(0, True)] + [(k, False) for k in range(1, 6)]

    def test_failed_step_carries_index(self):
        s = beam_system(nx=2, ny=1, inputs=BoundaryInput(
            lambda t: np.array([0.0, 0.0 if t < 2e-3 else 1e30]), lambda t: np.zeros(2)))
        with pytest.raises(StepFailed) as err:
            run(s, s.initial_state(), IntegratorConfig(dt=1e-3, t_end=1e-2, max_newton_iter=2))
        assert err.value.step == 2

    def test_balance_residual_small(self):
        s = rod_system(n=10, inputs=rod_inputs())
        traj = run(s, s.initial_state(velocity=0.5), IntegratorConfig(dt=1e-3, t_end=0.3))
        H = np.array(traj.H)
        assert np.abs(traj.balance_residual).max() <= 1e-10 * max(1.0, H.max())

    def test_deterministic(self):
        results = []
        for _ in range(2):
            s = beam_system(nx=3, ny=1, inputs=beam_inputs(50.0))
            results.append(run(s, s.initial_state(), IntegratorConfig(dt=1e-2, t_end=0.1)).final_state)
        assert np.array_equal(flat(results[0]), flat(results[1]))


@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(1e-4, 5e-2))
@settings(max_examples=15, deadline=None)
def test_midpoint_step_preserves_energy_without_inputs(seed, dt):
    rng = np.random.default_rng(seed)
    s = rod_system(n=3)
    st0 = random_state(s, rng, 0.05)
    new, info = step_midpoint(s, st0, IntegratorConfig(dt=dt))
    H0 = s.hamiltonian(st0)
    assert abs(s.hamiltonian(new) - H0) <= 1e-9 * max(1.0, H0)
