import numpy as np
import pytest

from myodyn import mechanics as mk
from myodyn.errors import ConfigError, DimensionError, GeometryError, RangeError


def make_path(coeffs, q_min=-1.0, q_max=2.0):
    return mk.MusclePath(coeffs=tuple(coeffs), q_min=q_min, q_max=q_max)


def make_muscle(**kw):
    base = dict(name="m", f_max=1000.0, l_opt=0.1, phi_opt=0.0, l_slack=0.2,
                v_max=10.0, path=make_path([0.3, -0.04]))
    base.update(kw)
    return mk.MuscleParams(**base)


class TestMusculotendonLength:
    def test_linear_path_at_zero(self):
        assert mk.musculotendon_length(make_path([0.3, -0.04]), 0.0) == 0.3

    def test_linear_path_midrange(self):
        assert mk.musculotendon_length(make_path([0.3, -0.04]), 0.5) == pytest.approx(0.28)

    def test_cubic_matches_term_by_term_sum(self):
        coeffs = [0.31, -0.03, 0.004, -0.0007]
        q = 1.1
        expected = sum(c * q ** k for k, c in enumerate(coeffs))
        assert mk.musculotendon_length(make_path(coeffs), q) == pytest.approx(
            expected, rel=1e-15)

    def test_out_of_range_reports_value(self):
        with pytest.raises(RangeError) as err:
            mk.musculotendon_length(make_path([0.3, -0.04]), 2.5)
        assert "2.5" in str(err.value)

    def test_degree_cap(self):
        with pytest.raises(ConfigError):
            make_path([1.0] * 7)


class TestMomentArm:
    def test_linear_path_positive_arm(self):
        path = make_path([0.3, -0.04])
        for q in (0.0, 0.3, 1.2):
            assert mk.moment_arm(path, q) == pytest.approx(0.04)

    def test_sign_flip(self):
        assert mk.moment_arm(make_path([0.3, 0.04]), 0.7) == pytest.approx(-0.04)

    def test_matches_central_difference_of_length(self):
        path = make_path([0.32, -0.035, 0.006, -0.001])
        h = 1e-6
        for q in np.linspace(-0.5, 1.5, 9):
            fd = -(mk.musculotendon_length(path, q + h)
                   - mk.musculotendon_length(path, q - h)) / (2 * h)
            assert mk.moment_arm(path, q) == pytest.approx(fd, abs=1e-8)


class TestResolveFiber:
    def test_zero_pennation_reduces_to_subtraction(self):
        m = make_muscle(phi_opt=0.0, l_slack=0.2)
        state = mk.resolve_fiber(m, 0.3)
        assert float(state.l_m) == pytest.approx(0.1, abs=1e-15)
        assert float(state.phi) == 0.0

    def test_optimal_length_recovers_optimal_pennation(self):
        m = make_muscle(phi_opt=0.15, l_opt=0.1)
        l_mt = m.l_slack + m.l_opt * np.cos(m.phi_opt)
        state = mk.resolve_fiber(m, l_mt)
        assert float(state.l_norm) == pytest.approx(1.0, abs=1e-12)
        assert float(state.phi) == pytest.approx(0.15, abs=1e-12)

    def test_closed_form_values(self):
        m = make_muscle(phi_opt=0.1, l_opt=0.1, l_slack=0.2)
        state = mk.resolve_fiber(m, 0.25)  # l_mt - l_slack = 0.05
        assert float(state.l_m) == pytest.approx(0.05098693078420972, rel=1e-14)
        assert float(state.phi) == pytest.approx(0.197075186732115, rel=1e-14)
        # pennation identity residual
        residual = abs(float(state.l_m) * np.sin(float(state.phi))
                       - m.l_opt * np.sin(m.phi_opt))
        assert residual < 1e-12

    def test_constant_height_identity_over_grid(self):
        m = make_muscle(phi_opt=0.25, l_opt=0.12, l_slack=0.15)
        for l_mt in np.linspace(0.16, 0.35, 40):
            state = mk.resolve_fiber(m, l_mt)
            assert abs(float(state.l_m) * np.sin(float(state.phi))
                       - m.l_opt * np.sin(m.phi_opt)) < 1e-12

    def test_geometry_error_when_fiber_collapses(self):
        m = make_muscle(l_slack=0.2)
        with pytest.raises(GeometryError):
            mk.resolve_fiber(m, 0.2)


class TestFiberVelocity:
    def test_static_posture_is_zero(self):
        m = make_muscle()
        state = mk.resolve_fiber(m, 0.3)
        assert mk.fiber_velocity(m, state, 0.4, 0.0) == 0.0

    def test_zero_pennation_collapses_chain_rule(self):
        m = make_muscle(phi_opt=0.0)
        q, qdot = 0.5, 1.3
        state = mk.resolve_fiber(m, mk.musculotendon_length(m.path, q))
        expected = (-mk.moment_arm(m.path, q) * qdot) / (m.v_max * m.l_opt)
        assert mk.fiber_velocity(m, state, q, qdot) == pytest.approx(expected, rel=1e-14)

    def test_pennated_matches_finite_difference(self):
        m = make_muscle(phi_opt=0.2, l_opt=0.09,
                        path=make_path([0.31, -0.03, 0.005]))
        q0, qdot = 0.6, 0.9
        dt = 1e-6

        def fiber_len(t):
            q = q0 + qdot * t
            return float(mk.resolve_fiber(m, mk.musculotendon_length(m.path, q)).l_m)

        fd = (fiber_len(dt) - fiber_len(-dt)) / (2 * dt) / (m.v_max * m.l_opt)
        state = mk.resolve_fiber(m, mk.musculotendon_length(m.path, q0))
        assert mk.fiber_velocity(m, state, q0, qdot) == pytest.approx(fd, abs=1e-6)

    def test_clipped_to_limit(self):
        m = make_muscle(v_max=0.1)
        state = mk.resolve_fiber(m, 0.3)
        assert mk.fiber_velocity(m, state, 0.5, 50.0) == -mk.V_NORM_LIMIT


class TestCurves:
    def test_normalization_points(self):
        assert mk.active_force_length(1.0) == 1.0
        assert mk.force_velocity(0.0) == 1.0
        assert mk.passive_force_length(1.0) == 0.0

    def test_max_shortening_produces_no_force(self):
        assert mk.force_velocity(-1.0) == 0.0
        assert mk.force_velocity(-1.4) == 0.0

    def test_active_curve_formula_value(self):
        assert mk.active_force_length(1.3) == pytest.approx(0.8187307530779818,
                                                            rel=1e-14)

    def test_force_velocity_monotone_and_bounded(self):
        grid = np.linspace(-1.0, 1.5, 400)
        vals = mk.force_velocity(grid)
        assert np.all(np.diff(vals) >= 0)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= 1.4)

    def test_passive_monotone_zero_below_optimal(self):
        grid = np.linspace(0.5, 1.0, 50)
        assert np.all(mk.passive_force_length(grid) == 0.0)
        grid = np.linspace(1.0, 1.6, 200)
        vals = mk.passive_force_length(grid)
        assert np.all(np.diff(vals) >= 0)


class TestTendonForce:
    def test_no_drive_slack_passive(self):
        m = make_muscle(f_max=1000.0, phi_opt=0.0)
        state = mk.MuscleState(l_mt=0.3, l_m=0.1, phi=0.0, l_norm=1.0, v_norm=0.0)
        assert mk.tendon_force(m, state, 0.0) == 0.0

    def test_maximal_isometric_at_optimum(self):
        m = make_muscle(f_max=1000.0, phi_opt=0.0)
        state = mk.MuscleState(l_mt=0.3, l_m=0.1, phi=0.0, l_norm=1.0, v_norm=0.0)
        assert mk.tendon_force(m, state, 1.0) == pytest.approx(1000.0, rel=1e-14)

    def test_hand_evaluated_pennated_case(self):
        m = make_muscle(f_max=500.0, phi_opt=0.1, l_opt=0.1)
        phi = np.arcsin(np.sin(0.1) / 1.1)
        state = mk.MuscleState(l_mt=np.nan, l_m=0.11, phi=phi, l_norm=1.1,
                               v_norm=-0.2)
        assert mk.tendon_force(m, state, 0.5) == pytest.approx(112.61520576128932,
                                                               rel=1e-12)

    def test_monotone_in_activation(self):
        m = make_muscle(f_max=800.0, phi_opt=0.2, l_opt=0.11)
        state = mk.resolve_fiber(m, 0.29)
        forces = [mk.tendon_force(m, state, a) for a in np.linspace(0, 1, 30)]
        assert np.all(np.diff(forces) >= 0)

    def test_nonnegative_for_nonnegative_activation(self):
        rng = np.random.default_rng(0)
        m = make_muscle(f_max=700.0, phi_opt=0.15)
        for _ in range(50):
            state = mk.resolve_fiber(m, rng.uniform(0.21, 0.33))
            state = mk.MuscleState(l_mt=state.l_mt, l_m=state.l_m, phi=state.phi,
                                   l_norm=state.l_norm,
                                   v_norm=rng.uniform(-1.5, 1.5))
            assert mk.tendon_force(m, state, rng.uniform(0, 1)) >= 0.0


class TestJointTorque:
    def test_two_muscle_arithmetic(self):
        assert mk.joint_torque([100.0, 50.0], [0.04, -0.02]) == pytest.approx(3.0)

    def test_zero_forces(self):
        assert mk.joint_torque(np.zeros(4), np.full(4, 0.03)) == 0.0

    def test_five_muscle_random_matches_loop(self):
        rng = np.random.default_rng(8)
        f = rng.uniform(0, 500, 5)
        r = rng.uniform(-0.05, 0.05, 5)
        expected = 0.0
        for i in range(5):
            expected += f[i] * r[i]
        assert mk.joint_torque(f, r) == pytest.approx(expected, rel=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            mk.joint_torque(np.zeros(3), np.zeros(4))

    def test_linearity(self):
        rng = np.random.default_rng(1)
        f = rng.uniform(0, 400, 5)
        r = rng.uniform(-0.05, 0.05, 5)
        assert mk.joint_torque(2.5 * f, r) == pytest.approx(
            2.5 * mk.joint_torque(f, r), rel=1e-12)


class TestInverseDynamics:
    def test_hanging_equilibrium(self):
        joint = mk.JointModel(inertia=0.3, mass=4.0, com_dist=0.2, gravity_sign=1)
        assert mk.inverse_dynamics_torque(joint, 0.0, 0.0, 0.0) == 0.0

    def test_arithmetic(self):
        joint = mk.JointModel(inertia=0.15, mass=1.0, com_dist=0.2, gravity_sign=1)
        g = mk.gravity_torque(joint, np.pi / 2)  # mass*9.81*com = 1.962
        assert g == pytest.approx(1.962, rel=1e-12)
        joint2 = mk.JointModel(inertia=0.15, mass=2.0 / (9.81 * 0.2), com_dist=0.2,
                               gravity_sign=1)
        tau = mk.inverse_dynamics_torque(joint2, np.pi / 2, 0.0, 1.0)
        assert tau == pytest.approx(2.15, rel=1e-12)

    def test_energy_balance_on_sinusoid(self):
        # integral of tau*qdot equals the change of kinetic + potential energy
        joint = mk.JointModel(inertia=0.4, mass=3.0, com_dist=0.22, gravity_sign=1)
        t = np.linspace(0.0, 0.83, 20001)
        w = 2 * np.pi * 0.7
        q = 0.6 * (1 - np.cos(w * t))
        qdot = 0.6 * w * np.sin(w * t)
        qddot = 0.6 * w * w * np.cos(w * t)
        tau = mk.inverse_dynamics_torque(joint, q, qdot, qddot)
        work = np.trapezoid(tau * qdot, t)
        d_kin = 0.5 * joint.inertia * (qdot[-1] ** 2 - qdot[0] ** 2)
        d_pot = (joint.mass * mk.GRAVITY * joint.com_dist
                 * ((1 - np.cos(q[-1])) - (1 - np.cos(q[0]))))
        assert work == pytest.approx(d_kin + d_pot, rel=1e-4)

    def test_damping_term(self):
        joint = mk.JointModel(inertia=0.2, mass=0.0, com_dist=0.0, gravity_sign=1,
                              damping=0.5)
        assert mk.inverse_dynamics_torque(joint, 0.3, 2.0, 0.0) == pytest.approx(1.0)


def test_series_constants_match_per_step_composition():
    from myodyn.config import load_model_config
    model = load_model_config("knee")
    q = np.array([0.2, 0.8, 1.3])
    qdot = np.array([0.5, -0.4, 0.1])
    qddot = np.array([1.0, 0.0, -2.0])
    sc = mk.series_constants(model.muscles, model.joint, q, qdot, qddot)
    for t in range(3):
        for j, m in enumerate(model.muscles):
            state = mk.resolve_fiber(m, mk.musculotendon_length(m.path, q[t]))
            import dataclasses
            state = dataclasses.replace(
                state, v_norm=mk.fiber_velocity(m, state, q[t], qdot[t]))
            c, d = mk.force_coefficients(m, state)
            assert sc.coef_active[t, j] == pytest.approx(float(c), rel=1e-14)
            assert sc.coef_passive[t, j] == pytest.approx(float(d), rel=1e-14)
            assert sc.arms[t, j] == pytest.approx(
                float(mk.moment_arm(m.path, q[t])), rel=1e-14)
        assert sc.tau_req[t] == pytest.approx(
            float(mk.inverse_dynamics_torque(model.joint, q[t], qdot[t], qddot[t])),
            rel=1e-14)


def test_invalid_params_rejected():
    with pytest.raises(ConfigError):
        make_muscle(f_max=-1.0)
    with pytest.raises(ConfigError):
        make_muscle(phi_opt=np.pi / 2)
    with pytest.raises(ConfigError):
        mk.JointModel(inertia=0.0, mass=1.0, com_dist=0.1, gravity_sign=1)
    with pytest.raises(ConfigError):
        mk.JointModel(inertia=0.1, mass=1.0, com_dist=0.1, gravity_sign=2)
