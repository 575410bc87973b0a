import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccfunnel.errors import SingularConfiguration
from ccfunnel.integrators import integrate
from ccfunnel.plant import ELPlant, HandPointRobot, InitialState, MobileRobot, PointMass
from ccfunnel.signals import Sinusoid

ROBOT = MobileRobot()


def box_scenario_disturbance():
    # sines written as cosines shifted by -pi/2
    d1 = Sinusoid(0.75, 2.0, math.pi / 3 - math.pi / 2) + Sinusoid(1.5, 3.0, 3 * math.pi / 7)
    d2 = Sinusoid(0.25, 3.0, math.pi / 6) + Sinusoid(0.75, 5.0, -math.pi / 3 - math.pi / 2)
    return d1, d2


# -- hand point ------------------------------------------------------------

def test_hand_point_at_zero_heading():
    assert ROBOT.hand_transform((0.0, 0.0, 0.0)) == (0.2, 0.0)


def test_hand_point_at_quarter_turn():
    p = ROBOT.hand_transform((1.0, 1.0, math.pi / 2))
    assert p == pytest.approx((1.0, 1.2), abs=1e-12)


@given(st.floats(-10.0, 10.0), st.floats(0.01, 5.0))
def test_jacobian_determinant_is_offset(theta, L):
    (a, b), (c, d) = MobileRobot(hand_offset=L).jacobian(theta)
    assert a * d - b * c == pytest.approx(L, rel=1e-12)


def test_input_back_transform_examples():
    assert ROBOT.input_back_transform((1.0, 0.0), 0.0) == (1.0, 0.0)
    assert ROBOT.input_back_transform((0.0, 1.0), 0.0) == (0.0, 0.2)
    assert ROBOT.input_back_transform((0.0, 0.0), 1.3) == (0.0, 0.0)


@given(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_back_transform_is_jacobian_transpose(u1, u2, theta):
    J = np.array(ROBOT.jacobian(theta))
    assert ROBOT.input_back_transform((u1, u2), theta) == pytest.approx(tuple(J.T @ [u1, u2]), abs=1e-12)


@pytest.mark.parametrize("L", [0.0, -0.1])
def test_nonpositive_offset_is_singular(L):
    with pytest.raises(SingularConfiguration):
        MobileRobot(hand_offset=L)


# -- disturbance -----------------------------------------------------------

def test_disturbance_at_zero(paper_kc3):
    d1, d2 = paper_kc3.plant.disturbance_at(0.0)
    assert d1 == pytest.approx(0.75 * math.sin(math.pi / 3) + 1.5 * math.cos(3 * math.pi / 7), abs=1e-12)
    assert d1 == pytest.approx(0.9833, abs=5e-5)
    assert d2 == pytest.approx(0.25 * math.cos(math.pi / 6) + 0.75 * math.sin(-math.pi / 3), abs=1e-12)


def test_disturbance_amplitude_bounds(paper_kc3):
    samples = np.array([paper_kc3.plant.disturbance_at(t) for t in np.linspace(0.0, 60.0, 20001)])
    assert np.max(np.abs(samples[:, 0])) <= 2.25
    assert np.max(np.abs(samples[:, 1])) <= 1.0


def test_default_robot_is_undisturbed():
    assert ROBOT.disturbance_at(3.7) == (0.0, 0.0)


# -- dynamics probes -------------------------------------------------------

def test_force_balance_gives_zero_acceleration():
    C = lambda x, v: [[0.0, x[0]], [-x[0], 0.0]]
    g = lambda x: [9.81 * x[1], 1.0]
    D = lambda x: [[0.3, 0.0], [0.1, 0.4]]
    d = lambda t: [math.sin(t), 0.5]
    plant = ELPlant(2, lambda x: [[2.0, 0.3], [0.3, 1.0]], C, g, D, d)
    t, x, v = 0.7, np.array([0.4, -1.2]), np.array([0.5, 2.0])
    u = np.array(C(x, v)) @ v + g(x) + np.array(D(x)) @ v - d(t)
    assert np.allclose(plant.el_accel(t, x, v, u), 0.0, atol=1e-14)


def test_double_integrator_accelerates_with_input():
    assert PointMass((1.0, 1.0)).el_accel(0.0, (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)) == [1.0, 0.0]
    generic = ELPlant(2, lambda x: np.eye(2))
    assert list(generic.el_accel(0.0, (0.0, 0.0), (0.0, 0.0), (1.0, 0.0))) == [1.0, 0.0]


def test_robot_at_rest_stays_at_rest():
    deriv = ROBOT.state_derivative(0.0, [1.0, -2.0, 0.4, 0.0, 0.0], (0.0, 0.0))
    assert deriv == [0.0, 0.0, 0.0, 0.0, 0.0]
    assert ROBOT.body_accel(0.0, (0.0, 0.0), (0.0, 0.0)) == (0.0, 0.0)


def test_hand_point_mass_matrix_is_positive_definite():
    rng = np.random.default_rng(7)
    for _ in range(100):
        theta = rng.uniform(-math.pi, math.pi)
        z = rng.normal(size=2)
        M = ROBOT.mass_matrix(theta)
        assert np.allclose(M, M.T, atol=1e-12)
        assert z @ M @ z > 0.0


def test_kinetic_energy_never_increases_unforced():
    f = lambda t, y: ROBOT.state_derivative(t, y, (0.0, 0.0))
    _, states = integrate(f, [0.0, 0.0, 0.3, 1.5, -2.0], 10.0, 1e-3)
    energy = np.array([ROBOT.kinetic_energy(s[3:]) for s in states])
    assert np.all(np.diff(energy) <= 0.0)
    assert energy[-1] < energy[0]


# -- transform equivalence -------------------------------------------------

def test_transformed_model_matches_native_open_loop():
    robot = MobileRobot(disturbance=box_scenario_disturbance())
    hand = HandPointRobot(robot)
    init = InitialState((-3.19, 1.7), heading=-0.33, body_velocity=(0.2, -0.1))
    u = lambda t: (2.0 * math.cos(0.7 * t), 1.5 * math.sin(1.1 * t) - 0.5)
    _, native = integrate(lambda t, y: robot.state_derivative(t, y, u(t)),
                          robot.initial_state(init), 10.0, 1e-3)
    _, direct = integrate(lambda t, y: hand.state_derivative(t, y, u(t)),
                          hand.initial_state(init), 10.0, 1e-3)
    p_native = np.array([robot.outputs(s)[0] for s in native])
    p_direct = np.array([hand.outputs(s)[0] for s in direct])
    assert np.max(np.abs(p_native - p_direct)) <= 1e-6
    # the robot must actually move for the comparison to mean anything
    assert np.ptp(p_native[:, 0]) > 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
       st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_hand_acceleration_matches_body_dynamics(theta, vT, w, u1, u2):
    robot = MobileRobot(disturbance=box_scenario_disturbance())
    state = [0.3, -0.2, theta, vT, w]
    _, v = robot.outputs(state)
    native = robot.state_derivative(1.1, state, (u1, u2))
    # differentiate pdot = J(theta) psi along the native flow
    c, s, L = math.cos(theta), math.sin(theta), robot.hand_offset
    a_native = (-s * w * vT + c * native[3] - L * c * w * w - L * s * native[4],
                c * w * vT + s * native[3] - L * s * w * w + L * c * native[4])
    a_direct = robot.el_accel(1.1, (0.0, 0.0), v, (u1, u2), theta)
    assert a_direct == pytest.approx(a_native, abs=1e-9)
