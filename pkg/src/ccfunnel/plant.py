"""Euler-Lagrange plants.

A plant owns no state.  The engine hands it a flat state vector and asks
for the measured outputs ``(x, v)`` and the state derivative under a
generalized force ``u`` expressed in output coordinates.

``MobileRobot`` is the planar unicycle with the hand point at distance
``hand_offset`` ahead of the axle; it integrates in body coordinates
``(x_c, y_c, theta, v_T, omega)`` and maps forces through ``J(theta)^T``.
``HandPointRobot`` is the same machine written directly as an EL system in
hand coordinates; it exists to cross-check the coordinate change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import SingularConfiguration
from .signals import Constant, TimeSignal


@dataclass(frozen=True)
class InitialState:
    """Initial condition in output coordinates.

    ``velocity`` is the output velocity for generic EL plants; the robot
    takes ``heading`` and ``body_velocity = (v_T, omega)`` instead.
    """

    position: Tuple[float, ...]
    velocity: Optional[Tuple[float, ...]] = None
    heading: Optional[float] = None
    body_velocity: Optional[Tuple[float, ...]] = None


class ELPlant:
    """``M(x) vdot + C(x, v) v + g(x) + D(x) v = u + d(t)`` with user callables.

    Missing terms default to zero.  Matrices may be nested lists or arrays.
    """

    def __init__(self, n: int, mass: Callable, coriolis: Callable = None,
                 gravity: Callable = None, damping: Callable = None,
                 disturbance: Callable = None):
        self.n_outputs = n
        self.state_size = 2 * n
        self.mass = mass
        self.coriolis = coriolis
        self.gravity = gravity
        self.damping = damping
        self.disturbance = disturbance

    def el_accel(self, t, x, v, u):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        rhs = np.asarray(u, dtype=float).copy()
        if self.coriolis is not None:
            rhs -= np.asarray(self.coriolis(x, v), dtype=float) @ v
        if self.gravity is not None:
            rhs -= np.asarray(self.gravity(x), dtype=float)
        if self.damping is not None:
            rhs -= np.asarray(self.damping(x), dtype=float) @ v
        if self.disturbance is not None:
            rhs += np.asarray(self.disturbance(t), dtype=float)
        return np.linalg.solve(np.asarray(self.mass(x), dtype=float), rhs)

    def initial_state(self, init: InitialState):
        velocity = init.velocity if init.velocity is not None else (0.0,) * self.n_outputs
        return [float(p) for p in init.position] + [float(q) for q in velocity]

    def outputs(self, state):
        n = self.n_outputs
        return tuple(state[:n]), tuple(state[n:])

    def state_derivative(self, t, state, u):
        n = self.n_outputs
        x, v = state[:n], state[n:]
        return list(v) + [float(a) for a in self.el_accel(t, x, v, u)]


@dataclass(frozen=True)
class PointMass(ELPlant):
    """Decoupled probe plant ``m_i vdot_i + c_i v_i = u_i + d_i(t)``.

    ``PointMass((1.0, 1.0))`` is the double integrator.
    """

    masses: Tuple[float, ...]
    dampings: Optional[Tuple[float, ...]] = None
    disturbances: Optional[Tuple[TimeSignal, ...]] = None

    def __post_init__(self):
        n = len(self.masses)
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        object.__setattr__(self, "dampings", tuple(float(c) for c in (self.dampings or (0.0,) * n)))
        object.__setattr__(self, "disturbances",
                           tuple(self.disturbances or (Constant(0.0),) * n))
        if any(not m > 0.0 for m in self.masses):
            raise ValueError("point_mass masses must be > 0")
        if len(self.dampings) != n or len(self.disturbances) != n:
            raise ValueError("point_mass masses, dampings and disturbances must have equal length")
        object.__setattr__(self, "_dist", tuple(s.compile() for s in self.disturbances))

    @property
    def n_outputs(self):
        return len(self.masses)

    @property
    def state_size(self):
        return 2 * len(self.masses)

    def el_accel(self, t, x, v, u):
        return [(ui - c * vi + d(t)) / m
                for ui, vi, m, c, d in zip(u, v, self.masses, self.dampings, self._dist)]

    def state_derivative(self, t, state, u):
        n = len(self.masses)
        return list(state[n:]) + self.el_accel(t, state[:n], state[n:], u)


def _zero_disturbance():
    return (Constant(0.0), Constant(0.0))


@dataclass(frozen=True)
class MobileRobot:
    """Nonholonomic planar robot, output = hand point ``L`` ahead of the axle.

    ``damping`` is the 2x2 body-frame damping matrix acting on
    ``(v_T, omega)``; ``disturbance`` holds the two body-frame disturbance
    signals (force along the heading, torque).
    """

    mass: float = 10.0
    inertia: float = 1.0
    damping: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.5, 0.0), (0.0, 0.5))
    hand_offset: float = 0.2
    disturbance: Tuple[TimeSignal, TimeSignal] = field(default_factory=_zero_disturbance)

    n_outputs = 2
    state_size = 5

    def __post_init__(self):
        object.__setattr__(self, "damping", tuple(tuple(float(c) for c in row) for row in self.damping))
        object.__setattr__(self, "disturbance", tuple(self.disturbance))
        if not self.mass > 0.0 or not self.inertia > 0.0:
            raise ValueError("mobile_robot mass and inertia must be > 0")
        if not self.hand_offset > 0.0:
            raise SingularConfiguration(
                f"hand_offset must be > 0 for an invertible hand-point transform, got {self.hand_offset!r}")
        if len(self.damping) != 2 or any(len(row) != 2 for row in self.damping):
            raise ValueError("mobile_robot damping must be 2x2")
        if len(self.disturbance) != 2:
            raise ValueError("mobile_robot needs exactly two disturbance signals")
        object.__setattr__(self, "_dist", tuple(s.compile() for s in self.disturbance))

    # -- coordinate change -------------------------------------------------

    def hand_transform(self, pose: Sequence[float]) -> Tuple[float, float]:
        xc, yc, theta = pose[0], pose[1], pose[2]
        L = self.hand_offset
        return xc + L * math.cos(theta), yc + L * math.sin(theta)

    def jacobian(self, theta: float):
        """``J(theta)`` with ``pdot = J psi``; ``det J = hand_offset``."""
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        return ((c, -L * s), (s, L * c))

    def input_back_transform(self, u: Sequence[float], theta: float) -> Tuple[float, float]:
        """Body-frame input ``ubar = J(theta)^T u``."""
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        return c * u[0] + s * u[1], L * (-s * u[0] + c * u[1])

    def disturbance_at(self, t: float) -> Tuple[float, float]:
        return self._dist[0](t), self._dist[1](t)

    # -- body-frame dynamics -----------------------------------------------

    def body_accel(self, t: float, psi: Sequence[float], ubar: Sequence[float]):
        (d11, d12), (d21, d22) = self.damping
        vT, w = psi
        d1, d2 = self.disturbance_at(t)
        return ((ubar[0] + d1 - d11 * vT - d12 * w) / self.mass,
                (ubar[1] + d2 - d21 * vT - d22 * w) / self.inertia)

    def kinetic_energy(self, psi: Sequence[float]) -> float:
        return 0.5 * (self.mass * psi[0] ** 2 + self.inertia * psi[1] ** 2)

    def initial_state(self, init: InitialState):
        if init.heading is None:
            raise ValueError("mobile_robot initial state needs a heading")
        theta = float(init.heading)
        L = self.hand_offset
        xc = init.position[0] - L * math.cos(theta)
        yc = init.position[1] - L * math.sin(theta)
        vT, w = init.body_velocity if init.body_velocity is not None else (0.0, 0.0)
        return [xc, yc, theta, float(vT), float(w)]

    def outputs(self, state):
        xc, yc, theta, vT, w = state
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        return ((xc + L * c, yc + L * s),
                (c * vT - L * s * w, s * vT + L * c * w))

    def state_derivative(self, t, state, u):
        theta, vT, w = state[2], state[3], state[4]
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        ub0 = c * u[0] + s * u[1]
        ub1 = L * (-s * u[0] + c * u[1])
        (d11, d12), (d21, d22) = self.damping
        d1 = self._dist[0](t)
        d2 = self._dist[1](t)
        return [c * vT, s * vT, w,
                (ub0 + d1 - d11 * vT - d12 * w) / self.mass,
                (ub1 + d2 - d21 * vT - d22 * w) / self.inertia]

    # -- equivalent EL form in hand coordinates ------------------------------

    def _jac_inv(self, theta):
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        return np.array([[c, s], [-s / L, c / L]])

    def mass_matrix(self, theta: float) -> np.ndarray:
        """``M = J^-T Mbar J^-1``."""
        Ji = self._jac_inv(theta)
        return Ji.T @ np.diag([self.mass, self.inertia]) @ Ji

    def coriolis_matrix(self, theta: float, omega: float) -> np.ndarray:
        """``C = -M Jdot J^-1`` (the hand point has no gravity term)."""
        c, s, L = math.cos(theta), math.sin(theta), self.hand_offset
        Jdot = omega * np.array([[-s, -L * c], [c, -L * s]])
        return -self.mass_matrix(theta) @ Jdot @ self._jac_inv(theta)

    def damping_matrix(self, theta: float) -> np.ndarray:
        Ji = self._jac_inv(theta)
        return Ji.T @ np.asarray(self.damping) @ Ji

    def hand_disturbance(self, t: float, theta: float) -> np.ndarray:
        return self._jac_inv(theta).T @ np.asarray(self.disturbance_at(t))

    def heading_rate(self, theta: float, v: Sequence[float]) -> float:
        """``omega`` recovered from the hand velocity, second row of ``J^-1 v``."""
        c, s = math.cos(theta), math.sin(theta)
        return (-s * v[0] + c * v[1]) / self.hand_offset

    def el_accel(self, t, x, v, u, theta):
        """Hand acceleration from the transformed EL model; needs the heading."""
        v = np.asarray(v, dtype=float)
        omega = self.heading_rate(theta, v)
        rhs = (np.asarray(u, dtype=float) - self.coriolis_matrix(theta, omega) @ v
               - self.damping_matrix(theta) @ v + self.hand_disturbance(t, theta))
        return np.linalg.solve(self.mass_matrix(theta), rhs)


@dataclass(frozen=True)
class HandPointRobot:
    """``MobileRobot`` integrated in hand coordinates ``(p1, p2, theta, v1, v2)``."""

    robot: MobileRobot

    n_outputs = 2
    state_size = 5

    def initial_state(self, init: InitialState):
        xc, yc, theta, vT, w = self.robot.initial_state(init)
        p, v = self.robot.outputs([xc, yc, theta, vT, w])
        return [p[0], p[1], theta, v[0], v[1]]

    def outputs(self, state):
        return (state[0], state[1]), (state[3], state[4])

    def state_derivative(self, t, state, u):
        theta = state[2]
        v = (state[3], state[4])
        a = self.robot.el_accel(t, state[:2], v, u, theta)
        return [v[0], v[1], self.robot.heading_rate(theta, v), float(a[0]), float(a[1])]
