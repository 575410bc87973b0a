"""Two-step low-complexity prescribed-performance controller.

Step I maps each output into its planned funnel, ``xhat in (-1, 1)``, and
asks for a velocity that pushes it back toward the funnel centre.  Step II
does the same for the velocity error inside an exponentially shrinking
symmetric funnel ``|e_v| < gamma_v(t)`` and produces the generalized force.

Nothing here knows the plant: inputs are time, measured outputs and
velocities, and the planned funnel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from .errors import FunnelViolation, TransformDomainError, VelocityFunnelViolation
from .signals import TimeSignal

DELTA_EDGE = 1e-9


@dataclass(frozen=True)
class ControllerConfig:
    k_x: float
    k_v: float
    gamma_v: Tuple[TimeSignal, ...]

    def __post_init__(self):
        object.__setattr__(self, "gamma_v", tuple(self.gamma_v))
        if not self.k_x > 0.0:
            raise ValueError(f"k_x must be > 0, got {self.k_x!r}")
        if not self.k_v > 0.0:
            raise ValueError(f"k_v must be > 0, got {self.k_v!r}")


@dataclass(frozen=True)
class ControllerOutput:
    v_d: Tuple[float, ...]
    e_v: Tuple[float, ...]
    u: Tuple[float, ...]
    x_hat: Tuple[float, ...]
    ev_hat: Tuple[float, ...]
    eps_x: Tuple[float, ...]
    eps_v: Tuple[float, ...]


def normalize_output(x: float, rho_lower: float, rho_upper: float) -> float:
    """Position of ``x`` in the funnel, mapped so the edges land on -1 and +1."""
    return (x - 0.5 * (rho_upper + rho_lower)) / (0.5 * (rho_upper - rho_lower))


def transform(z: float) -> float:
    """Barrier map ``ln((1 + z) / (1 - z))`` from (-1, 1) onto the real line."""
    if not -1.0 < z < 1.0:
        raise TransformDomainError(f"transform argument {z!r} outside (-1, 1)")
    return math.log1p(z) - math.log1p(-z)


def inverse_transform(w: float) -> float:
    """Inverse of :func:`transform`, ``(e^w - 1) / (e^w + 1)``."""
    return math.tanh(0.5 * w)


def _position_term(x, rho_lower, rho_upper, k_x, index):
    width = rho_upper - rho_lower
    if not width > 0.0:
        raise FunnelViolation(f"empty funnel on output {index}: rho_upper - rho_lower = {width!r}",
                              index=index)
    z = (x - 0.5 * (rho_upper + rho_lower)) / (0.5 * width)
    if not abs(z) < 1.0 - DELTA_EDGE:
        raise FunnelViolation(
            f"output {index} at normalized position {z!r}: x = {x!r} not inside "
            f"({rho_lower!r}, {rho_upper!r})", index=index)
    eps = math.log1p(z) - math.log1p(-z)
    return z, eps, -k_x * 4.0 / (width * (1.0 - z * z)) * eps


def _velocity_term(e, gamma, k_v, index):
    if not gamma > 0.0:
        raise VelocityFunnelViolation(f"velocity funnel gamma_v[{index}] = {gamma!r} is not positive",
                                      index=index)
    z = e / gamma
    if not abs(z) < 1.0 - DELTA_EDGE:
        raise VelocityFunnelViolation(
            f"velocity error {index} at normalized value {z!r}: |e_v| = {abs(e)!r} "
            f">= gamma_v = {gamma!r}", index=index)
    eps = math.log1p(z) - math.log1p(-z)
    return z, eps, -k_v * 2.0 / (gamma * (1.0 - z * z)) * eps


def velocity_reference(x: Sequence[float], rho_lower: Sequence[float],
                       rho_upper: Sequence[float], k_x: float) -> Tuple[float, ...]:
    """Desired velocity per output, ``-k_x * xi_x * T(xhat)``."""
    return tuple(_position_term(xi, lo, hi, k_x, i)[2]
                 for i, (xi, lo, hi) in enumerate(zip(x, rho_lower, rho_upper)))


def control_input(e_v: Sequence[float], gamma_v: Sequence[float], k_v: float) -> Tuple[float, ...]:
    """Generalized force per output, ``-k_v * xi_v * T(e_v / gamma_v)``."""
    return tuple(_velocity_term(e, g, k_v, i)[2]
                 for i, (e, g) in enumerate(zip(e_v, gamma_v)))


def controller_step(t: float, x: Sequence[float], v: Sequence[float],
                    rho_lower: Sequence[float], rho_upper: Sequence[float],
                    cfg: ControllerConfig) -> ControllerOutput:
    x_hat, eps_x, v_d = [], [], []
    for i, (xi, lo, hi) in enumerate(zip(x, rho_lower, rho_upper)):
        z, eps, vd = _position_term(xi, lo, hi, cfg.k_x, i)
        x_hat.append(z)
        eps_x.append(eps)
        v_d.append(vd)
    e_v, ev_hat, eps_v, u = [], [], [], []
    for i, (vi, vd, gamma) in enumerate(zip(v, v_d, cfg.gamma_v)):
        e = vi - vd
        z, eps, ui = _velocity_term(e, gamma.value(t), cfg.k_v, i)
        e_v.append(e)
        ev_hat.append(z)
        eps_v.append(eps)
        u.append(ui)
    return ControllerOutput(tuple(v_d), tuple(e_v), tuple(u), tuple(x_hat),
                            tuple(ev_hat), tuple(eps_x), tuple(eps_v))


def control_law(k_x: float, k_v: float):
    """Fused ``(x, v, rho_lower, rho_upper, gamma_values) -> u`` for simulation loops.

    Same arithmetic as :func:`controller_step` (bit-identical ``u``) without
    building the intermediate record.
    """
    log1p = math.log1p
    edge = 1.0 - DELTA_EDGE

    def u_of(x, v, rho_lower, rho_upper, gamma_values):
        u = []
        for i in range(len(x)):
            lo, hi = rho_lower[i], rho_upper[i]
            width = hi - lo
            z = (x[i] - 0.5 * (hi + lo)) / (0.5 * width)
            if not (width > 0.0 and abs(z) < edge):
                _position_term(x[i], lo, hi, k_x, i)
            vd = -k_x * 4.0 / (width * (1.0 - z * z)) * (log1p(z) - log1p(-z))
            e = v[i] - vd
            gamma = gamma_values[i]
            ze = e / gamma if gamma > 0.0 else math.inf
            if not abs(ze) < edge:
                _velocity_term(e, gamma, k_v, i)
            u.append(-k_v * 2.0 / (gamma * (1.0 - ze * ze)) * (log1p(ze) - log1p(-ze)))
        return u

    return u_of

