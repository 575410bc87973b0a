"""Fixed-step explicit integrators over plain Python float lists."""
from __future__ import annotations

from typing import Callable, List, Sequence

Derivative = Callable[[float, Sequence[float]], Sequence[float]]

SCHEMES = ("rk4", "euler")


def euler_step(f: Derivative, t: float, y: Sequence[float], h: float) -> List[float]:
    k = f(t, y)
    return [yi + h * ki for yi, ki in zip(y, k)]


def rk4_step(f: Derivative, t: float, y: Sequence[float], h: float,
             k1: Sequence[float] = None) -> List[float]:
    """Classic fourth-order Runge-Kutta step.

    ``k1`` may be passed in when the caller already evaluated ``f(t, y)``.
    """
    if k1 is None:
        k1 = f(t, y)
    half = 0.5 * h
    k2 = f(t + half, [yi + half * ki for yi, ki in zip(y, k1)])
    k3 = f(t + half, [yi + half * ki for yi, ki in zip(y, k2)])
    k4 = f(t + h, [yi + h * ki for yi, ki in zip(y, k3)])
    sixth = h / 6.0
    return [yi + sixth * (a + 2.0 * b + 2.0 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]


def step(scheme: str, f: Derivative, t: float, y: Sequence[float], h: float) -> List[float]:
    if scheme == "rk4":
        return rk4_step(f, t, y, h)
    if scheme == "euler":
        return euler_step(f, t, y, h)
    raise ValueError(f"unknown integration scheme {scheme!r}; expected one of {SCHEMES}")


def integrate(f: Derivative, y0: Sequence[float], t_end: float, h: float,
              scheme: str = "rk4"):
    """Integrate ``y' = f(t, y)`` from 0 to ``t_end``; returns ``(times, states)``."""
    n_steps = int(round(t_end / h))
    y = list(y0)
    times, states = [0.0], [list(y)]
    for k in range(n_steps):
        y = step(scheme, f, k * h, y, h)
        times.append((k + 1) * h)
        states.append(y)
    return times, states
