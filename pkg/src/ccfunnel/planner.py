"""Online constraint-consistent funnel planning.

For every output the planner keeps two nonnegative modification signals,
``phi_lower`` and ``phi_upper``, which relax the soft bounds whenever the
soft band is about to detach from the hard band, and decay exponentially
at rate ``k_c`` once the conflict is over.  The funnel handed to the
controller is

    rho_lower = max(soft_lower - phi_lower, hard_lower)
    rho_upper = min(soft_upper + phi_upper, hard_upper)

or, in the smooth variant, a log-sum-exp over-approximation of the max
and under-approximation of the min (so the smooth funnel always sits
inside the nonsmooth one, and therefore inside the hard band).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import PlannerInfeasible
from .integrators import SCHEMES, step as _integrator_step
from .signals import TimeSignal

DELTA_FLOOR = 1e-9
VARIANTS = ("smooth", "nonsmooth")


@dataclass(frozen=True)
class ConstraintPair:
    """Hard (safety) and soft (performance) bounds on one output."""

    hard_lower: TimeSignal
    hard_upper: TimeSignal
    soft_lower: TimeSignal
    soft_upper: TimeSignal
    eps_hard: float
    eps_soft: float

    def __post_init__(self):
        if not self.eps_hard > 0.0:
            raise ValueError(f"eps_hard must be > 0, got {self.eps_hard!r}")
        if not self.eps_soft > 0.0:
            raise ValueError(f"eps_soft must be > 0, got {self.eps_soft!r}")

    def at(self, t: float) -> Tuple[float, float, float, float]:
        """``(hard_lower, hard_upper, soft_lower, soft_upper)`` at ``t``."""
        return (self.hard_lower.value(t), self.hard_upper.value(t),
                self.soft_lower.value(t), self.soft_upper.value(t))

    def compatible(self, t: float) -> bool:
        hl, hu, sl, su = self.at(t)
        return hu > sl and su > hl

    def width_issues(self, times: Sequence[float]) -> List[str]:
        """Sampled check that both bands keep at least their declared width."""
        issues = []
        for name, lo, hi, eps in (("hard", self.hard_lower, self.hard_upper, self.eps_hard),
                                  ("soft", self.soft_lower, self.soft_upper, self.eps_soft)):
            for t in times:
                width = hi.value(t) - lo.value(t)
                if not width >= eps:
                    issues.append(f"{name} band width {width:.6g} < eps_{name} = {eps:.6g} "
                                  f"at t = {t:.6g} s")
                    break
        return issues


@dataclass(frozen=True)
class PlannerConfig:
    mu: float = 0.01
    k_c: float = 3.0
    variant: str = "smooth"
    kappa: float = 4.0
    nu: float = 10.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"planner variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("mu", "k_c", "kappa", "nu"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"planner {name} must be a positive finite number, got {value!r}")

    @property
    def smooth(self) -> bool:
        return self.variant == "smooth"


@dataclass(frozen=True)
class PlannerState:
    phi_lower: Tuple[float, ...]
    phi_upper: Tuple[float, ...]

    @classmethod
    def initial(cls, n: int) -> "PlannerState":
        return cls((0.0,) * n, (0.0,) * n)


def eta(pair: ConstraintPair, t: float) -> Tuple[float, float]:
    """Compatibility gaps ``(hard_upper - soft_lower, soft_upper - hard_lower)``."""
    hl, hu, sl, su = pair.at(t)
    return hu - sl, su - hl


def switch_weight(gap: float, cfg: PlannerConfig) -> float:
    """Weight in [0, 1] of the relaxation term; 1 when the gap is below ``mu``.

    The nonsmooth variant uses sign(0) = 0, so exactly at the threshold the
    weight is 1/2, same as the tanh variant.
    """
    z = gap - cfg.mu
    if cfg.variant == "smooth":
        return 0.5 * (1.0 - math.tanh(cfg.kappa * z))
    if z > 0.0:
        return 0.0
    if z < 0.0:
        return 1.0
    return 0.5


def modification_rate(phi: float, gap: float, cfg: PlannerConfig,
                      index: Optional[int] = None) -> float:
    """Time derivative of one modification signal given its compatibility gap."""
    denom = gap + phi
    if not denom > DELTA_FLOOR:
        raise PlannerInfeasible(
            f"eta + phi = {denom!r} reached the singularity floor {DELTA_FLOOR}"
            + (f" on output {index}" if index is not None else "")
            + "; constraint bands violate the width/compatibility requirements"
              " or the integration step is too coarse",
            index=index)
    return switch_weight(gap, cfg) / denom - cfg.k_c * phi


def modification_rates(state: PlannerState, eta_lower: Sequence[float],
                       eta_upper: Sequence[float], cfg: PlannerConfig):
    """Rates for every output; returns ``(dphi_lower, dphi_upper)`` tuples."""
    d_lower = tuple(modification_rate(p, g, cfg, i)
                    for i, (p, g) in enumerate(zip(state.phi_lower, eta_lower)))
    d_upper = tuple(modification_rate(p, g, cfg, i)
                    for i, (p, g) in enumerate(zip(state.phi_upper, eta_upper)))
    return d_lower, d_upper


def smooth_max(a: float, b: float, nu: float) -> float:
    """``(1/nu) ln(e^(nu a) + e^(nu b))`` evaluated without overflow.

    The exact value always exceeds ``max(a, b)``.  When the correction is
    below half an ulp of the max, the result is rounded up to the next
    double so the strict inequality survives in floating point.
    """
    m, d = (a, b - a) if a >= b else (b, a - b)
    out = m + math.log1p(math.exp(nu * d)) / nu
    return out if out > m else math.nextafter(m, math.inf)


def smooth_min(a: float, b: float, nu: float) -> float:
    return -smooth_max(-a, -b, nu)


def bounds_from_values(phi_lower: float, phi_upper: float, hard_lower: float,
                       hard_upper: float, soft_lower: float, soft_upper: float,
                       cfg: PlannerConfig) -> Tuple[float, float]:
    """Funnel ``(rho_lower, rho_upper)`` for one output from already-evaluated bounds."""
    relaxed_lower = soft_lower - phi_lower
    relaxed_upper = soft_upper + phi_upper
    if cfg.variant == "smooth":
        return (smooth_max(relaxed_lower, hard_lower, cfg.nu),
                smooth_min(relaxed_upper, hard_upper, cfg.nu))
    return max(relaxed_lower, hard_lower), min(relaxed_upper, hard_upper)


def funnel_bounds(state: PlannerState, pairs: Sequence[ConstraintPair],
                  cfg: PlannerConfig, t: float):
    """Planned funnel for every output at ``t``: ``(rho_lower, rho_upper)`` tuples."""
    lower, upper = [], []
    for pl, pu, pair in zip(state.phi_lower, state.phi_upper, pairs):
        lo, hi = bounds_from_values(pl, pu, *pair.at(t), cfg)
        lower.append(lo)
        upper.append(hi)
    return tuple(lower), tuple(upper)


def stage_function(cfg: PlannerConfig):
    """Fused per-output planner evaluation for simulation loops.

    Returns ``f(phi_lower, phi_upper, hl, hu, sl, su, index) -> (dphi_lower,
    dphi_upper, rho_lower, rho_upper)``, bit-identical to calling
    :func:`modification_rate` twice and :func:`bounds_from_values`.
    """
    mu, k_c, kappa, nu = cfg.mu, cfg.k_c, cfg.kappa, cfg.nu
    tanh, exp, log1p, nextafter, inf = math.tanh, math.exp, math.log1p, math.nextafter, math.inf

    def slow_path(phi_lower, phi_upper, gap_lower, gap_upper, index):
        # builds the diagnostic
        modification_rate(phi_lower, gap_lower, cfg, index)
        modification_rate(phi_upper, gap_upper, cfg, index)

    def smooth(phi_lower, phi_upper, hl, hu, sl, su, index):
        gap_lower = hu - sl
        gap_upper = su - hl
        den_lower = gap_lower + phi_lower
        den_upper = gap_upper + phi_upper
        if not (den_lower > DELTA_FLOOR and den_upper > DELTA_FLOOR):
            slow_path(phi_lower, phi_upper, gap_lower, gap_upper, index)
        d_lower = 0.5 * (1.0 - tanh(kappa * (gap_lower - mu))) / den_lower - k_c * phi_lower
        d_upper = 0.5 * (1.0 - tanh(kappa * (gap_upper - mu))) / den_upper - k_c * phi_upper
        a = sl - phi_lower
        m, d = (a, hl - a) if a >= hl else (hl, a - hl)
        lo = m + log1p(exp(nu * d)) / nu
        if not lo > m:
            lo = nextafter(m, inf)
        # smooth_min(b, hu) = -smooth_max(-b, -hu)
        nb = -(su + phi_upper)
        m, d = (nb, -hu - nb) if nb >= -hu else (-hu, nb - -hu)
        hi = m + log1p(exp(nu * d)) / nu
        hi = -(hi if hi > m else nextafter(m, inf))
        return d_lower, d_upper, lo, hi

    def nonsmooth(phi_lower, phi_upper, hl, hu, sl, su, index):
        gap_lower = hu - sl
        gap_upper = su - hl
        den_lower = gap_lower + phi_lower
        den_upper = gap_upper + phi_upper
        if not (den_lower > DELTA_FLOOR and den_upper > DELTA_FLOOR):
            slow_path(phi_lower, phi_upper, gap_lower, gap_upper, index)
        z = gap_lower - mu
        w = 0.0 if z > 0.0 else (1.0 if z < 0.0 else 0.5)
        d_lower = w / den_lower - k_c * phi_lower
        z = gap_upper - mu
        w = 0.0 if z > 0.0 else (1.0 if z < 0.0 else 0.5)
        d_upper = w / den_upper - k_c * phi_upper
        a = sl - phi_lower
        b = su + phi_upper
        return d_lower, d_upper, (a if a >= hl else hl), (b if b <= hu else hu)

    return smooth if cfg.variant == "smooth" else nonsmooth


def _planner_derivative(pairs: Sequence[ConstraintPair], cfg: PlannerConfig):
    n = len(pairs)

    def f(t, y):
        out_lower, out_upper = [], []
        for i, pair in enumerate(pairs):
            gap_lower, gap_upper = eta(pair, t)
            out_lower.append(modification_rate(y[i], gap_lower, cfg, i))
            out_upper.append(modification_rate(y[n + i], gap_upper, cfg, i))
        return out_lower + out_upper

    return f


def step_modification(state: PlannerState, pairs: Sequence[ConstraintPair],
                      cfg: PlannerConfig, t: float, h: float,
                      scheme: str = "rk4") -> PlannerState:
    """Advance the modification signals alone by one step of ``h`` seconds.

    The result is clamped at zero: the exact solution never goes negative
    but a discrete step can undershoot by O(h^2).
    """
    if not h > 0.0:
        raise ValueError(f"step h must be > 0, got {h!r}")
    n = len(pairs)
    y = list(state.phi_lower) + list(state.phi_upper)
    try:
        y = _integrator_step(scheme, _planner_derivative(pairs, cfg), t, y, h)
    except PlannerInfeasible as exc:
        exc.time = t
        raise
    y = [v if v > 0.0 else 0.0 for v in y]
    return PlannerState(tuple(y[:n]), tuple(y[n:]))


@dataclass
class PlannerTrace:
    """Planner-only trajectory; arrays are (rows,) or (rows, n_outputs)."""

    t: np.ndarray
    phi_lower: np.ndarray
    phi_upper: np.ndarray
    eta_lower: np.ndarray
    eta_upper: np.ndarray
    rho_lower: np.ndarray
    rho_upper: np.ndarray


def simulate_planner(pairs: Sequence[ConstraintPair], cfg: PlannerConfig,
                     t_end: float, h: float, scheme: str = "rk4",
                     state: Optional[PlannerState] = None) -> PlannerTrace:
    """Run the planner open-loop (no plant) and record every step."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    state = state or PlannerState.initial(len(pairs))
    n_steps = int(round(t_end / h))
    rows = {k: [] for k in ("t", "pl", "pu", "el", "eu", "rl", "ru")}
    for k in range(n_steps + 1):
        t = k * h
        gaps = [eta(p, t) for p in pairs]
        rho_lower, rho_upper = funnel_bounds(state, pairs, cfg, t)
        rows["t"].append(t)
        rows["pl"].append(state.phi_lower)
        rows["pu"].append(state.phi_upper)
        rows["el"].append([g[0] for g in gaps])
        rows["eu"].append([g[1] for g in gaps])
        rows["rl"].append(rho_lower)
        rows["ru"].append(rho_upper)
        if k < n_steps:
            state = step_modification(state, pairs, cfg, t, h, scheme)
    arr = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    return PlannerTrace(arr["t"], arr["pl"], arr["pu"], arr["el"], arr["eu"],
                        arr["rl"], arr["ru"])
