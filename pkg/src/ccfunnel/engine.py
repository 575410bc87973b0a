"""Fixed-step closed-loop simulation.

The integrated state is the plant state followed by ``phi_lower`` and
``phi_upper`` for every output.  At each integrator stage the planner
bounds, the controller and the plant derivative are evaluated at the stage
time, so funnel and state never drift out of phase.  After a completed step
the modification signals are clamped at zero.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Iterable, List, Optional, Sequence

from . import planner as _planner
from .controller import DELTA_EDGE, control_law, controller_step
from .errors import FunnelError, NonFiniteValue
from .integrators import SCHEMES, rk4_step
from .signals import CompiledBank
from .trace import SERIES, FaultRecord, SimTrace

if TYPE_CHECKING:
    from .scenario import Scenario

OpenLoopControl = Callable[[float, Sequence[float], Sequence[float]], Sequence[float]]


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 30.0
    h: float = 1e-3
    scheme: str = "rk4"
    record_stride: int = 1

    def __post_init__(self):
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be a positive finite number, got {self.t_end!r}")
        if not 0.0 < self.h <= 0.01:
            raise ValueError(f"step h must satisfy 0 < h <= 0.01, got {self.h!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.h))

    @property
    def n_rows(self) -> int:
        return self.n_steps // self.record_stride + 1


class ClosedLoop:
    """Plant + planner + controller as one ODE ``y' = f(t, y)``.

    ``control`` replaces the funnel controller by an open-loop/probe law
    ``u = control(t, x, v)``; the controller columns of recorded rows then
    hold ``vd = v`` (so ``ev = 0``) and unchecked normalized positions.
    """

    def __init__(self, scenario: "Scenario", control: Optional[OpenLoopControl] = None):
        self.scenario = scenario
        self.plant = scenario.plant
        self.pairs = scenario.pairs
        self.cfg = scenario.planner
        self.control = control
        self.ctrl = scenario.controller_config()
        self.n = len(self.pairs)
        self.k = self.plant.state_size
        # one bank: 4 bounds per output, then the velocity envelopes
        self._signals = CompiledBank(
            [sig for p in self.pairs for sig in (p.hard_lower, p.hard_upper, p.soft_lower, p.soft_upper)]
            + list(self.ctrl.gamma_v))
        self._stage = _planner.stage_function(self.cfg)
        self._law = control_law(self.ctrl.k_x, self.ctrl.k_v)

    def initial_state(self) -> List[float]:
        return list(self.plant.initial_state(self.scenario.initial)) + [0.0] * (2 * self.n)

    def _funnel(self, t, y):
        """Planner rates, planned funnel, raw bound values and ``gamma_v`` at one stage."""
        n, k, stage = self.n, self.k, self._stage
        vals = self._signals(t)
        dphi_lower, dphi_upper, rho_lower, rho_upper = [], [], [], []
        for i in range(n):
            dl, du, lo, hi = stage(y[k + i], y[k + n + i], vals[4 * i], vals[4 * i + 1],
                                   vals[4 * i + 2], vals[4 * i + 3], i)
            dphi_lower.append(dl)
            dphi_upper.append(du)
            rho_lower.append(lo)
            rho_upper.append(hi)
        return dphi_lower, dphi_upper, rho_lower, rho_upper, vals

    def derivative(self, t: float, y: Sequence[float]) -> List[float]:
        return self._stage_eval(t, y)[0]

    def _stage_eval(self, t, y):
        dphi_lower, dphi_upper, rho_lower, rho_upper, vals = self._funnel(t, y)
        plant_state = y[:self.k]
        x, v = self.plant.outputs(plant_state)
        if self.control is None:
            u = self._law(x, v, rho_lower, rho_upper, vals[4 * self.n:])
        else:
            u = list(self.control(t, x, v))
        dy = self.plant.state_derivative(t, plant_state, u) + dphi_lower + dphi_upper
        if not math.isfinite(sum(dy)):
            self._raise_non_finite(t, y, x, v, rho_lower, rho_upper, u, dy)
        return dy, x, v, rho_lower, rho_upper, vals

    def evaluate(self, t: float, y: Sequence[float], record: bool = False):
        """Return ``(dy, row)``; ``row`` is a dict of per-output values when ``record``.

        The recorded row goes through :func:`controller_step`; ``dy`` is
        always :meth:`derivative`, which yields the same numbers.
        """
        dy, x, v, rho_lower, rho_upper, vals = self._stage_eval(t, y)
        if not record:
            return dy, None
        n, k = self.n, self.k
        if self.control is None:
            out = controller_step(t, x, v, rho_lower, rho_upper, self.ctrl)
            xhat, vd, ev, evhat, u = out.x_hat, out.v_d, out.e_v, out.ev_hat, out.u
        else:
            xhat = [(xi - 0.5 * (hi + lo)) / (0.5 * (hi - lo))
                    for xi, lo, hi in zip(x, rho_lower, rho_upper)]
            vd, ev, evhat = list(v), [0.0] * n, [0.0] * n
            u = list(self.control(t, x, v))
        row = {
            "x": x, "v": v, "vd": vd, "ev": ev, "u": u, "xhat": xhat, "evhat": evhat,
            "gamma_v": vals[4 * n:],
            "phi_lower": y[k:k + n], "phi_upper": y[k + n:k + 2 * n],
            "rho_lower": rho_lower, "rho_upper": rho_upper,
            "hard_lower": vals[0:4 * n:4], "hard_upper": vals[1:4 * n:4],
            "soft_lower": vals[2:4 * n:4], "soft_upper": vals[3:4 * n:4],
        }
        return dy, row

    def _raise_non_finite(self, t, y, x, v, rho_lower, rho_upper, u, dy):
        named = [("state", y), ("x", x), ("v", v), ("rho_lower", rho_lower),
                 ("rho_upper", rho_upper), ("u", u), ("state derivative", dy)]
        for name, values in named:
            for i, value in enumerate(values):
                if not math.isfinite(value):
                    raise NonFiniteValue(f"non-finite {name}[{i}] = {value!r} at t = {t!r}",
                                         index=i, time=t)
        raise NonFiniteValue(f"non-finite value at t = {t!r}", time=t)


def _fault_record(exc: FunnelError, t: float) -> FaultRecord:
    when = exc.time if exc.time is not None else t
    return FaultRecord(float(when), exc.kind, exc.index, str(exc))


def _run(loop: ClosedLoop, t_end: float, h: float, scheme: str, stride: int) -> SimTrace:
    n_steps = int(round(t_end / h))
    y = loop.initial_state()
    k, n = loop.k, loop.n
    phi_slice = slice(k, k + 2 * n)
    times: List[float] = []
    rows = {key: [] for key in SERIES}
    faults: List[FaultRecord] = []
    f = loop.derivative
    t = 0.0
    try:
        for step in range(n_steps + 1):
            t = step * h
            recording = step % stride == 0
            k1, row = loop.evaluate(t, y, record=recording)
            if recording:
                times.append(t)
                for key in SERIES:
                    rows[key].append(row[key])
            if step == n_steps:
                break
            if scheme == "rk4":
                y = rk4_step(f, t, y, h, k1)
            else:
                y = [yi + h * ki for yi, ki in zip(y, k1)]
            y[phi_slice] = [p if p > 0.0 else 0.0 for p in y[phi_slice]]
    except FunnelError as exc:
        faults.append(_fault_record(exc, t))
    return SimTrace.from_rows(times, rows, faults)


def simulate(scenario: "Scenario", config: Optional[SimConfig] = None,
             control: Optional[OpenLoopControl] = None) -> SimTrace:
    """Integrate the closed loop and record a trace.

    A fault anywhere (funnel edge reached, planner singularity, non-finite
    value) ends the run; the trace then holds every row recorded so far and
    the fault in ``trace.faults``.  Static validation failures raise
    ``ScenarioError`` before anything is integrated.
    """
    config = config or scenario.sim
    scenario.validate()
    loop = ClosedLoop(scenario, control)
    return _run(loop, config.t_end, config.h, config.scheme, config.record_stride)


ORACLE_STEP = 1e-5


def oracle_simulate(scenario: "Scenario", h: float = ORACLE_STEP, t_end: Optional[float] = None,
                    record_dt: Optional[float] = None,
                    control: Optional[OpenLoopControl] = None) -> SimTrace:
    """Reference run of the same interconnection with explicit Euler at a tiny step.

    Rows are recorded every ``record_dt`` seconds (default: the scenario's
    own recording interval) so traces line up with :func:`simulate`.
    """
    t_end = scenario.sim.t_end if t_end is None else t_end
    if record_dt is None:
        record_dt = scenario.sim.h * scenario.sim.record_stride
    stride = max(1, int(round(record_dt / h)))
    scenario.validate()
    loop = ClosedLoop(scenario, control)
    return _run(loop, t_end, h, "euler", stride)


def _simulate_task(args):
    scenario, config = args
    return simulate(scenario, config)


def run_batch(scenarios: Iterable["Scenario"], config: Optional[SimConfig] = None,
              workers: Optional[int] = None) -> List[SimTrace]:
    """Simulate independent scenarios, in worker processes when ``workers > 1``."""
    jobs = [(s, config) for s in scenarios]
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [_simulate_task(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_task, jobs))


def with_sim(scenario: "Scenario", **changes) -> "Scenario":
    """Copy of ``scenario`` with some :class:`SimConfig` fields replaced."""
    return replace(scenario, sim=replace(scenario.sim, **changes))


__all__ = ["SimConfig", "ClosedLoop", "simulate", "oracle_simulate", "run_batch",
           "with_sim", "ORACLE_STEP", "DELTA_EDGE"]
