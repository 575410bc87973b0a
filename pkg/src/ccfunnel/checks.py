"""Invariant checks over a recorded trace.

:func:`check_trace` never raises on a bad trace; it reports every check
with a pass/fail flag, the worst-case margin and, for failures, the first
offending row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from .trace import SimTrace

if TYPE_CHECKING:
    from .scenario import Scenario

PHI_INACTIVE = 1e-9
RECOVERY_MARGIN = 0.05
RECOVERY_MIN_SPAN = 0.5
RECOVERY_REL_TOL = 0.10
RECOVERY_FLOOR = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: Optional[float] = None
    detail: str = ""
    row: Optional[int] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        margin = "" if self.margin is None else f" margin={self.margin:.6g}"
        where = "" if self.row is None else f" first_violation_row={self.row}"
        detail = f"  {self.detail}" if self.detail else ""
        return f"{status} {self.name}{margin}{where}{detail}"


@dataclass
class CheckReport:
    results: List[CheckResult] = field(default_factory=list)
    n_rows: int = 0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        lines = [f"trace check: {verdict} ({self.n_rows} rows)"]
        lines += [r.line() for r in self.results]
        return "\n".join(lines) + "\n"


def _first_bad(ok: np.ndarray) -> Optional[int]:
    """1-based data row of the first ``False`` in a per-row mask, else ``None``."""
    bad = np.flatnonzero(~ok)
    return int(bad[0]) + 1 if bad.size else None


def _strict(name: str, slack: np.ndarray, t: np.ndarray, what: str) -> CheckResult:
    """Pass iff every entry of ``slack`` (rows x outputs) is > 0."""
    if slack.size == 0:
        return CheckResult(name, False, None, "no rows")
    ok_rows = np.all(slack > 0.0, axis=1)
    margin = float(np.min(slack))
    row = _first_bad(ok_rows)
    if row is None:
        return CheckResult(name, True, margin, what)
    out = int(np.argmin(slack[row - 1])) + 1
    return CheckResult(name, False, margin,
                       f"{what}; violated on output {out} at t = {t[row - 1]!r}", row)


def _intervals(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs of ``True`` as ``(start, stop)`` slices."""
    runs, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def recovery_fits(trace: SimTrace, mu: float, k_c: float):
    """Fitted decay rates of ``phi`` on every quiet interval.

    An interval is a maximal run of rows with ``eta > mu + 0.05`` spanning at
    least 0.5 s in which ``phi`` is positive.  Returns tuples ``(output,
    side, t_start, t_stop, fitted_rate, max_abs_deviation)``, the deviation
    being from ``phi(t0) * exp(-k_c (t - t0))``.
    """
    t = trace.t
    fits = []
    sides = (("lower", trace.hard_upper - trace.soft_lower, trace.phi_lower),
             ("upper", trace.soft_upper - trace.hard_lower, trace.phi_upper))
    for side, eta, phi in sides:
        for i in range(trace.n_outputs):
            quiet = eta[:, i] > mu + RECOVERY_MARGIN
            for a, b in _intervals(quiet):
                if t[b - 1] - t[a] < RECOVERY_MIN_SPAN:
                    continue
                seg_t, seg_phi = t[a:b], phi[a:b, i]
                live = seg_phi > RECOVERY_FLOOR
                if np.count_nonzero(live) < 3 or seg_t[live][-1] - seg_t[live][0] < RECOVERY_MIN_SPAN:
                    continue
                tl, pl = seg_t[live], seg_phi[live]
                slope = np.polyfit(tl - tl[0], np.log(pl), 1)[0]
                model = pl[0] * np.exp(-k_c * (tl - tl[0]))
                fits.append((i + 1, side, float(tl[0]), float(tl[-1]), float(-slope),
                             float(np.max(np.abs(pl - model)))))
    return fits


def check_trace(trace: SimTrace, scenario: "Scenario") -> CheckReport:
    report = CheckReport(n_rows=len(trace))
    add = report.results.append
    t = trace.t

    if trace.faults:
        f = trace.faults[0]
        add(CheckResult("no_faults", False, None,
                        f"{len(trace.faults)} fault(s); first: {f.kind} at t = {f.time!r}: {f.message}"))
    else:
        add(CheckResult("no_faults", True, None, "run completed without faults"))

    expected = scenario.sim.n_rows
    if len(trace) == expected:
        add(CheckResult("complete", True, None, f"{expected} rows"))
    else:
        add(CheckResult("complete", False, None, f"{len(trace)} rows, expected {expected}"))

    if len(trace) == 0:
        add(CheckResult("hard_margin", False, None, "empty trace"))
        return report

    x = trace.x
    add(_strict("hard_margin", np.minimum(trace.hard_upper - x, x - trace.hard_lower), t,
                "min distance of x to the hard bounds"))
    add(_strict("funnel_membership", np.minimum(trace.rho_upper - x, x - trace.rho_lower), t,
                "min distance of x to the planned funnel"))
    add(_strict("velocity_funnel", trace.gamma_v - np.abs(trace.ev), t,
                "min of gamma_v - |e_v|"))
    gap = trace.rho_upper - trace.rho_lower
    res = _strict("funnel_gap", gap, t, "min planned funnel width (eps_c)")
    add(res)

    phi = np.hstack([trace.phi_lower, trace.phi_upper])
    phi_ok = np.all(phi >= 0.0, axis=1)
    add(CheckResult("phi_nonnegative", bool(phi_ok.all()), float(phi.min()),
                    "min modification signal", _first_bad(phi_ok)))

    respect = np.minimum(trace.rho_lower - trace.hard_lower, trace.hard_upper - trace.rho_upper)
    respect_ok = np.all(respect >= 0.0, axis=1)
    add(CheckResult("funnel_within_hard", bool(respect_ok.all()), float(respect.min()),
                    "min distance of the planned funnel inside the hard band",
                    _first_bad(respect_ok)))

    inactive = (trace.phi_lower < PHI_INACTIVE) & (trace.phi_upper < PHI_INACTIVE)
    soft_slack = np.minimum(trace.soft_upper - x, x - trace.soft_lower)
    soft_ok = ~inactive | (soft_slack > 0.0)
    rows_ok = np.all(soft_ok, axis=1)
    margin = float(soft_slack[inactive].min()) if inactive.any() else None
    add(CheckResult("soft_when_inactive", bool(rows_ok.all()), margin,
                    f"soft bounds hold on {int(inactive.sum())} output-rows with phi inactive",
                    _first_bad(rows_ok)))

    u_abs = np.abs(trace.u)
    finite = bool(np.all(np.isfinite(u_abs)))
    add(CheckResult("max_abs_u", finite, float(np.max(u_abs)),
                    "largest control magnitude (reported, not bounded)"))

    cfg = scenario.planner
    if cfg.variant != "nonsmooth":
        add(CheckResult("recovery_rate", True, None,
                        "not applicable to the smooth planner (switch weight never vanishes)"))
    else:
        fits = recovery_fits(trace, cfg.mu, cfg.k_c)
        if not fits:
            add(CheckResult("recovery_rate", True, None, "no decay interval to fit"))
        else:
            worst = max(fits, key=lambda f: abs(f[4] - cfg.k_c))
            rel = abs(worst[4] - cfg.k_c) / cfg.k_c
            add(CheckResult("recovery_rate", rel <= RECOVERY_REL_TOL, rel,
                            f"{len(fits)} interval(s); worst fitted rate {worst[4]:.6g} vs "
                            f"k_c = {cfg.k_c:.6g} on output {worst[0]} ({worst[1]}) "
                            f"t in [{worst[2]:.4g}, {worst[3]:.4g}]"))
    return report
