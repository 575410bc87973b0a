"""Scenario files.

A scenario is a nested key-value text file::

    name = "demo"                       # quoted string
    planner { variant = smooth, mu = 0.01, k_c = 3.0 }
    plant = mobile_robot { mass = 10.0, hand_offset = 0.2 }
    outputs = [
      output {
        hard_lower = constant { value = -6.58 }
        reference = sinusoid { amp = 5.8, omega = 0.24, phase = 1.5, offset = -1.5 }
      }
    ]

``key { ... }`` is a section, ``key = tag { ... }`` a tagged value,
``[ ... ]`` a list; entries and list items are separated by newlines or
commas; ``#`` starts a comment.  Bare words (``smooth``, ``rk4``, ``auto``)
are symbols.

:func:`dumps` writes the canonical form, which :func:`loads` reads back to
an equal scenario (and ``dumps`` of that is byte-identical).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from . import planner as _planner
from .controller import DELTA_EDGE, ControllerConfig, velocity_reference
from .engine import SimConfig
from .errors import FunnelError, ScenarioError, ScenarioParseError
from .planner import ConstraintPair, PlannerConfig
from .plant import InitialState, MobileRobot, PointMass
from .signals import Constant, ExpEnvelope, Scaled, Sinusoid, Sum, TimeSignal

AUTO_SCALE = 1.5


# ---------------------------------------------------------------------------
# syntax tree


class Symbol(str):
    """Bare word in a scenario file, as opposed to a quoted string."""


@dataclass
class Tagged:
    tag: str
    fields: Dict[str, object]


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<punct>[{}\[\]=,])
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_]))
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


def _tokenize(text: str, source: Optional[str]):
    tokens, line, pos = [], 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ScenarioParseError(f"unexpected character {text[pos]!r}", line, source)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            tokens.append(("sep", "\n", line))
            line += 1
        elif kind == "punct":
            tokens.append(("sep" if value == "," else value, value, line))
        elif kind == "string":
            try:
                tokens.append(("string", json.loads(value), line))
            except ValueError:
                raise ScenarioParseError(f"bad escape in string {value}", line, source) from None
        elif kind == "number":
            tokens.append(("number", value, line))
        elif kind == "word":
            tokens.append(("word", value, line))
        pos = m.end()
    tokens.append(("eof", "", line))
    return tokens


class _Parser:
    def __init__(self, text: str, source: Optional[str]):
        self.tokens = _tokenize(text, source)
        self.pos = 0
        self.source = source
        self.lines: Dict[Tuple, int] = {}

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            shown = "end of file" if tok[0] == "eof" else repr(tok[1])
            self.error(f"expected {kind!r}, found {shown}", tok)
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ScenarioParseError(message, tok[2], self.source)

    def skip_seps(self):
        while self.peek()[0] == "sep":
            self.pos += 1

    def entries(self, path, closing):
        out: Dict[str, object] = {}
        while True:
            self.skip_seps()
            tok = self.peek()
            if tok[0] == closing:
                return out
            key_tok = self.take("word")
            key = key_tok[1]
            if key in out:
                self.error(f"duplicate key {key!r}", key_tok)
            self.lines[path + (key,)] = key_tok[2]
            nxt = self.peek()
            if nxt[0] == "=":
                self.take("=")
                out[key] = self.value(path + (key,))
            elif nxt[0] == "{":
                self.take("{")
                out[key] = self.entries(path + (key,), "}")
                self.take("}")
            else:
                self.error(f"expected '=' or '{{' after {key!r}", nxt)
            if self.peek()[0] not in ("sep", closing):
                self.error(f"expected a newline or ',' after {key!r}")

    def value(self, path):
        tok = self.take()
        kind = tok[0]
        if kind == "number":
            text = tok[1]
            if re.fullmatch(r"[-+]?\d+", text):
                return int(text)
            return float(text)
        if kind == "string":
            return tok[1]
        if kind == "word":
            if self.peek()[0] == "{":
                self.take("{")
                fields = self.entries(path, "}")
                self.take("}")
                return Tagged(tok[1], fields)
            return Symbol(tok[1])
        if kind == "[":
            items = []
            while True:
                self.skip_seps()
                if self.peek()[0] == "]":
                    self.take("]")
                    return items
                self.lines[path + (len(items),)] = self.peek()[2]
                items.append(self.value(path + (len(items),)))
                if self.peek()[0] not in ("sep", "]"):
                    self.error("expected ',' or ']' in list")
        self.error(f"expected a value, found {tok[1]!r}", tok)


def parse_tree(text: str, source: Optional[str] = None):
    """Parse scenario text into ``(tree, lines)``; ``lines`` maps key paths to line numbers."""
    p = _Parser(text, source)
    tree = p.entries((), "eof")
    p.take("eof")
    return tree, p.lines


def _fmt_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Symbol):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot write non-finite number {value!r}")
        return repr(value)
    raise TypeError(f"cannot format {type(value).__name__}")


def _is_flat(value) -> bool:
    if isinstance(value, Tagged):
        return all(not isinstance(v, (Tagged, dict, list)) for v in value.fields.values())
    if isinstance(value, list):
        return all(not isinstance(v, (Tagged, dict)) and (not isinstance(v, list) or _is_flat(v))
                   for v in value)
    return not isinstance(value, dict)


def _fmt_value(value, indent: str) -> str:
    inner = indent + "  "
    if isinstance(value, Tagged):
        if _is_flat(value):
            body = ", ".join(f"{k} = {_fmt_value(v, inner)}" for k, v in value.fields.items())
            return f"{value.tag} {{ {body} }}" if body else f"{value.tag} {{ }}"
        lines = [f"{value.tag} {{"]
        lines += [f"{inner}{k} = {_fmt_value(v, inner)}" for k, v in value.fields.items()]
        return "\n".join(lines) + f"\n{indent}}}"
    if isinstance(value, list):
        if _is_flat(value):
            return "[" + ", ".join(_fmt_value(v, inner) for v in value) + "]"
        lines = ["["] + [inner + _fmt_value(v, inner) for v in value]
        return "\n".join(lines) + f"\n{indent}]"
    return _fmt_scalar(value)


def format_tree(tree: Dict[str, object]) -> str:
    blocks = []
    for key, value in tree.items():
        if isinstance(value, dict):
            lines = [f"{key} {{"] + [f"  {k} = {_fmt_value(v, '  ')}" for k, v in value.items()]
            blocks.append("\n".join(lines) + "\n}")
        else:
            blocks.append(f"{key} = {_fmt_value(value, '')}")
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# overrides


def _parse_override_value(text: str):
    tree, _ = parse_tree(f"v = {text}", "--set")
    return tree["v"]


def apply_override(tree: Dict[str, object], assignment: str) -> None:
    """Apply ``dotted.path=value`` in place.  List indices in the path are 1-based."""
    if "=" not in assignment:
        raise ScenarioParseError(f"override {assignment!r} is not of the form key=value", None, "--set")
    path_text, value_text = assignment.split("=", 1)
    keys = [k.strip() for k in path_text.strip().split(".")]
    if not all(keys):
        raise ScenarioParseError(f"bad override path {path_text!r}", None, "--set")
    value = _parse_override_value(value_text.strip())
    node = tree
    for depth, key in enumerate(keys):
        last = depth == len(keys) - 1
        container = node.fields if isinstance(node, Tagged) else node
        if isinstance(container, list):
            if not key.isdigit() or not 1 <= int(key) <= len(container):
                raise ScenarioParseError(f"override path {path_text!r}: no list item {key!r}",
                                         None, "--set")
            idx = int(key) - 1
            if last:
                container[idx] = value
            else:
                node = container[idx]
        elif isinstance(container, dict):
            if last:
                container[key] = value
            else:
                if key not in container:
                    container[key] = {}
                node = container[key]
        else:
            raise ScenarioParseError(f"override path {path_text!r}: {key!r} is inside a scalar",
                                     None, "--set")


# ---------------------------------------------------------------------------
# scenario model


@dataclass(frozen=True)
class OutputSpec:
    """Constraints on one output.

    Soft bounds are either given directly or as ``reference -/+ tolerance``.
    """

    hard_lower: TimeSignal
    hard_upper: TimeSignal
    eps_hard: float
    eps_soft: float
    soft_lower: Optional[TimeSignal] = None
    soft_upper: Optional[TimeSignal] = None
    reference: Optional[TimeSignal] = None
    tolerance: Optional[TimeSignal] = None

    def __post_init__(self):
        explicit = self.soft_lower is not None and self.soft_upper is not None
        derived = self.reference is not None and self.tolerance is not None
        if explicit == derived:
            raise ValueError("an output needs either soft_lower and soft_upper, "
                             "or reference and tolerance")

    def pair(self) -> ConstraintPair:
        if self.soft_lower is not None:
            lower, upper = self.soft_lower, self.soft_upper
        else:
            lower, upper = self.reference - self.tolerance, self.reference + self.tolerance
        return ConstraintPair(self.hard_lower, self.hard_upper, lower, upper,
                              self.eps_hard, self.eps_soft)


@dataclass(frozen=True)
class VelocityFunnelSpec:
    """Velocity-error envelope; ``rho0 = None`` means sized from the initial error."""

    rho_inf: float
    rate: float
    rho0: Optional[float] = None

    def __post_init__(self):
        if not self.rho_inf > 0.0:
            raise ValueError(f"velocity funnel rho_inf must be > 0, got {self.rho_inf!r}")
        if not self.rate > 0.0:
            raise ValueError(f"velocity funnel rate must be > 0, got {self.rate!r}")
        if self.rho0 is not None and not self.rho0 > 0.0:
            raise ValueError(f"velocity funnel rho0 must be > 0, got {self.rho0!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    outputs: Tuple[OutputSpec, ...]
    planner: PlannerConfig
    k_x: float
    k_v: float
    velocity_funnels: Tuple[VelocityFunnelSpec, ...]
    plant: Union[MobileRobot, PointMass]
    initial: InitialState
    sim: SimConfig = field(default_factory=SimConfig)
    auto_scale: float = AUTO_SCALE
    # where the scenario came from, for diagnostics only
    origin: Optional[str] = field(default=None, compare=False)
    lines: Dict[Tuple, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "velocity_funnels", tuple(self.velocity_funnels))
        if not self.k_x > 0.0 or not self.k_v > 0.0:
            raise ValueError("controller gains k_x and k_v must be > 0")
        if not self.auto_scale > 1.0:
            raise ValueError(f"auto_scale must be > 1, got {self.auto_scale!r}")
        n = len(self.outputs)
        if len(self.velocity_funnels) != n:
            raise ValueError(f"{len(self.velocity_funnels)} velocity funnels for {n} outputs")
        if self.plant.n_outputs != n:
            raise ValueError(f"plant has {self.plant.n_outputs} outputs, scenario declares {n}")
        if len(self.initial.position) != n:
            raise ValueError(f"initial position has {len(self.initial.position)} entries, expected {n}")

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def where(self, *path) -> str:
        """``file:line`` prefix for the scenario entry at ``path``, as far as known."""
        origin = self.origin or "<scenario>"
        while path:
            if path in self.lines:
                return f"{origin}:{self.lines[path]}"
            path = path[:-1]
        return origin

    @cached_property
    def pairs(self) -> Tuple[ConstraintPair, ...]:
        return tuple(o.pair() for o in self.outputs)

    def reference(self, i: int) -> TimeSignal:
        """Reference for output ``i``; the soft-band midpoint when none is declared."""
        spec = self.outputs[i]
        if spec.reference is not None:
            return spec.reference
        return 0.5 * (spec.soft_lower + spec.soft_upper)

    def initial_outputs(self):
        return self.plant.outputs(self.plant.initial_state(self.initial))

    def initial_funnel(self):
        state = _planner.PlannerState.initial(self.n_outputs)
        return _planner.funnel_bounds(state, self.pairs, self.planner, 0.0)

    @cached_property
    def _initial_velocity_error(self):
        x0, v0 = self.initial_outputs()
        lower, upper = self.initial_funnel()
        vd0 = velocity_reference(x0, lower, upper, self.k_x)
        return tuple(v - vd for v, vd in zip(v0, vd0))

    def controller_config(self) -> ControllerConfig:
        """Controller with every automatic ``rho0`` resolved.

        ``rho0 = auto_scale * max(|e_v(0)|, rho_inf)``, which keeps the
        initial velocity error strictly inside its funnel.
        """
        envelopes = []
        for i, spec in enumerate(self.velocity_funnels):
            rho0 = spec.rho0
            if rho0 is None:
                rho0 = self.auto_scale * max(abs(self._initial_velocity_error[i]), spec.rho_inf)
            envelopes.append(ExpEnvelope(rho0, spec.rho_inf, spec.rate))
        return ControllerConfig(self.k_x, self.k_v, tuple(envelopes))

    def validation_issues(self) -> List[str]:
        """Every static check; an empty list means the scenario may be simulated."""
        issues = []
        n_samples = min(self.sim.n_steps, 10_000) + 1
        times = np.linspace(0.0, self.sim.t_end, n_samples)
        x0, _ = self.initial_outputs()
        for i, pair in enumerate(self.pairs):
            tag = f"{self.where('outputs', i)}: output {i + 1}"
            for msg in pair.width_issues(times):
                issues.append(f"{tag}: band-width feasibility violated: {msg}")
            hl, hu, sl, su = pair.at(0.0)
            if not (hu > sl and su > hl):
                issues.append(
                    f"{tag}: initial compatibility violated: hard band ({hl:.6g}, {hu:.6g}) and "
                    f"soft band ({sl:.6g}, {su:.6g}) do not overlap at t = 0")
            if not (hl < x0[i] < hu and sl < x0[i] < su):
                issues.append(
                    f"{tag}: initial compatibility violated: x(0) = {x0[i]:.6g} is not inside both "
                    f"hard ({hl:.6g}, {hu:.6g}) and soft ({sl:.6g}, {su:.6g}) bands at t = 0")
        if issues:
            return issues
        lower, upper = self.initial_funnel()
        for i, (xi, lo, hi) in enumerate(zip(x0, lower, upper)):
            if not (hi > lo and abs((xi - 0.5 * (hi + lo)) / (0.5 * (hi - lo))) < 1.0 - DELTA_EDGE):
                issues.append(f"{self.where('initial', 'position')}: output {i + 1}: "
                              f"initial compatibility violated: x(0) = {xi:.6g} is not strictly "
                              f"inside the initial planned funnel ({lo:.6g}, {hi:.6g})")
        if issues:
            return issues
        try:
            ctrl = self.controller_config()
        except FunnelError as exc:
            return [f"{self.where('controller')}: controller: {exc}"]
        for i, (e0, gamma) in enumerate(zip(self._initial_velocity_error, ctrl.gamma_v)):
            if not abs(e0) < gamma.value(0.0):
                issues.append(f"{self.where('controller', 'velocity_funnels', i)}: output {i + 1}: "
                              f"velocity funnel rho0 = {gamma.value(0.0):.6g} "
                              f"does not exceed |e_v(0)| = {abs(e0):.6g}")
        return issues

    def validate(self) -> None:
        issues = self.validation_issues()
        if issues:
            raise ScenarioError(issues)


# ---------------------------------------------------------------------------
# tree <-> model


def signal_to_tree(s: TimeSignal):
    if isinstance(s, Constant):
        return Tagged("constant", {"value": float(s.c)})
    if isinstance(s, Sinusoid):
        return Tagged("sinusoid", {"amp": float(s.amp), "omega": float(s.omega),
                                   "phase": float(s.phase), "offset": float(s.offset)})
    if isinstance(s, ExpEnvelope):
        return Tagged("exp_envelope", {"rho0": float(s.rho0), "rho_inf": float(s.rho_inf),
                                       "rate": float(s.rate)})
    if isinstance(s, Sum):
        return Tagged("sum", {"terms": [signal_to_tree(t) for t in s.terms]})
    if isinstance(s, Scaled):
        return Tagged("scaled", {"coef": float(s.coef), "signal": signal_to_tree(s.signal)})
    raise TypeError(f"cannot serialize signal {type(s).__name__}")


def _float_list(values):
    return [float(v) for v in values]


def to_tree(sc: Scenario) -> Dict[str, object]:
    tree: Dict[str, object] = {"name": sc.name}
    tree["sim"] = {"t_end": float(sc.sim.t_end), "h": float(sc.sim.h),
                   "scheme": Symbol(sc.sim.scheme), "record_stride": int(sc.sim.record_stride)}
    p = sc.planner
    tree["planner"] = {"variant": Symbol(p.variant), "mu": float(p.mu), "k_c": float(p.k_c),
                       "kappa": float(p.kappa), "nu": float(p.nu)}
    tree["controller"] = {
        "k_x": float(sc.k_x), "k_v": float(sc.k_v), "auto_scale": float(sc.auto_scale),
        "velocity_funnels": [
            Tagged("exp_envelope", {"rho0": Symbol("auto") if f.rho0 is None else float(f.rho0),
                                    "rho_inf": float(f.rho_inf), "rate": float(f.rate)})
            for f in sc.velocity_funnels],
    }
    plant = sc.plant
    if isinstance(plant, MobileRobot):
        tree["plant"] = Tagged("mobile_robot", {
            "mass": float(plant.mass), "inertia": float(plant.inertia),
            "damping": [_float_list(row) for row in plant.damping],
            "hand_offset": float(plant.hand_offset),
            "disturbance": [signal_to_tree(s) for s in plant.disturbance],
        })
    elif isinstance(plant, PointMass):
        tree["plant"] = Tagged("point_mass", {
            "masses": _float_list(plant.masses), "dampings": _float_list(plant.dampings),
            "disturbance": [signal_to_tree(s) for s in plant.disturbances],
        })
    else:
        raise TypeError(f"plant {type(plant).__name__} has no scenario-file form")
    init: Dict[str, object] = {"position": _float_list(sc.initial.position)}
    if sc.initial.velocity is not None:
        init["velocity"] = _float_list(sc.initial.velocity)
    if sc.initial.heading is not None:
        init["heading"] = float(sc.initial.heading)
    if sc.initial.body_velocity is not None:
        init["body_velocity"] = _float_list(sc.initial.body_velocity)
    tree["initial"] = init
    outputs = []
    for o in sc.outputs:
        fields: Dict[str, object] = {"hard_lower": signal_to_tree(o.hard_lower),
                                     "hard_upper": signal_to_tree(o.hard_upper)}
        if o.soft_lower is not None:
            fields["soft_lower"] = signal_to_tree(o.soft_lower)
            fields["soft_upper"] = signal_to_tree(o.soft_upper)
        else:
            fields["reference"] = signal_to_tree(o.reference)
            fields["tolerance"] = signal_to_tree(o.tolerance)
        fields["eps_hard"] = float(o.eps_hard)
        fields["eps_soft"] = float(o.eps_soft)
        outputs.append(Tagged("output", fields))
    tree["outputs"] = outputs
    return tree


class _Builder:
    """Turns a parsed tree into model objects, reporting problems with line numbers."""

    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def line(self, path):
        path = tuple(path)
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return None

    def fail(self, path, message):
        raise ScenarioParseError(f"{'.'.join(str(p) for p in path)}: {message}",
                                 self.line(path), self.source)

    def invalid(self, path, exc):
        where = self.source or "<scenario>"
        line = self.line(path)
        if line is not None:
            where += f":{line}"
        raise ScenarioError(f"{where}: {'.'.join(str(p) for p in path)}: {exc}")

    def section(self, node, path, required=True):
        if node is None and not required:
            return {}
        if not isinstance(node, dict):
            self.fail(path, "expected a section")
        return node

    def get(self, mapping, key, path, default=...):
        if key not in mapping:
            if default is ...:
                self.fail(path, f"missing key {key!r}")
            return default
        return mapping[key]

    def number(self, mapping, key, path, default=...):
        value = self.get(mapping, key, path, default)
        if value is default and default is not ...:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path + (key,), f"expected a number, got {_describe(value)}")
        return float(value)

    def integer(self, mapping, key, path, default=...):
        value = self.get(mapping, key, path, default)
        if value is default and default is not ...:
            return default
        if not isinstance(value, int) or isinstance(value, bool):
            self.fail(path + (key,), f"expected an integer, got {_describe(value)}")
        return value

    def symbol(self, mapping, key, path, choices, default=...):
        value = self.get(mapping, key, path, default)
        if value is default and default is not ...:
            return default
        if not isinstance(value, str) or value not in choices:
            self.fail(path + (key,), f"expected one of {', '.join(choices)}, got {_describe(value)}")
        return str(value)

    def numbers(self, mapping, key, path, default=...):
        value = self.get(mapping, key, path, default)
        if value is default and default is not ...:
            return default
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            self.fail(path + (key,), f"expected a list of numbers, got {_describe(value)}")
        return tuple(float(v) for v in value)

    def tagged(self, value, path, tags):
        if not isinstance(value, Tagged) or value.tag not in tags:
            self.fail(path, f"expected one of {', '.join(t + ' {...}' for t in tags)}, "
                            f"got {_describe(value)}")
        return value

    def signal(self, value, path) -> TimeSignal:
        node = self.tagged(value, path, ("constant", "sinusoid", "exp_envelope", "sum", "scaled"))
        f = node.fields
        allowed = {"constant": {"value"}, "sinusoid": {"amp", "omega", "phase", "offset"},
                   "exp_envelope": {"rho0", "rho_inf", "rate"}, "sum": {"terms"},
                   "scaled": {"coef", "signal"}}[node.tag]
        self.no_extra(f, allowed, path)
        try:
            if node.tag == "constant":
                return Constant(self.number(f, "value", path))
            if node.tag == "sinusoid":
                return Sinusoid(self.number(f, "amp", path), self.number(f, "omega", path),
                                self.number(f, "phase", path, 0.0), self.number(f, "offset", path, 0.0))
            if node.tag == "exp_envelope":
                return ExpEnvelope(self.number(f, "rho0", path), self.number(f, "rho_inf", path),
                                   self.number(f, "rate", path))
            if node.tag == "sum":
                terms = self.get(f, "terms", path)
                if not isinstance(terms, list) or not terms:
                    self.fail(path + ("terms",), "expected a non-empty list of signals")
                return Sum(self.signal(t, path + ("terms", j)) for j, t in enumerate(terms))
            return Scaled(self.number(f, "coef", path), self.signal(self.get(f, "signal", path),
                                                                   path + ("signal",)))
        except ValueError as exc:
            self.invalid(path, exc)

    def no_extra(self, mapping, allowed, path):
        for key in mapping:
            if key not in allowed:
                self.fail(path + (key,), f"unknown key {key!r}; expected one of {', '.join(sorted(allowed))}")

    def build(self, tree) -> Scenario:
        self.no_extra(tree, {"name", "sim", "planner", "controller", "plant", "initial", "outputs"}, ())
        name = self.get(tree, "name", (), "scenario")
        if not isinstance(name, str) or isinstance(name, Symbol):
            self.fail(("name",), "expected a quoted string")

        sim_node = self.section(tree.get("sim"), ("sim",), required=False)
        self.no_extra(sim_node, {"t_end", "h", "scheme", "record_stride"}, ("sim",))
        defaults = SimConfig()
        try:
            sim = SimConfig(self.number(sim_node, "t_end", ("sim",), defaults.t_end),
                            self.number(sim_node, "h", ("sim",), defaults.h),
                            self.symbol(sim_node, "scheme", ("sim",), ("rk4", "euler"), defaults.scheme),
                            self.integer(sim_node, "record_stride", ("sim",), defaults.record_stride))
        except ValueError as exc:
            self.invalid(("sim",), exc)

        pl = self.section(self.get(tree, "planner", ()), ("planner",))
        self.no_extra(pl, {"variant", "mu", "k_c", "kappa", "nu"}, ("planner",))
        pd = PlannerConfig()
        try:
            planner = PlannerConfig(
                mu=self.number(pl, "mu", ("planner",), pd.mu),
                k_c=self.number(pl, "k_c", ("planner",), pd.k_c),
                variant=self.symbol(pl, "variant", ("planner",), _planner.VARIANTS, pd.variant),
                kappa=self.number(pl, "kappa", ("planner",), pd.kappa),
                nu=self.number(pl, "nu", ("planner",), pd.nu))
        except ValueError as exc:
            self.invalid(("planner",), exc)

        ctl = self.section(self.get(tree, "controller", ()), ("controller",))
        self.no_extra(ctl, {"k_x", "k_v", "auto_scale", "velocity_funnels"}, ("controller",))
        funnels_node = self.get(ctl, "velocity_funnels", ("controller",))
        if not isinstance(funnels_node, list):
            self.fail(("controller", "velocity_funnels"), "expected a list")
        funnels = []
        for j, node in enumerate(funnels_node):
            path = ("controller", "velocity_funnels", j)
            f = self.tagged(node, path, ("exp_envelope",)).fields
            self.no_extra(f, {"rho0", "rho_inf", "rate"}, path)
            rho0 = f.get("rho0", Symbol("auto"))
            if isinstance(rho0, str):
                if rho0 != "auto":
                    self.fail(path + ("rho0",), f"expected a number or auto, got {_describe(rho0)}")
                rho0 = None
            else:
                rho0 = self.number(f, "rho0", path)
            try:
                funnels.append(VelocityFunnelSpec(self.number(f, "rho_inf", path),
                                                  self.number(f, "rate", path), rho0))
            except ValueError as exc:
                self.invalid(path, exc)

        plant = self.plant(self.get(tree, "plant", ()), ("plant",))

        ini = self.section(self.get(tree, "initial", ()), ("initial",))
        self.no_extra(ini, {"position", "velocity", "heading", "body_velocity"}, ("initial",))
        initial = InitialState(
            position=self.numbers(ini, "position", ("initial",)),
            velocity=self.numbers(ini, "velocity", ("initial",), None),
            heading=self.number(ini, "heading", ("initial",), None),
            body_velocity=self.numbers(ini, "body_velocity", ("initial",), None))
        if isinstance(plant, MobileRobot) and initial.heading is None:
            self.fail(("initial",), "mobile_robot needs initial.heading")

        outputs_node = self.get(tree, "outputs", ())
        if not isinstance(outputs_node, list) or not outputs_node:
            self.fail(("outputs",), "expected a non-empty list of output {...}")
        outputs = [self.output(node, ("outputs", j)) for j, node in enumerate(outputs_node)]

        try:
            return Scenario(origin=self.source, lines=dict(self.lines),
                            name=str(name), outputs=tuple(outputs), planner=planner,
                            k_x=self.number(ctl, "k_x", ("controller",)),
                            k_v=self.number(ctl, "k_v", ("controller",)),
                            velocity_funnels=tuple(funnels), plant=plant, initial=initial, sim=sim,
                            auto_scale=self.number(ctl, "auto_scale", ("controller",), AUTO_SCALE))
        except ValueError as exc:
            self.invalid((), exc)

    def plant(self, value, path):
        node = self.tagged(value, path, ("mobile_robot", "point_mass"))
        f = node.fields
        try:
            if node.tag == "mobile_robot":
                self.no_extra(f, {"mass", "inertia", "damping", "hand_offset", "disturbance"}, path)
                defaults = MobileRobot()
                damping = self.get(f, "damping", path, None)
                if damping is None:
                    damping = defaults.damping
                elif not (isinstance(damping, list) and len(damping) == 2 and all(
                        isinstance(r, list) and len(r) == 2 and
                        all(isinstance(c, (int, float)) for c in r) for r in damping)):
                    self.fail(path + ("damping",), "expected a 2x2 list of numbers")
                dist_node = self.get(f, "disturbance", path, None)
                if dist_node is None:
                    disturbance = defaults.disturbance
                else:
                    if not isinstance(dist_node, list) or len(dist_node) != 2:
                        self.fail(path + ("disturbance",), "expected a list of two signals")
                    disturbance = tuple(self.signal(s, path + ("disturbance", j))
                                        for j, s in enumerate(dist_node))
                return MobileRobot(mass=self.number(f, "mass", path, defaults.mass),
                                   inertia=self.number(f, "inertia", path, defaults.inertia),
                                   damping=tuple(tuple(float(c) for c in r) for r in damping),
                                   hand_offset=self.number(f, "hand_offset", path, defaults.hand_offset),
                                   disturbance=disturbance)
            self.no_extra(f, {"masses", "dampings", "disturbance"}, path)
            dist_node = self.get(f, "disturbance", path, None)
            disturbance = None
            if dist_node is not None:
                if not isinstance(dist_node, list):
                    self.fail(path + ("disturbance",), "expected a list of signals")
                disturbance = tuple(self.signal(s, path + ("disturbance", j))
                                    for j, s in enumerate(dist_node))
            return PointMass(self.numbers(f, "masses", path),
                             self.numbers(f, "dampings", path, None), disturbance)
        except (ValueError, FunnelError) as exc:
            if isinstance(exc, (ScenarioParseError, ScenarioError)):
                raise
            self.invalid(path, exc)

    def output(self, value, path) -> OutputSpec:
        f = self.tagged(value, path, ("output",)).fields
        self.no_extra(f, {"hard_lower", "hard_upper", "soft_lower", "soft_upper", "reference",
                          "tolerance", "eps_hard", "eps_soft"}, path)
        sig = {k: self.signal(f[k], path + (k,)) for k in
               ("hard_lower", "hard_upper", "soft_lower", "soft_upper", "reference", "tolerance")
               if k in f}
        for k in ("hard_lower", "hard_upper"):
            if k not in sig:
                self.fail(path, f"missing key {k!r}")
        try:
            return OutputSpec(eps_hard=self.number(f, "eps_hard", path),
                              eps_soft=self.number(f, "eps_soft", path), **sig)
        except ValueError as exc:
            self.invalid(path, exc)


def _describe(value) -> str:
    if isinstance(value, Tagged):
        return f"{value.tag} {{...}}"
    if isinstance(value, dict):
        return "a section"
    if isinstance(value, list):
        return "a list"
    if isinstance(value, Symbol):
        return f"symbol {value!s}"
    if isinstance(value, str):
        return f"string {value!r}"
    return repr(value)


def from_tree(tree, lines=None, source: Optional[str] = None) -> Scenario:
    return _Builder(lines or {}, source).build(tree)


def loads(text: str, source: Optional[str] = None, overrides=()) -> Scenario:
    """Parse scenario text, apply ``key=value`` overrides, build the model.

    Raises ``ScenarioParseError`` for malformed text or structure and
    ``ScenarioError`` for values that break a model precondition.
    """
    tree, lines = parse_tree(text, source)
    for assignment in overrides:
        apply_override(tree, assignment)
    return from_tree(tree, lines, source)


def dumps(scenario: Scenario) -> str:
    return format_tree(to_tree(scenario))


BUNDLED = ("paper_kc3", "paper_kc03")


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}; available: {', '.join(BUNDLED)}")
    return resources.files("ccfunnel.scenarios").joinpath(f"{name}.scn").read_text()


def load(path_or_name: Union[str, Path], overrides=()) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (``paper_kc3``)."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in BUNDLED:
        return loads(bundled_text(str(path_or_name)), str(path_or_name), overrides)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc.strerror}", None, str(path)) from exc
    return loads(text, str(path), overrides)
