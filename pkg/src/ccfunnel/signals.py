"""Composable scalar signals of time.

Every constraint boundary, reference trajectory, performance envelope and
disturbance in a scenario is one of these.  A signal is an immutable value
object exposing ``value(t)`` and its analytic first ``derivative(t)``.

Signals compose with ``+``, unary ``-`` and multiplication by a number::

    >>> ref = Sinusoid(amp=5.8, omega=0.24, phase=1.5, offset=-1.5)
    >>> tol = ExpEnvelope(rho0=3.0, rho_inf=0.2, rate=0.7)
    >>> lower = ref - tol
    >>> round(lower.value(0.0), 4)
    -4.0897
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple


class TimeSignal:
    """Base class; subclasses are frozen dataclasses."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def derivative(self, t: float) -> float:
        raise NotImplementedError

    def __call__(self, t: float) -> float:
        return self.value(t)

    def __add__(self, other: "TimeSignal") -> "Sum":
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        if not isinstance(other, TimeSignal):
            return NotImplemented
        return Sum((self, other))

    def __radd__(self, other):
        if isinstance(other, (int, float)):
            return Sum((Constant(float(other)), self))
        return NotImplemented

    def __neg__(self) -> "Scaled":
        return Scaled(-1.0, self)

    def __sub__(self, other: "TimeSignal") -> "Sum":
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        if not isinstance(other, TimeSignal):
            return NotImplemented
        return Sum((self, Scaled(-1.0, other)))

    def __mul__(self, coef: float) -> "Scaled":
        if not isinstance(coef, (int, float)):
            return NotImplemented
        return Scaled(float(coef), self)

    __rmul__ = __mul__

    def compile(self) -> "CompiledSignal":
        """Return a fast, picklable ``t -> value`` callable equal to :meth:`value`."""
        return CompiledSignal(*flatten(self))


class CompiledSignal:
    """Signal flattened to ``offset + sum a cos(w t + p) + sum b exp(-l t)``.

    Skips the per-node dispatch of the signal tree inside simulation loops.
    """

    __slots__ = ("offset", "cos_terms", "exp_terms")

    def __init__(self, offset, cos_terms, exp_terms):
        self.offset = float(offset)
        self.cos_terms = tuple((a, w, p) for a, w, p in cos_terms if a != 0.0)
        self.exp_terms = tuple((b, l) for b, l in exp_terms if b != 0.0)

    def __call__(self, t: float) -> float:
        acc = self.offset
        for a, w, p in self.cos_terms:
            acc += a * math.cos(w * t + p)
        for b, l in self.exp_terms:
            acc += b * math.exp(-l * t)
        return acc

    def __getstate__(self):
        return self.offset, self.cos_terms, self.exp_terms

    def __setstate__(self, state):
        self.offset, self.cos_terms, self.exp_terms = state


class CompiledBank:
    """Several signals evaluated together: ``bank(t)`` returns a list of values.

    Identical ``cos(w t + p)`` and ``exp(-l t)`` factors are computed once.
    Each value is summed in the same order as :class:`CompiledSignal`, so
    the results are bit-identical to compiling the signals one by one.
    """

    __slots__ = ("cos_basis", "exp_basis", "rows")

    def __init__(self, signals: Iterable[TimeSignal]):
        compiled = [sig.compile() for sig in signals]
        cos_index, exp_index = {}, {}
        for c in compiled:
            for _, w, p in c.cos_terms:
                cos_index.setdefault((w, p), len(cos_index))
            for _, l in c.exp_terms:
                exp_index.setdefault(l, len(exp_index))
        n_cos = len(cos_index)
        self.cos_basis = tuple(cos_index)
        self.exp_basis = tuple(exp_index)
        self.rows = tuple(
            (c.offset,
             tuple((a, cos_index[(w, p)]) for a, w, p in c.cos_terms)
             + tuple((b, n_cos + exp_index[l]) for b, l in c.exp_terms))
            for c in compiled)

    def __call__(self, t: float):
        cos, exp = math.cos, math.exp
        basis = [cos(w * t + p) for w, p in self.cos_basis]
        basis += [exp(-l * t) for l in self.exp_basis]
        out = []
        for acc, terms in self.rows:
            for c, j in terms:
                acc += c * basis[j]
            out.append(acc)
        return out

    def __getstate__(self):
        return self.cos_basis, self.exp_basis, self.rows

    def __setstate__(self, state):
        self.cos_basis, self.exp_basis, self.rows = state


@dataclass(frozen=True)
class Constant(TimeSignal):
    c: float

    def value(self, t: float) -> float:
        return self.c

    def derivative(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class Sinusoid(TimeSignal):
    """``offset + amp * cos(omega * t + phase)``; write sines with ``phase - pi/2``."""

    amp: float
    omega: float
    phase: float = 0.0
    offset: float = 0.0

    def value(self, t: float) -> float:
        return self.offset + self.amp * math.cos(self.omega * t + self.phase)

    def derivative(self, t: float) -> float:
        return -self.amp * self.omega * math.sin(self.omega * t + self.phase)


@dataclass(frozen=True)
class ExpEnvelope(TimeSignal):
    """Exponentially converging envelope ``(rho0 - rho_inf) exp(-rate t) + rho_inf``."""

    rho0: float
    rho_inf: float
    rate: float

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValueError(f"exp_envelope rate must be > 0, got {self.rate!r}")

    def value(self, t: float) -> float:
        raw = (self.rho0 - self.rho_inf) * math.exp(-self.rate * t) + self.rho_inf
        # cancellation can push the rounded value past an endpoint
        return min(max(raw, min(self.rho0, self.rho_inf)), max(self.rho0, self.rho_inf))

    def derivative(self, t: float) -> float:
        return -self.rate * (self.rho0 - self.rho_inf) * math.exp(-self.rate * t)


@dataclass(frozen=True)
class Sum(TimeSignal):
    terms: Tuple[TimeSignal, ...]

    def __init__(self, terms: Iterable[TimeSignal]):
        object.__setattr__(self, "terms", tuple(terms))

    def value(self, t: float) -> float:
        return math.fsum(s.value(t) for s in self.terms)

    def derivative(self, t: float) -> float:
        return math.fsum(s.derivative(t) for s in self.terms)


@dataclass(frozen=True)
class Scaled(TimeSignal):
    coef: float
    signal: TimeSignal

    def value(self, t: float) -> float:
        return self.coef * self.signal.value(t)

    def derivative(self, t: float) -> float:
        return self.coef * self.signal.derivative(t)


def constant(c: float) -> Constant:
    return Constant(float(c))


def flatten(signal: TimeSignal, coef: float = 1.0):
    """Expand a signal tree into ``(offset, cos_terms, exp_terms)``.

    ``cos_terms`` holds ``(amplitude, omega, phase)`` triples and
    ``exp_terms`` holds ``(amplitude, rate)`` pairs, all already scaled.
    """
    if isinstance(signal, Constant):
        return coef * signal.c, [], []
    if isinstance(signal, Sinusoid):
        return coef * signal.offset, [(coef * signal.amp, signal.omega, signal.phase)], []
    if isinstance(signal, ExpEnvelope):
        return (coef * signal.rho_inf, [],
                [(coef * (signal.rho0 - signal.rho_inf), signal.rate)])
    if isinstance(signal, Scaled):
        return flatten(signal.signal, coef * signal.coef)
    if isinstance(signal, Sum):
        offset, cos_terms, exp_terms = 0.0, [], []
        for term in signal.terms:
            o, c, e = flatten(term, coef)
            offset += o
            cos_terms += c
            exp_terms += e
        return offset, cos_terms, exp_terms
    raise TypeError(f"cannot flatten {type(signal).__name__}")
