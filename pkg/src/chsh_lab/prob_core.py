"""Finite Kolmogorov probability spaces.

A space is an ordered tuple of atoms with one weight per atom; the
sigma-algebra is the power set and never materialized. Weights are kept as
:class:`fractions.Fraction` when every input weight is rational, and as
floats otherwise, so identities that hold exactly in theory stay exact here.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence, Union

from .errors import (
    DuplicateAtom,
    MismatchedSpace,
    NegativeWeight,
    NotNormalized,
    NullEvent,
    RangeViolation,
)

Number = Union[Fraction, float]

FLOAT_TOL = 1e-12


def is_exact(value: Any) -> bool:
    return isinstance(value, numbers.Rational)


def to_number(value: Any) -> Number:
    """int or Fraction for rationals, float for everything else."""
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return value
    if isinstance(value, numbers.Integral):
        return int(value)
    if is_exact(value):
        return Fraction(int(value.numerator), int(value.denominator))
    return float(value)


def total(terms: Iterable[Any]) -> Number:
    """Sum that stays exact on rationals and uses ``fsum`` otherwise."""
    terms = list(terms)
    if all(isinstance(t, (int, Fraction)) for t in terms):
        return sum(terms, Fraction(0))
    return math.fsum(float(t) for t in terms)


@dataclass(frozen=True)
class FiniteProbSpace:
    atoms: tuple
    weights: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        atoms = tuple(self.atoms)
        weights = tuple(self.weights)
        if len(atoms) != len(weights):
            raise ValueError(f"{len(atoms)} atoms but {len(weights)} weights")
        if not atoms:
            raise NotNormalized("empty space has total mass 0")
        index = {}
        for k, atom in enumerate(atoms):
            if atom in index:
                raise DuplicateAtom(f"atom {atom!r} appears twice")
            index[atom] = k
        if all(is_exact(w) for w in weights):
            weights = tuple(Fraction(to_number(w)) for w in weights)
        else:
            weights = tuple(float(w) for w in weights)
        for atom, w in zip(atoms, weights):
            if not w >= 0:
                raise NegativeWeight(f"weight {w!r} of atom {atom!r}")
        mass = total(weights)
        if self.exact:
            if mass != 1:
                raise NotNormalized(f"weights sum to {mass}, not 1")
        elif abs(mass - 1.0) > FLOAT_TOL:
            raise NotNormalized(f"weights sum to {mass!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_index", index)

    @property
    def exact(self) -> bool:
        return isinstance(self.weights[0], Fraction)

    def __len__(self) -> int:
        return len(self.atoms)

    def weight(self, atom: Hashable) -> Number:
        return self.weights[self._index[atom]]

    def event(self, predicate: Callable[[Any], bool]) -> "Event":
        return Event(frozenset(a for a in self.atoms if predicate(a)))

    def everything(self) -> "Event":
        return Event(frozenset(self.atoms))

    def prob(self, event: "Event") -> Number:
        self._check_event(event)
        return total(w for a, w in zip(self.atoms, self.weights) if a in event.atoms)

    def rv(self, fn: Callable[[Any], Any], bounds: tuple | None = None) -> "Rv":
        """Random variable whose value on atom ``a`` is ``fn(a)``."""
        return Rv(self, tuple(to_number(fn(a)) for a in self.atoms), bounds)

    def compatible(self, other: "FiniteProbSpace") -> bool:
        return self is other or self.atoms == other.atoms

    def _check_event(self, event: "Event") -> None:
        stray = event.atoms.difference(self._index)
        if stray:
            raise MismatchedSpace(f"event contains atoms not in space: {sorted(map(repr, stray))[:3]}")

    def to_dict(self) -> dict:
        return {
            "atoms": [list(a) if isinstance(a, tuple) else a for a in self.atoms],
            "weights": [float(w) for w in self.weights],
        }


def make_space(atoms: Sequence[Hashable], weights: Sequence[Any]) -> FiniteProbSpace:
    """Validated space; rejects (never renormalizes) bad weights."""
    return FiniteProbSpace(tuple(atoms), tuple(weights))


@dataclass(frozen=True)
class Event:
    atoms: frozenset

    def __and__(self, other: "Event") -> "Event":
        return Event(self.atoms & other.atoms)

    def __or__(self, other: "Event") -> "Event":
        return Event(self.atoms | other.atoms)

    def __contains__(self, atom: Hashable) -> bool:
        return atom in self.atoms


@dataclass(frozen=True)
class Rv:
    """Real-valued random variable, stored as one value per atom of ``space``.

    ``bounds`` optionally declares a value range ``(lo, hi)`` that is checked
    at construction.
    """

    space: FiniteProbSpace
    values: tuple
    bounds: tuple | None = None

    def __post_init__(self) -> None:
        if len(self.values) != len(self.space):
            raise MismatchedSpace(
                f"rv has {len(self.values)} values, space has {len(self.space)} atoms"
            )
        if self.bounds is not None:
            lo, hi = self.bounds
            for v in self.values:
                if not lo <= v <= hi:
                    raise RangeViolation(f"value {v!r} outside declared range [{lo}, {hi}]")

    def __call__(self, atom: Hashable) -> Number:
        return self.values[self.space._index[atom]]

    def _binary(self, other: Any, op: Callable) -> "Rv":
        if isinstance(other, Rv):
            if not self.space.compatible(other.space):
                raise MismatchedSpace("random variables live on different spaces")
            return Rv(self.space, tuple(op(u, v) for u, v in zip(self.values, other.values)))
        c = to_number(other)
        return Rv(self.space, tuple(op(u, c) for u in self.values))

    def __mul__(self, other: Any) -> "Rv":
        return self._binary(other, lambda u, v: u * v)

    __rmul__ = __mul__

    def __add__(self, other: Any) -> "Rv":
        return self._binary(other, lambda u, v: u + v)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Rv":
        return self._binary(other, lambda u, v: u - v)

    def __neg__(self) -> "Rv":
        return Rv(self.space, tuple(-u for u in self.values))

    def eq(self, value: Any) -> Event:
        return Event(frozenset(a for a, v in zip(self.space.atoms, self.values) if v == value))

    def isin(self, values: Iterable[Any]) -> Event:
        values = set(values)
        return Event(frozenset(a for a, v in zip(self.space.atoms, self.values) if v in values))


def _check_rv(space: FiniteProbSpace, rv: Rv) -> None:
    if not space.compatible(rv.space):
        raise MismatchedSpace("random variable was built on a different space")


def expectation(space: FiniteProbSpace, rv: Rv) -> Number:
    _check_rv(space, rv)
    return total(v * w for v, w in zip(rv.values, space.weights))


def condition(space: FiniteProbSpace, event: Event) -> FiniteProbSpace:
    """Bayes conditioning: P(U | E) = P(U and E) / P(E).

    The result keeps every atom of ``space`` (those outside the event get
    weight 0) so random variables of the original space remain usable.
    """
    p = space.prob(event)
    if p == 0:
        raise NullEvent("cannot condition on an event of probability zero")
    weights = tuple(w / p if a in event.atoms else w * 0 for a, w in zip(space.atoms, space.weights))
    return FiniteProbSpace(space.atoms, weights)


def conditional_expectation(space: FiniteProbSpace, rv: Rv, event: Event) -> Number:
    _check_rv(space, rv)
    return expectation(condition(space, event), rv)


def correlation(space: FiniteProbSpace, rv1: Rv, rv2: Rv) -> Number:
    """Uncentered product moment E(rv1 * rv2)."""
    _check_rv(space, rv1)
    _check_rv(space, rv2)
    return expectation(space, rv1 * rv2)


def chsh_combination(c11: Any, c12: Any, c21: Any, c22: Any) -> Number:
    return c11 + c12 + c21 - c22


@dataclass(frozen=True)
class ChshReport:
    """A CHSH sum together with the four terms and the bounds it is judged against.

    ``correlations`` is ordered (11, 12, 21, 22); the sum is
    c11 + c12 + c21 - c22.
    """

    correlations: tuple
    value: Number
    bounds: tuple = (2,)
    stderr: float | None = None
    tol: float = 0.0

    @property
    def abs_value(self) -> Number:
        return abs(self.value)

    def holds(self, bound: Any) -> bool:
        return self.abs_value <= bound + self.tol

    @property
    def verdicts(self) -> dict:
        return {b: self.holds(b) for b in self.bounds}

    def to_dict(self) -> dict:
        out = {
            "correlations": [float(c) for c in self.correlations],
            "value": float(self.value),
            "abs_value": float(self.abs_value),
            "bounds": {str(b): self.holds(b) for b in self.bounds},
        }
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return out


def make_report(correlations: Sequence[Any], bounds: tuple = (2,), stderr: float | None = None) -> ChshReport:
    cs = tuple(correlations)
    value = chsh_combination(*cs)
    tol = 0.0 if isinstance(value, Fraction) else FLOAT_TOL
    return ChshReport(cs, value, bounds, stderr, tol)


def chsh_value(space: FiniteProbSpace, a1: Rv, a2: Rv, b1: Rv, b2: Rv) -> ChshReport:
    """CHSH sum of four random variables on one space, judged against 2."""
    for name, rv in (("A1", a1), ("A2", a2), ("B1", b1), ("B2", b2)):
        _check_rv(space, rv)
        for v in rv.values:
            if not -1 <= v <= 1:
                raise RangeViolation(f"{name} takes value {v!r} outside [-1, 1]")
    cs = (
        correlation(space, a1, b1),
        correlation(space, a1, b2),
        correlation(space, a2, b1),
        correlation(space, a2, b2),
    )
    return make_report(cs, bounds=(2,))
