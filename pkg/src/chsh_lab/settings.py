"""Per-setting outcome tables p_ij(e, e') and the gate distribution q_ij.

A :class:`CondTableFamily` is the raw experimental input: four 2x2 tables,
one for each pair of analyzer settings (i, j), plus the probability that the
distribution device opens that pair of channels.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import InvalidParams, InvalidTable
from .prob_core import FLOAT_TOL, Number, is_exact, to_number, total

PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))
SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
PAIR_KEYS = {pair: f"{pair[0]}{pair[1]}" for pair in PAIRS}

_CELL_NAMES = ("pp", "pm", "mp", "mm")


class Convention(enum.Enum):
    """How the angle difference enters the QM outcome probabilities.

    HALF_ANGLE uses cos^2(d/2) (spin-1/2 analyzers); FULL_ANGLE uses
    cos^2(d) (photon polarizers). Only FULL_ANGLE yields correlations of
    +-1/sqrt(2) at angles pi/4, 0, pi/8, 3pi/8.
    """

    HALF_ANGLE = "half"
    FULL_ANGLE = "full"


def _coerce(value: Any, what: str) -> Number:
    if isinstance(value, bool):
        raise InvalidTable(f"{what}: expected a number, got {value!r}")
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidTable(f"{what}: cannot parse {value!r}") from exc
    if isinstance(value, (int, float, Fraction)) or is_exact(value):
        v = to_number(value)
        if isinstance(v, float) and not math.isfinite(v):
            raise InvalidTable(f"{what}: non-finite value {value!r}")
        return v
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidTable(f"{what}: expected a number, got {value!r}") from exc


def _check_distribution(values: Sequence[Number], what: str) -> tuple:
    if not all(isinstance(v, Fraction) for v in values):
        values = [float(v) for v in values]
    for v in values:
        if not v >= 0:
            raise InvalidTable(f"{what}: negative probability {v!r}")
    s = total(values)
    if isinstance(s, Fraction):
        if s != 1:
            raise InvalidTable(f"{what}: probabilities sum to {s}, not 1")
    elif abs(s - 1.0) > FLOAT_TOL:
        raise InvalidTable(f"{what}: probabilities sum to {s!r}, not 1")
    return tuple(values)


@dataclass(frozen=True)
class CondTable:
    """Joint outcome distribution for one setting pair.

    ``pp`` is P(a=+1, b=+1), ``pm`` is P(a=+1, b=-1), and so on.
    """

    pp: Number
    pm: Number
    mp: Number
    mm: Number

    def __post_init__(self) -> None:
        raw = [_coerce(getattr(self, n), n) for n in _CELL_NAMES]
        for name, v in zip(_CELL_NAMES, _check_distribution(raw, "table")):
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls) -> "CondTable":
        q = Fraction(1, 4)
        return cls(q, q, q, q)

    @classmethod
    def deterministic(cls, a: int, b: int) -> "CondTable":
        """Point mass on outcome (a, b)."""
        cells = [Fraction(int((a, b) == s)) for s in SIGNS]
        return cls(*cells)

    @classmethod
    def from_correlation(cls, c: Any) -> "CondTable":
        """Table with uniform marginals and correlation ``c``."""
        c = to_number(c)
        if not -1 <= c <= 1:
            raise InvalidTable(f"correlation {c!r} outside [-1, 1]")
        if is_exact(c):
            c = Fraction(c)
        same = (1 + c) / 4
        diff = (1 - c) / 4
        return cls(same, diff, diff, same)

    def p(self, a: int, b: int) -> Number:
        return self.cells[SIGNS.index((a, b))]

    @property
    def cells(self) -> tuple:
        return (self.pp, self.pm, self.mp, self.mm)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.cells)

    def to_dict(self) -> dict:
        return {n: float(v) for n, v in zip(_CELL_NAMES, self.cells)}


def qm_table(theta: float, theta_prime: float, convention: Convention = Convention.FULL_ANGLE) -> CondTable:
    """Singlet-style outcome table for analyzer angles ``theta`` and ``theta_prime``."""
    if not (math.isfinite(theta) and math.isfinite(theta_prime)):
        raise InvalidParams(f"non-finite angle in ({theta!r}, {theta_prime!r})")
    d = theta - theta_prime
    if Convention(convention) is Convention.HALF_ANGLE:
        d /= 2
    same = math.cos(d) ** 2 / 2
    diff = math.sin(d) ** 2 / 2
    return CondTable(same, diff, diff, same)


def marginals(table: CondTable) -> tuple:
    """(P(a=+1), P(a=-1), P(b=+1), P(b=-1))."""
    return (
        table.pp + table.pm,
        table.mp + table.mm,
        table.pp + table.mp,
        table.pm + table.mm,
    )


def table_correlation(table: CondTable) -> Number:
    return total(a * b * p for (a, b), p in zip(SIGNS, table.cells))


@dataclass(frozen=True)
class AngleConfig:
    t1: float
    t2: float
    u1: float
    u2: float
    convention: Convention = Convention.FULL_ANGLE

    def __post_init__(self) -> None:
        for name in ("t1", "t2", "u1", "u2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InvalidParams(f"angle {name}={v!r} is not a finite real")
        object.__setattr__(self, "convention", Convention(self.convention))

    def family(self, gate_probs: Mapping | None = None) -> "CondTableFamily":
        theta = {1: self.t1, 2: self.t2}
        theta_prime = {1: self.u1, 2: self.u2}
        tables = {(i, j): qm_table(theta[i], theta_prime[j], self.convention) for i, j in PAIRS}
        return CondTableFamily(tables, gate_probs)


# Analyzer angles that give the maximal quantum CHSH value under FULL_ANGLE.
REFERENCE_ANGLES = AngleConfig(math.pi / 4, 0.0, math.pi / 8, 3 * math.pi / 8)


def _pair(key: Any) -> tuple:
    if isinstance(key, tuple):
        pair = tuple(int(k) for k in key)
    else:
        s = str(key)
        pair = (int(s[0]), int(s[1])) if len(s) == 2 and s.isdigit() else None
    if pair not in PAIRS:
        raise InvalidTable(f"unknown setting pair {key!r}; expected one of 11, 12, 21, 22")
    return pair


@dataclass(frozen=True)
class CondTableFamily:
    """The four setting-pair tables plus gate probabilities (uniform by default)."""

    tables: Mapping
    gate_probs: Mapping | None = field(default=None)

    def __post_init__(self) -> None:
        tables = {}
        for key, table in dict(self.tables).items():
            pair = _pair(key)
            if pair in tables:
                raise InvalidTable(f"setting pair {key!r} given twice")
            if not isinstance(table, CondTable):
                raise InvalidTable(f"table for {key!r} is not a CondTable")
            tables[pair] = table
        missing = [PAIR_KEYS[p] for p in PAIRS if p not in tables]
        if missing:
            raise InvalidTable(f"missing tables for setting pairs {missing}")
        if self.gate_probs is None:
            gates = {p: Fraction(1, 4) for p in PAIRS}
        else:
            gates = {}
            for key, q in dict(self.gate_probs).items():
                gates[_pair(key)] = _coerce(q, f"gate_probs[{key}]")
            missing = [PAIR_KEYS[p] for p in PAIRS if p not in gates]
            if missing:
                raise InvalidTable(f"missing gate probabilities for {missing}")
            values = _check_distribution([gates[p] for p in PAIRS], "gate_probs")
            gates = dict(zip(PAIRS, values))
        object.__setattr__(self, "tables", {p: tables[p] for p in PAIRS})
        object.__setattr__(self, "gate_probs", gates)

    def table(self, i: int, j: int) -> CondTable:
        return self.tables[(i, j)]

    def q(self, i: int, j: int) -> Number:
        return self.gate_probs[(i, j)]

    def correlations(self) -> tuple:
        return tuple(table_correlation(self.tables[p]) for p in PAIRS)

    @property
    def exact(self) -> bool:
        return all(t.exact for t in self.tables.values()) and all(
            isinstance(q, Fraction) for q in self.gate_probs.values()
        )

    @classmethod
    def uniform(cls, gate_probs: Mapping | None = None) -> "CondTableFamily":
        return cls({p: CondTable.uniform() for p in PAIRS}, gate_probs)

    @classmethod
    def from_correlations(cls, correlations: Sequence[Any], gate_probs: Mapping | None = None) -> "CondTableFamily":
        """Uniform-marginal family with the given correlations in (11, 12, 21, 22) order."""
        if len(correlations) != 4:
            raise InvalidTable("need exactly four correlations")
        return cls({p: CondTable.from_correlation(c) for p, c in zip(PAIRS, correlations)}, gate_probs)

    def to_dict(self) -> dict:
        return {
            "tables": {PAIR_KEYS[p]: self.tables[p].to_dict() for p in PAIRS},
            "gate_probs": {PAIR_KEYS[p]: float(self.gate_probs[p]) for p in PAIRS},
        }

    @classmethod
    def from_dict(cls, data: Any) -> "CondTableFamily":
        if not isinstance(data, Mapping) or "tables" not in data:
            raise InvalidTable('family JSON must be an object with a "tables" key')
        raw_tables = data["tables"]
        if not isinstance(raw_tables, Mapping):
            raise InvalidTable('"tables" must be an object keyed by 11, 12, 21, 22')
        tables = {}
        for key, cells in raw_tables.items():
            if not isinstance(cells, Mapping):
                raise InvalidTable(f"table {key!r} must be an object with pp, pm, mp, mm")
            unknown = set(cells) - set(_CELL_NAMES)
            absent = [n for n in _CELL_NAMES if n not in cells]
            if unknown or absent:
                raise InvalidTable(f"table {key!r}: unknown keys {sorted(unknown)}, missing {absent}")
            tables[key] = CondTable(*(_coerce(cells[n], f"tables[{key}].{n}") for n in _CELL_NAMES))
        gates = data.get("gate_probs")
        if gates is not None and not isinstance(gates, Mapping):
            raise InvalidTable('"gate_probs" must be an object keyed by 11, 12, 21, 22')
        return cls(tables, gates)

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "CondTableFamily":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidTable(f"malformed JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class MarginalReport:
    consistent: bool
    max_discrepancy: Number
    # (side, index, sign) -> the marginal as seen from each partner setting
    marginals: dict

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "max_discrepancy": float(self.max_discrepancy),
        }


def check_marginal_consistency(family: CondTableFamily) -> MarginalReport:
    """Does each one-sided marginal agree across the partner's setting choice?"""
    seen = {}
    for i in (1, 2):
        for e_idx, e in enumerate((1, -1)):
            seen[("A", i, e)] = tuple(marginals(family.table(i, j))[e_idx] for j in (1, 2))
    for j in (1, 2):
        for e_idx, e in enumerate((1, -1)):
            seen[("B", j, e)] = tuple(marginals(family.table(i, j))[2 + e_idx] for i in (1, 2))
    worst = max(abs(u - v) for u, v in seen.values())
    tol = 0 if isinstance(worst, Fraction) else FLOAT_TOL
    return MarginalReport(worst <= tol, worst, seen)
