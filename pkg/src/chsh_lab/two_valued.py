"""Sixteen-outcome model with +-1 valued A_1, A_2, B_1, B_2 and a gate selector.

Eight rows carry probability ``x`` and eight carry ``y`` with 8x + 8y = 1.
Within a gate block the x-rows make A_i B_j = +1 and the y-rows make it -1,
except in block 22 where B_2 is flipped, so the per-gate conditional
correlations are 8x - 8y (blocks 11, 12, 21) and 8y - 8x (block 22).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .errors import InvalidParams, InvariantViolation, TargetOutOfRange
from .prob_core import (
    FLOAT_TOL,
    ChshReport,
    Event,
    FiniteProbSpace,
    Number,
    Rv,
    chsh_value,
    condition,
    conditional_expectation,
    correlation,
    expectation,
    is_exact,
    make_report,
    make_space,
    to_number,
)
from .settings import PAIRS

# columns: A1, A2, B1, B2, eta
X_ROWS = (
    (1, 1, 1, 1, 11),
    (-1, -1, -1, -1, 11),
    (1, 1, 1, 1, 12),
    (-1, -1, -1, -1, 12),
    (1, 1, 1, 1, 21),
    (-1, -1, -1, -1, 21),
    (1, 1, 1, -1, 22),
    (-1, -1, -1, 1, 22),
)
Y_ROWS = (
    (-1, -1, 1, 1, 11),
    (1, 1, -1, -1, 11),
    (-1, -1, 1, 1, 12),
    (1, 1, -1, -1, 12),
    (-1, -1, 1, 1, 21),
    (1, 1, -1, -1, 21),
    (-1, -1, 1, -1, 22),
    (1, 1, -1, 1, 22),
)
ROWS = X_ROWS + Y_ROWS


@dataclass(frozen=True)
class TwoValuedParams:
    x: Number
    y: Number

    def __post_init__(self) -> None:
        x, y = self.x, self.y
        if not (is_exact(x) and is_exact(y)):
            x, y = float(x), float(y)
        else:
            x, y = to_number(x), to_number(y)
        if not (x >= 0 and y >= 0):
            raise InvalidParams(f"x={x!r}, y={y!r}: both must be nonnegative")
        mass = 8 * x + 8 * y
        if isinstance(mass, Fraction):
            if mass != 1:
                raise InvalidParams(f"8x + 8y = {mass}, must equal 1")
        elif abs(mass - 1.0) > FLOAT_TOL:
            raise InvalidParams(f"8x + 8y = {mass!r}, must equal 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def exact(self) -> bool:
        return isinstance(self.x, Fraction)

    @property
    def tol(self) -> float:
        return 0.0 if self.exact else FLOAT_TOL


# x and y that reproduce correlations of +-1/sqrt(2) per gate
TSIRELSON_PARAMS = TwoValuedParams((2**0.5 + 1) / (16 * 2**0.5), (2**0.5 - 1) / (16 * 2**0.5))
# all weight on the x-rows: conditional CHSH sum 4, unconditional 2
EXTREME_PARAMS = TwoValuedParams(Fraction(1, 8), Fraction(0))


@dataclass(frozen=True)
class TwoValuedSpace:
    params: TwoValuedParams
    space: FiniteProbSpace
    a1: Rv
    a2: Rv
    b1: Rv
    b2: Rv
    eta: Rv

    def A(self, i: int) -> Rv:
        return (self.a1, self.a2)[i - 1]

    def B(self, j: int) -> Rv:
        return (self.b1, self.b2)[j - 1]

    def block(self, i: int, j: int) -> Event:
        return self.eta.eq(10 * i + j)

    def chsh(self) -> ChshReport:
        return chsh_value(self.space, self.a1, self.a2, self.b1, self.b2)


def build_two_valued_space(params: TwoValuedParams) -> TwoValuedSpace:
    x, y = params.x, params.y
    space = make_space(ROWS, [x] * len(X_ROWS) + [y] * len(Y_ROWS))
    unit = (-1, 1)
    return TwoValuedSpace(
        params=params,
        space=space,
        a1=space.rv(lambda r: r[0], unit),
        a2=space.rv(lambda r: r[1], unit),
        b1=space.rv(lambda r: r[2], unit),
        b2=space.rv(lambda r: r[3], unit),
        eta=space.rv(lambda r: r[4]),
    )


def closed_form_conditionals(params: TwoValuedParams) -> tuple:
    c = 8 * params.x - 8 * params.y
    return (c, c, c, -c)


def conditional_correlations(tvs: TwoValuedSpace) -> tuple:
    """E(A_i B_j | eta=ij) for ij = 11, 12, 21, 22, computed on the space.

    Raises InvariantViolation if the result disagrees with 8x-8y / 8y-8x.
    """
    values = tuple(
        conditional_expectation(tvs.space, tvs.A(i) * tvs.B(j), tvs.block(i, j)) for i, j in PAIRS
    )
    expected = closed_form_conditionals(tvs.params)
    for got, want in zip(values, expected):
        if abs(got - want) > tvs.params.tol:
            raise InvariantViolation(f"conditional correlation {got!r} != closed form {want!r}")
    return values


def conditional_chsh(tvs: TwoValuedSpace) -> ChshReport:
    return make_report(conditional_correlations(tvs), bounds=(4, 8))


def solve_xy(c: Any) -> TwoValuedParams:
    """(x, y) whose per-gate conditional correlation is ``c`` (and -c at gate 22)."""
    c = to_number(c)
    if not -1 <= c <= 1:
        raise TargetOutOfRange(f"target correlation {c!r} outside [-1, 1]")
    return TwoValuedParams((1 + c) / 16, (1 - c) / 16)


@dataclass(frozen=True)
class NonSignallingReport:
    ok: bool
    max_deviation: Number
    # (rv name, outcome, conditioning label) -> probability
    probabilities: dict

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_deviation": float(self.max_deviation),
            "probabilities": {
                f"P({name}={e:+d} | {label})": float(p)
                for (name, e, label), p in self.probabilities.items()
            },
        }


def verify_non_signalling(tvs: TwoValuedSpace) -> NonSignallingReport:
    """Every single-outcome probability is 1/2 under every gate condition.

    For A_i that covers eta in {i1, i2}, each individual eta value, and no
    condition at all; symmetrically for B_j.
    """
    half = Fraction(1, 2) if tvs.params.exact else 0.5
    probs = {}
    sides = [("A1", tvs.a1, (11, 12)), ("A2", tvs.a2, (21, 22)), ("B1", tvs.b1, (11, 21)), ("B2", tvs.b2, (12, 22))]
    for name, rv, own in sides:
        conditions = [("all", tvs.space.everything()), (f"eta in {set(own)}", tvs.eta.isin(own))]
        conditions += [(f"eta={code}", tvs.eta.eq(code)) for code in (11, 12, 21, 22)]
        for label, event in conditions:
            conditioned = condition(tvs.space, event)
            for e in (1, -1):
                probs[(name, e, label)] = conditioned.prob(rv.eq(e))
    worst = max(abs(p - half) for p in probs.values())
    return NonSignallingReport(worst <= tvs.params.tol, worst, probs)


@dataclass(frozen=True)
class RemarkReport:
    """Whether conditional and unconditional correlations coincide per pair."""

    holds: bool
    conditional: tuple
    unconditional: tuple

    @property
    def residuals(self) -> tuple:
        return tuple(c - u for c, u in zip(self.conditional, self.unconditional))

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "pairs": {
                f"{i}{j}": {
                    "conditional": float(c),
                    "unconditional": float(u),
                    "residual": float(c - u),
                }
                for (i, j), c, u in zip(PAIRS, self.conditional, self.unconditional)
            },
        }


def check_remark(tvs: TwoValuedSpace) -> RemarkReport:
    cond = conditional_correlations(tvs)
    uncond = tuple(correlation(tvs.space, tvs.A(i), tvs.B(j)) for i, j in PAIRS)
    holds = all(abs(c - u) <= tvs.params.tol for c, u in zip(cond, uncond))
    return RemarkReport(holds, cond, uncond)


def report(tvs: TwoValuedSpace) -> dict:
    """Everything about one (x, y) choice, as a JSON-ready dict."""
    p = tvs.params
    uncond = tvs.chsh()
    cond = conditional_chsh(tvs)
    out = {
        "params": {"x": float(p.x), "y": float(p.y), "exact": p.exact},
        "rows": [
            {"A1": r[0], "A2": r[1], "B1": r[2], "B2": r[3], "eta": r[4], "weight": float(w)}
            for r, w in zip(tvs.space.atoms, tvs.space.weights)
        ],
        "means": {
            name: float(expectation(tvs.space, rv))
            for name, rv in (("A1", tvs.a1), ("A2", tvs.a2), ("B1", tvs.b1), ("B2", tvs.b2))
        },
        "unconditional_chsh": uncond.to_dict(),
        "conditional_chsh": cond.to_dict(),
        "non_signalling": verify_non_signalling(tvs).to_dict(),
        "remark": check_remark(tvs).to_dict(),
    }
    if p.y == 0 or p.x == 0:
        # "x=1, y=0" read literally puts mass 8 on the space; conditional
        # quantities are ratios and survive, unconditional ones scale by 8.
        out["unnormalized_reading"] = {
            "x": 1 if p.y == 0 else 0,
            "y": 0 if p.y == 0 else 1,
            "total_mass": 8,
            "conditional_chsh_value": float(cond.value),
            "unconditional_chsh_value": float(8 * uncond.value),
            "note": "the literal weights give total mass 8, not 1; the report is computed with the normalized x, y",
        }
    return out
