"""One Kolmogorov space carrying all four setting pairs at once.

Atoms are 4-tuples (w1, w2, w3, w4) with values in {-1, 0, +1}: positions 1
and 2 hold the outcomes of the two A-side channels, positions 3 and 4 those of
the two B-side channels, and a blocked channel reads 0. Exactly one A and one
B position is nonzero, so there are 16 atoms, grouped into four blocks by the
gate selector eta in {11, 12, 21, 22}.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import NullEvent
from .prob_core import (
    FLOAT_TOL,
    ChshReport,
    Event,
    FiniteProbSpace,
    Number,
    Rv,
    chsh_value,
    conditional_expectation,
    correlation,
    make_report,
    make_space,
)
from .settings import PAIRS, SIGNS, CondTableFamily, table_correlation

ETA_CODES = {pair: 10 * pair[0] + pair[1] for pair in PAIRS}


def block_atom(i: int, j: int, a: int, b: int) -> tuple:
    """Atom of block ij with A-side outcome ``a`` and B-side outcome ``b``."""
    atom = [0, 0, 0, 0]
    atom[i - 1] = a
    atom[1 + j] = b
    return tuple(atom)


ATOMS = tuple(block_atom(i, j, a, b) for i, j in PAIRS for a, b in SIGNS)


def eta_of(atom: tuple) -> int:
    i = 1 if atom[0] != 0 else 2
    j = 1 if atom[2] != 0 else 2
    return ETA_CODES[(i, j)]


@dataclass(frozen=True)
class UnifyingSpace:
    family: CondTableFamily
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
        return self.eta.eq(ETA_CODES[(i, j)])

    def chsh(self) -> ChshReport:
        """Unconditional CHSH of the four random variables (bound 2 applies)."""
        return chsh_value(self.space, self.a1, self.a2, self.b1, self.b2)

    def to_dict(self) -> dict:
        return {
            "atoms": [list(a) for a in self.space.atoms],
            "weights": [float(w) for w in self.space.weights],
            "rvs": {
                "A1": [int(v) for v in self.a1.values],
                "A2": [int(v) for v in self.a2.values],
                "B1": [int(v) for v in self.b1.values],
                "B2": [int(v) for v in self.b2.values],
                "eta": [int(v) for v in self.eta.values],
            },
        }


def build_unifying_space(family: CondTableFamily) -> UnifyingSpace:
    weights = [
        family.q(i, j) * family.table(i, j).p(a, b) for i, j in PAIRS for a, b in SIGNS
    ]
    space = make_space(ATOMS, weights)
    unit = (-1, 1)
    return UnifyingSpace(
        family=family,
        space=space,
        a1=space.rv(lambda w: w[0], unit),
        a2=space.rv(lambda w: w[1], unit),
        b1=space.rv(lambda w: w[2], unit),
        b2=space.rv(lambda w: w[3], unit),
        eta=space.rv(eta_of),
    )


@dataclass(frozen=True)
class PiCheck:
    pair: tuple
    conditional: Number  # E(A_i B_j | eta = ij)
    rescaled: Number  # <A_i, B_j> / q_ij
    table: Number  # correlation read straight off p_ij
    residual: Number

    def to_dict(self) -> dict:
        return {
            "pair": f"{self.pair[0]}{self.pair[1]}",
            "conditional": float(self.conditional),
            "rescaled": float(self.rescaled),
            "table": float(self.table),
            "residual": float(self.residual),
        }


@dataclass(frozen=True)
class PiReport:
    checks: tuple
    tol: float

    @property
    def max_residual(self) -> Number:
        return max(c.residual for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_residual": float(self.max_residual),
            "checks": [c.to_dict() for c in self.checks],
        }


def _require_open_gates(us: UnifyingSpace) -> None:
    for i, j in PAIRS:
        if us.family.q(i, j) == 0:
            raise NullEvent(f"gate {i}{j} has probability 0; its conditional correlation is undefined")


def verify_pi_identity(us: UnifyingSpace) -> PiReport:
    """Check E(A_i B_j | eta=ij) = <A_i, B_j>/q_ij = corr(p_ij) for every pair."""
    _require_open_gates(us)
    checks = []
    for i, j in PAIRS:
        product = us.A(i) * us.B(j)
        cond = conditional_expectation(us.space, product, us.block(i, j))
        rescaled = correlation(us.space, us.A(i), us.B(j)) / us.family.q(i, j)
        table = table_correlation(us.family.table(i, j))
        residual = max(abs(cond - table), abs(rescaled - table))
        checks.append(PiCheck((i, j), cond, rescaled, table, residual))
    tol = 0 if us.space.exact and us.family.exact else FLOAT_TOL
    return PiReport(tuple(checks), tol)


def conditional_correlations(us: UnifyingSpace) -> tuple:
    _require_open_gates(us)
    return tuple(
        conditional_expectation(us.space, us.A(i) * us.B(j), us.block(i, j)) for i, j in PAIRS
    )


def conditional_chsh(us: UnifyingSpace) -> ChshReport:
    """CHSH of the per-gate conditional correlations, judged against 4 and 8.

    4 is the trivial bound for four terms each in [-1, 1]; 8 is what the
    unconditional bound 2 turns into after rescaling by 1/q = 4.
    """
    return make_report(conditional_correlations(us), bounds=(4, 8))


def pair_block_exclusive(us: UnifyingSpace) -> bool:
    """A_i * B_j vanishes on every atom outside block ij."""
    for i, j in PAIRS:
        product = us.A(i) * us.B(j)
        block = us.block(i, j)
        for atom, v in zip(us.space.atoms, product.values):
            if atom not in block and v != 0:
                return False
    return True


def uniform_gate_scaling(us: UnifyingSpace) -> tuple:
    """Differences <A_i, B_j> - corr(p_ij)/4, exact when the family is."""
    return tuple(
        correlation(us.space, us.A(i), us.B(j)) - table_correlation(us.family.table(i, j)) * Fraction(1, 4)
        for i, j in PAIRS
    )
