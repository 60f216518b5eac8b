"""Joint realizability of the four setting-pair tables.

Decides whether some distribution over (a1, a2, b1, b2) in {+-1}^4 has the
four given tables as its pairwise (a_i, b_j) marginals. The general decision
is a 16-variable linear feasibility problem; for families with uniform
marginals the eight CHSH inequalities are an independent, equivalent test.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InvariantViolation, PreconditionViolated
from .prob_core import Number
from .settings import PAIR_KEYS, PAIRS, SIGNS, CondTableFamily, check_marginal_consistency, marginals
from .simplex import phase_one

TOL = 1e-9

# (a1, a2, b1, b2), +1 before -1
ASSIGNMENTS = tuple(itertools.product((1, -1), repeat=4))

# signs (s11, s12, s21, s22) with exactly one -1, and their negations
CHSH_PATTERNS = tuple(
    tuple(sign * (-1 if k == flip else 1) for k in range(4)) for sign in (1, -1) for flip in (3, 2, 1, 0)
)


def _constraint_rows() -> list:
    rows = []
    for i, j in PAIRS:
        for a, b in SIGNS:
            rows.append([int(v[i - 1] == a and v[1 + j] == b) for v in ASSIGNMENTS])
    return rows


CONSTRAINTS = _constraint_rows()


def _rhs(family: CondTableFamily) -> list:
    return [family.table(i, j).p(a, b) for i, j in PAIRS for a, b in SIGNS]


@dataclass(frozen=True)
class JointDistribution:
    weights: tuple

    def pair_marginal(self, i: int, j: int) -> tuple:
        """(P(++), P(+-), P(-+), P(--)) of (a_i, b_j)."""
        return tuple(
            sum((w for v, w in zip(ASSIGNMENTS, self.weights) if v[i - 1] == a and v[1 + j] == b), self.weights[0] * 0)
            for a, b in SIGNS
        )

    def max_table_error(self, family: CondTableFamily) -> Number:
        return max(
            abs(got - want)
            for i, j in PAIRS
            for got, want in zip(self.pair_marginal(i, j), family.table(i, j).cells)
        )


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: JointDistribution | None
    certificate: dict | None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "witness": None if self.witness is None else [float(w) for w in self.witness.weights],
            "certificate": self.certificate,
        }


@dataclass(frozen=True)
class FineCheck:
    passes: bool
    max_value: Number
    worst_signs: tuple

    def to_dict(self) -> dict:
        return {"passes": self.passes, "max_value": float(self.max_value), "worst_signs": list(self.worst_signs)}


def _has_uniform_marginals(family: CondTableFamily) -> bool:
    tol = 0 if family.exact else TOL
    return all(abs(m - Fraction(1, 2)) <= tol for t in family.tables.values() for m in marginals(t))


def fine_inequality_check(family: CondTableFamily) -> FineCheck:
    """Evaluate all eight signed CHSH sums of the table correlations against 2.

    Only meaningful for uniform marginals, where these inequalities are
    necessary and sufficient for a joint distribution to exist.
    """
    if not _has_uniform_marginals(family):
        raise PreconditionViolated("CHSH-inequality test requires every marginal to equal 1/2")
    cs = family.correlations()
    values = [(sum(s * c for s, c in zip(signs, cs)), signs) for signs in CHSH_PATTERNS]
    best, worst_signs = max(values, key=lambda t: t[0])
    tol = 0 if family.exact else TOL
    return FineCheck(best <= 2 + tol, best, worst_signs)


def joint_feasible(family: CondTableFamily) -> Feasibility:
    consistency = check_marginal_consistency(family)
    if not consistency.consistent:
        return Feasibility(
            False,
            None,
            {"kind": "inconsistent_marginals", "max_discrepancy": float(consistency.max_discrepancy)},
        )
    exact = family.exact
    rhs = _rhs(family)
    if exact:
        A = [[Fraction(v) for v in row] for row in CONSTRAINTS]
        result = phase_one(A, rhs, tol=0, pivot_tol=0)
    else:
        A = [[float(v) for v in row] for row in CONSTRAINTS]
        result = phase_one(A, [float(v) for v in rhs], tol=TOL, pivot_tol=1e-12)

    if result.feasible:
        witness = _fitted_witness(family, exact)
        if witness is None:
            weights = result.x if exact else [max(w, 0.0) for w in result.x]
            witness = JointDistribution(tuple(weights))
        err = witness.max_table_error(family)
        if err > (0 if exact else TOL):
            raise InvariantViolation(f"LP witness misses the tables by {float(err)!r}")
        return Feasibility(True, witness, None)

    if _has_uniform_marginals(family):
        fine = fine_inequality_check(family)
        if not fine.passes:
            return Feasibility(
                False,
                None,
                {
                    "kind": "chsh",
                    "signs": list(fine.worst_signs),
                    "value": float(fine.max_value),
                    "bound": 2,
                    "description": _describe(fine.worst_signs, fine.max_value),
                },
            )
    return Feasibility(False, None, _farkas(result.dual, rhs))


def _fitted_witness(family: CondTableFamily, exact: bool) -> JointDistribution | None:
    """Iterative proportional fitting from the uniform joint.

    When it converges this is the maximum-entropy joint with the given pair
    marginals, a more representative witness than an LP vertex. Exact mode
    only accepts a fit that is exact after a couple of sweeps.
    """
    sweeps, tol = (2, 0) if exact else (2000, 1e-13)
    n = len(ASSIGNMENTS)
    w = [Fraction(1, n)] * n if exact else [1.0 / n] * n
    rhs = _rhs(family)
    if not exact:
        rhs = [float(v) for v in rhs]
    for _ in range(sweeps):
        for row, target in zip(CONSTRAINTS, rhs):
            mass = sum((wk for wk, r in zip(w, row) if r), w[0] * 0)
            if mass == 0:
                if target > tol:
                    return None
                continue
            factor = target / mass
            w = [wk * factor if r else wk for wk, r in zip(w, row)]
        err = max(abs(sum((wk for wk, r in zip(w, row) if r), w[0] * 0) - t) for row, t in zip(CONSTRAINTS, rhs))
        if err <= tol:
            return JointDistribution(tuple(w))
    return None


def _describe(signs: Sequence[int], value: Number) -> str:
    terms = " ".join(f"{'+' if s > 0 else '-'} <A{i}B{j}>" for s, (i, j) in zip(signs, PAIRS))
    return f"{terms.lstrip('+ ')} = {float(value):.12g} > 2"


def _farkas(dual: Sequence, rhs: Sequence) -> dict:
    # y . (A x) <= 0 for every x >= 0, yet y . b > 0
    rows = [f"p{PAIR_KEYS[p]}({'+' if a > 0 else '-'}{'+' if b > 0 else '-'})" for p in PAIRS for a, b in SIGNS]
    return {
        "kind": "farkas",
        "functional": {r: float(y) for r, y in zip(rows, dual)},
        "value": float(sum(y * b for y, b in zip(dual, rhs))),
    }


@dataclass(frozen=True)
class RemarkGap:
    feasibility: Feasibility
    interpretation: str

    @property
    def gap_present(self) -> bool:
        return not self.feasibility.feasible

    def to_dict(self) -> dict:
        return {
            "gap_present": self.gap_present,
            "interpretation": self.interpretation,
            **self.feasibility.to_dict(),
        }


def remark_gap(family: CondTableFamily) -> RemarkGap:
    """Is there one space on which conditioning on the gate changes nothing?

    A feasible joint, paired with a gate selector drawn independently of it,
    is such a space: every conditional correlation then equals the
    unconditional one. Infeasibility means no model of that kind reproduces
    the tables.
    """
    feas = joint_feasible(family)
    if feas.feasible:
        text = (
            "a single joint distribution reproduces all four tables; with an independent gate "
            "selector, E(A_i B_j | eta=ij) = E(A_i B_j) for every pair"
        )
    else:
        text = (
            "no joint distribution on {+-1}^4 reproduces all four tables, so no probability space "
            "matching them has E(A_i B_j | eta=ij) = E(A_i B_j) for every pair; the gate must be conditioned on"
        )
    return RemarkGap(feas, text)
