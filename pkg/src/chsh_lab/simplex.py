"""Phase-one simplex for feasibility of ``A x = b, x >= 0``.

Dense tableau, Bland's rule (no cycling). Entries may be Fractions, in which
case every step is exact and ``tol`` should be 0, or floats with a small
positive ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass
class PhaseOneResult:
    feasible: bool
    x: list | None
    # optimal sum of artificial variables; 0 iff feasible
    infeasibility: object
    # y with A^T y <= 0 and b.y > 0 whenever infeasible (Farkas certificate)
    dual: list
    pivots: int


def phase_one(A: Sequence[Sequence], b: Sequence, tol: float = 0, pivot_tol: float | None = None) -> PhaseOneResult:
    m = len(A)
    n = len(A[0]) if m else 0
    if pivot_tol is None:
        pivot_tol = tol * 1e-3
    zero = b[0] * 0 if m else 0
    one = zero + 1

    signs = [-1 if bi < 0 else 1 for bi in b]
    # row i: [A_i | e_i | b_i], scaled so that b_i >= 0
    T = []
    for i in range(m):
        s = signs[i]
        row = [s * a for a in A[i]] + [one if k == i else zero for k in range(m)] + [s * b[i]]
        T.append(row)
    basis = [n + i for i in range(m)]
    width = n + m + 1

    # reduced costs for min sum(artificials); last entry is -objective
    d = [zero] * width
    for j in range(n):
        d[j] = -sum((T[i][j] for i in range(m)), zero)
    d[-1] = -sum((T[i][-1] for i in range(m)), zero)

    pivots = 0
    while True:
        entering = next((j for j in range(n + m) if d[j] < -pivot_tol), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            a = T[i][entering]
            if a > pivot_tol:
                key = (T[i][-1] / a, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # cannot happen: the phase-one objective is bounded below by 0
            raise RuntimeError("phase-one problem reported unbounded")
        r = best[1]
        piv = T[r][entering]
        T[r] = [v / piv for v in T[r]]
        prow = T[r]
        for i in range(m):
            if i != r:
                f = T[i][entering]
                if f != 0:
                    T[i] = [u - f * v for u, v in zip(T[i], prow)]
        f = d[entering]
        d = [u - f * v for u, v in zip(d, prow)]
        basis[r] = entering
        pivots += 1

    infeasibility = -d[-1]
    x = None
    feasible = infeasibility <= tol
    if feasible:
        x = [zero] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = T[i][-1]
    # artificial column k has cost 1, so its reduced cost is 1 - y_k
    dual = [signs[k] * (one - d[n + k]) for k in range(m)]
    return PhaseOneResult(feasible, x, infeasibility, dual, pivots)
