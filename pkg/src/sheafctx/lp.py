"""Exact-rational feasibility LP: find x >= 0 with A x = b.

Phase-one simplex on a dense Fraction tableau with Bland's rule. When the
system is infeasible the final phase-one duals give a Farkas certificate y
with A^T y <= 0 and b^T y > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]


@dataclass(frozen=True)
class FarkasCertificate:
    """Dual ray y proving {x >= 0 : A x = b} is empty."""

    y: tuple[Fraction, ...]

    def verify(self, A: Sequence[Sequence], b: Sequence) -> bool:
        m = len(A)
        if len(self.y) != m:
            return False
        n = len(A[0]) if m else 0
        for j in range(n):
            if sum(self.y[i] * A[i][j] for i in range(m)) > 0:
                return False
        return sum(self.y[i] * b[i] for i in range(m)) > 0


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    x: tuple[Fraction, ...] | None = None
    certificate: FarkasCertificate | None = None
    pivots: int = 0


def solve_feasibility(A: Sequence[Sequence], b: Sequence, max_pivots: int = 100_000) -> FeasibilityResult:
    m = len(A)
    n = len(A[0]) if m else 0
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    if m == 0:
        return FeasibilityResult(True, tuple(Fraction(0) for _ in range(n)))

    # rows with negative rhs are negated so the artificial basis starts feasible
    signs = [(-1 if bi < 0 else 1) for bi in b]
    # tableau columns: n structural, m artificial, then rhs
    T: Matrix = []
    for i in range(m):
        s = signs[i]
        row = [s * v for v in A[i]]
        row += [Fraction(1) if k == i else Fraction(0) for k in range(m)]
        row.append(s * b[i])
        T.append(row)
    basis = [n + i for i in range(m)]
    cost = [Fraction(0)] * n + [Fraction(1)] * m

    # reduced costs c_j - c_B B^-1 A_j; initially c_B = 1 on every row
    width = n + m
    reduced = [cost[j] - sum(T[i][j] for i in range(m)) for j in range(width)]

    pivots = 0
    while True:
        entering = next((j for j in range(width) if reduced[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            a = T[i][entering]
            if a > 0:
                ratio = T[i][-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # phase-one objective is bounded below by 0, so this cannot happen
            raise RuntimeError("phase-one LP reported unbounded")
        r = best[1]
        piv = T[r][entering]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][entering] != 0:
                f = T[i][entering]
                Ti, Tr = T[i], T[r]
                T[i] = [Ti[k] - f * Tr[k] for k in range(width + 1)]
        f = reduced[entering]
        reduced = [reduced[k] - f * T[r][k] for k in range(width)]
        basis[r] = entering
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("pivot limit exceeded")

    objective = sum(T[i][-1] for i in range(m) if basis[i] >= n)
    if objective == 0:
        x = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = T[i][-1]
        return FeasibilityResult(True, tuple(x), pivots=pivots)

    # y^T = c_B^T B^-1; the artificial columns of the tableau hold B^-1
    cB = [cost[j] for j in basis]
    y = []
    for k in range(m):
        yk = sum(cB[i] * T[i][n + k] for i in range(m))
        y.append(signs[k] * yk)
    cert = FarkasCertificate(tuple(y))
    assert cert.verify(A, b), "phase-one duals failed to certify infeasibility"
    return FeasibilityResult(False, certificate=cert, pivots=pivots)
