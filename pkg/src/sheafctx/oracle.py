"""Vertex-enumeration feasibility oracle and small exact linear algebra.

Independent of the simplex in :mod:`sheafctx.lp`: the system A x = b, x >= 0
is feasible iff it has a basic feasible solution, so we enumerate column
bases, solve each square system by Gaussian elimination over the rationals
and look for a nonnegative one.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np


def row_reduce(M: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    R = [[Fraction(v) for v in row] for row in M]
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(rows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return R, pivots


def independent_rows(A: Sequence[Sequence], b: Sequence) -> tuple[list[list[Fraction]], list[Fraction]] | None:
    """Equivalent full-row-rank system, or None if A x = b is inconsistent."""
    aug = [list(row) + [bv] for row, bv in zip(A, b)]
    R, piv = row_reduce(aug)
    n = len(A[0]) if A else 0
    if n in piv:
        return None
    keep = [row for row, _ in zip(R, piv)]
    return [row[:n] for row in keep], [row[n] for row in keep]


def solve_square(M: Sequence[Sequence], rhs: Sequence) -> list[Fraction] | None:
    """Unique solution of a square system, None if singular."""
    k = len(M)
    aug = [list(M[i]) + [rhs[i]] for i in range(k)]
    R, piv = row_reduce(aug)
    if piv != list(range(k)):
        return None
    return [R[i][k] for i in range(k)]


def basic_solutions(A: Sequence[Sequence], b: Sequence):
    """Yield (columns, values) for every basic solution of A x = b."""
    reduced = independent_rows(A, b)
    if reduced is None:
        return
    Ar, br = reduced
    r = len(Ar)
    n = len(A[0]) if A else 0
    if r == 0:
        yield (), []
        return
    for cols in combinations(range(n), r):
        sub = [[row[c] for c in cols] for row in Ar]
        sol = solve_square(sub, br)
        if sol is not None:
            yield cols, sol


def _drop_forced_zeros(A, b):
    """Columns that must vanish when A >= 0: any column hitting a zero-rhs row."""
    n = len(A[0]) if A else 0
    alive = [all(A[i][j] == 0 or b[i] != 0 for i in range(len(A))) for j in range(n)]
    return [j for j in range(n) if alive[j]]


def oracle_feasible(A: Sequence[Sequence], b: Sequence, screen_tol: float = 1e-7) -> tuple[Fraction, ...] | None:
    """A nonnegative basic solution of A x = b, or None if there is none.

    For integer A every basis is screened in floating point first (integer
    determinants make the singularity test reliable); any basis whose float
    solution is not clearly negative is then re-solved exactly, and only an
    exactly nonnegative solution is returned. Other inputs take the fully
    exact path through :func:`basic_solutions`.
    """
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    n = len(A[0]) if A else 0
    integral = all(v.denominator == 1 for row in A for v in row)
    nonneg = all(v >= 0 for row in A for v in row)
    if not (integral and nonneg):
        for cols, sol in basic_solutions(A, b):
            if all(v >= 0 for v in sol):
                return _embed(n, cols, sol)
        return None

    live = _drop_forced_zeros(A, b)
    sub_A = [[row[j] for j in live] for row in A]
    if not live:
        return None if any(bi != 0 for bi in b) else tuple(Fraction(0) for _ in range(n))
    if independent_rows(sub_A, b) is None:
        return None
    # independent rows of sub_A, kept in their original integer form
    _, row_ids = row_reduce([list(col) for col in zip(*sub_A)])
    M = [sub_A[i] for i in row_ids]
    rhs = [b[i] for i in row_ids]
    r = len(M)
    k = len(live)
    if r == 0:
        return tuple(Fraction(0) for _ in range(n))
    if r > k:
        return None
    Mf = np.array([[float(v) for v in row] for row in M])
    rf = np.array([float(v) for v in rhs])
    combos = np.array(list(combinations(range(k), r)), dtype=int)
    for start in range(0, len(combos), 20000):
        chunk = combos[start:start + 20000]
        mats = np.transpose(Mf[:, chunk], (1, 0, 2))
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 0.5
        if not ok.any():
            continue
        sols = np.linalg.solve(mats[ok], np.broadcast_to(rf, (int(ok.sum()), r))[..., None])[..., 0]
        cand = np.nonzero(sols.min(axis=1) >= -screen_tol)[0]
        for idx in cand:
            cols = chunk[ok][idx]
            exact = solve_square([[row[c] for c in cols] for row in M], rhs)
            if exact is not None and all(v >= 0 for v in exact):
                return _embed(n, [live[c] for c in cols], exact)
    return None


def _embed(n, cols, sol):
    x = [Fraction(0)] * n
    for c, v in zip(cols, sol):
        x[c] = v
    return tuple(x)


def least_norm_correction(N: Sequence[Sequence], residual: Sequence) -> list[Fraction] | None:
    """Minimum-norm exact solution d of N d = residual, None if inconsistent.

    Uses d = N^T (N N^T)^-1 residual on an independent subset of rows.
    """
    reduced = independent_rows(N, residual)
    if reduced is None:
        return None
    Nr, rr = reduced
    cols = len(N[0]) if N else 0
    if not Nr:
        return [Fraction(0)] * cols
    G = [[sum(a * b for a, b in zip(ri, rj)) for rj in Nr] for ri in Nr]
    z = solve_square(G, rr)
    if z is None:
        return None
    return [sum(Nr[i][c] * z[i] for i in range(len(Nr))) for c in range(cols)]
