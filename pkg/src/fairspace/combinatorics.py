"""Matchings, bottleneck assignments and Birkhoff decompositions.

Conventions: value tables are ``V[j, i]`` = mass of piece i for measure j;
stochastic matrices are indexed ``M[piece, measure]`` so their columns
belong to measures.  Permutations are arrays mapping measure -> piece.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "NotDoublyStochasticError",
    "ForcedEntryZeroError",
    "max_matching",
    "perfect_matching",
    "bottleneck_value",
    "bottleneck_permutation",
    "envy_matrix",
    "bottleneck_assignment",
    "secretive_deficits",
    "secretive_feasible",
    "birkhoff_decompose",
    "forced_column_permutation",
    "support_permutation",
    "stack_matrix",
    "permutation_matrix",
]


class NotDoublyStochasticError(ValueError):
    pass


class ForcedEntryZeroError(ValueError):
    pass


def max_matching(adjacency) -> list[int]:
    """Maximum-cardinality bipartite matching by augmenting paths.

    ``adjacency[r][c]`` says row r may take column c.  Returns ``match[r]``,
    the column of row r or -1.  Rows are processed in order and columns are
    tried in increasing order, so the result is deterministic.
    """
    adj = np.asarray(adjacency, dtype=bool)
    if adj.ndim != 2:
        raise ValueError("adjacency must be a matrix")
    n_rows, n_cols = adj.shape
    nbrs = [np.flatnonzero(adj[r]).tolist() for r in range(n_rows)]
    col_owner = [-1] * n_cols

    def augment(r, seen):
        for c in nbrs[r]:
            if seen[c]:
                continue
            seen[c] = True
            if col_owner[c] == -1 or augment(col_owner[c], seen):
                col_owner[c] = r
                return True
        return False

    for r in range(n_rows):
        augment(r, [False] * n_cols)
    match = [-1] * n_rows
    for c, r in enumerate(col_owner):
        if r >= 0:
            match[r] = c
    return match


def _saturates(adj: np.ndarray) -> bool:
    return sum(m >= 0 for m in max_matching(adj)) == adj.shape[0]


def perfect_matching(adjacency) -> list[int] | None:
    """Lexicographically smallest row-saturating matching, or None."""
    adj = np.array(adjacency, dtype=bool)
    if not _saturates(adj):
        return None
    for r in range(adj.shape[0]):
        for c in np.flatnonzero(adj[r]):
            trial = adj.copy()
            trial[r, :] = False
            trial[r, c] = True
            trial[r + 1:, c] = False
            if _saturates(trial):
                adj = trial
                break
    return [int(np.flatnonzero(row)[0]) for row in adj]


def bottleneck_value(cost) -> float:
    """Smallest threshold t such that ``cost <= t`` admits a row-saturating matching."""
    C = np.asarray(cost, dtype=float)
    n_rows, n_cols = C.shape
    if n_rows > n_cols:
        raise ValueError("more rows than columns")
    if n_rows == 0:
        return 0.0
    # the optimum is at least the largest row minimum
    levels = np.unique(C)
    levels = levels[levels >= C.min(axis=1).max()]
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _saturates(C <= levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def bottleneck_permutation(cost) -> tuple[list[int], float]:
    """Row-saturating assignment minimizing the largest assigned cost.

    Binary search over the distinct entries with a matching test at each
    threshold; among optimal assignments the lexicographically smallest wins.
    """
    C = np.asarray(cost, dtype=float)
    t = bottleneck_value(C)
    if C.shape[0] == 0:
        return [], 0.0
    return perfect_matching(C <= t), t


def envy_matrix(V) -> np.ndarray:
    """``E[j, i] = max_i' V[j, i'] - V[j, i]`` (how far piece i is from j's favourite)."""
    V = np.asarray(V, dtype=float)
    return V.max(axis=1, keepdims=True) - V


def bottleneck_assignment(V) -> tuple[list[int], float]:
    """Permutation minimizing the worst envy; envy 0 means exactly envy-free."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] != V.shape[1]:
        raise ValueError("value table must be square")
    return bottleneck_permutation(envy_matrix(V))


def secretive_deficits(V) -> np.ndarray:
    """For each excluded piece, the least envy slack that still seats every row."""
    V = np.asarray(V, dtype=float)
    n_rows, n = V.shape
    if n_rows != n - 1:
        raise ValueError("secretive tables have one row fewer than columns")
    E = envy_matrix(V)
    out = np.empty(n)
    for excl in range(n):
        keep = [i for i in range(n) if i != excl]
        out[excl] = bottleneck_value(E[:, keep])
    return out


def secretive_feasible(V, eps: float) -> tuple[bool, dict[int, list[int]]]:
    """Hall check for every possible choice of the hidden measure.

    Row j approves piece i when ``V[j, i] >= max V[j] - eps``.  Feasible iff,
    whatever piece the missing measure takes, the remaining pieces can be
    matched to all known rows.  Witnesses map excluded piece -> assignment.
    """
    V = np.asarray(V, dtype=float)
    n_rows, n = V.shape
    if n_rows != n - 1:
        raise ValueError("secretive tables have one row fewer than columns")
    approve = envy_matrix(V) <= eps
    witnesses = {}
    ok = True
    for excl in range(n):
        adj = approve.copy()
        adj[:, excl] = False
        m = perfect_matching(adj)
        if m is None:
            ok = False
        else:
            witnesses[excl] = m
    return ok, witnesses


def permutation_matrix(perm: Sequence[int], n: int | None = None) -> np.ndarray:
    """``P[perm[j], j] = 1``."""
    n = len(perm) if n is None else n
    P = np.zeros((n, len(perm)))
    P[list(perm), np.arange(len(perm))] = 1.0
    return P


def birkhoff_decompose(M, column_target: float = 1.0, tol: float = 1e-10,
                       zero_tol: float | None = None) -> list[tuple[float, list[int]]]:
    """Greedy Birkhoff decomposition.

    Repeatedly finds a permutation inside the positive support and removes
    it with the smallest entry it covers.  Coefficients are returned on the
    original scale, so ``sum theta_k P_k`` rebuilds ``M``.  Permutations map
    column -> row (``P[perm[j], j] = 1``).
    """
    A = np.array(M, dtype=float) / column_target
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise NotDoublyStochasticError("matrix must be square")
    if np.any(A < -tol):
        raise NotDoublyStochasticError("negative entries")
    if (np.abs(A.sum(0) - 1).max() > max(tol, 1e-9) * n
            or np.abs(A.sum(1) - 1).max() > max(tol, 1e-9) * n):
        raise NotDoublyStochasticError("row or column sums differ from the target")
    zero_tol = tol * 1e-3 if zero_tol is None else zero_tol
    A[A <= zero_tol] = 0.0
    terms = []
    while A.max() > tol:
        perm = perfect_matching((A > 0).T)
        if perm is None:
            raise NotDoublyStochasticError(
                f"no permutation in the support, residual {A.max():.3g}")
        cols = np.arange(n)
        theta = A[perm, cols].min()
        A[perm, cols] -= theta
        A[perm, cols] = np.where(A[perm, cols] <= zero_tol, 0.0, A[perm, cols])
        terms.append((float(theta * column_target), list(perm)))
    return terms


def forced_column_permutation(M, forced_row: int, forced_col: int | None = None) -> list[int]:
    """Permutation through the positive support of ``M`` with ``perm[forced_col] = forced_row``."""
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    col = n - 1 if forced_col is None else forced_col
    if A[forced_row, col] <= 0:
        raise ForcedEntryZeroError(f"M[{forced_row}, {col}] is not positive")
    adj = (A > 0).T.copy()  # rows of adj are columns of M
    adj[col, :] = False
    adj[:, forced_row] = False
    adj[col, forced_row] = True
    perm = perfect_matching(adj)
    if perm is None:
        raise NotDoublyStochasticError("minor has no positive-support permutation")
    return perm


def support_permutation(M) -> list[int] | None:
    """Any column -> row permutation inside the positive support (lexicographic)."""
    return perfect_matching((np.asarray(M) > 0).T)


def stack_matrix(M, copies: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Stack ``n/m`` copies of an m x n matrix with columns m/n and rows 1."""
    A = np.asarray(M, dtype=float)
    m, n = A.shape
    if n % m:
        raise ValueError(f"{m} does not divide {n}")
    k = n // m if copies is None else copies
    if k * m != n:
        raise ValueError(f"{k} copies of {m} rows do not make {n}")
    if np.abs(A.sum(0) - m / n).max() > tol:
        raise ValueError("columns must sum to m/n")
    if np.abs(A.sum(1) - 1.0).max() > tol:
        raise ValueError("rows must sum to 1")
    N = np.vstack([A] * k)
    assert np.abs(N.sum(0) - 1).max() <= tol * k and np.abs(N.sum(1) - 1).max() <= tol
    return N
