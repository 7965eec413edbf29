"""Max-min exploration distribution over a feedback graph.

Solves

    max_s  min_j  sum_{l in N_j} s_l     over the probability simplex

with a small dense two-phase simplex. The final tableau also yields a dual
distribution ``q`` over the neighborhood constraints; by weak duality
``max_l sum_{j: l in N_j} q_j`` upper-bounds every feasible value, so its
distance to the primal value certifies optimality.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .graph import FeedbackGraph

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-12
GAP_TOL = 1e-7


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExplorationDistribution:
    s: np.ndarray
    value: float
    dual: np.ndarray | None = None
    gap: float = 0.0


def neighborhood_mass(g: FeedbackGraph, s) -> np.ndarray:
    """``sum_{l in N_j} s_l`` for every ``j``."""
    return np.asarray(s, dtype=float) @ g.observes


def min_neighborhood_mass(g: FeedbackGraph, s) -> float:
    return float(neighborhood_mass(g, s).min())


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0


def _lex_min_row(tab: np.ndarray, rows: np.ndarray, col: int, lex: slice) -> int:
    """Break ratio-test ties by comparing ``B^-1`` rows scaled by the pivot column."""
    cand = list(rows)
    for j in range(lex.start, lex.stop):
        if len(cand) == 1:
            break
        keys = tab[cand, j] / tab[cand, col]
        low = keys.min()
        cand = [r for r, key in zip(cand, keys) if key <= low + PIVOT_TOL]
    return int(cand[0])


def _run_simplex(tab: np.ndarray, basis: list[int], ncols: int, lex: slice, max_iter: int) -> None:
    """Maximize in place. Last row holds reduced costs; only columns < ncols may enter.

    Entering column by largest reduced cost (lowest index on ties). Leaving row
    by the lexicographic ratio rule over the columns in ``lex``, which hold
    ``B^-1`` because the starting basis is an identity block; this rules out
    cycling on the heavily degenerate vertices these problems produce.
    """
    m = len(basis)
    for _ in range(max_iter):
        reduced = tab[-1, :ncols]
        col = int(np.argmax(reduced))
        if reduced[col] <= PIVOT_TOL:
            return
        column = tab[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("objective is unbounded")
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = _lex_min_row(tab, ties, col, lex)
        _pivot(tab, row, col)
        basis[row] = col
    raise LPError(f"simplex did not converge in {max_iter} pivots")


def simplex_max(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, max_iter: int | None = None):
    """Two-phase simplex for ``max c.x`` with ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    Right-hand sides must be nonnegative. Returns ``(x, objective, y_ub)`` where
    ``y_ub`` are the optimal multipliers of the inequality rows.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if (b_ub < 0).any() or (b_eq < 0).any():
        raise LPError("right-hand sides must be nonnegative")
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq
    width = n + m
    lex = slice(n, width)
    if max_iter is None:
        max_iter = 50 * (m + width) + 1000

    # columns: structural | slacks | artificials, the last two forming the identity
    tab = np.zeros((m + 1, width + 1))
    tab[:m_ub, :n] = a_ub
    tab[:m_ub, -1] = b_ub
    tab[m_ub:m, :n] = a_eq
    tab[m_ub:m, -1] = b_eq
    tab[:m, n:width] = np.eye(m)
    basis = list(range(n, width))
    n_real = n + m_ub

    if m_eq:
        # phase 1: maximize -sum(artificials)
        tab[-1, :] = tab[m_ub:m].sum(axis=0)
        tab[-1, n_real:width] = 0.0
        _run_simplex(tab, basis, width, lex, max_iter)
        if tab[-1, -1] > 1e-9:
            raise LPError("problem is infeasible")
        # drive zero-level artificials out of the basis; rows with none left are redundant
        keep = []
        for r in range(m):
            if basis[r] >= n_real:
                nz = np.flatnonzero(np.abs(tab[r, :n_real]) > PIVOT_TOL)
                if nz.size == 0:
                    continue
                _pivot(tab, r, int(nz[0]))
                basis[r] = int(nz[0])
            keep.append(r)
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[r] for r in keep]

    # phase 2; artificial columns stay in the tableau but may not re-enter
    tab[-1, :] = 0.0
    tab[-1, :n] = c
    for r, var in enumerate(basis):
        if var < n and c[var] != 0.0:
            tab[-1] -= c[var] * tab[r]
    _run_simplex(tab, basis, n_real, lex, max_iter)

    x = np.zeros(n)
    for r, var in enumerate(basis):
        if var < n:
            x[var] = tab[r, -1]
    y_ub = -tab[-1, n:n_real].copy()
    return x, float(c @ x), y_ub


@lru_cache(maxsize=128)
def solve_max_min_exploration(g: FeedbackGraph) -> ExplorationDistribution:
    """Exploration distribution maximizing the smallest neighborhood mass.

    Solved through the packing form ``max sum(y)`` s.t. ``M y <= 1``, ``y >= 0``
    with ``M[l, j] = [l in N_j]``: its optimum is ``1/value``, the row
    multipliers rescale to ``s`` and ``y`` itself rescales to the dual
    certificate. The epigraph form starts on a vertex where every
    uncovered neighborhood is tight at zero and stalls there.

    Results are memoized per graph, so a fixed graph is solved once.
    """
    k = g.k
    m = g.observes.astype(float)
    y, total, x = simplex_max(np.ones(k), a_ub=m, b_ub=np.ones(k))
    if total <= 0 or x.sum() <= 0:
        raise LPError("degenerate packing solution")

    s = np.clip(x, 0.0, None)
    s /= s.sum()
    value = min_neighborhood_mass(g, s)
    q = np.clip(y, 0.0, None)
    q /= q.sum()
    dual_value = float((m @ q).max())
    gap = dual_value - value
    if gap > GAP_TOL:
        raise LPError(f"duality gap {gap:.3e} exceeds {GAP_TOL}")
    # results are cached and shared
    s.flags.writeable = False
    q.flags.writeable = False
    return ExplorationDistribution(s, value, q, gap)


def certificate_gap(g: FeedbackGraph, dist: ExplorationDistribution) -> float:
    """Recompute the weak-duality gap of a solution from scratch."""
    q = np.asarray(dist.dual, dtype=float)
    return float((g.observes.astype(float) @ q).max()) - min_neighborhood_mass(g, dist.s)


def independent_set_witness(g: FeedbackGraph, indep_set: Iterable[int]) -> ExplorationDistribution:
    """Uniform distribution on a maximal independent set.

    Every action then has neighborhood mass at least ``1/|S|``. Raises if the
    set is not independent or not maximal.
    """
    nodes = sorted(set(int(v) for v in indep_set))
    if not nodes:
        raise ValueError("independent set must be nonempty")
    if not g.is_independent(nodes):
        raise ValueError("set is not independent")
    s = np.zeros(g.k)
    s[nodes] = 1.0 / len(nodes)
    mass = neighborhood_mass(g, s)
    uncovered = np.flatnonzero(mass <= 0.0)
    if uncovered.size:
        raise ValueError(f"set is not maximal: action {int(uncovered[0])} has zero neighborhood mass")
    return ExplorationDistribution(s, float(mass.min()))
