"""Small dense linear programming via a two-phase tableau simplex.

Problem sizes in this package are tiny (a handful of variables, at most a
few dozen rows), so a dense tableau with Bland's anti-cycling rule is both
simple and fast enough.
"""

from __future__ import annotations

import numpy as np

from .errors import LpInfeasible, LpUnbounded

_TOL = 1e-10


def solve_lp(c, a_ub, b_ub):
    """Maximize ``c @ x`` subject to ``a_ub @ x <= b_ub`` with x free.

    Returns (x, value). Raises LpInfeasible / LpUnbounded.
    """
    c = np.asarray(c, dtype=float)
    a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.asarray(b_ub, dtype=float)
    q, n = a_ub.shape
    if c.shape != (n,) or b_ub.shape != (q,):
        raise ValueError("inconsistent LP dimensions")

    # Free variables split as x = xp - xn, slack per row: [A, -A, I] z = b.
    a_eq = np.hstack([a_ub, -a_ub, np.eye(q)])
    obj = np.concatenate([c, -c, np.zeros(q)])
    z = _two_phase_simplex(a_eq, b_ub.copy(), obj)
    x = z[:n] - z[n : 2 * n]
    return x, float(c @ x)


def _two_phase_simplex(a, b, c):
    """Maximize c @ z s.t. a @ z = b, z >= 0. Returns the optimal z."""
    m, n = a.shape
    # Normalize to b >= 0 for the phase-1 artificial basis.
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1: minimize the sum of artificials.
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    basis = list(range(n, n + m))
    # Objective row for minimizing sum of artificials (expressed in terms of
    # the current basis): row = sum of constraint rows over non-artificials.
    tab[m, :n] = -a.sum(axis=0)
    tab[m, -1] = -b.sum()
    _pivot_loop(tab, basis, n + m)
    if tab[m, -1] < -1e-8:
        raise LpInfeasible("LP is infeasible")
    # Drive any artificial still in the basis out (or drop a redundant row).
    for i, bi in enumerate(basis):
        if bi >= n:
            row = tab[i, :n]
            j = next((k for k in range(n) if abs(row[k]) > _TOL), None)
            if j is not None:
                _pivot(tab, i, j)
                basis[i] = j

    # Phase 2 on the original objective (maximization).
    tab2 = np.zeros((m + 1, n + 1))
    tab2[:m, :n] = tab[:m, :n]
    tab2[:m, -1] = tab[:m, -1]
    tab2[m, :n] = -c
    for i, bi in enumerate(basis):
        if bi < n:
            tab2[m, :] -= tab2[m, bi] * tab2[i, :]
    _pivot_loop(tab2, basis, n)
    z = np.zeros(n)
    for i, bi in enumerate(basis):
        if bi < n:
            z[bi] = tab2[i, -1]
    return z


def _pivot_loop(tab, basis, n_cols):
    m = tab.shape[0] - 1
    for _ in range(20000):
        # Bland's rule: entering = lowest-index column with negative cost.
        j = next((k for k in range(n_cols) if tab[m, k] < -_TOL), None)
        if j is None:
            return
        ratios = [
            (tab[i, -1] / tab[i, j], basis[i], i)
            for i in range(m)
            if tab[i, j] > _TOL
        ]
        if not ratios:
            raise LpUnbounded("LP is unbounded")
        _, _, i = min(ratios)
        _pivot(tab, i, j)
        basis[i] = j
    raise RuntimeError("simplex did not converge")


def _pivot(tab, i, j):
    tab[i, :] /= tab[i, j]
    for r in range(tab.shape[0]):
        if r != i and abs(tab[r, j]) > 0.0:
            tab[r, :] -= tab[r, j] * tab[i, :]
