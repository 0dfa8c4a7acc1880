"""Euclidean projection onto a polyhedron (strictly convex QP, identity
Hessian) by a dual active-set method.

The fast path adds the most violated constraint and drops constraints with
negative multipliers. For the rare degenerate cases (dependent rows, cycling)
it falls back to exact enumeration of candidate active sets, which is cheap
because at most ``m`` linearly independent constraints can be active at the
optimum of a projection in R^m.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import lp
from .errors import InfeasibleQP, LpInfeasible

_TOL = 1e-9


def project_onto_polyhedron(u_des, g_mat, h_vec, max_iter=50):
    """argmin ||u - u_des||^2 / 2 s.t. g_mat @ u <= h_vec.

    Returns (u, active_row_indices, iterations). Raises InfeasibleQP when the
    polyhedron is empty. Ties are broken toward the lowest row index.
    """
    u_des = np.asarray(u_des, dtype=float)
    g_mat = np.atleast_2d(np.asarray(g_mat, dtype=float))
    h_vec = np.asarray(h_vec, dtype=float)
    k, m = g_mat.shape

    if k == 0 or np.all(g_mat @ u_des <= h_vec + _TOL):
        return u_des.copy(), [], 0

    work: list[int] = []
    seen = set()
    for it in range(1, max_iter + 1):
        u, lam, ok = _solve_eq(u_des, g_mat, h_vec, work)
        if not ok:
            break
        if lam is not None and np.any(lam < -_TOL):
            j = int(np.argmin(lam))
            work.pop(j)
            continue
        viol = g_mat @ u - h_vec
        worst = float(np.max(viol))
        if worst <= _TOL:
            return u, sorted(work), it
        enter = int(np.argmax(viol > worst - 1e-12))
        if enter in work:
            break
        work.append(enter)
        key = tuple(sorted(work))
        if key in seen:
            break
        seen.add(key)

    return _enumerate_active_sets(u_des, g_mat, h_vec)


def _solve_eq(u_des, g_mat, h_vec, work):
    """Projection with the working-set rows held as equalities."""
    if not work:
        return u_des.copy(), None, True
    g_w = g_mat[work]
    h_w = h_vec[work]
    gram = g_w @ g_w.T
    rhs = g_w @ u_des - h_w
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return None, None, False
    if not np.all(np.isfinite(lam)):
        return None, None, False
    u = u_des - g_w.T @ lam
    return u, lam, True


def _enumerate_active_sets(u_des, g_mat, h_vec):
    """Exact solve: try every candidate active set of size <= m."""
    k, m = g_mat.shape
    best = None
    tried = 0
    for size in range(0, min(m, k) + 1):
        for combo in itertools.combinations(range(k), size):
            tried += 1
            u, lam, ok = _solve_eq(u_des, g_mat, h_vec, list(combo))
            if not ok:
                continue
            if lam is not None and np.any(lam < -_TOL):
                continue
            if np.any(g_mat @ u > h_vec + _TOL):
                continue
            d = float(np.linalg.norm(u - u_des))
            if best is None or d < best[0] - 1e-12:
                best = (d, u, list(combo))
        if best is not None:
            # KKT with lam >= 0 and primal feasibility is globally optimal.
            break
    if best is None:
        if not _polyhedron_feasible(g_mat, h_vec):
            raise InfeasibleQP("constraint intersection is empty")
        raise RuntimeError("QP solver failed on a feasible instance")
    _, u, combo = best
    active = [i for i in combo if abs(g_mat[i] @ u - h_vec[i]) <= 1e-7]
    return u, sorted(active), tried


def _polyhedron_feasible(g_mat, h_vec):
    """Phase-1 check: minimize the largest violation via the simplex LP."""
    k, m = g_mat.shape
    # Variables (u, s): maximize -s s.t. g u - s <= h, s >= 0 slack on rows.
    a = np.hstack([g_mat, -np.ones((k, 1))])
    a = np.vstack([a, np.concatenate([np.zeros(m), [-1.0]])])
    b = np.concatenate([h_vec, [0.0]])
    c = np.concatenate([np.zeros(m), [-1.0]])
    try:
        _, val = lp.solve_lp(c, a, b)
    except LpInfeasible:
        return False
    return val > -1e-8
