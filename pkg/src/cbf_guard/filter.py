"""CBF constraint construction, inactivity analysis, and the safety-filter QP."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BarrierStack,
    ClassKe,
    ControlAffineSystem,
    PolytopicInputSet,
    QuadraticBarrier,
    as_input,
    as_state,
    chebyshev,
    lie_derivatives,
    support_function,
)
from .errors import (
    DegenerateInfeasible,
    NonpositiveMargin,
    NonpositiveSupport,
    NotFound,
)
from .qp import project_onto_polyhedron

DEGENERATE_CUTOFF = 1e-12


@dataclass(frozen=True)
class AffineInputConstraint:
    """CBF condition in standard affine form {u | alpha @ u <= beta}.

    ``degenerate`` marks states with ||L_g h|| at float-precision zero, where
    the row is either vacuous (drift satisfies the condition) or infeasible.
    """

    alpha: Optional[np.ndarray]
    beta: Optional[float]
    source_index: int
    degenerate: bool


@dataclass(frozen=True)
class CertifyResult:
    u_cert: np.ndarray
    active_cbf_indices: list
    was_inactive: bool
    qp_iterations: int


def constraint_form(sys, b, gamma: ClassKe, d: float, x, source_index: int = 0):
    """Rewrite the CBF condition at x as alpha @ u <= beta with ||alpha|| = 1.

    Raises DegenerateInfeasible when L_g h vanishes and the drift alone
    violates the (tightened) CBF condition.
    """
    if d < 0:
        raise ValueError("tightening must be nonnegative")
    x = as_state(sys, x)
    lf_h, lg_h = lie_derivatives(sys, b, x)
    margin = lf_h + gamma(b.value(x) - d)
    norm = float(np.linalg.norm(lg_h))
    if norm <= DEGENERATE_CUTOFF:
        if margin < 0:
            raise DegenerateInfeasible(
                f"L_g h = 0 at x={x.tolist()} and drift margin {margin:.3e} < 0"
            )
        return AffineInputConstraint(None, None, source_index, True)
    return AffineInputConstraint(-lg_h / norm, margin / norm, source_index, False)


def epsilon_threshold(sys, b, gamma: ClassKe, x, u_set: PolytopicInputSet) -> float:
    """Inactivity threshold eps(x) = (gamma(h) + L_f h) / sigma_U(alpha)."""
    x = as_state(sys, x)
    lf_h, lg_h = lie_derivatives(sys, b, x)
    norm = float(np.linalg.norm(lg_h))
    if norm <= DEGENERATE_CUTOFF:
        raise DegenerateInfeasible("alpha is undefined where L_g h = 0")
    alpha = -lg_h / norm
    sigma = support_function(u_set, alpha)
    if sigma <= 0:
        raise NonpositiveSupport(f"sigma_U(alpha) = {sigma:.3e} <= 0")
    return (gamma(b.value(x)) + lf_h) / sigma


def is_filter_inactive(sys, stack: BarrierStack, x, u_set: PolytopicInputSet) -> bool:
    """True iff every CBF row is degenerate-vacuous or redundant with U."""
    x = as_state(sys, x)
    for i, (b, gamma, d) in enumerate(stack.entries):
        row = constraint_form(sys, b, gamma, d, x, source_index=i)
        if row.degenerate:
            continue
        if row.beta < support_function(u_set, row.alpha):
            return False
    return True


def certify(u_des, x, sys, stack: BarrierStack, u_set: PolytopicInputSet) -> CertifyResult:
    """Safety-filter QP: project u_des onto U intersected with all CBF rows."""
    u_des = as_input(sys, u_des)
    x = as_state(sys, x)
    rows = [
        constraint_form(sys, b, gamma, d, x, source_index=i)
        for i, (b, gamma, d) in enumerate(stack.entries)
    ]
    live = [r for r in rows if not r.degenerate]
    n_box = u_set.a_u.shape[0]
    g_mat = np.vstack([u_set.a_u] + [r.alpha[None, :] for r in live]) if live else u_set.a_u
    h_vec = np.concatenate([u_set.b_u, [r.beta for r in live]])

    u, active, iters = project_onto_polyhedron(u_des, g_mat, h_vec)

    active_cbf = sorted(
        live[j - n_box].source_index for j in active if j >= n_box
    )
    inactive = all(
        r.degenerate or r.beta >= support_function(u_set, r.alpha) for r in rows
    )
    return CertifyResult(u, active_cbf, inactive, iters)


def epsilon_bar(stack: BarrierStack, u_set: PolytopicInputSet, m_f) -> float:
    """Activity threshold from the Chebyshev ball of U:
    max_i (M_f_i + gamma_i(h_i_max)) / (r - ||u_c||)."""
    m_f = np.atleast_1d(np.asarray(m_f, dtype=float))
    if m_f.shape[0] != len(stack):
        raise ValueError("one M_f bound per barrier required")
    u_c, r = chebyshev(u_set)
    margin = r - float(np.linalg.norm(u_c))
    if margin <= 0:
        raise NonpositiveMargin(f"r - ||u_c|| = {margin:.3e} <= 0")
    return float(
        max(
            (m_f[i] + gamma(b.h_max)) / margin
            for i, (b, gamma, _) in enumerate(stack.entries)
        )
    )


def find_inactive_on_level_set(
    sys: ControlAffineSystem,
    b: QuadraticBarrier,
    d: float,
    n_starts: int = 16,
    max_iter: int = 20_000,
    tol: float = 1e-8,
    seed: int = 0,
):
    """Find x with h(x) = d and L_g h(x) = 0 for constant input matrix B.

    Projected gradient descent on ||L_g h||^2 restricted to the level set,
    with radial retraction onto the ellipsoid; multi-start.
    """
    if not 0 <= d < b.h_max:
        raise ValueError("level d must lie in [0, h_max)")
    b_mat = sys.g(b.c)
    p = b.p_diag
    if not np.any(p > 0):
        raise NotFound("barrier is flat in every coordinate")
    target = 1.0 - d  # (x-c)^T P (x-c) on the level set

    def retract(z):
        q = float(z @ (p * z))
        if q <= 0:
            return None
        return z * np.sqrt(target / q)

    # Gradient of F(z) = ||2 B^T P z||^2 is 8 P B B^T P z; step from its
    # largest eigenvalue bound.
    pb = p[:, None] * b_mat
    lam_max = 8.0 * np.linalg.norm(pb, 2) ** 2
    step = 1.0 / lam_max if lam_max > 0 else 1.0

    rng = np.random.default_rng(seed)
    for _ in range(n_starts):
        z = retract(rng.standard_normal(b.n))
        if z is None:
            continue
        for _ in range(max_iter):
            lg = 2.0 * (pb.T @ z)
            if np.linalg.norm(lg) <= tol:
                x = b.c + z
                if abs(b.value(x) - d) <= tol:
                    return x
                break
            grad = 8.0 * (pb @ (pb.T @ z))
            z_new = retract(z - step * grad)
            if z_new is None:
                break
            z = z_new
    raise NotFound(
        "no inactive state found on the level set within the start budget"
    )


LABEL_ACTIVE = 0
LABEL_INACTIVE = 1
LABEL_OUTSIDE = 2


def worker_count(requested: Optional[int] = None) -> int:
    """Worker parallelism, capped by the CBF_GUARD_THREADS env var."""
    cap = os.environ.get("CBF_GUARD_THREADS")
    cap = int(cap) if cap else os.cpu_count() or 1
    return max(1, min(requested or cap, cap))


def inactivity_map(sys, stack: BarrierStack, u_set, grid, workers=None):
    """Label each grid state as active (0), inactive (1), or outside (2).

    ``grid`` is a sequence of per-coordinate 1-D arrays; returns
    (states, labels) with one row per grid cell in C-order.
    """
    axes = [np.asarray(a, dtype=float) for a in grid]
    mesh = np.meshgrid(*axes, indexing="ij")
    states = np.column_stack([m.ravel() for m in mesh])

    def label(x):
        if stack.min_h(x) < 0:
            return LABEL_OUTSIDE
        return LABEL_INACTIVE if is_filter_inactive(sys, stack, x, u_set) else LABEL_ACTIVE

    n_workers = worker_count(workers)
    if n_workers > 1 and len(states) > 256:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            labels = np.fromiter(pool.map(label, states), dtype=int, count=len(states))
    else:
        labels = np.fromiter((label(x) for x in states), dtype=int, count=len(states))
    return states, labels


def write_inactivity_csv(path, states, labels):
    n = states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(n)] + ["label"])
        for x, lab in zip(states, labels):
            writer.writerow(["%.12g" % float(v) for v in x] + [int(lab)])
