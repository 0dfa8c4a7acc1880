"""Sampling-based synthesis of multi-CBF stacks maximizing safe-set volume
subject to containment, activity, and joint feasibility checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import lp
from .core import (
    BarrierStack,
    ClassKe,
    ControlAffineSystem,
    PolytopicInputSet,
    QuadraticBarrier,
    lie_derivatives,
)
from .errors import EmptyIntersection, LpInfeasible, NoFeasibleCandidate

PHI_RETRIES = 5  # new class-Ke slopes tried per theta sample


@dataclass(frozen=True)
class BarrierParamBox:
    """Uniform sampling box for one barrier's (p_diag, c) parameters."""

    p_lo: np.ndarray
    p_hi: np.ndarray
    c_lo: np.ndarray
    c_hi: np.ndarray

    def __post_init__(self):
        for lo, hi in ((self.p_lo, self.p_hi), (self.c_lo, self.c_hi)):
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("parameter box has lower bound above upper")

    def sample(self, rng) -> QuadraticBarrier:
        return QuadraticBarrier(
            c=rng.uniform(self.c_lo, self.c_hi),
            p_diag=rng.uniform(self.p_lo, self.p_hi),
        )


@dataclass(frozen=True)
class SynthesisConfig:
    k: int
    theta_box: tuple  # one BarrierParamBox per barrier
    phi_box: tuple  # (lo, hi) class-Ke slope bounds
    epsilon: float
    x_outer: object  # QuadraticBarrier or (lo, hi) axis box
    state_samples: int = 10_000
    iteration_budget: int = 100
    volume_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or len(self.theta_box) != self.k:
            raise ValueError("theta_box must list one parameter box per barrier")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.state_samples < 1 or self.volume_samples < 1:
            raise ValueError("sample budgets must be >= 1")


@dataclass(frozen=True)
class SynthesisResult:
    stack: BarrierStack
    volume: float
    volume_half_width: float
    checks: dict
    accepted_iterations: int
    best_iteration: int


def outer_margin(x_outer, pts: np.ndarray) -> np.ndarray:
    """h_X evaluated at each row of pts; X is a barrier or an axis box."""
    if isinstance(x_outer, QuadraticBarrier):
        dx = pts - x_outer.c
        return 1.0 - (dx * dx) @ x_outer.p_diag
    lo, hi = (np.asarray(a, dtype=float) for a in x_outer)
    return np.minimum((pts - lo).min(axis=1), (hi - pts).min(axis=1))


def sample_safe_states(
    barriers: Sequence[QuadraticBarrier], n: int, rng, extra_bounds=None, max_factor=200
) -> np.ndarray:
    """Rejection-sample n states from the intersection of zero-superlevel sets."""
    lo, hi = _intersection_box(barriers, extra_bounds)
    out = []
    drawn = 0
    while len(out) < n and drawn < max_factor * n:
        batch = rng.uniform(lo, hi, size=(min(4096, max_factor * n - drawn), len(lo)))
        drawn += len(batch)
        mask = np.ones(len(batch), dtype=bool)
        for b in barriers:
            dx = batch - b.c
            mask &= (dx * dx) @ b.p_diag <= 1.0
        out.extend(batch[mask])
    if not out:
        raise EmptyIntersection("no states accepted from the barrier intersection")
    return np.array(out[:n])


def _intersection_box(barriers, extra_bounds=None):
    n = barriers[0].n
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for b in barriers:
        for j, bounds in enumerate(b.bounding_box()):
            if bounds is not None:
                lo[j] = max(lo[j], bounds[0])
                hi[j] = min(hi[j], bounds[1])
    if extra_bounds is not None:
        for j, bounds in enumerate(extra_bounds):
            if bounds is not None:
                lo[j] = max(lo[j], bounds[0])
                hi[j] = min(hi[j], bounds[1])
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise EmptyIntersection(
            "intersection is unbounded in some coordinate; supply extra_bounds"
        )
    if np.any(lo > hi):
        raise EmptyIntersection("barrier bounding boxes do not intersect")
    return lo, hi


def _as_barriers(obj):
    return obj.barriers if isinstance(obj, BarrierStack) else list(obj)


def containment_check(barriers, x_outer, samples: np.ndarray) -> bool:
    """All samples inside X, confirmed by a local minimization of h_X over C
    started from the worst sample."""
    barriers = _as_barriers(barriers)
    margins = outer_margin(x_outer, samples)
    if np.any(margins < 0):
        return False
    x0 = samples[int(np.argmin(margins))]
    res = optimize.minimize(
        lambda x: outer_margin(x_outer, x[None, :])[0],
        x0,
        method="SLSQP",
        constraints=[
            {"type": "ineq", "fun": (lambda x, b=b: b.value(x))} for b in barriers
        ],
        options={"maxiter": 200, "ftol": 1e-12},
    )
    attained = min(float(res.fun), float(outer_margin(x_outer, res.x[None, :])[0]))
    feasible = all(b.value(res.x) >= -1e-8 for b in barriers)
    return (not feasible) or attained >= -1e-9


def activity_check(
    sys: ControlAffineSystem, barriers, epsilon: float, samples: np.ndarray
) -> bool:
    """max_i ||L_g h_i(x)|| >= epsilon at every sample."""
    barriers = _as_barriers(barriers)
    best = np.zeros(len(samples))
    for b in barriers:
        norms = np.array(
            [np.linalg.norm(lie_derivatives(sys, b, x)[1]) for x in samples]
        )
        best = np.maximum(best, norms)
    return bool(np.all(best >= epsilon))


def feasibility_check(
    sys: ControlAffineSystem,
    entries,
    u_set: PolytopicInputSet,
    samples: np.ndarray,
) -> bool:
    """At every sample, max_{u in U} min_i (L_f h_i + L_g h_i u + gamma_i(h_i))
    is nonnegative; solved per sample as an epigraph LP.

    ``entries`` is a BarrierStack or a list of (barrier, gamma) pairs.
    """
    if isinstance(entries, BarrierStack):
        entries = [(b, gamma) for b, gamma, _ in entries.entries]
    q = u_set.a_u.shape[0]
    for x in samples:
        rows = []
        rhs = []
        for b, gamma in entries:
            lf_h, lg_h = lie_derivatives(sys, b, x)
            rows.append(np.concatenate([-lg_h, [1.0]]))
            rhs.append(lf_h + gamma(b.value(x)))
        a = np.vstack(
            [np.hstack([u_set.a_u, np.zeros((q, 1))]), np.array(rows)]
        )
        b_vec = np.concatenate([u_set.b_u, rhs])
        c = np.zeros(u_set.m + 1)
        c[-1] = 1.0
        try:
            _, val = lp.solve_lp(c, a, b_vec)
        except LpInfeasible:
            return False
        if val < 0:
            return False
    return True


def volume_estimate(barriers, bbox, n_samples: int, seed: int = 0):
    """Monte-Carlo rejection estimate of the intersection volume.

    Returns (volume, half_width) with a 95% normal-approximation half-width.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    barriers = _as_barriers(barriers)
    lo, hi = (np.asarray(a, dtype=float) for a in bbox)
    box_vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    accepted = 0
    remaining = n_samples
    while remaining > 0:
        batch = rng.uniform(lo, hi, size=(min(remaining, 262_144), len(lo)))
        remaining -= len(batch)
        mask = np.ones(len(batch), dtype=bool)
        for b in barriers:
            dx = batch - b.c
            mask &= (dx * dx) @ b.p_diag <= 1.0
        accepted += int(mask.sum())
    p_hat = accepted / n_samples
    half = 1.96 * box_vol * np.sqrt(p_hat * (1 - p_hat) / n_samples)
    return box_vol * p_hat, float(half)


def synthesize(
    sys: ControlAffineSystem, u_set: PolytopicInputSet, cfg: SynthesisConfig
) -> SynthesisResult:
    """Rejection-sampling search over barrier and class-Ke parameters.

    Per iteration: sample thetas, check containment and epsilon-activity,
    then retry up to PHI_RETRIES slope samples against the joint feasibility
    check; keep the accepted stack with the largest estimated volume.
    """
    rejections = {"empty": 0, "containment": 0, "activity": 0, "feasibility": 0}
    best = None
    accepted = 0
    for k in range(cfg.iteration_budget):
        rng = np.random.Generator(np.random.Philox(key=[cfg.seed, k]))
        barriers = [box.sample(rng) for box in cfg.theta_box]
        try:
            samples = sample_safe_states(barriers, cfg.state_samples, rng)
        except EmptyIntersection:
            rejections["empty"] += 1
            continue
        if not containment_check(barriers, cfg.x_outer, samples):
            rejections["containment"] += 1
            continue
        if not activity_check(sys, barriers, cfg.epsilon, samples):
            rejections["activity"] += 1
            continue
        gammas = None
        for _ in range(PHI_RETRIES):
            candidate = [
                ClassKe(float(rng.uniform(cfg.phi_box[0], cfg.phi_box[1])))
                for _ in range(cfg.k)
            ]
            if feasibility_check(sys, list(zip(barriers, candidate)), u_set, samples):
                gammas = candidate
                break
        if gammas is None:
            rejections["feasibility"] += 1
            continue
        accepted += 1
        vol, half = volume_estimate(
            barriers, _intersection_box(barriers), cfg.volume_samples, seed=cfg.seed
        )
        if best is None or vol > best[0]:
            stack = BarrierStack(
                [(b, g, 0.0) for b, g in zip(barriers, gammas)], witness=samples[0]
            )
            best = (vol, half, stack, k)
    if best is None:
        raise NoFeasibleCandidate(
            f"no candidate passed all checks in {cfg.iteration_budget} iterations: "
            f"{rejections}",
            rejection_counts=rejections,
        )
    vol, half, stack, k_best = best
    return SynthesisResult(
        stack=stack,
        volume=vol,
        volume_half_width=half,
        checks={"containment": True, "activity": True, "feasibility": True},
        accepted_iterations=accepted,
        best_iteration=k_best,
    )
