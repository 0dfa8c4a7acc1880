"""Domain types: control-affine systems, quadratic barriers, input polytopes.

State and input vectors are plain 1-D numpy arrays; ``as_state`` / ``as_input``
validate length and finiteness against the owning system.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from . import lp
from .errors import (
    DimensionMismatch,
    EmptyPolytope,
    EmptyTightenedSet,
    LpInfeasible,
    LpUnbounded,
    UnboundedPolytope,
    Unsupported,
)

GRAVITY = 9.81  # m/s^2


def as_state(sys: "ControlAffineSystem", x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"state has shape {x.shape}, expected ({sys.n},)")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatch("state contains non-finite entries")
    return x


def as_input(sys: "ControlAffineSystem", u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.m,):
        raise DimensionMismatch(f"input has shape {u.shape}, expected ({sys.m},)")
    if not np.all(np.isfinite(u)):
        raise DimensionMismatch("input contains non-finite entries")
    return u


@dataclass(frozen=True)
class ControlAffineSystem:
    """dx/dt = f(x) + g(x) u with Lipschitz metadata for f and g."""

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    lipschitz_f: float
    lipschitz_g: float

    def __post_init__(self):
        if self.lipschitz_f < 0 or self.lipschitz_g < 0:
            raise ValueError("Lipschitz constants must be nonnegative")


@dataclass(frozen=True)
class ClassKe:
    """Linear extended class-K function gamma(r) = slope * r."""

    slope: float

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError("class-Ke slope must be positive")

    def __call__(self, r: float) -> float:
        return self.slope * r

    def inverse(self, s: float) -> float:
        return s / self.slope


@dataclass(frozen=True)
class QuadraticBarrier:
    """h(x) = 1 - (x - c)^T diag(p_diag) (x - c).

    Entries of p_diag may be zero, making h independent of those coordinates.
    """

    c: np.ndarray
    p_diag: np.ndarray

    def __init__(self, c, p_diag):
        object.__setattr__(self, "c", np.asarray(c, dtype=float))
        object.__setattr__(self, "p_diag", np.asarray(p_diag, dtype=float))
        if self.c.ndim != 1 or self.c.shape != self.p_diag.shape:
            raise DimensionMismatch("c and p_diag must be vectors of equal length")
        if np.any(self.p_diag < 0):
            raise ValueError("p_diag entries must be nonnegative")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def h_max(self) -> float:
        return 1.0

    def value(self, x) -> float:
        x = self._check(x)
        dx = x - self.c
        return 1.0 - float(dx @ (self.p_diag * dx))

    def grad(self, x) -> np.ndarray:
        x = self._check(x)
        return -2.0 * self.p_diag * (x - self.c)

    def bounding_box(self, level: float = 0.0):
        """Per-coordinate (lo, hi) of {h >= level}; None where p_diag is 0."""
        out = []
        for j in range(self.n):
            if self.p_diag[j] > 0:
                r = np.sqrt((1.0 - level) / self.p_diag[j])
                out.append((self.c[j] - r, self.c[j] + r))
            else:
                out.append(None)
        return out

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.c.shape:
            raise DimensionMismatch(
                f"state has shape {x.shape}, expected {self.c.shape}"
            )
        return x


def eval_barrier(b: QuadraticBarrier, x) -> float:
    return b.value(x)


def grad_barrier(b: QuadraticBarrier, x) -> np.ndarray:
    return b.grad(x)


def lie_derivatives(sys: ControlAffineSystem, b, x):
    """Return (L_f h, L_g h) at x."""
    x = as_state(sys, x)
    grad = b.grad(x)
    lf_h = float(grad @ sys.f(x))
    lg_h = np.atleast_1d(grad @ sys.g(x))
    return lf_h, lg_h


@dataclass(frozen=True)
class PolytopicInputSet:
    """Compact polytope {u | a_u @ u <= b_u} with a precomputed vertex list."""

    a_u: np.ndarray
    b_u: np.ndarray
    vertices: tuple

    def __init__(self, a_u, b_u, vertices=None):
        a_u = np.atleast_2d(np.asarray(a_u, dtype=float))
        b_u = np.asarray(b_u, dtype=float)
        if a_u.shape[0] != b_u.shape[0]:
            raise DimensionMismatch("a_u and b_u row counts differ")
        verts = tuple(np.asarray(v, dtype=float) for v in (vertices or []))
        for v in verts:
            if v.shape != (a_u.shape[1],):
                raise DimensionMismatch("vertex dimension mismatch")
            if np.any(a_u @ v > b_u + 1e-10):
                raise ValueError("listed vertex violates the polytope constraints")
        object.__setattr__(self, "a_u", a_u)
        object.__setattr__(self, "b_u", b_u)
        object.__setattr__(self, "vertices", verts)

    @property
    def m(self) -> int:
        return self.a_u.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "PolytopicInputSet":
        """Axis-aligned box with all 2^m corners enumerated."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DimensionMismatch("box bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise EmptyPolytope("box has lower bound above upper bound")
        m = lower.shape[0]
        a_u = np.vstack([np.eye(m), -np.eye(m)])
        b_u = np.concatenate([upper, -lower])
        corners = [
            np.array(corner)
            for corner in itertools.product(*zip(lower, upper))
        ]
        return cls(a_u, b_u, corners)

    def contains(self, u, tol: float = 1e-9) -> bool:
        return bool(np.all(self.a_u @ np.asarray(u, dtype=float) <= self.b_u + tol))


def support_function(u_set: PolytopicInputSet, alpha) -> float:
    """sigma_U(alpha) = max_{u in U} alpha @ u, via vertex enumeration."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (u_set.m,):
        raise DimensionMismatch("support direction has wrong length")
    if not u_set.vertices:
        raise Unsupported(
            "support_function requires a vertex list; supply vertices for "
            "general polytopes"
        )
    return float(max(alpha @ v for v in u_set.vertices))


def chebyshev(u_set: PolytopicInputSet):
    """Chebyshev center and radius of U via a small dense LP."""
    norms = np.linalg.norm(u_set.a_u, axis=1)
    # Variables (u_c, r): maximize r s.t. a_i u_c + ||a_i|| r <= b_i, r >= 0.
    a = np.hstack([u_set.a_u, norms[:, None]])
    a = np.vstack([a, np.concatenate([np.zeros(u_set.m), [-1.0]])])
    b = np.concatenate([u_set.b_u, [0.0]])
    c = np.concatenate([np.zeros(u_set.m), [1.0]])
    try:
        z, r = lp.solve_lp(c, a, b)
    except LpInfeasible as exc:
        raise EmptyPolytope("polytope is empty") from exc
    except LpUnbounded as exc:
        raise UnboundedPolytope("polytope is unbounded") from exc
    return z[: u_set.m], float(r)


def max_input_norm(u_set: PolytopicInputSet) -> float:
    """max_{u in U} ||u||; the maximum over a polytope is attained at a vertex."""
    if not u_set.vertices:
        raise Unsupported("max_input_norm requires a vertex list")
    return float(max(np.linalg.norm(v) for v in u_set.vertices))


@dataclass(frozen=True)
class BarrierStack:
    """Ordered (barrier, class-Ke, tightening) triples with a stored witness
    of the tightened intersection being non-empty."""

    entries: tuple
    witness: np.ndarray

    def __init__(self, entries: Sequence, witness=None):
        entries = tuple(
            (b, gamma, float(d)) for (b, gamma, d) in entries
        )
        if len(entries) < 1:
            raise ValueError("BarrierStack needs at least one barrier")
        for _, _, d in entries:
            if d < 0:
                raise ValueError("tightening must be nonnegative")
        if witness is None:
            witness = _find_witness(entries)
        witness = np.asarray(witness, dtype=float)
        for b, _, d in entries:
            if b.value(witness) - d < -1e-12:
                raise EmptyTightenedSet("witness violates the tightened set")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "witness", witness)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def barriers(self):
        return [b for b, _, _ in self.entries]

    def h_values(self, x) -> np.ndarray:
        return np.array([b.value(x) for b, _, _ in self.entries])

    def min_h(self, x) -> float:
        return float(min(b.value(x) for b, _, _ in self.entries))

    def bounding_box(self, extra_bounds=None, level_tightened: bool = False):
        """Axis box containing the (optionally tightened) intersection.

        ``extra_bounds`` supplies (lo, hi) per coordinate for directions in
        which every barrier is flat.
        """
        n = self.entries[0][0].n
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        for b, _, d in self.entries:
            for j, bounds in enumerate(b.bounding_box(d if level_tightened else 0.0)):
                if bounds is not None:
                    lo[j] = max(lo[j], bounds[0])
                    hi[j] = min(hi[j], bounds[1])
        if extra_bounds is not None:
            for j, bounds in enumerate(extra_bounds):
                if bounds is not None:
                    lo[j] = max(lo[j], bounds[0])
                    hi[j] = min(hi[j], bounds[1])
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            flat = [j for j in range(n) if not np.isfinite(lo[j]) or not np.isfinite(hi[j])]
            raise Unsupported(
                f"coordinates {flat} are unbounded; supply extra_bounds for them"
            )
        if np.any(lo > hi):
            raise EmptyTightenedSet("barrier bounding boxes do not intersect")
        return lo, hi


def _find_witness(entries):
    barriers = [b for b, _, _ in entries]
    tightenings = [d for _, _, d in entries]

    def ok(x):
        return all(b.value(x) - d >= 0 for b, d in zip(barriers, tightenings))

    candidates = [b.c for b in barriers]
    candidates.append(np.mean([b.c for b in barriers], axis=0))
    for x in candidates:
        if ok(x):
            return x
    # Rejection sampling over the intersection of per-barrier boxes.
    n = barriers[0].n
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for b in barriers:
        for j, bounds in enumerate(b.bounding_box()):
            if bounds is not None:
                lo[j] = max(lo[j], bounds[0])
                hi[j] = min(hi[j], bounds[1])
    center = np.mean([b.c for b in barriers], axis=0)
    lo = np.where(np.isfinite(lo), lo, center - 1.0)
    hi = np.where(np.isfinite(hi), hi, center + 1.0)
    if np.all(lo <= hi):
        rng = np.random.default_rng(0)
        for _ in range(5000):
            x = rng.uniform(lo, hi)
            if ok(x):
                return x
    raise EmptyTightenedSet("could not find a state in the tightened intersection")


def make_double_integrator() -> ControlAffineSystem:
    """Canonical double integrator: f(x) = A x, g(x) = B = [0, 1]^T."""
    a_mat = np.array([[0.0, 1.0], [0.0, 0.0]])
    b_mat = np.array([[0.0], [1.0]])
    return ControlAffineSystem(
        n=2,
        m=1,
        f=lambda x: a_mat @ x,
        g=lambda x: b_mat,
        lipschitz_f=1.0,  # spectral norm of A
        lipschitz_g=0.0,
    )


# Working domain for the planar quadrotor: covers the safe sets used in the
# experiments plus margin; Lipschitz constants are estimated over this box.
QUADROTOR_WORKING_BOX = (
    np.array([-2.0, 0.0, -0.6, -4.0, -6.0]),
    np.array([2.0, 3.0, 0.6, 4.0, 6.0]),
)

QUAD_ALPHA_1 = -60.0
QUAD_ALPHA_2 = 60.0
QUAD_BETA_1 = 4.60
QUAD_BETA_2 = 15.40


def _quad_f(x):
    _, _, th, vx, vz = x
    return np.array(
        [
            vx,
            vz,
            QUAD_ALPHA_1 * th,
            QUAD_BETA_1 * np.sin(th),
            QUAD_BETA_1 * np.cos(th) - GRAVITY,
        ]
    )


def _quad_g(x):
    th = x[2]
    g_mat = np.zeros((5, 2))
    g_mat[2, 0] = QUAD_ALPHA_2
    g_mat[3, 1] = QUAD_BETA_2 * np.sin(th)
    g_mat[4, 1] = QUAD_BETA_2 * np.cos(th)
    return g_mat


@lru_cache(maxsize=1)
def make_planar_quadrotor() -> ControlAffineSystem:
    """Identified planar quadrotor model: state [p_x, p_z, theta, v_x, v_z],
    input [theta_desired, F_desired].

    Lipschitz constants are estimated from sampled Jacobian spectral norms
    over the working box with a 1.1x margin.
    """
    l_f = 1.1 * _sampled_jacobian_norm(_quad_f, 5, QUADROTOR_WORKING_BOX)
    l_g = 1.1 * _sampled_jacobian_norm(
        lambda x: _quad_g(x).ravel(), 5, QUADROTOR_WORKING_BOX
    )
    return ControlAffineSystem(
        n=5, m=2, f=_quad_f, g=_quad_g, lipschitz_f=l_f, lipschitz_g=l_g
    )


def _sampled_jacobian_norm(fn, n, box, n_samples=10_000, seed=0, step=1e-6):
    """Max spectral norm of the finite-difference Jacobian over Sobol samples."""
    lo, hi = box
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties.*")
        pts = qmc.scale(sampler.random(n_samples), lo, hi)
    worst = 0.0
    eye = np.eye(n)
    for x in pts:
        cols = [(fn(x + step * eye[j]) - fn(x - step * eye[j])) / (2 * step) for j in range(n)]
        worst = max(worst, float(np.linalg.norm(np.column_stack(cols), 2)))
    return worst
