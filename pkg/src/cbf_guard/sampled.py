"""Sampled-data safety calculus: Lipschitz constants, deviation bounds,
maximum safe sampling time, and required constraint tightening."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .core import (
    BarrierStack,
    ClassKe,
    ControlAffineSystem,
    PolytopicInputSet,
    as_input,
    as_state,
    lie_derivatives,
    max_input_norm,
)
from .errors import InvalidTightening, NoFeasibleTightening

SUP_NORM_MARGIN = 1.1


@dataclass(frozen=True)
class SampledDataConstants:
    """Constants entering the sampled-data bounds.

    l: closed-loop Lipschitz constant L = L_f + L_g * u_bar
    f_bar, g_bar: sup norms of f and g over the safe set
    u_bar: maximum feasible input norm
    l_pi: Lipschitz constant of the certified policy
    m_i: per-barrier bounds M_i >= sup ||L_g h_i||
    """

    l: float
    f_bar: float
    g_bar: float
    u_bar: float
    l_pi: float
    m_i: tuple

    def __post_init__(self):
        for name in ("l", "f_bar", "g_bar", "u_bar", "l_pi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if any(m < 0 for m in self.m_i):
            raise ValueError("m_i entries must be nonnegative")

    @property
    def drive(self) -> float:
        """f_bar + g_bar * u_bar, the worst-case dynamics magnitude."""
        return self.f_bar + self.g_bar * self.u_bar


def closed_loop_lipschitz(sys: ControlAffineSystem, u_set: PolytopicInputSet) -> float:
    """L = L_f + L_g * max_{u in U} ||u||."""
    return sys.lipschitz_f + sys.lipschitz_g * max_input_norm(u_set)


def deviation_bound(sys, consts: SampledDataConstants, x, u, dt: float) -> float:
    """State-dependent hold deviation bound (||f+gu|| / L)(exp(L dt) - 1)."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    x = as_state(sys, x)
    u = as_input(sys, u)
    speed = float(np.linalg.norm(sys.f(x) + sys.g(x) @ u))
    if consts.l == 0:
        return speed * dt
    return speed / consts.l * np.expm1(consts.l * dt)


def worst_case_deviation(consts: SampledDataConstants, dt: float) -> float:
    """Uniform hold deviation bound ((f_bar + g_bar u_bar) / L)(exp(L dt) - 1)."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if consts.l == 0:
        return consts.drive * dt
    return consts.drive / consts.l * np.expm1(consts.l * dt)


def max_sampling_time(stack: BarrierStack, consts: SampledDataConstants) -> float:
    """Largest hold time keeping the sampled-data system invariant:
    min_i (1/L) ln(1 + (-gamma_i(-d_i)) L / (L_pi M_i (f_bar + g_bar u_bar)))."""
    if len(consts.m_i) != len(stack):
        raise ValueError("one M_i per barrier required")
    for term in (consts.l, consts.l_pi, consts.drive):
        if term <= 0:
            raise ValueError("L, L_pi, and f_bar + g_bar*u_bar must be positive")
    dts = []
    for (b, gamma, d), m in zip(stack.entries, consts.m_i):
        if not 0 < d < b.h_max:
            raise InvalidTightening(
                f"tightening {d} outside (0, {b.h_max}) for a stacked barrier"
            )
        if m <= 0:
            raise ValueError("M_i must be positive")
        dts.append(
            np.log1p(-gamma(-d) * consts.l / (consts.l_pi * m * consts.drive))
            / consts.l
        )
    return float(min(dts))


def required_tightening(
    gamma: ClassKe, consts: SampledDataConstants, m_i: float, dt: float
) -> float:
    """Tightening d_i making a given sampling time safe:
    -gamma^{-1}((L_pi M_i (f_bar + g_bar u_bar) / L)(1 - exp(L dt)))."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    d = -gamma.inverse(
        consts.l_pi * m_i * consts.drive / consts.l * (-np.expm1(consts.l * dt))
    )
    if d >= 1.0:
        raise NoFeasibleTightening(
            f"required tightening {d:.4g} >= h_max; the tightened set is empty"
        )
    return float(d)


def estimate_sup_norms(
    sys: ControlAffineSystem,
    stack: BarrierStack,
    sample_budget: int = 100_000,
    extra_bounds=None,
    seed: int = 0,
):
    """Sobol-sampled sup norms over the safe set, with a 1.1x safety margin.

    Returns (f_bar, g_bar, m_i, m_f_i) where m_i bounds ||L_g h_i|| and
    m_f_i bounds |L_f h_i|.
    """
    lo, hi = stack.bounding_box(extra_bounds=extra_bounds)
    sampler = qmc.Sobol(d=sys.n, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties.*")
        pts = qmc.scale(sampler.random(sample_budget), lo, hi)
    k = len(stack)
    f_bar = g_bar = 0.0
    m_i = np.zeros(k)
    m_f_i = np.zeros(k)
    barriers = stack.barriers
    inside = np.ones(len(pts), dtype=bool)
    for b in barriers:
        dx = pts - b.c
        inside &= (dx * dx) @ b.p_diag <= 1.0
    for x in pts[inside]:
        f_bar = max(f_bar, float(np.linalg.norm(sys.f(x))))
        g_bar = max(g_bar, float(np.linalg.norm(sys.g(x), 2)))
        for i, b in enumerate(barriers):
            lf_h, lg_h = lie_derivatives(sys, b, x)
            m_i[i] = max(m_i[i], float(np.linalg.norm(lg_h)))
            m_f_i[i] = max(m_f_i[i], abs(lf_h))
    return (
        SUP_NORM_MARGIN * f_bar,
        SUP_NORM_MARGIN * g_bar,
        (SUP_NORM_MARGIN * m_i).tolist(),
        (SUP_NORM_MARGIN * m_f_i).tolist(),
    )


def estimate_policy_lipschitz(
    policy, sys, stack, u_set, n_pairs: int = 10_000, extra_bounds=None, seed: int = 0
) -> float:
    """Max difference quotient of the certified policy over nearby state pairs.

    May legitimately blow up for chattering single-CBF filters; callers should
    treat very large values as 'no feasible tightening'.
    """
    from .filter import certify  # local import to avoid a cycle

    lo, hi = stack.bounding_box(extra_bounds=extra_bounds)
    rng = np.random.default_rng(seed)
    worst = 0.0
    found = 0
    while found < n_pairs:
        x = rng.uniform(lo, hi)
        if any(b.value(x) < 0 for b in stack.barriers):
            continue
        found += 1
        y = x + rng.normal(scale=1e-3, size=sys.n)
        try:
            ux = certify(policy(0.0, x), x, sys, stack, u_set).u_cert
            uy = certify(policy(0.0, y), y, sys, stack, u_set).u_cert
        except Exception:
            continue
        dist = float(np.linalg.norm(x - y))
        if dist > 0:
            worst = max(worst, float(np.linalg.norm(ux - uy)) / dist)
    return worst
