"""Zero-order-hold closed-loop simulator with fixed-step RK4 integration,
reference policies, and violation/chattering metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    GRAVITY,
    QUAD_BETA_1,
    QUAD_BETA_2,
    BarrierStack,
    ControlAffineSystem,
    PolytopicInputSet,
    as_state,
)
from .errors import DimensionMismatch, NumericalBlowup
from .filter import certify


@dataclass(frozen=True)
class ConstantPolicy:
    value: np.ndarray

    def __init__(self, value):
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(value, dtype=float)))

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.value


@dataclass(frozen=True)
class PdTrackingPolicy:
    """Planar-quadrotor position tracker: PD accelerations on (p_x, p_z) are
    mapped to a desired pitch and a normalized thrust command with gravity
    feedforward.

    ``waypoints`` is a list of (t, x_ref, z_ref); the reference position is
    piecewise-linear in time and held constant past the last waypoint.
    """

    waypoints: tuple
    kp: float = 4.0
    kd: float = 3.0

    def __init__(self, waypoints, kp: float = 4.0, kd: float = 3.0):
        wps = tuple((float(t), float(x), float(z)) for t, x, z in waypoints)
        if not wps:
            raise ValueError("at least one waypoint required")
        if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "kp", float(kp))
        object.__setattr__(self, "kd", float(kd))

    def reference(self, t: float):
        ts = np.array([w[0] for w in self.waypoints])
        xs = np.array([w[1] for w in self.waypoints])
        zs = np.array([w[2] for w in self.waypoints])
        pos = np.array([np.interp(t, ts, xs), np.interp(t, ts, zs)])
        if t <= ts[0] or t >= ts[-1] or len(ts) == 1:
            vel = np.zeros(2)
        else:
            seg = int(np.searchsorted(ts, t, side="right")) - 1
            dt_seg = ts[seg + 1] - ts[seg]
            vel = np.array(
                [(xs[seg + 1] - xs[seg]) / dt_seg, (zs[seg + 1] - zs[seg]) / dt_seg]
            )
        return pos, vel

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        if x.shape != (5,):
            raise DimensionMismatch("pd_tracking expects the planar quadrotor state")
        px, pz, _, vx, vz = x
        (rx, rz), (rvx, rvz) = self.reference(t)
        ax = self.kp * (rx - px) + self.kd * (rvx - vx)
        az = self.kp * (rz - pz) + self.kd * (rvz - vz)
        thrust = max(az + GRAVITY, 0.1)
        theta_des = math.atan2(ax, thrust)
        f_des = (thrust - QUAD_BETA_1) / QUAD_BETA_2
        return np.array([theta_des, f_des])


@dataclass
class Trajectory:
    """Closed-loop log: substep-resolution states and h values plus
    per-control-tick input records."""

    times: np.ndarray  # (n_sub_total + 1,) substep time points
    states: np.ndarray  # (n_sub_total + 1, n)
    h_values: Optional[np.ndarray]  # (n_sub_total + 1, K) or None
    tick_times: np.ndarray  # (n_ticks,)
    u_uncert: np.ndarray  # (n_ticks, m)
    u_cert: np.ndarray  # (n_ticks, m)
    inactive_flags: np.ndarray  # (n_ticks,) bool
    substeps_per_tick: int

    @property
    def n_ticks(self) -> int:
        return len(self.tick_times)


@dataclass(frozen=True)
class Metrics:
    min_h: Optional[float]
    violation_fraction: float
    input_total_variation: float
    switch_count: int


def _rk4_step(sys, x, u, dt):
    k1 = sys.f(x) + sys.g(x) @ u
    x2 = x + 0.5 * dt * k1
    k2 = sys.f(x2) + sys.g(x2) @ u
    x3 = x + 0.5 * dt * k2
    k3 = sys.f(x3) + sys.g(x3) @ u
    x4 = x + dt * k3
    k4 = sys.f(x4) + sys.g(x4) @ u
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(
    sys: ControlAffineSystem,
    policy,
    stack: Optional[BarrierStack],
    u_set: PolytopicInputSet,
    dt_control: float,
    dt_integ: float,
    horizon: float,
    x0,
) -> Trajectory:
    """Zero-order-hold closed loop: certify at each control tick (pass-through
    when no stack is given), hold the input, integrate with fixed-step RK4.

    InfeasibleQP and NumericalBlowup are raised with the partial trajectory
    attached.
    """
    if dt_control <= 0 or horizon <= 0:
        raise ValueError("dt_control and horizon must be positive")
    if dt_integ > dt_control / 10 + 1e-15:
        raise ValueError("dt_integ must be at most dt_control / 10")
    x = as_state(sys, x0)
    n_ticks = max(1, round(horizon / dt_control))
    n_sub = max(10, round(dt_control / dt_integ))
    dt_sub = dt_control / n_sub
    k = len(stack) if stack is not None else 0

    times = np.empty(n_ticks * n_sub + 1)
    states = np.empty((n_ticks * n_sub + 1, sys.n))
    h_values = np.empty((n_ticks * n_sub + 1, k)) if k else None
    tick_times = np.empty(n_ticks)
    u_uncert = np.empty((n_ticks, sys.m))
    u_cert = np.empty((n_ticks, sys.m))
    inactive = np.zeros(n_ticks, dtype=bool)

    def log_state(idx, t, xv):
        times[idx] = t
        states[idx] = xv
        if h_values is not None:
            for i, b in enumerate(stack.barriers):
                h_values[idx, i] = b.value(xv)

    log_state(0, 0.0, x)
    idx = 0
    for tick in range(n_ticks):
        t = tick * dt_control
        u_des = np.atleast_1d(np.asarray(policy(t, x), dtype=float))
        tick_times[tick] = t
        u_uncert[tick] = u_des
        if stack is not None:
            try:
                res = certify(u_des, x, sys, stack, u_set)
            except Exception as exc:
                partial = _trim(times, states, h_values, tick_times, u_uncert,
                                u_cert, inactive, idx, tick, n_sub)
                for attr, val in (("state", x.copy()), ("time", t),
                                  ("partial_trajectory", partial)):
                    if hasattr(exc, attr):
                        setattr(exc, attr, val)
                raise
            u = res.u_cert
            inactive[tick] = res.was_inactive
        else:
            u = u_des
        u_cert[tick] = u
        for s in range(n_sub):
            x = _rk4_step(sys, x, u, dt_sub)
            idx += 1
            log_state(idx, t + (s + 1) * dt_sub, x)
        if not np.all(np.isfinite(x)):
            partial = _trim(times, states, h_values, tick_times, u_uncert,
                            u_cert, inactive, idx, tick + 1, n_sub)
            raise NumericalBlowup(
                f"state became non-finite at t={t + dt_control:.6g}",
                state=states[idx - 1].copy(),
                time=t + dt_control,
                partial_trajectory=partial,
            )
    return Trajectory(
        times, states, h_values, tick_times, u_uncert, u_cert, inactive, n_sub
    )


def _trim(times, states, h_values, tick_times, u_uncert, u_cert, inactive,
          idx, n_ticks_done, n_sub):
    return Trajectory(
        times[: idx + 1].copy(),
        states[: idx + 1].copy(),
        h_values[: idx + 1].copy() if h_values is not None else None,
        tick_times[:n_ticks_done].copy(),
        u_uncert[:n_ticks_done].copy(),
        u_cert[:n_ticks_done].copy(),
        inactive[:n_ticks_done].copy(),
        n_sub,
    )


def compute_metrics(traj: Trajectory) -> Metrics:
    if traj.n_ticks == 0:
        raise ValueError("empty trajectory")
    if traj.h_values is not None and traj.h_values.size:
        per_step_min = traj.h_values.min(axis=1)
        min_h = float(per_step_min.min())
        violation = float(np.mean(per_step_min < 0))
    else:
        min_h = None
        violation = 0.0
    du = np.diff(traj.u_cert, axis=0)
    tv = float(np.sum(np.linalg.norm(du, axis=1)))
    switches = 0
    signs = np.sign(du)
    for ch in range(signs.shape[1]):
        s = signs[:, ch][signs[:, ch] != 0]
        switches += int(np.sum(s[1:] != s[:-1]))
    return Metrics(min_h, violation, tv, switches)


def unsafe_threshold_input(p_diag, dt: float) -> float:
    """Positive one-step ZOH input threshold at the boundary state
    [-1/sqrt(p1), 0] of the double-integrator ellipse: 4 sqrt(p1) / (4 p2 + p1 dt^2)."""
    p1, p2 = float(p_diag[0]), float(p_diag[1])
    if p1 <= 0:
        raise ValueError("p1 must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return 4.0 * math.sqrt(p1) / (4.0 * p2 + p1 * dt * dt)


TRAJ_FLOAT_FORMAT = "%.12g"


def write_trajectory_csv(path, traj: Trajectory, include_substeps: bool = False):
    """CSV contract: t, x1..xn, u1..um, uc1..ucm, h1..hK, inactive, substep.

    One row per control tick (substep=0); with ``include_substeps`` also one
    row per integration substep (substep=1) holding the tick's inputs.
    """
    n = traj.states.shape[1]
    m = traj.u_cert.shape[1]
    k = traj.h_values.shape[1] if traj.h_values is not None else 0
    header = (
        ["t"]
        + [f"x{j + 1}" for j in range(n)]
        + [f"u{j + 1}" for j in range(m)]
        + [f"uc{j + 1}" for j in range(m)]
        + [f"h{j + 1}" for j in range(k)]
        + ["inactive", "substep"]
    )
    fmt = TRAJ_FLOAT_FORMAT

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        n_sub = traj.substeps_per_tick
        last = len(traj.times) - 1
        for idx in range(len(traj.times)):
            tick, rem = divmod(idx, n_sub)
            is_tick = rem == 0 and tick < traj.n_ticks
            if not (is_tick or include_substeps or idx == last):
                continue
            tick_i = min(tick, traj.n_ticks - 1)
            row = [fmt % traj.times[idx]]
            row += [fmt % v for v in traj.states[idx]]
            row += [fmt % v for v in traj.u_uncert[tick_i]]
            row += [fmt % v for v in traj.u_cert[tick_i]]
            if k:
                row += [fmt % v for v in traj.h_values[idx]]
            row += [int(traj.inactive_flags[tick_i]), 0 if is_tick else 1]
            writer.writerow(row)


def read_trajectory_csv(path):
    """Rebuild a tick-resolution Trajectory from the CSV contract."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader]
    if not rows:
        raise ValueError(f"trajectory file {path} has no data rows")
    n = sum(1 for c in header if c.startswith("x"))
    m = sum(1 for c in header if c.startswith("u") and not c.startswith("uc"))
    k = sum(1 for c in header if c.startswith("h"))
    data = np.array([[float(v) for v in r] for r in rows])
    sub_col = data[:, -1].astype(int)
    ticks = data[sub_col == 0]
    times = data[:, 0]
    states = data[:, 1 : 1 + n]
    h_vals = data[:, 1 + n + 2 * m : 1 + n + 2 * m + k] if k else None
    return Trajectory(
        times=times,
        states=states,
        h_values=h_vals,
        tick_times=ticks[:, 0],
        u_uncert=ticks[:, 1 + n : 1 + n + m],
        u_cert=ticks[:, 1 + n + m : 1 + n + 2 * m],
        inactive_flags=ticks[:, 1 + n + 2 * m + k].astype(bool),
        substeps_per_tick=1,
    )
