"""Configuration ingestion and the command-line surface.

Subcommands: simulate, synthesize, analyze, inactivity-map, metrics.
Configs are JSON documents; trajectories are CSV; reports are JSON.
Exit codes: 0 clean, 1 config error, 2 infeasible QP / numerical blowup,
3 no feasible synthesis candidate.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys as _sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import filter as filt
from . import sampled, synthesis
from .core import (
    BarrierStack,
    ClassKe,
    ControlAffineSystem,
    PolytopicInputSet,
    QuadraticBarrier,
    make_double_integrator,
    make_planar_quadrotor,
)
from .errors import (
    CbfGuardError,
    ConfigError,
    InfeasibleQP,
    NoFeasibleCandidate,
    NumericalBlowup,
)
from .sim import (
    ConstantPolicy,
    PdTrackingPolicy,
    compute_metrics,
    read_trajectory_csv,
    simulate,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HALTED = 2
EXIT_NO_CANDIDATE = 3


@dataclass(frozen=True)
class BarrierSpec:
    c: tuple
    p_diag: tuple
    gamma_slope: float
    tightening: object  # float or "auto"


@dataclass(frozen=True)
class RunConfig:
    system: dict
    barriers: tuple
    input_set: dict
    policy: dict
    dt_control: float
    dt_integ: float
    horizon: float
    x0: tuple
    seed: int = 0
    l_pi: Optional[float] = None
    state_bounds: Optional[tuple] = None
    sup_norm_samples: int = 100_000
    include_substeps: bool = False
    use_filter: bool = True
    output: dict = dataclasses.field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["barriers"] = [
            {
                "c": list(b.c),
                "p_diag": list(b.p_diag),
                "gamma_slope": b.gamma_slope,
                "tightening": b.tightening,
            }
            for b in self.barriers
        ]
        out["x0"] = list(self.x0)
        if self.state_bounds is not None:
            out["state_bounds"] = [
                None if sb is None else list(sb) for sb in self.state_bounds
            ]
        return out


_MISSING = object()


def _expect(doc, key, types, path, default=_MISSING):
    if key not in doc:
        if default is not _MISSING:
            return default
        raise ConfigError(f"{path}.{key}", "missing required field")
    val = doc[key]
    if not isinstance(val, types):
        names = types.__name__ if isinstance(types, type) else \
            "/".join(t.__name__ for t in types)
        raise ConfigError(
            f"{path}.{key}", f"expected {names}, got {type(val).__name__}"
        )
    return val


def _number_list(doc, key, path, length=None):
    val = _expect(doc, key, list, path)
    if not all(isinstance(v, (int, float)) for v in val):
        raise ConfigError(f"{path}.{key}", "expected a list of numbers")
    if length is not None and len(val) != length:
        raise ConfigError(f"{path}.{key}", f"expected length {length}, got {len(val)}")
    return tuple(float(v) for v in val)


def parse_run_config(doc: dict, path: str = "$") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(path, "config root must be an object")
    system = _expect(doc, "system", dict, path)
    kind = _expect(system, "kind", str, f"{path}.system")
    if kind not in ("double_integrator", "planar_quadrotor", "custom"):
        raise ConfigError(f"{path}.system.kind", f"unknown system kind {kind!r}")
    n = {"double_integrator": 2, "planar_quadrotor": 5}.get(kind)
    if kind == "custom":
        a = _expect(system, "a", list, f"{path}.system")
        b = _expect(system, "b", list, f"{path}.system")
        n = len(a)
        if any(len(row) != n for row in a):
            raise ConfigError(f"{path}.system.a", "matrix must be square")
        if len(b) != n:
            raise ConfigError(f"{path}.system.b", "row count must match a")

    raw_barriers = _expect(doc, "barriers", list, path)
    barriers = []
    for i, bd in enumerate(raw_barriers):
        bpath = f"{path}.barriers[{i}]"
        if not isinstance(bd, dict):
            raise ConfigError(bpath, "barrier entry must be an object")
        c = _number_list(bd, "c", bpath, length=n)
        p_diag = _number_list(bd, "p_diag", bpath, length=n)
        slope = _expect(bd, "gamma_slope", (int, float), bpath)
        if slope <= 0:
            raise ConfigError(f"{bpath}.gamma_slope", "must be positive")
        tight = bd.get("tightening", 0.0)
        if tight != "auto" and not isinstance(tight, (int, float)):
            raise ConfigError(f"{bpath}.tightening", 'must be a number or "auto"')
        barriers.append(BarrierSpec(c, p_diag, float(slope), tight))

    input_set = _expect(doc, "input_set", dict, path)
    _parse_input_set(input_set, f"{path}.input_set")  # validate eagerly

    policy = _expect(doc, "policy", dict, path)
    pkind = _expect(policy, "kind", str, f"{path}.policy")
    if pkind not in ("constant", "pd_tracking"):
        raise ConfigError(f"{path}.policy.kind", f"unknown policy kind {pkind!r}")
    if pkind == "constant":
        _number_list(policy, "value", f"{path}.policy")
    else:
        wps = _expect(policy, "waypoints", list, f"{path}.policy")
        for j, w in enumerate(wps):
            if not (isinstance(w, list) and len(w) == 3):
                raise ConfigError(
                    f"{path}.policy.waypoints[{j}]", "expected [t, x_ref, z_ref]"
                )

    dt_control = float(_expect(doc, "dt_control", (int, float), path))
    dt_integ = float(_expect(doc, "dt_integ", (int, float), path))
    horizon = float(_expect(doc, "horizon", (int, float), path))
    if dt_control <= 0 or dt_integ <= 0 or horizon <= 0:
        raise ConfigError(f"{path}.dt_control", "time parameters must be positive")
    if dt_integ > dt_control / 10 + 1e-15:
        raise ConfigError(f"{path}.dt_integ", "must be at most dt_control / 10")
    x0 = _number_list(doc, "x0", path, length=n)

    state_bounds = None
    if doc.get("state_bounds") is not None:
        raw = _expect(doc, "state_bounds", list, path)
        if len(raw) != n:
            raise ConfigError(f"{path}.state_bounds", f"expected length {n}")
        state_bounds = tuple(
            None if sb is None else tuple(float(v) for v in sb) for sb in raw
        )

    l_pi = doc.get("l_pi")
    if l_pi is not None and not isinstance(l_pi, (int, float)):
        raise ConfigError(f"{path}.l_pi", "must be a number")
    if any(b.tightening == "auto" for b in barriers) and l_pi is None:
        raise ConfigError(f"{path}.l_pi", 'required when any tightening is "auto"')

    return RunConfig(
        system=system,
        barriers=tuple(barriers),
        input_set=input_set,
        policy=policy,
        dt_control=dt_control,
        dt_integ=dt_integ,
        horizon=horizon,
        x0=x0,
        seed=int(doc.get("seed", 0)),
        l_pi=None if l_pi is None else float(l_pi),
        state_bounds=state_bounds,
        sup_norm_samples=int(doc.get("sup_norm_samples", 100_000)),
        include_substeps=bool(doc.get("include_substeps", False)),
        use_filter=bool(doc.get("use_filter", True)),
        output=dict(doc.get("output", {})),
    )


def build_system(system: dict) -> ControlAffineSystem:
    kind = system["kind"]
    if kind == "double_integrator":
        return make_double_integrator()
    if kind == "planar_quadrotor":
        return make_planar_quadrotor()
    a = np.array(system["a"], dtype=float)
    b = np.atleast_2d(np.array(system["b"], dtype=float))
    if b.shape[0] != a.shape[0]:
        b = b.T
    return ControlAffineSystem(
        n=a.shape[0],
        m=b.shape[1],
        f=lambda x: a @ x,
        g=lambda x: b,
        lipschitz_f=float(np.linalg.norm(a, 2)),
        lipschitz_g=0.0,
    )


def _parse_input_set(doc: dict, path: str) -> PolytopicInputSet:
    if "box" in doc:
        box = doc["box"]
        lower = _number_list(box, "lower", f"{path}.box")
        upper = _number_list(box, "upper", f"{path}.box")
        if len(lower) != len(upper):
            raise ConfigError(f"{path}.box", "lower and upper lengths differ")
        return PolytopicInputSet.box(lower, upper)
    if "a_u" in doc:
        a_u = doc["a_u"]
        b_u = _number_list(doc, "b_u", path)
        vertices = doc.get("vertices", [])
        return PolytopicInputSet(np.array(a_u, float), np.array(b_u), vertices)
    raise ConfigError(path, 'expected either "box" or "a_u"/"b_u"')


def build_input_set(cfg: RunConfig) -> PolytopicInputSet:
    return _parse_input_set(cfg.input_set, "$.input_set")


def build_policy(policy: dict):
    if policy["kind"] == "constant":
        return ConstantPolicy(policy["value"])
    return PdTrackingPolicy(
        waypoints=policy["waypoints"],
        kp=float(policy.get("kp", 4.0)),
        kd=float(policy.get("kd", 3.0)),
    )


def build_stack(cfg: RunConfig, sys, u_set):
    """Assemble the BarrierStack, resolving "auto" tightenings via the
    sampled-data required_tightening bound."""
    if not cfg.use_filter or not cfg.barriers:
        return None, None
    entries = [
        (QuadraticBarrier(b.c, b.p_diag), ClassKe(b.gamma_slope), 0.0)
        for b in cfg.barriers
    ]
    base = BarrierStack(entries)
    consts = None
    if any(b.tightening == "auto" for b in cfg.barriers):
        consts = compute_constants(cfg, sys, u_set, base)
        tightenings = [
            sampled.required_tightening(gamma, consts, consts.m_i[i], cfg.dt_control)
            if cfg.barriers[i].tightening == "auto"
            else float(cfg.barriers[i].tightening)
            for i, (_, gamma, _) in enumerate(base.entries)
        ]
    else:
        tightenings = [float(b.tightening) for b in cfg.barriers]
    stack = BarrierStack(
        [(b, g, d) for (b, g, _), d in zip(base.entries, tightenings)]
    )
    return stack, consts


def compute_constants(cfg: RunConfig, sys, u_set, stack) -> sampled.SampledDataConstants:
    from .core import max_input_norm

    f_bar, g_bar, m_i, _ = sampled.estimate_sup_norms(
        sys, stack, cfg.sup_norm_samples, extra_bounds=cfg.state_bounds, seed=cfg.seed
    )
    u_bar = max_input_norm(u_set)
    return sampled.SampledDataConstants(
        l=sampled.closed_loop_lipschitz(sys, u_set),
        f_bar=f_bar,
        g_bar=g_bar,
        u_bar=u_bar,
        l_pi=cfg.l_pi if cfg.l_pi is not None else 0.0,
        m_i=tuple(m_i),
    )


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError("$", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}")


def _out_path(out_dir: Optional[str], name: str) -> Path:
    p = Path(name)
    if out_dir and not p.is_absolute():
        p = Path(out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _metrics_dict(metrics) -> dict:
    return {
        "min_h": metrics.min_h,
        "violation_fraction": metrics.violation_fraction,
        "input_total_variation": metrics.input_total_variation,
        "switch_count": metrics.switch_count,
    }


def cmd_simulate(args) -> int:
    cfg = parse_run_config(_load_json(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    sys_ = build_system(cfg.system)
    u_set = build_input_set(cfg)
    policy = build_policy(cfg.policy)
    stack, _ = build_stack(cfg, sys_, u_set)
    traj_path = _out_path(args.out, cfg.output.get("trajectory_csv", "trajectory.csv"))
    metrics_path = _out_path(args.out, cfg.output.get("metrics_json", "metrics.json"))
    code = EXIT_OK
    halt_info = None
    try:
        traj = simulate(
            sys_, policy, stack, u_set,
            cfg.dt_control, cfg.dt_integ, cfg.horizon, np.array(cfg.x0),
        )
    except (InfeasibleQP, NumericalBlowup) as exc:
        traj = exc.partial_trajectory
        halt_info = {"reason": type(exc).__name__, "time": exc.time,
                     "state": None if exc.state is None else list(exc.state)}
        code = EXIT_HALTED
        if not args.quiet:
            print(f"simulation halted: {exc}", file=_sys.stderr)
    if traj is not None and traj.n_ticks > 0:
        write_trajectory_csv(traj_path, traj, include_substeps=cfg.include_substeps)
        report = _metrics_dict(compute_metrics(traj))
        if halt_info:
            report["halted"] = halt_info
        with open(metrics_path, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        if not args.quiet:
            print(f"wrote {traj_path} and {metrics_path}")
    return code


def cmd_analyze(args) -> int:
    cfg = parse_run_config(_load_json(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if cfg.l_pi is None:
        raise ConfigError("$.l_pi", "required for analyze")
    sys_ = build_system(cfg.system)
    u_set = build_input_set(cfg)
    stack, consts = build_stack(cfg, sys_, u_set)
    if stack is None:
        raise ConfigError("$.barriers", "analyze requires at least one barrier")
    if consts is None:
        consts = compute_constants(cfg, sys_, u_set, stack)
    d_i = [d for _, _, d in stack.entries]
    dt_max = None
    if all(0 < d < 1 for d in d_i):
        dt_max = sampled.max_sampling_time(stack, consts)
    report = {
        "L": consts.l,
        "f_bar": consts.f_bar,
        "g_bar": consts.g_bar,
        "u_bar": consts.u_bar,
        "M_i": list(consts.m_i),
        "dt_max": dt_max,
        "d_i": d_i,
    }
    path = _out_path(args.out, cfg.output.get("report_json", "analysis.json"))
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    if not args.quiet:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_inactivity_map(args) -> int:
    doc = _load_json(args.config)
    cfg = parse_run_config(doc)
    grid_doc = _expect(doc, "grid", dict, "$")
    mins = _number_list(grid_doc, "mins", "$.grid")
    maxs = _number_list(grid_doc, "maxs", "$.grid")
    counts = _expect(grid_doc, "counts", list, "$.grid")
    if not (len(mins) == len(maxs) == len(counts)):
        raise ConfigError("$.grid", "mins, maxs, counts lengths differ")
    sys_ = build_system(cfg.system)
    u_set = build_input_set(cfg)
    stack, _ = build_stack(cfg, sys_, u_set)
    if stack is None:
        raise ConfigError("$.barriers", "inactivity-map requires barriers")
    grid = [np.linspace(lo, hi, int(c)) for lo, hi, c in zip(mins, maxs, counts)]
    states, labels = filt.inactivity_map(sys_, stack, u_set, grid)
    path = _out_path(args.out, cfg.output.get("inactivity_csv", "inactivity.csv"))
    filt.write_inactivity_csv(path, states, labels)
    if not args.quiet:
        counts = {int(v): int(c) for v, c in zip(*np.unique(labels, return_counts=True))}
        print(f"wrote {path} (label counts {counts})")
    return EXIT_OK


def parse_synthesis_config(doc: dict):
    path = "$"
    system = _expect(doc, "system", dict, path)
    input_set = _expect(doc, "input_set", dict, path)
    k = int(_expect(doc, "k", int, path))
    raw_theta = _expect(doc, "theta_box", (list, dict), path)
    if isinstance(raw_theta, dict):
        raw_theta = [raw_theta] * k
    if len(raw_theta) != k:
        raise ConfigError("$.theta_box", f"expected {k} parameter boxes")
    theta = []
    for i, tb in enumerate(raw_theta):
        tpath = f"$.theta_box[{i}]"
        theta.append(
            synthesis.BarrierParamBox(
                p_lo=np.array(_number_list(tb, "p_lo", tpath)),
                p_hi=np.array(_number_list(tb, "p_hi", tpath)),
                c_lo=np.array(_number_list(tb, "c_lo", tpath)),
                c_hi=np.array(_number_list(tb, "c_hi", tpath)),
            )
        )
    phi = _number_list(doc, "phi_box", path, length=2)
    outer_doc = _expect(doc, "x_outer", dict, path)
    if "box" in outer_doc:
        x_outer = (
            np.array(_number_list(outer_doc["box"], "lower", "$.x_outer.box")),
            np.array(_number_list(outer_doc["box"], "upper", "$.x_outer.box")),
        )
    else:
        x_outer = QuadraticBarrier(
            _number_list(outer_doc, "c", "$.x_outer"),
            _number_list(outer_doc, "p_diag", "$.x_outer"),
        )
    cfg = synthesis.SynthesisConfig(
        k=k,
        theta_box=tuple(theta),
        phi_box=(phi[0], phi[1]),
        epsilon=float(_expect(doc, "epsilon", (int, float), path)),
        x_outer=x_outer,
        state_samples=int(doc.get("state_samples", 10_000)),
        iteration_budget=int(doc.get("iteration_budget", 100)),
        volume_samples=int(doc.get("volume_samples", 100_000)),
        seed=int(doc.get("seed", 0)),
    )
    return system, input_set, cfg, dict(doc.get("output", {}))


def cmd_synthesize(args) -> int:
    system, input_set, cfg, output = parse_synthesis_config(_load_json(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    sys_ = build_system(system)
    u_set = _parse_input_set(input_set, "$.input_set")
    path = _out_path(args.out, output.get("result_json", "synthesis.json"))
    try:
        res = synthesis.synthesize(sys_, u_set, cfg)
    except NoFeasibleCandidate as exc:
        with open(path, "w") as fh:
            json.dump(
                {"status": "no_feasible_candidate",
                 "rejection_counts": exc.rejection_counts},
                fh, indent=2,
            )
            fh.write("\n")
        if not args.quiet:
            print(f"synthesis failed: {exc}", file=_sys.stderr)
        return EXIT_NO_CANDIDATE
    report = {
        "status": "ok",
        "barriers": [
            {"c": list(b.c), "p_diag": list(b.p_diag), "gamma_slope": g.slope,
             "tightening": d}
            for b, g, d in res.stack.entries
        ],
        "volume": res.volume,
        "volume_half_width": res.volume_half_width,
        "checks": res.checks,
        "accepted_iterations": res.accepted_iterations,
        "best_iteration": res.best_iteration,
    }
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    if not args.quiet:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    traj = read_trajectory_csv(args.traj)
    report = _metrics_dict(compute_metrics(traj))
    path = _out_path(args.out, "metrics.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    if not args.quiet:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbf-guard",
        description="CBF safety filters, multi-CBF synthesis, and sampled-data "
        "safety analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("simulate", cmd_simulate, True),
        ("synthesize", cmd_synthesize, True),
        ("analyze", cmd_analyze, True),
        ("inactivity-map", cmd_inactivity_map, True),
        ("metrics", cmd_metrics, False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config path")
        else:
            p.add_argument("--traj", required=True, help="trajectory CSV path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleQP, NumericalBlowup) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_HALTED
    except CbfGuardError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
