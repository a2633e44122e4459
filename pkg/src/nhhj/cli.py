"""Command-line entry points: ``simulate``, ``verify``, ``reduce``, ``list-models``.

Exit status: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .caplygin import (
    equivalence_test,
    lift_hj_solution,
    project_hj_solution,
    reduce,
)
from .config import RunConfig
from .errors import ConfigError, FrameError, InvarianceViolation, NotProjectable, NumericalFailure
from .hamilton_jacobi import (
    SampleGrid,
    check_forced,
    check_nonholonomic,
    check_nonholonomic_lagrangian,
    default_tolerance,
)
from .mechanics import CotangentState, TangentState, integrate_hamiltonian
from .models import ModelDescriptor, build_model, model_names
from .nonholonomic import integrate_nonholonomic
from .output import write_json, write_trajectory_csv

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _model(cfg: RunConfig) -> ModelDescriptor:
    return build_model(cfg.model, cfg.params, analytic=cfg.analytic)


def _user_vector(model, values, what):
    if len(values) != model.dim:
        raise ConfigError(f"{what} has {len(values)} entries, model {model.name} has {model.dim}")
    return model.from_user(np.array(values, dtype=float))


def _candidate_name(cfg):
    return cfg.candidate or cfg.initial.candidate


def _initial_state(model: ModelDescriptor, cfg: RunConfig) -> CotangentState:
    ini = cfg.initial
    q = model.default_q0.copy() if ini.q is None else _user_vector(model, ini.q, "initial.q")
    name = _candidate_name(cfg)
    sysm = model.system
    if name is not None:
        if name in model.candidates:
            p = model.candidates[name](q)
        elif name in model.tangent_candidates:
            p = sysm.metric(q) @ model.tangent_candidates[name](q)
        else:
            raise ConfigError(f"model {model.name} has no candidate {name!r}; "
                              f"available: {', '.join(model.candidate_names())}")
    elif ini.p is not None:
        p = _user_vector(model, ini.p, "initial.p")
    elif ini.v is not None:
        p = sysm.metric(q) @ _user_vector(model, ini.v, "initial.v")
    else:
        p = np.zeros(model.dim)
    return CotangentState(q, p)


def _grid(model: ModelDescriptor, cfg: RunConfig) -> SampleGrid:
    if cfg.grid is None:
        return model.default_grid
    g = SampleGrid.parse(cfg.grid)
    if g.dim != model.dim:
        raise ConfigError(f"grid has {g.dim} axes, model {model.name} has {model.dim}")
    return model.user_grid_to_internal(g)


def _named(names, values):
    return {n: float(v) for n, v in zip(names, values)}


def _write_config(out, cfg):
    write_json(out / "config.json", cfg.to_dict())


def run_simulate(cfg: RunConfig) -> dict:
    """Integrate the model's dynamics; writes ``trajectory.csv`` and ``summary.json``."""
    model = _model(cfg)
    s0 = _initial_state(model, cfg)
    sysm, cons = model.system, model.constraints
    if cons.m:
        tr = integrate_nonholonomic(sysm, cons, s0, cfg.dt, cfg.steps, project=cfg.project)
        times, q, p, energy = tr.times, tr.q, tr.p, tr.energy
        residuals, lam = tr.residuals, tr.multipliers
    else:
        tr = integrate_hamiltonian(sysm, s0, cfg.dt, cfg.steps, force=model.force)
        n = sysm.dim
        times, q, p = tr.times, tr.states[:, :n], tr.states[:, n:]
        energy = tr.diagnostics["energy"]
        residuals = lam = np.zeros((len(times), 0))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    names = model.user_names
    write_trajectory_csv(out / "trajectory.csv", names, times, model.to_user(q), model.to_user(p),
                         energy, residuals, lam)
    summary = {
        "model": model.name,
        "params": dict(sorted(model.params.items())),
        "coordinates": list(names),
        "dt": cfg.dt,
        "steps": cfg.steps,
        "t_final": float(times[-1]),
        "projected": cfg.project,
        "max_constraint_residual": float(np.max(np.abs(residuals), initial=0.0)),
        "energy_initial": float(energy[0]),
        "energy_drift": float(np.max(np.abs(energy - energy[0]))),
        "final_state": {
            "q": _named(names, model.to_user(q[-1])),
            "p": _named(names, model.to_user(p[-1])),
        },
    }
    write_json(out / "summary.json", summary)
    _write_config(out, cfg)
    return summary


def verify_candidate(model: ModelDescriptor, name: str, grid: SampleGrid, tolerance=None):
    """Dispatch to the check that matches the model's shape."""
    sysm, cons = model.system, model.constraints
    if name in model.candidates:
        gamma = model.candidates[name]
        if cons.m:
            return check_nonholonomic(sysm, cons, gamma, grid, tolerance=tolerance)
        return check_forced(sysm, model.force, gamma, grid, tolerance)
    if name in model.tangent_candidates:
        return check_nonholonomic_lagrangian(sysm, cons, model.tangent_candidates[name], grid,
                                             tolerance=tolerance)
    raise ConfigError(f"model {model.name} has no candidate {name!r}; "
                      f"available: {', '.join(model.candidate_names())}")


def run_verify(cfg: RunConfig) -> dict:
    """Check one HJ candidate on a grid; writes ``report.json``."""
    model = _model(cfg)
    name = _candidate_name(cfg)
    if name is None:
        raise ConfigError("verify needs a candidate (--candidate NAME)")
    grid = _grid(model, cfg)
    report = verify_candidate(model, name, grid, cfg.tolerance)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = {
        "model": model.name,
        "params": dict(sorted(model.params.items())),
        "candidate": name,
        "coordinates": list(model.user_names),
        "grid_points": grid.size,
    }
    data.update(report.to_dict(point_map=model.to_user))
    write_json(out / "report.json", data)
    _write_config(out, cfg)
    return data


def _alpha_samples(red, base_points, seed=0, per_point=4):
    rng = np.random.default_rng(seed)
    k = base_points.shape[1]
    best = 0.0
    for qa in base_points:
        for u in rng.uniform(-1.0, 1.0, (per_point, k)):
            best = max(best, float(np.max(np.abs(red.alpha(qa, u)))))
    return best


def run_reduce(cfg: RunConfig) -> dict:
    """Čaplygin reduction summary; writes ``reduce.json``."""
    model = _model(cfg)
    conn = model.connection
    if conn is None:
        raise ConfigError(f"model {model.name} has no connection to reduce by")
    sysm = model.system
    k = conn.base_dim
    q0 = model.default_q0.copy() if cfg.initial.q is None else _user_vector(model, cfg.initial.q, "initial.q")
    if cfg.initial.v is not None:
        v0 = _user_vector(model, cfg.initial.v, "initial.v")
    else:
        v0 = conn.lift(q0, np.ones(k))
    red = reduce(sysm, conn, reference_fiber=q0[k:])
    grid = _grid(model, cfg)
    base_pts = grid.select(range(k)).points()
    tol = default_tolerance(sysm) if cfg.tolerance is None else cfg.tolerance

    deviation = equivalence_test(sysm, conn, TangentState(q0, v0), cfg.dt, cfg.steps, reduced=red)
    round_trips = {}
    for yname, Y in model.base_fields.items():
        YH, lift_report = lift_hj_solution(sysm, conn, Y, grid, constraints=model.constraints,
                                           tolerance=cfg.tolerance)
        Yb, proj_report = project_hj_solution(sysm, conn, YH, grid, reduced=red, tolerance=cfg.tolerance)
        err = max(float(np.max(np.abs(Yb(qa) - Y(qa)))) for qa in base_pts)
        round_trips[yname] = {
            "project_lift_error": err,
            "lift_pass": lift_report.passed,
            "lift_max_residual": lift_report.max_residual(),
            "project_pass": proj_report.passed,
            "project_max_residual": proj_report.max_residual(),
        }
    base_names = list(sysm.chart.coordinate_names[:k])
    data = {
        "model": model.name,
        "params": dict(sorted(model.params.items())),
        "base_coordinates": base_names,
        "reference_fiber": _named(sysm.chart.coordinate_names[k:], q0[k:]),
        "reduced_metric_at": _named(base_names, q0[:k]),
        "reduced_metric": red.system.metric(q0[:k]).tolist(),
        "alpha_star_max": _alpha_samples(red, base_pts),
        "alpha_star_samples": int(len(base_pts) * 4),
        "dt": cfg.dt,
        "steps": cfg.steps,
        "equivalence_deviation": deviation,
        "tolerance": tol,
        "round_trips": round_trips,
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "reduce.json", data)
    _write_config(out, cfg)
    return data


def list_models() -> str:
    lines = []
    for name in model_names():
        m = build_model(name)
        params = ", ".join(f"{k}={v:g}" for k, v in m.params.items())
        lines.append(f"{name}: {m.description}")
        lines.append(f"  coordinates: {', '.join(m.user_names)}")
        lines.append(f"  params: {params}")
        lines.append(f"  candidates: {', '.join(m.candidate_names()) or '-'}")
    return "\n".join(lines)


def _parse_param(text):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"parameter {key} needs a number, got {val!r}") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--model", metavar="NAME")
    common.add_argument("--candidate", metavar="NAME")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--project", action="store_true", default=None,
                        help="project momenta onto the constraints after every step")
    common.add_argument("--grid", metavar="LO:HI:N,...", help="sample grid in user coordinate order")
    common.add_argument("--param", metavar="NAME=VALUE", type=_parse_param, action="append",
                        help="model parameter override (repeatable)")
    common.add_argument("--fd", action="store_true", help="use finite-difference derivatives only")

    p = argparse.ArgumentParser(prog="nhhj", description="Nonholonomic mechanics and Hamilton-Jacobi checks")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate a model and write trajectory.csv")
    sub.add_parser("verify", parents=[common], help="check an HJ candidate and write report.json")
    sub.add_parser("reduce", parents=[common], help="Čaplygin reduction summary in reduce.json")
    sub.add_parser("list-models", help="list registered models")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    params = dict(args.param) if args.param else None
    return cfg.with_overrides(
        model=args.model,
        candidate=args.candidate,
        out=args.out,
        dt=args.dt,
        steps=args.steps,
        tolerance=args.tolerance,
        project=args.project,
        grid=args.grid,
        params=params,
        analytic=False if args.fd else None,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-models":
        print(list_models())
        return EXIT_OK
    try:
        cfg = config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always", RuntimeWarning)
            if args.command == "simulate":
                s = run_simulate(cfg)
                print(f"simulate {s['model']}: t_final={s['t_final']:.6g} "
                      f"max|Psi|={s['max_constraint_residual']:.3e} drift={s['energy_drift']:.3e}")
                return EXIT_OK
            if args.command == "verify":
                r = run_verify(cfg)
                print(f"verify {r['model']}/{r['candidate']}: {'PASS' if r['pass'] else 'FAIL'}")
                for c in r["conditions"]:
                    print(f"  {c['condition']:<18} {c['residual']:.3e} tol {c['tolerance']:.1e}")
                return EXIT_OK if r["pass"] else EXIT_VERIFY_FAILED
            r = run_reduce(cfg)
            print(f"reduce {r['model']}: max|alpha*|={r['alpha_star_max']:.3e} "
                  f"equivalence={r['equivalence_deviation']:.3e}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvarianceViolation, NotProjectable) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except (NumericalFailure, FrameError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
