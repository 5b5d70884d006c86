"""Command-line front end.

Subcommands: validate, solve, simulate, evolve, reduce-check, abm. Games are
referenced by built-in name or game-file path. Exit codes: 0 success, 1
domain error (single-line JSON diagnostic on stderr), 2 usage error. Output
is deterministic for identical argv, including seeds. DYNPOP_THREADS caps
worker parallelism for restarts and studies.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import abm as abm_mod
from . import dynamics, equilibrium, evolution, reduction
from .errors import ConfigError, DynPopError
from .games import load_game
from .types import (GameSpec, Policy, SocialState, StateDistribution,
                    random_social_state, uniform_social_state, validate_spec)

_PROTOCOLS = {
    "br": evolution.RevisionProtocol.best_response,
    "logit": None,   # needs a temperature, built in _protocol()
    "proj": evolution.RevisionProtocol.projection,
    "rep": evolution.RevisionProtocol.replicator,
}


def main(argv=None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else argv))


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except DynPopError as exc:
        payload = {"schema": 1, "error": type(exc).__name__,
                   "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynpop",
        description="Dynamic population games: validation, equilibria, "
                    "dynamics, and agent-based simulation.")
    sub = parser.add_subparsers(required=True, metavar="command")

    p = sub.add_parser("validate", help="check a game's numerical well-formedness")
    p.add_argument("game")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("solve", help="solve for a stationary equilibrium")
    p.add_argument("game")
    p.add_argument("--damping", type=float, default=0.2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--logit-T", type=float, default=None,
                   help="smooth the best response with this logit temperature")
    p.add_argument("--restarts", type=int, default=0,
                   help="also solve from this many seeded random starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("simulate", help="run societal state dynamics")
    p.add_argument("game")
    p.add_argument("--mode", choices=["sync", "async"], required=True)
    p.add_argument("--t-end", type=float, default=10.0,
                   help="horizon; for sync, the (integer) number of steps")
    p.add_argument("--h", type=float, default=None)
    _init_args(p)
    _output_args(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("evolve", help="run coupled policy-state dynamics")
    p.add_argument("game")
    p.add_argument("--protocol", choices=sorted(_PROTOCOLS), default="br")
    p.add_argument("--state-weighted", action="store_true",
                   help="scale revisions by delta * eta * d[x]/g")
    p.add_argument("--logit-T", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--h", type=float, default=None)
    _init_args(p)
    _output_args(p)
    p.set_defaults(handler=_cmd_evolve)

    p = sub.add_parser("reduce-check",
                       help="cross-check dynamic and classical equilibrium "
                            "residuals")
    p.add_argument("game")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(handler=_cmd_reduce_check)

    p = sub.add_parser("abm", help="finite-population Monte Carlo simulation")
    p.add_argument("game")
    p.add_argument("--mode", choices=["state", "full"], required=True)
    p.add_argument("--n", required=True,
                   help="population size, or comma list for a study")
    p.add_argument("--seeds", type=int, default=1,
                   help="number of seeds (base --seed, consecutive)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-end", type=float, default=3.0)
    p.add_argument("--snapshot-interval", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--protocol", choices=["br", "logit", "rep"], default="br")
    p.add_argument("--logit-T", type=float, default=None)
    _output_args(p)
    p.set_defaults(handler=_cmd_abm)

    return parser


def _init_args(p) -> None:
    p.add_argument("--init", default="uniform",
                   help="initial social state: uniform, random, or point:<x> "
                        "(all mass on state x)")
    p.add_argument("--seed", type=int, default=0)


def _output_args(p) -> None:
    p.add_argument("--output", default=None, help="file path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def _initial_state(spec: GameSpec, args) -> SocialState:
    init = args.init
    if init == "uniform":
        return uniform_social_state(spec)
    if init == "random":
        return random_social_state(spec, np.random.default_rng(args.seed))
    if init.startswith("point:"):
        x = int(init.split(":", 1)[1])
        if not 0 <= x < spec.n_x:
            raise ConfigError(f"point state {x} out of range")
        d = np.zeros((spec.n_tau, spec.n_x))
        d[:, x] = spec.g
        return SocialState(Policy.uniform(spec.action_mask),
                           StateDistribution(d, spec.g))
    raise ConfigError(f"unknown --init {init!r}")


def _protocol(name: str, logit_t, state_weighted: bool = False):
    if name == "logit":
        if logit_t is None:
            raise ConfigError("--protocol logit needs --logit-T")
        proto = evolution.RevisionProtocol.logit(logit_t)
    else:
        proto = _PROTOCOLS[name]()
    if state_weighted:
        proto = evolution.RevisionProtocol.state_weighted(proto)
    return proto


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_trajectory(traj: dynamics.Trajectory, args) -> None:
    if args.format == "csv":
        _emit(traj.to_csv_text(), args.output)
    else:
        _emit(traj.to_json_text(), args.output)


# ---------------------------------------------------------------------------
# Handlers


def _cmd_validate(args) -> int:
    spec = load_game(args.game)
    report = validate_spec(spec, samples=args.samples, seed=args.seed)
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    return 0 if report.valid else 1


def _cmd_solve(args) -> int:
    spec = load_game(args.game)
    protocol = "logit" if args.logit_T is not None else "best-response"
    kwargs = dict(damping=args.damping, tol=args.tol,
                  max_iters=args.max_iters, protocol=protocol,
                  logit_temperature=args.logit_T)
    if args.restarts > 0:
        reports = equilibrium.solve_many(spec, args.restarts,
                                         seed=args.seed, **kwargs)
        for report in reports:
            if report.converged:
                equilibrium.certify(spec, report)
        distinct = equilibrium.distinct_equilibria(reports)
        payload = {
            "schema": 1,
            "reports": [r.to_json_dict() for r in reports],
            "distinct": [i for i, r in enumerate(reports)
                         if any(r is kept for kept in distinct)],
        }
        text = json.dumps(payload, sort_keys=True) + "\n"
        ok = bool(distinct) and all(
            r.certificate and r.certificate.passed for r in distinct)
    else:
        report = equilibrium.solve(spec, **kwargs)
        if report.converged:
            equilibrium.certify(spec, report)
        text = json.dumps(report.to_json_dict(), sort_keys=True) + "\n"
        ok = report.converged and report.certificate.passed
    sys.stdout.write(text)
    if args.output:
        _emit(text, args.output)
    return 0 if ok else 1


def _cmd_simulate(args) -> int:
    spec = load_game(args.game)
    s0 = _initial_state(spec, args)
    if args.mode == "sync":
        steps = int(round(args.t_end))
        if steps < 1:
            raise ConfigError("sync mode needs at least one step")
        traj = dynamics.sync_run(spec, s0, steps)
    else:
        traj = dynamics.integrate_async(spec, s0, args.t_end, h=args.h)
    _write_trajectory(traj, args)
    return 0


def _cmd_evolve(args) -> int:
    spec = load_game(args.game)
    s0 = _initial_state(spec, args)
    proto = _protocol(args.protocol, args.logit_T, args.state_weighted)
    cfg = evolution.EvolutionConfig.uniform(spec.n_tau, proto, eta=args.eta)
    traj = evolution.integrate_coupled(spec, s0, cfg, args.t_end, h=args.h)
    _write_trajectory(traj, args)
    return 0


def _cmd_reduce_check(args) -> int:
    spec = load_game(args.game)
    rng = np.random.default_rng(args.seed)
    checks = []
    for _ in range(args.samples):
        s = random_social_state(spec, rng)
        checks.append(reduction.theorem2_crosscheck(spec, s, tol=args.tol))
    report = equilibrium.solve(spec)
    eq_checked = False
    if report.converged:
        checks.append(reduction.theorem2_crosscheck(spec, report.state,
                                                    tol=args.tol))
        eq_checked = True
    payload = {
        "schema": 1,
        "samples": args.samples,
        "equilibrium_checked": eq_checked,
        "agree": all(c.agree for c in checks),
        "max_identity_error": max(c.max_identity_error for c in checks),
        "equilibria_found": sum(c.dynamic_equilibrium for c in checks),
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_abm(args) -> int:
    spec = load_game(args.game)
    n_values = [int(v) for v in args.n.split(",") if v]
    seeds = list(range(args.seed, args.seed + args.seeds))
    if args.mode == "state":
        cfg = abm_mod.AbmConfig(mode=abm_mod.STATE_ONLY, t_end=args.t_end,
                                snapshot_interval=args.snapshot_interval)
    else:
        cfg = abm_mod.AbmConfig(mode=abm_mod.STATE_AND_REVISION,
                                t_end=args.t_end,
                                snapshot_interval=args.snapshot_interval,
                                eta=args.eta,
                                protocol=_protocol(args.protocol, args.logit_T))
    s0 = uniform_social_state(spec)

    if len(n_values) == 1 and len(seeds) == 1:
        traj = abm_mod.simulate(spec, cfg, n_values[0], seeds[0], s0=s0)
        _write_trajectory(traj, args)
        return 0

    if args.mode == "state":
        reference = dynamics.integrate_async(spec, s0, args.t_end)
    else:
        proto = evolution.RevisionProtocol.state_weighted(
            _protocol(args.protocol, args.logit_T))
        ecfg = evolution.EvolutionConfig.uniform(spec.n_tau, proto,
                                                 eta=args.eta)
        reference = evolution.integrate_coupled(spec, s0, ecfg, args.t_end)
    study = abm_mod.convergence_study(spec, cfg, n_values, seeds, reference,
                                      s0=s0)
    if args.format == "csv":
        _emit(study.to_csv_text(), args.output)
    else:
        _emit(json.dumps(study.to_json_dict(), sort_keys=True) + "\n",
              args.output)
    return 0


if __name__ == "__main__":
    main()
