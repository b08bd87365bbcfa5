"""Command-line entry point ``omdmimo``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 when
a solver fails.
"""

import argparse
import json
import logging
import os
import sys

from . import jsonio, selftest
from .errors import ConfigError, OmdError
from .multi_user import find_optimal_decodable_set, solve_p4
from .rates import TwoUserContext
from .simulation import PRESETS, ScenarioConfig, simulate
from .two_user import solve_p1

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve_two_user(args):
    data = jsonio.load(args.instance)
    jsonio.require(data, "H_11", "H_21", "S_2", "r_2", "P_1")
    ctx = TwoUserContext(
        jsonio.decode_matrix(data["H_11"], "H_11"),
        jsonio.decode_matrix(data["H_21"], "H_21"),
        jsonio.decode_matrix(data["S_2"], "S_2"),
        float(data["r_2"]),
        float(data["P_1"]),
    )
    sol = solve_p1(ctx)
    th = sol.thresholds
    _emit({
        "regime": sol.regime.value,
        "rate": sol.rate,
        "mu1": sol.mu1,
        "sud_rate": sol.sud_rate,
        "thresholds": {"R2_a_hat": th.R2_a_hat, "R2_a_bar": th.R2_a_bar, "R2_b": th.R2_b},
        "covariance": jsonio.encode_matrix(sol.covariance),
    }, args.out)


def _k_user_inputs(data):
    jsonio.require(data, "user", "links", "covariances", "rates")
    user = int(data["user"])
    links = jsonio.decode_user_map(data["links"], "links")
    covs = jsonio.decode_user_map(data["covariances"], "covariances")
    rates = jsonio.decode_user_map(data["rates"], "rates", matrices=False)
    return user, links, covs, rates


def _certificates(ds):
    return [
        {"subset": jsonio.subset_key(J), "sum_rate": s, "capacity": c}
        for J, (s, c) in ds.certificates.items()
    ]


def cmd_decodable_set(args):
    user, links, covs, rates = _k_user_inputs(jsonio.load(args.instance))
    ds = find_optimal_decodable_set(user, links, covs, rates)
    _emit({
        "user": user,
        "members": list(ds.members),
        "complement": list(ds.complement),
        "certificates": _certificates(ds),
    }, args.out)


def cmd_solve_k_user(args):
    data = jsonio.load(args.instance)
    jsonio.require(data, "P")
    user, links, covs, rates = _k_user_inputs(data)
    sol = solve_p4(user, links, covs, rates, float(data["P"]))
    _emit({
        "user": user,
        "rate": sol.rate,
        "covariance": jsonio.encode_matrix(sol.covariance),
        "decodable_set": list(sol.decodable_set.members),
        "certificates": _certificates(sol.decodable_set),
        "duals": [{"subset": jsonio.subset_key(J), "mu": mu} for J, mu in sol.duals.items()],
        "constraint_values": [
            {"subset": jsonio.subset_key(J), "value": v} for J, v in sol.constraint_values.items()
        ],
        "decode_order": [list(G) for G in sol.decode_order],
        "iterations": sol.iterations,
        "converged": sol.converged,
    }, args.out)


def cmd_simulate(args):
    scenario = args.scenario
    if scenario not in PRESETS and scenario != "fig3":
        if not os.path.exists(scenario):
            raise ConfigError(
                f"{scenario!r} is neither a preset ({', '.join(sorted(PRESETS))}, fig3) nor a file"
            )
        scenario = ScenarioConfig.from_dict(jsonio.load(scenario))
    values = None
    if args.sweep_values:
        try:
            values = [float(v) for v in args.sweep_values.split(",")]
        except ValueError:
            raise ConfigError("--sweep-values must be comma-separated numbers") from None
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    text = simulate(scenario, realizations=args.realizations, seed=args.seed,
                    workers=args.workers, bits=args.bits, sweep_values=values)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_self_test(args):
    results = selftest.run(seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    if not all(r.passed for r in results):
        raise _SelfTestFailed()


class _SelfTestFailed(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="omdmimo",
        description="Opportunistic multiuser detection for MIMO interference channels (rates in nats).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-two-user", help="optimal covariance against one interferer")
    p.add_argument("instance", help="JSON with H_11, H_21, S_2, r_2, P_1")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_solve_two_user)

    p = sub.add_parser("decodable-set", help="largest decodable interferer set")
    p.add_argument("instance", help="JSON with user, links, covariances, rates")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decodable_set)

    p = sub.add_parser("solve-k-user", help="optimal covariance against several interferers")
    p.add_argument("instance", help="JSON with user, links (incl. own), covariances, rates, P")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_k_user)

    p = sub.add_parser("simulate", help="Monte-Carlo run of a preset or scenario file")
    p.add_argument("--scenario", required=True,
                   help="fig2, fig3, fig3-case1, fig3-case2 or a scenario JSON file")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep-values", help="comma-separated grid replacing the preset sweep")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--bits", action="store_true", help="report rates in bits")
    p.add_argument("--out", help="CSV destination (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("self-test", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_self_test)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _SelfTestFailed:
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OmdError as exc:
        if isinstance(exc, ValueError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
