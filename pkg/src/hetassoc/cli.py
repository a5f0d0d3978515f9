"""Batch command-line interface.

Subcommands cover the whole pipeline: instance validation, state-space and
steady-state dumps, utility tables, Nash/optimal policy search, baselines,
threshold control, traffic sweeps and Monte Carlo validation. Outputs are
CSV files (plus JSON summaries and optional SVG charts) under --out, each
carrying a provenance header with the resolved instance.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import label_array
from .charts import line_chart
from .config import (NETWORK_WIDE, PER_SYSTEM, AggregationScheme, ConfigError,
                     NetworkConfig, Policy, load_instance, serialize_instance)
from .control import optimize_thresholds
from .ctmc import build_generator, solve_steady_state
from .game import PolicyGameSolver, evaluate_baseline
from .output import write_csv, write_json
from .rules import InstantaneousRateRule, PeakRateRule, PolicyRule
from .simulate import simulate
from .states import CapacityError, enumerate_states, state_table_rows
from .transient import volume_tables


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="instance JSON path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--sharing", choices=("network", "system"),
                        help="override the instance sharing scope")
    parser.add_argument("--strict-eq2", action="store_true",
                        help="drop arrivals whose chosen system is full "
                             "instead of redirecting them")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweep points")
    parser.add_argument("--max-states", type=int, default=1_000_000)


def _add_rule_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rule", choices=("policy", "peak", "instant"),
                        default="peak")
    parser.add_argument("--policy",
                        help="flattened class-major policy entries, for "
                             "example 0,1,1,0,... (required with --rule policy)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetassoc",
        description="Association-policy equilibria in heterogeneous networks")
    parser.add_argument("--version", action="version", version=f"hetassoc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance document")
    _add_common(p)

    p = sub.add_parser("enumerate", help="dump the feasible state table")
    _add_common(p)

    p = sub.add_parser("steady", help="steady state under one rule")
    _add_common(p)
    _add_rule_args(p)
    p.add_argument("--export-q", action="store_true",
                   help="also write the generator as (row, col, rate) triplets")

    p = sub.add_parser("utility", help="tagged-user expected volumes")
    _add_common(p)
    _add_rule_args(p)

    p = sub.add_parser("nash", help="find Nash-equilibrium policies")
    _add_common(p)
    p.add_argument("--mode", choices=("auto", "exhaustive", "best_response"),
                   default="auto")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--cap", type=int, default=4096,
                   help="auto mode switches to best response above this "
                        "policy-space size")

    p = sub.add_parser("optimal", help="globally optimal policy")
    _add_common(p)
    p.add_argument("--method", choices=("auto", "exhaustive", "search"),
                   default="auto")
    p.add_argument("--cap", type=int, default=65536)
    p.add_argument("--restarts", type=int, default=16)

    p = sub.add_parser("baseline", help="evaluate an information baseline")
    _add_common(p)
    p.add_argument("--which", choices=("peak_rate", "instantaneous_rate"),
                   required=True)

    p = sub.add_parser("control", help="optimize broadcast thresholds")
    _add_common(p)
    p.add_argument("--scheme", action="append", default=[],
                   help="thresholds as low,high;low,high (one per system); "
                        "repeatable; default: a small representative grid")
    p.add_argument("--traffic", default=None,
                   help="A:B:STEP offered-traffic sweep in Erlangs")
    p.add_argument("--selection", choices=("max_utility", "min_blocking"),
                   default="max_utility")
    p.add_argument("--restarts", type=int, default=64)

    p = sub.add_parser("sweep", help="traffic sweep over selected analyses")
    _add_common(p)
    p.add_argument("--traffic", default="1:10:1")
    p.add_argument("--analyses", default="nash,baselines",
                   help="comma list from: nash, optimal, baselines, control")
    p.add_argument("--scheme", action="append", default=[],
                   help="threshold grid for the control analysis "
                        "(low,high;low,high per scheme, repeatable)")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--svg", action="store_true", help="emit SVG line charts")

    p = sub.add_parser("simulate", help="discrete-event validation run")
    _add_common(p)
    _add_rule_args(p)
    p.add_argument("--events", type=int, default=1_000_000)
    p.add_argument("--batches", type=int, default=25)
    return parser


def _load(args) -> tuple[NetworkConfig, AggregationScheme]:
    text = Path(args.config).read_text()
    config, scheme = load_instance(text)
    if args.sharing:
        config = config.with_sharing_scope(
            NETWORK_WIDE if args.sharing == "network" else PER_SYSTEM)
    return config, scheme


def _make_rule(args, config, scheme):
    if args.rule == "peak":
        return PeakRateRule()
    if args.rule == "instant":
        return InstantaneousRateRule()
    if not args.policy:
        raise ConfigError("--rule policy requires --policy")
    try:
        flat = [int(x) for x in args.policy.split(",")]
    except ValueError as exc:
        raise ConfigError("--policy must be a comma list of system indices") from exc
    policy = Policy.from_flat(flat, config.num_classes, scheme.label_count)
    policy.validate_for(config, scheme)
    return PolicyRule(policy, scheme)


def _parse_traffic(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ConfigError("--traffic must look like A:B:STEP") from exc
    if step <= 0 or b < a:
        raise ConfigError("--traffic needs A <= B and STEP > 0")
    points = []
    value = a
    while value <= b + 1e-9:
        points.append(round(value, 9))
        value += step
    return points


def _parse_scheme(text: str) -> AggregationScheme:
    try:
        pairs = []
        for part in text.split(";"):
            lo, hi = (float(x) for x in part.split(","))
            pairs.append((lo, hi))
    except ValueError as exc:
        raise ConfigError("--scheme must look like low,high;low,high") from exc
    return AggregationScheme(tuple(pairs))


def _scaled(config: NetworkConfig, erlangs: float) -> NetworkConfig:
    """Scale arrival rates so the total offered traffic hits `erlangs`,
    preserving the configured per-class proportions."""
    return config.scale_traffic(erlangs / config.offered_erlangs)


# ----- subcommand bodies ----------------------------------------------


def _cmd_validate(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    print(f"ok: {config.num_classes} classes, {config.num_systems} systems, "
          f"{space.num_states} feasible states, {scheme.label_count} labels")
    return 0


def _cmd_enumerate(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    header = ["id"]
    header += [f"occ_{config.class_name(n)}_{config.system_name(s)}"
               for s in range(config.num_systems) for n in range(config.num_classes)]
    header += [f"thr_{config.class_name(n)}_{config.system_name(s)}"
               for s in range(config.num_systems) for n in range(config.num_classes)]
    path = write_csv(Path(args.out) / "states.csv", header,
                     state_table_rows(space), config, scheme)
    print(f"wrote {path} ({space.num_states} states)")
    return 0


def _cmd_steady(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    rule = _make_rule(args, config, scheme)
    gen = build_generator(space, rule, strict_arrivals=args.strict_eq2)
    ss = solve_steady_state(gen, scheme)
    labels = label_array(scheme, space)
    rows = ([i, *space.states[i], f"{ss.pi[i]:.17g}", labels[i]]
            for i in range(space.num_states))
    header = (["id"]
              + [f"occ_{config.class_name(n)}_{config.system_name(s)}"
                 for s in range(config.num_systems) for n in range(config.num_classes)]
              + ["probability", "label"])
    params = {"rule": rule.describe(), "strict_eq2": args.strict_eq2}
    path = write_csv(Path(args.out) / "steady.csv", header, rows, config, scheme, params)
    print(f"wrote {path} (residual {ss.residual:.2e})")
    if args.export_q:
        qpath = Path(args.out) / "generator.txt"
        with open(qpath, "w") as fh:
            for r, c, v in gen.coo_triplets():
                fh.write(f"{r} {c} {v:.17g}\n")
        print(f"wrote {qpath}")
    return 0


def _cmd_utility(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    rule = _make_rule(args, config, scheme)
    table = volume_tables(space, rule, strict_arrivals=args.strict_eq2)

    def rows():
        for n in range(config.num_classes):
            for s in range(config.num_systems):
                vol = table.volumes[n, s]
                for i in np.nonzero(~np.isnan(vol))[0]:
                    yield [int(i), n, s, f"{vol[i]:.17g}"]

    params = {"rule": rule.describe(), "strict_eq2": args.strict_eq2}
    path = write_csv(Path(args.out) / "utility.csv",
                     ["state_id", "class", "system", "expected_megabits"],
                     rows(), config, scheme, params)
    print(f"wrote {path}")
    return 0


def _policy_header(config, scheme):
    from .aggregation import label_name
    return (["policy", "global_utility", "blocking"]
            + [f"choice_{config.class_name(n)}_{label_name(scheme, l)}"
               for n in range(config.num_classes)
               for l in range(scheme.label_count)])


def _policy_rows(config, scheme, evaluations):
    for ev in evaluations:
        yield ([",".join(str(s) for s in ev.policy.flatten()),
                f"{ev.global_utility:.12g}", f"{ev.overall_blocking:.12g}"]
               + [config.system_name(s) for s in ev.policy.flatten()])


def _cmd_nash(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    solver = PolicyGameSolver(space, scheme, strict_arrivals=args.strict_eq2)
    result = solver.find_nash(args.mode, restarts=args.restarts, seed=args.seed,
                              auto_cap=args.cap)
    params = {"mode": args.mode, "restarts": args.restarts, "seed": args.seed}
    payload = {
        "equilibria": [
            {"policy": [list(row) for row in ev.policy.choice],
             "global_utility": ev.global_utility,
             "overall_blocking": ev.overall_blocking}
            for ev in result
        ],
    }
    path = write_json(Path(args.out) / "nash.json", payload, config, scheme, params)
    write_csv(Path(args.out) / "nash.csv", _policy_header(config, scheme),
              _policy_rows(config, scheme, result), config, scheme, params)
    if result:
        print(f"found {len(result)} equilibrium policies; wrote {path}")
    else:
        print("no pure equilibrium found")
    return 0


def _cmd_optimal(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    solver = PolicyGameSolver(space, scheme, strict_arrivals=args.strict_eq2)
    result = solver.optimal_policy(method=args.method, cap=args.cap,
                                   restarts=args.restarts, seed=args.seed)
    params = {"method": result.method, "cap": args.cap}
    payload = {
        "policy": [list(row) for row in result.policy.choice],
        "global_utility": result.evaluation.global_utility,
        "overall_blocking": result.evaluation.overall_blocking,
        "ties": [[list(row) for row in p.choice] for p in result.ties],
        "policies_evaluated": result.policies_evaluated,
    }
    path = write_json(Path(args.out) / "optimal.json", payload, config, scheme, params)
    write_csv(Path(args.out) / "optimal.csv", _policy_header(config, scheme),
              _policy_rows(config, scheme, [result.evaluation]), config, scheme, params)
    print(f"optimal utility {result.evaluation.global_utility:.6g} "
          f"({result.method}, {result.policies_evaluated} policies); wrote {path}")
    return 0


def _cmd_baseline(args) -> int:
    config, scheme = _load(args)
    space = enumerate_states(config, max_states=args.max_states)
    report = evaluate_baseline(space, args.which, strict_arrivals=args.strict_eq2)
    params = {"which": args.which}
    rows = [[args.which, f"{report.global_utility:.12g}",
             f"{report.overall_blocking:.12g}"]
            + [f"{b:.12g}" for b in report.per_class_blocking]]
    header = ["baseline", "global_utility", "blocking"] + \
        [f"blocking_{config.class_name(n)}" for n in range(config.num_classes)]
    path = write_csv(Path(args.out) / f"baseline_{args.which}.csv", header, rows,
                     config, scheme, params)
    print(f"{args.which}: U={report.global_utility:.6g} "
          f"b={report.overall_blocking:.6g}; wrote {path}")
    return 0


_DEFAULT_CONTROL_SCHEMES = ("0.3,0.7;0.3,0.7", "0.0,0.0;0.0,0.0", "0.5,0.9;0.5,0.9")


def _cmd_control(args) -> int:
    config, scheme = _load(args)
    scheme_texts = args.scheme or list(_DEFAULT_CONTROL_SCHEMES)
    grid = [_parse_scheme(text) for text in scheme_texts]
    traffic = _parse_traffic(args.traffic) if args.traffic else [config.offered_erlangs]
    rows = []
    summary = []
    for erl in traffic:
        scaled = _scaled(config, erl)
        result = optimize_thresholds(scaled, grid, selection_rule=args.selection,
                                     restarts=args.restarts, seed=args.seed,
                                     strict_arrivals=args.strict_eq2)
        for i, outcome in enumerate(result.outcomes):
            rows.append([
                erl, ";".join(f"{lo},{hi}" for lo, hi in outcome.scheme.thresholds),
                "" if outcome.blocking is None else f"{outcome.blocking:.12g}",
                "" if outcome.utility is None else f"{outcome.utility:.12g}",
                "" if outcome.worst_blocking is None else f"{outcome.worst_blocking:.12g}",
                len(outcome.equilibria),
                "best" if i == result.best_index else "",
                outcome.note,
            ])
        best = result.best
        summary.append({
            "erlangs": erl,
            "best_thresholds": None if best is None else
                [list(pair) for pair in best.scheme.thresholds],
            "blocking": None if best is None else best.blocking,
            "utility": None if best is None else best.utility,
        })
    params = {"selection": args.selection, "seed": args.seed,
              "schemes": scheme_texts, "traffic": traffic}
    path = write_csv(Path(args.out) / "control.csv",
                     ["erlangs", "thresholds", "blocking", "utility",
                      "worst_blocking", "equilibria", "argmin", "note"],
                     rows, config, scheme, params)
    write_json(Path(args.out) / "control.json", {"sweep": summary}, config,
               scheme, params)
    print(f"wrote {path}")
    return 0


def _sweep_point(payload: str) -> dict:
    """Worker for one traffic point; takes JSON so processes can run it."""
    job = json.loads(payload)
    config, scheme = load_instance(job["instance"])
    config = _scaled(config, job["erlangs"])
    space = enumerate_states(config, max_states=job["max_states"])
    out: dict = {"erlangs": job["erlangs"]}
    analyses = job["analyses"]
    strict = job["strict"]
    if "nash" in analyses:
        solver = PolicyGameSolver(space, scheme, strict_arrivals=strict)
        equilibria = solver.find_nash("auto", restarts=job["restarts"],
                                      seed=job["seed"])
        if equilibria:
            best = max(equilibria, key=lambda ev: ev.global_utility)
            out["nash"] = {"count": len(equilibria),
                           "utility": best.global_utility,
                           "blocking": best.overall_blocking,
                           "policy": list(best.policy.flatten())}
        else:
            out["nash"] = {"count": 0, "utility": None, "blocking": None,
                           "policy": None}
    if "optimal" in analyses:
        solver = PolicyGameSolver(space, scheme, strict_arrivals=strict)
        result = solver.optimal_policy(method="auto", cap=job["cap"],
                                       seed=job["seed"])
        out["optimal"] = {"utility": result.evaluation.global_utility,
                          "blocking": result.evaluation.overall_blocking,
                          "method": result.method,
                          "policy": list(result.policy.flatten())}
    if "baselines" in analyses:
        for which in ("peak_rate", "instantaneous_rate"):
            report = evaluate_baseline(space, which, strict_arrivals=strict)
            out[which] = {"utility": report.global_utility,
                          "blocking": report.overall_blocking}
    if "control" in analyses:
        grid = [_parse_scheme(text) for text in job["schemes"]]
        result = optimize_thresholds(config, grid, restarts=job["restarts"],
                                     seed=job["seed"], strict_arrivals=strict,
                                     space=space)
        out["control"] = [
            {"thresholds": ";".join(f"{lo},{hi}" for lo, hi in o.scheme.thresholds),
             "blocking": o.blocking, "utility": o.utility,
             "equilibria": len(o.equilibria),
             "argmin": i == result.best_index}
            for i, o in enumerate(result.outcomes)
        ]
    return out


def _cmd_sweep(args) -> int:
    config, scheme = _load(args)
    analyses = [a.strip() for a in args.analyses.split(",") if a.strip()]
    unknown = set(analyses) - {"nash", "optimal", "baselines", "control"}
    if unknown:
        raise ConfigError(f"unknown analyses: {sorted(unknown)}")
    if not analyses:
        raise ConfigError("at least one analysis is required")
    traffic = _parse_traffic(args.traffic)
    raw_schemes = args.scheme or list(_DEFAULT_CONTROL_SCHEMES)
    # canonical text form so worker output and chart legends line up
    scheme_texts = [";".join(f"{lo},{hi}" for lo, hi in _parse_scheme(t).thresholds)
                    for t in raw_schemes]
    payloads = [json.dumps({
        "instance": serialize_instance(config, scheme, indent=None),
        "erlangs": erl, "analyses": analyses, "strict": args.strict_eq2,
        "restarts": args.restarts, "seed": args.seed, "cap": 65536,
        "max_states": args.max_states, "schemes": scheme_texts,
    }) for erl in traffic]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            points = list(pool.map(_sweep_point, payloads))
    else:
        points = [_sweep_point(p) for p in payloads]

    series_names = []
    if "nash" in analyses:
        series_names.append("nash")
    if "optimal" in analyses:
        series_names.append("optimal")
    if "baselines" in analyses:
        series_names += ["peak_rate", "instantaneous_rate"]

    def value(point, name, field):
        entry = point.get(name) or {}
        v = entry.get(field)
        return None if v is None else f"{v:.12g}"

    params = {"traffic": traffic, "analyses": analyses, "seed": args.seed,
              "restarts": args.restarts}
    util_rows = [[p["erlangs"]] + [value(p, nm, "utility") for nm in series_names]
                 for p in points]
    block_rows = [[p["erlangs"]] + [value(p, nm, "blocking") for nm in series_names]
                  for p in points]
    upath = write_csv(Path(args.out) / "sweep_utility.csv",
                      ["erlangs"] + [f"utility_{nm}" for nm in series_names],
                      util_rows, config, scheme, params)
    bpath = write_csv(Path(args.out) / "sweep_blocking.csv",
                      ["erlangs"] + [f"blocking_{nm}" for nm in series_names],
                      block_rows, config, scheme, params)
    write_json(Path(args.out) / "sweep.json", {"points": points}, config, scheme,
               params)
    if "control" in analyses:
        control_rows = []
        for p in points:
            for entry in p["control"]:
                control_rows.append([
                    p["erlangs"], entry["thresholds"],
                    "" if entry["blocking"] is None else f"{entry['blocking']:.12g}",
                    "" if entry["utility"] is None else f"{entry['utility']:.12g}",
                    entry["equilibria"], "best" if entry["argmin"] else ""])
        write_csv(Path(args.out) / "sweep_control.csv",
                  ["erlangs", "thresholds", "blocking", "utility",
                   "equilibria", "argmin"],
                  control_rows, config, scheme, params)
    if args.svg:
        xs = [p["erlangs"] for p in points]
        for fname, field, ylabel in (("sweep_utility.svg", "utility", "global utility (Mbit)"),
                                     ("sweep_blocking.svg", "blocking", "blocking probability")):
            series = []
            for nm in series_names:
                ys = [(p.get(nm) or {}).get(field) for p in points]
                ys = [float("nan") if y is None else y for y in ys]
                series.append((nm, xs, ys))
            if series:
                svg = line_chart(series, f"{field} vs offered traffic",
                                 "offered traffic (Erlang)", ylabel)
                (Path(args.out) / fname).write_text(svg)
        if "control" in analyses:
            series = []
            for text in scheme_texts:
                ys = []
                for p in points:
                    match = [e for e in p["control"] if e["thresholds"] == text]
                    b = match[0]["blocking"] if match and match[0]["blocking"] is not None \
                        else float("nan")
                    ys.append(b)
                series.append((text, xs, ys))
            svg = line_chart(series, "equilibrium blocking per threshold scheme",
                             "offered traffic (Erlang)", "blocking probability")
            (Path(args.out) / "sweep_control.svg").write_text(svg)
    print(f"wrote {upath} and {bpath} ({len(points)} traffic points)")
    return 0


def _cmd_simulate(args) -> int:
    config, scheme = _load(args)
    rule = _make_rule(args, config, scheme)
    report = simulate(config, rule, args.events, args.seed,
                      num_batches=args.batches, strict_arrivals=args.strict_eq2)
    params = {"rule": rule.describe(), "events": args.events, "seed": args.seed,
              "batches": args.batches, "strict_eq2": args.strict_eq2}
    rows = []
    for n in range(config.num_classes):
        est, half = report.blocking_estimate(n)
        rows.append(["blocking", config.class_name(n), "", f"{est:.8g}", f"{half:.3g}"])
    for n in range(config.num_classes):
        for s in range(config.num_systems):
            est, half, count = report.volume_estimate(n, s)
            if count:
                rows.append(["mean_volume", config.class_name(n),
                             config.system_name(s), f"{est:.8g}", f"{half:.3g}"])
    path = write_csv(Path(args.out) / "simulation.csv",
                     ["metric", "class", "system", "estimate", "ci99_half_width"],
                     rows, config, scheme, params)
    print(f"wrote {path} (total simulated time {report.total_time:.6g})")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "enumerate": _cmd_enumerate,
    "steady": _cmd_steady,
    "utility": _cmd_utility,
    "nash": _cmd_nash,
    "optimal": _cmd_optimal,
    "baseline": _cmd_baseline,
    "control": _cmd_control,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CapacityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
