"""Command line front end.

Verbs: ``run`` one policy on one instance or stream file, ``opt`` for the
offline side, ``experiment`` for batch runs from a config, ``adversary
star`` for the hub construction, ``validate`` for any file this package
writes. Exit status is nonzero exactly when a hard invariant failed:
unreadable or inconsistent input, a failed audit, or a broken promise
caught mid-run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import adversary, harness
from .errors import OnrouteError, SchemaViolation
from .model import load_instance, load_stream
from .offline import opt_exact, opt_lower_bound, save_schedule
from .simulate import audit, load_trace, run
from .policies import POLICIES, make_policy

EXIT_OK = 0
EXIT_FAIL = 1


def _load_runnable(path: str):
    with open(path) as fh:
        head = json.load(fh)
    if "generator" in head:
        return load_stream(path)
    return load_instance(path)


def _print_result(res: harness.RunResult, as_json: bool) -> None:
    if as_json:
        row = {f: getattr(res, f) for f in harness.CSV_FIELDS}
        print(json.dumps(row, sort_keys=True))
        return
    print(f"policy      {res.policy}" + (f" [{res.branch}]" if res.branch else ""))
    print(f"setting     {res.space} {res.mode} {res.ending} k={res.k} m={res.m} "
          f"delta={res.delta:.6g}")
    print(f"makespan    {res.makespan:.6g}")
    print(f"offline     {res.opt:.6g} ({res.opt_kind})")
    print(f"ratio       {res.ratio:.6g}")
    print(f"bound       {res.bound:.6g} ({res.formula}) -> {res.within_bound}")
    print(f"audit       {'ok' if res.audit_ok else 'FAILED'}")


def _cmd_run(args) -> int:
    given = [p for p in (args.path, args.instance, args.oracle) if p]
    if len(given) != 1:
        raise SchemaViolation(
            "give exactly one input: a positional path, --instance or --oracle"
        )
    if args.instance:
        setup = load_instance(args.instance)
    elif args.oracle:
        setup = load_stream(args.oracle)
    else:
        setup = _load_runnable(args.path)
    res = harness.run_one(setup, args.policy, want_trace=True)
    if args.trace:
        res.trace.save(args.trace)
    _print_result(res, args.json)
    return EXIT_OK if res.audit_ok else EXIT_FAIL


def _cmd_opt(args) -> int:
    inst = load_instance(args.path)
    if args.lower_bound:
        lb = opt_lower_bound(inst)
        if args.json:
            print(json.dumps({"lower_bound": lb.value, "parts": lb.parts},
                             sort_keys=True))
        else:
            print(f"lower bound {lb.value:.6g}")
            for name, val in sorted(lb.parts.items()):
                print(f"  {name:<16} {val:.6g}")
        return EXIT_OK
    res = opt_exact(inst)
    if args.schedule:
        save_schedule(res.schedule, args.schedule)
    if args.json:
        print(json.dumps({"opt": res.value, "exact": res.exact}, sort_keys=True))
    else:
        print(f"optimum     {res.value:.6g}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config_path = args.config or args.config_flag
    if not config_path or (args.config and args.config_flag):
        raise SchemaViolation("give the config file once (positional or --config)")
    with open(config_path) as fh:
        config = json.load(fh)
    jobs = config.get("jobs", [])
    results = harness.run_experiment(jobs, parallel=args.parallel
                                     or config.get("parallel", 1))
    csv_path = args.out or config.get("csv")
    if csv_path:
        harness.write_csv(results, csv_path)
        print(f"wrote {len(results)} rows to {csv_path}")
    plot_dir = args.plot or config.get("plot")
    if plot_dir:
        os.makedirs(plot_dir, exist_ok=True)
        kinds = config.get("plots", harness.PLOT_KINDS)
        for kind in kinds:
            out = os.path.join(plot_dir, f"{kind}.dat")
            harness.emit_plotdata(results, kind, out)
            print(f"wrote plot data to {out}")
    for key, agg in harness.summarize(results).items():
        print(f"{key}: runs={agg['runs']} max_ratio={agg['max_ratio']:.6g} "
              f"pass={agg['pass']} fail={agg['fail']} unknown={agg['unknown']}")
    if not csv_path and not plot_dir:
        for res in results:
            _print_result(res, as_json=True)
    bad = [r for r in results if not r.audit_ok or r.within_bound == "fail"]
    if bad:
        print(f"{len(bad)} runs failed an audit or their bound", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_adversary_star(args) -> int:
    setup = adversary.star_setup(args.n, args.delta, ending=args.ending)
    trace = run(setup, make_policy(args.policy))
    report = audit(trace)
    witness = adversary.star_opt_schedule(trace.instance.requests, args.n,
                                          args.delta, args.ending)
    from .offline import evaluate_schedule

    ev = evaluate_schedule(trace.instance, witness)
    if args.trace:
        trace.save(args.trace)
    if args.instance_out:
        from .model import save_instance

        save_instance(trace.instance, args.instance_out)
    ratio = trace.makespan / ev.makespan if ev.makespan > 0 else 1.0
    if args.json:
        print(json.dumps({
            "n": args.n, "delta": args.delta, "ending": args.ending,
            "online": trace.makespan, "witness": ev.makespan, "ratio": ratio,
            "audit_ok": report.ok,
        }, sort_keys=True))
    else:
        print(f"online      {trace.makespan:.6g}")
        print(f"witness     {ev.makespan:.6g} (feasible offline play)")
        print(f"ratio       {ratio:.6g}")
        print(f"audit       {'ok' if report.ok else 'FAILED'}")
    return EXIT_OK if report.ok and ev.feasible else EXIT_FAIL


def _cmd_validate(args) -> int:
    path = args.path
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as exc:
        print(f"{path}: unreadable ({exc})", file=sys.stderr)
        return EXIT_FAIL
    try:
        # traces are JSONL, so their head line parses on its own;
        # pretty-printed instance files fall through to the full load
        head = json.loads(first) if first.strip() else {}
    except json.JSONDecodeError:
        head = None
    if isinstance(head, dict) and "instance" in head and "schema" in head:
        trace = load_trace(path)
        report = audit(trace)
        for name, ok, detail in report.checks:
            line = f"  {name:<22} {'ok' if ok else 'FAILED'}"
            print(line + (f"  {detail}" if detail and not ok else ""))
        print(f"{path}: trace {'ok' if report.ok else 'INVALID'}")
        return EXIT_OK if report.ok else EXIT_FAIL
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"{path}: unreadable ({exc})", file=sys.stderr)
        return EXIT_FAIL
    if "generator" in obj:
        load_stream(path)
        print(f"{path}: stream ok")
        return EXIT_OK
    inst = load_instance(path)
    inst.validate()
    print(f"{path}: instance ok ({inst.mode}, {inst.ending}, k={inst.k}, "
          f"m={inst.m})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onroute",
        description="Online routing with a release radius: simulate, "
                    "solve offline, measure.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="simulate one policy on a file")
    p_run.add_argument("path", nargs="?",
                       help="instance or stream JSON file (sniffed)")
    p_run.add_argument("--instance", help="instance JSON file")
    p_run.add_argument("--oracle", help="stream JSON file with a generator")
    p_run.add_argument("--policy", required=True, choices=sorted(POLICIES))
    p_run.add_argument("--trace", help="write the full trace (JSONL)")
    p_run.add_argument("--json", action="store_true", help="machine output")
    p_run.set_defaults(fn=_cmd_run)

    p_opt = sub.add_parser("opt", help="offline optimum of an instance")
    p_opt.add_argument("path")
    p_opt.add_argument("--schedule", help="write the witness schedule")
    p_opt.add_argument("--lower-bound", action="store_true",
                       help="certified lower bound instead of the exact value")
    p_opt.add_argument("--json", action="store_true")
    p_opt.set_defaults(fn=_cmd_opt)

    p_exp = sub.add_parser("experiment", help="batch runs from a config file")
    p_exp.add_argument("config", nargs="?")
    p_exp.add_argument("--config", dest="config_flag", help="config JSON file")
    p_exp.add_argument("--out", help="output CSV path")
    p_exp.add_argument("--plot", help="directory for plot data files")
    p_exp.add_argument("--parallel", type=int, default=0)
    p_exp.set_defaults(fn=_cmd_experiment)

    p_adv = sub.add_parser("adversary", help="built-in hard constructions")
    adv_sub = p_adv.add_subparsers(dest="construction", required=True)
    p_star = adv_sub.add_parser("star", help="hub stream with repeat releases")
    p_star.add_argument("--n", type=int, required=True,
                        help="tip count (and number of repeat releases)")
    p_star.add_argument("--delta", type=int, default=2,
                        help="spoke length = release radius")
    p_star.add_argument("--ending", choices=("nomadic", "homing"),
                        default="homing")
    p_star.add_argument("--policy", default="replan-baseline",
                        choices=sorted(POLICIES))
    p_star.add_argument("--trace", help="write the trace (JSONL)")
    p_star.add_argument("--instance-out", help="write the realized instance")
    p_star.add_argument("--json", action="store_true")
    p_star.set_defaults(fn=_cmd_adversary_star)

    p_val = sub.add_parser("validate", help="check an instance/stream/trace file")
    p_val.add_argument("path")
    p_val.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OnrouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
