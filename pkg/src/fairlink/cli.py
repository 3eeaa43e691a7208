"""Command-line entry point: ``fairlink <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .allocator import (
    brute_force_maxmin,
    dump_instance,
    epa_allocate,
    find_min_policies,
    load_instance,
    max_utility_allocate,
    maxmin_allocate,
)
from .channel import read_channel_trace, write_channel_trace
from .errors import FairlinkError
from .policy import write_policy_tables
from .sim import SCHEMES, SimConfig, build_tables, draw_channel, emit_report, load_config, run_simulation

log = logging.getLogger("fairlink")


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "transmissions", None) is not None:
        overrides["transmissions"] = args.transmissions
    if getattr(args, "schemes", None) is not None:
        overrides["schemes"] = tuple(s for s in args.schemes.split(",") if s)
    return replace(cfg, **overrides) if overrides else cfg


def cmd_run(args):
    cfg = _config(args)
    channels = read_channel_trace(args.channel_trace) if args.channel_trace else None
    report = run_simulation(cfg, channels=channels, workers=args.workers)
    formats = tuple(f for f in args.format.split(",") if f)
    paths = emit_report(report, args.out, formats=formats, plots=not args.no_plots)
    s = report.summary
    for scheme, info in s["schemes"].items():
        j = info["jain"]["mean"]
        print(f"{scheme:9s} jain={'n/a' if j is None else f'{j:.4f}'} "
              f"utilities={[round(m['mean'] or 0.0, 4) for m in info['mean_utility']]}")
    ratio = s["utility_ratio"]["value"]
    if ratio is not None:
        flag = "" if s["utility_ratio"]["in_band"] else "  (outside expected band)"
        print(f"proposed/maxutil total utility ratio: {ratio:.4f}{flag}")
    print(f"counts: {s['counts']}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_default_config(args):
    json.dump(SimConfig().to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_spectrum(args):
    link = _config(args).link_model()
    for rate, spec in sorted(link.codes.items()):
        terms = " ".join(f"{d}:{a}" for d, a in spec.spectrum)
        print(f"{rate}  d_free={spec.d_free}  {terms}")
    return 0


def cmd_tables(args):
    cfg = _config(args)
    tables = build_tables(cfg, draw_channel(cfg, args.transmission), cfg.link_model())
    write_policy_tables(args.out, tables)
    if args.instance:
        dump_instance(args.instance, tables, cfg.u_min, cfg.total_power)
    print(f"wrote {args.out}")
    return 0


def cmd_allocate(args):
    tables, u_min, budget = load_instance(args.instance)
    if args.scheme == "epa":
        res = epa_allocate(tables, budget, u_min)
    elif args.scheme == "maxutil":
        res = max_utility_allocate(tables, budget, u_min)
    else:
        filtered, minima = find_min_policies(tables, u_min, budget)
        if args.scheme == "bruteforce":
            res = brute_force_maxmin(filtered, minima, budget, u_min)
        else:
            res = maxmin_allocate(filtered, minima, budget, u_min, pace=args.pace)
    json.dump(res.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_trace(args):
    cfg = _config(args)
    write_channel_trace(args.out, (draw_channel(cfg, t) for t in range(cfg.transmissions)))
    print(f"wrote {cfg.transmissions} channel realizations to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairlink", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, schemes=False):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--transmissions", type=int)
        if schemes:
            sp.add_argument("--schemes", help=f"comma-separated subset of {','.join(SCHEMES)}")

    run = sub.add_parser("run", help="run a batch simulation and write the report")
    common(run, schemes=True)
    run.add_argument("--out", default="fairlink-out", help="output directory")
    run.add_argument("--channel-trace", help="binary channel trace replacing the generator")
    run.add_argument("--format", default="csv,json")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--no-plots", action="store_true")
    run.set_defaults(func=cmd_run)

    dc = sub.add_parser("default-config", help="print the default configuration as JSON")
    dc.set_defaults(func=cmd_default_config)

    sp = sub.add_parser("spectrum", help="print the code distance spectra")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_spectrum)

    tb = sub.add_parser("tables", help="export policy tables for one transmission")
    common(tb)
    tb.add_argument("--transmission", type=int, default=0)
    tb.add_argument("--out", required=True, help="CSV file for the tables")
    tb.add_argument("--instance", help="also write a JSON allocation instance")
    tb.set_defaults(func=cmd_tables)

    al = sub.add_parser("allocate", help="replay an allocation instance")
    al.add_argument("instance")
    al.add_argument("--scheme", default="proposed",
                    choices=("proposed", "bruteforce", "epa", "maxutil"))
    al.add_argument("--pace", default="current", choices=("current", "prospective"))
    al.set_defaults(func=cmd_allocate)

    tr = sub.add_parser("trace", help="write generated channels to a trace file")
    common(tr)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FairlinkError, OSError) as exc:
        print(f"fairlink: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
