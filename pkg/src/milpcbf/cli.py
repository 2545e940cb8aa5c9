"""``milpcbf`` command line: run, compare and verify.

Exit codes: 0 success (``run``: goal reached), 2 goal not reached, 1 bad
input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import kernels
from .report import compare_svg, compare_table, run_svg, to_csv, to_json
from .scenario import ConfigError, bundled_names, from_dict, random_scenario, resolve, to_dict
from .sim import Controller, SimConfig, run
from .verify import SUITES, run_suite

EXIT_OK, EXIT_ERROR, EXIT_NOT_REACHED = 0, 1, 2


def _load(args):
    if args.scenario == "random":
        return random_scenario(args.seed, args.dynamics or "single")
    sc = resolve(args.scenario)
    if args.dynamics and args.dynamics != sc.dynamics.value:
        doc = to_dict(sc)
        doc["dynamics"] = args.dynamics
        doc["start"], doc["goal"] = doc["start"][:2], doc["goal"][:2]
        sc = from_dict(doc, sc.name)
    return sc


def _sim_config(sc, args) -> SimConfig:
    return SimConfig.from_scenario(sc, dt=args.dt, t_final=args.t_final)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(args) -> int:
    sc = _load(args)
    ctrl = Controller.parse(args.controller)
    lg = run(sc, ctrl, _sim_config(sc, args))
    out = Path(args.out)
    stem = f"{sc.name}_{sc.dynamics.value}_{ctrl.value}"
    _write(out / f"{stem}.csv", to_csv(lg))
    _write(out / f"{stem}.json", to_json(lg, sc))
    if not args.no_svg:
        _write(out / f"{stem}.svg", run_svg(sc, lg))
    s = lg.summary
    t_reach = "-" if s["t_reach"] is None else f"{s['t_reach']:.2f}"
    print(f"{stem}: reached={s['reached']} t_reach={t_reach} min_h={s['min_h']:.4g} "
          f"stall={s['stall']} intervention={s['intervention_time']:.2f}s -> {out}")
    return EXIT_OK if s["reached"] else EXIT_NOT_REACHED


def cmd_compare(args) -> int:
    sc = _load(args)
    cfg = _sim_config(sc, args)
    logs = {}
    for ctrl in Controller:
        logs[ctrl.value] = run(sc, ctrl, cfg)
    out = Path(args.out)
    stem = f"{sc.name}_{sc.dynamics.value}"
    table = compare_table(logs)
    _write(out / f"{stem}_compare.txt", table)
    for name, lg in logs.items():
        _write(out / f"{stem}_{name}.csv", to_csv(lg))
        _write(out / f"{stem}_{name}.json", to_json(lg, sc))
    if not args.no_svg:
        _write(out / f"{stem}_compare.svg", compare_svg(sc, logs))
    print(table, end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        rep = run_suite(name, seed=args.seed, n_cases=args.n_cases)
        print(rep.line())
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="milpcbf", description=__doc__.splitlines()[0])
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto",
                   help="kernel implementation (default: compiled if available)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help=("scenario JSON file, bundled name "
                                          f"({', '.join(bundled_names())}) or 'random'"))
        sp.add_argument("--seed", type=int, default=0, help="seed of the 'random' scenario")
        sp.add_argument("--dynamics", choices=["single", "double"], help="override the file's dynamics")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--dt", type=float, help="control step [s]")
        sp.add_argument("--t-final", type=float, help="horizon of the simulation [s]")
        sp.add_argument("--no-svg", action="store_true", help="skip the SVG figure")

    sp = sub.add_parser("run", help="simulate one controller")
    common(sp)
    sp.add_argument("--controller", default="MilpMpcCbf", choices=[c.value for c in Controller])
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="run all three controllers and tabulate")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", help="randomized checks against brute-force oracles")
    sp.add_argument("suite", choices=["all", *SUITES])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-cases", type=int, help="number of random cases (suite default if omitted)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.backend != "auto":
        try:
            kernels.use(args.backend)
        except (ImportError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
