"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each workload runs once per backend to warm up, then ``--repeat`` times;
the best wall time is reported together with the speedup and a check that
both backends produced the same answer.
"""

import argparse
import time

import numpy as np

from milpcbf import kernels
from milpcbf.cbf import solve_min_dist
from milpcbf.dynamics import discretize
from milpcbf.milp import LinearProgram, MILPProblem, solve_lp, solve_milp
from milpcbf.planner import PlannerConfig, build_fhocp
from milpcbf.geometry import v_to_h
from milpcbf.scenario import bundled
from milpcbf.sim import SimConfig, run
from milpcbf.verify import random_configuration, random_milp


def projections(n):
    rng = np.random.default_rng(0)
    cases = [random_configuration(rng, -0.5, 3.0)[2:] for _ in range(200)]

    def work():
        acc = 0.0
        for _ in range(n // len(cases)):
            for co, p in cases:
                acc += solve_min_dist(co, p).dist
        return round(acc, 9)
    return work


def lps(n):
    rng = np.random.default_rng(1)
    probs = []
    for _ in range(n):
        d, m = 12, 30
        G = rng.normal(size=(m, d))
        probs.append(LinearProgram(rng.normal(size=d), G, rng.uniform(0.5, 2.0, m),
                                   lower=-np.full(d, 5.0), upper=np.full(d, 5.0)))

    def work():
        return round(sum(solve_lp(lp).objective for lp in probs), 9)
    return work


def milps(n):
    rng = np.random.default_rng(2)
    probs = []
    for _ in range(n):
        c_y, c_t, G, H, g, lo, hi = random_milp(rng, 10)
        lp = LinearProgram(np.concatenate([c_y, c_t]), np.hstack([G, H]), g,
                           lower=np.concatenate([lo, np.zeros(10)]),
                           upper=np.concatenate([hi, np.ones(10)]))
        probs.append(MILPProblem(lp, tuple(range(len(c_y), lp.n))))

    def work():
        return round(sum(s.objective for s in map(solve_milp, probs) if s.ok), 9)
    return work


def planner_step():
    sc = bundled("maze", "double")
    lo, hi = sc.state_bounds()
    cfg = PlannerConfig(x_min=lo, x_max=hi, node_limit=1500)
    fh = build_fhocp(sc.x_s, sc.x_g, [v_to_h(o) for o in sc.obstacles], discretize("double", 0.2),
                     cfg, prune=True, tighten=True)

    def work():
        return round(solve_milp(fh.problem, node_limit=1500).objective, 9)
    return work


def closed_loop(t_final):
    sc = bundled("u_trap", "single")

    def work():
        lg = run(sc, "MilpMpcCbf", SimConfig.from_scenario(sc, t_final=t_final))
        return round(float(lg.h.min()), 12)
    return work


def timed(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)
    if "compiled" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not available; build with pip install -e .")
    scale = 0.2 if args.quick else 1.0
    workloads = [
        ("min-dist projection x%d" % int(20000 * scale), projections(int(20000 * scale))),
        ("LP 12x30 x%d" % int(50 * scale), lps(int(50 * scale))),
        ("MILP 10 binaries x%d" % int(20 * scale), milps(int(20 * scale))),
        ("planner MILP (maze, DI)", planner_step()),
        ("closed loop u_trap %.1f s" % (2.4 * scale), closed_loop(2.4 * scale)),
    ]
    prev = kernels.BACKEND
    print(f"{'workload':<28} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8}  same")
    try:
        for name, fn in workloads:
            res = {}
            for backend in ("python", "compiled"):
                kernels.use(backend)
                res[backend] = timed(fn, args.repeat)
            tp, op = res["python"]
            tc, oc = res["compiled"]
            print(f"{name:<28} {tp:>11.3f} {tc:>13.3f} {tp / tc:>7.1f}x  {op == oc}")
    finally:
        kernels.use(prev)


if __name__ == "__main__":
    main()
