"""Compare the compiled and pure-Python kernels on the hot paths.

Each case runs the same seeded workload on both backends, checks that the
results agree, and reports the best of ``--repeat`` timings.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 5 --scale 2 --json out.json
"""

import argparse
import json
import logging
import timeit

import numpy as np

from sandpile1d import ctmc, kernels
from sandpile1d.lattice import from_critical_set
from sandpile1d.toppling import GrainField, stabilize

log = logging.getLogger("bench")


def case_stabilize(backend, scale):
    rng = np.random.default_rng(0)
    fields = [GrainField(-60, 60, rng.integers(1, 7, size=121)) for _ in range(20 * scale)]
    return lambda: [stabilize(60, xi, backend=backend) for xi in fields]


def case_chain(backend, scale):
    eta = from_critical_set({-3, -1, 0, 4})
    f = lambda e: e[0]  # noqa: E731
    return lambda: ctmc.estimate_semigroup(f, eta, 1.5, 5, 5, 500 * scale, seed=1, backend=backend)


def case_absorption(backend, scale):
    return lambda: ctmc.estimate_absorption(50, 14.0, 200 * scale, seed=2, backend=backend)


def case_coupled(backend, scale):
    rng = np.random.default_rng(3)
    pairs = [ctmc.random_ordered_pair(rng) for _ in range(500 * scale)]
    return lambda: ctmc.coupled_order_check("n1n", 3, pairs, 2.0, seed=4, backend=backend)


def case_hole_law(backend, scale):
    def run():
        hl = ctmc.hole_law(5, 20, 2000 * scale, seed=5, backend=backend)
        return hl.estimate.tolist(), hl.violations
    return run


CASES = {
    "stabilize": case_stabilize,
    "chain": case_chain,
    "absorption": case_absorption,
    "coupled": case_coupled,
    "hole_law": case_hole_law,
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scale", type=int, default=1, help="workload multiplier")
    p.add_argument("--cases", default=",".join(CASES))
    p.add_argument("--json", help="also write the table as JSON")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    backends = kernels.available_backends()
    if "cython" not in backends:
        log.warning("compiled kernels not built; timing the pure-Python backend only")
    rows = []
    for name in args.cases.split(","):
        times, outs = {}, {}
        for b in backends:
            fn = CASES[name](b, args.scale)
            outs[b] = fn()
            times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        agree = all(outs[b] == outs[backends[0]] for b in backends)
        row = {"case": name, "agree": agree, **{f"{b}_s": times[b] for b in backends}}
        if len(backends) > 1:
            row["speedup"] = times["python"] / times["cython"]
        rows.append(row)
        log.info("%-11s %s%s  agree=%s", name,
                 "  ".join(f"{b} {times[b]:8.4f}s" for b in backends),
                 f"  x{row['speedup']:.1f}" if "speedup" in row else "", agree)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
