"""Command-line front end.

Every subcommand builds a :class:`~sandpile1d.scenario.Scenario` and runs it
through :func:`execute`, so ``sandpile1d prop51 --n 5 ...`` and
``sandpile1d run prop51.ini`` produce identical records.  With ``--out DIR``
the record goes to ``DIR/result.json``, tables to ``DIR/*.csv`` and the
wall-clock time to ``DIR/timing.json``; otherwise the record is printed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from . import __version__, kernels
from . import ctmc, exact, series
from .errors import SandpileError
from .lattice import CriticalSet, HeightConfig, critical_set_of, from_critical_set
from .scenario import SCHEMA, Scenario, ScenarioError, load, load_config, normalize, validate
from .toppling import GrainField, stabilize, stabilize_bruteforce

logger = logging.getLogger("sandpile1d")

Tables = Dict[str, Tuple[List[str], List[list]]]


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


# ---------------------------------------------------------------------- #
# commands: (params, seed) -> (record, tables, extra files)
# ---------------------------------------------------------------------- #
def cmd_stabilize(p, seed):
    xi = GrainField.from_text(p["grains"])
    eta = stabilize(p["n"], xi)
    rec = {"config": eta.to_text(), "recurrent": int((eta.heights == 1).sum()) <= 1}
    if p["oracle_seed"] is not None:
        ref = stabilize_bruteforce(p["n"], xi, p["oracle_seed"])
        rec["oracle_agrees"] = ref == eta
    return rec, {}, {}


def cmd_avalanche(p, seed):
    if p["sites"] is not None:
        A0 = CriticalSet.of(p["sites"])
    elif p["interval"] is not None:
        A0 = CriticalSet.of(range(-p["interval"], p["interval"] + 1))
    else:
        raise ScenarioError("params.sites", "give sites or interval")
    if len(A0) == 0:
        raise ScenarioError("params.sites", "initial critical set must be nonempty")
    traj = ctmc.simulate_avalanche_chain(A0, p["horizon"], seed)
    final = critical_set_of(traj.final())
    rec = {
        "initial": list(A0.sites),
        "horizon": p["horizon"],
        "events": len(traj.events),
        "final_size": len(final),
        "final": list(final.sites),
    }
    if p["samples"] > 0:
        stats = ctmc.RunningStats()
        eta0 = from_critical_set(A0.sites)
        for c, size in ctmc._chunks(p["samples"]):
            rng = ctmc.chunk_rng(seed, c)
            stats.add_batch([
                len(critical_set_of(ctmc._drive_chain(eta0, -1, p["horizon"], rng)[0]))
                for _ in range(size)
            ])
        rec["mean_size"] = stats.mean
        rec["mean_size_stderr"] = stats.stderr
        rec["expected_mean_size"] = len(A0) * float(np.exp(p["horizon"]))
    return rec, {}, {"trajectory.jsonl": traj.to_jsonl()}


def cmd_couple(p, seed):
    if p["kind"] not in ctmc._MODES:
        raise ScenarioError("params.kind", "choose avalanche, n or n1n")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
    pairs = [ctmc.random_ordered_pair(rng, p["half_width"]) for _ in range(p["samples"])]
    runs, viol = ctmc.coupled_order_check(p["kind"], p["n"], pairs, p["horizon"], seed)
    return {"kind": p["kind"], "n": p["n"], "horizon": p["horizon"], "runs": runs,
            "violations": viol}, {}, {}


def cmd_fvsp(p, seed):
    n = p["n"]
    space = exact.StateSpace(n)
    law = exact.transient_distribution(n, 0, p["t"])
    counts = np.zeros(len(space))
    for c, size in ctmc._chunks(p["samples"]):
        rng = ctmc.chunk_rng(seed, c)
        for _ in range(size):
            eta = ctmc.fvsp_poisson_state(n, HeightConfig.all_ones(), p["t"], rng)
            counts[space.index_of(eta)] += 1
    emp = counts / p["samples"]
    rows = [[k, space.heights_text(k), float(law[k]), float(emp[k])] for k in range(len(space))]
    rec = {"n": n, "t": p["t"], "samples": p["samples"], "tv_distance": _tv(emp, law)}
    return rec, {"law.csv": _csv(["state_index", "heights", "exact", "empirical"], rows)}, {}


def cmd_exact(p, seed):
    n, check = p["n"], p["check"]
    valid = {"all", "stationary", "reversibility", "bijection", "lemma"}
    if check not in valid:
        raise ScenarioError("params.check", f"choose one of {', '.join(sorted(valid))}")
    q = exact.build_generator(n)
    rec: Dict[str, Any] = {"n": n, "states": q.shape[0]}
    tables = {"generator.csv": exact.generator_csv(q)}
    if check in ("all", "stationary"):
        pi = exact.stationary_distribution(n, q)
        rec["recurrent_size"] = len(exact.recurrent_set(n))
        rec["stationary_weights"] = sorted({round(float(w), 12) for w in pi if w > 0})
        rec["stationary_uniform_error"] = float(np.abs(pi - exact._mu(n)).max())
        tables["stationary.csv"] = exact.distribution_csv(n, pi)
    if check in ("all", "reversibility"):
        rng = np.random.default_rng(seed)
        dev = 0.0
        for _ in range(p["pairs"]):
            f, g = rng.standard_normal((2, q.shape[0]))
            lhs, rhs = exact.check_reversibility(n, f, g, q)
            dev = max(dev, abs(lhs - rhs))
        rec["reversibility_max_deviation"] = dev
        rec["detailed_balance_max_deviation"] = exact.check_detailed_balance(n, q)
    if check in ("all", "bijection"):
        rep = exact.check_unique_toppling_bijection(n)
        rec["bijection_pairs"] = rep.pairs
        rec["bijection_counterexamples"] = len(rep.counterexamples)
        rec["pushforward_error"] = rep.pushforward_error
    if check in ("all", "lemma") and n >= 2:
        rep = exact.check_lemma_excess(n, p["trials"], seed)
        rec["lemma_trials"] = rep.trials
        rec["lemma_failures"] = len(rep.failures)
    return rec, tables, {}


def cmd_series(p, seed):
    f = series.builtin(p["f"])
    eta = load_config(p["eta"])
    res = series.taylor_semigroup(f, eta, p["t"], p["tol"], max_depth=p["max_depth"])
    rec = {"f": f.name, "eta": eta.to_text(), "t": res.t, "value": res.value, "K": res.K,
           "tail_bound": res.tail_bound, "radius": res.radius,
           "tail_is_rigorous": res.tail_is_rigorous}
    rows = [[k, v] for k, v in enumerate(res.terms)]
    return rec, {"terms.csv": _csv(["k", "term"], rows)}, {}


def cmd_theorem51(p, seed):
    rows, ests = [], []
    for n in p["n"]:
        r = ctmc.estimate_absorption(n, p["t"], p["samples"], seed)
        b = ctmc.theorem51_bound(n, p["delta"])
        ests.append(r)
        rows.append([n, r.mean, r.stderr, 1.0 / (2 * n + 1), b])
    nonincr = all(
        ests[i + 1].mean <= ests[i].mean + 3 * np.hypot(ests[i].stderr, ests[i + 1].stderr)
        for i in range(len(ests) - 1)
    )
    rec = {"t": p["t"], "samples": p["samples"], "delta": p["delta"],
           "estimates": [{"n": r[0], "mean": r[1], "stderr": r[2], "first_term": r[3],
                          "bound": r[4]} for r in rows],
           "nonincreasing_within_3se": nonincr}
    return rec, {"theorem51.csv": _csv(["n", "estimate", "stderr", "first_term", "bound"], rows)}, {}


def cmd_prop51(p, seed):
    n, k = p["n"], p["k"]
    hl = ctmc.hole_law(n, k, p["samples"], seed)
    ex = ctmc.exact_hole_law(n, k)
    rows = [[j + 1, float(hl.estimate[j]), float(hl.stderr[j]), float(hl.formula[j]), float(ex[j])]
            for j in range(k)]
    rec = {"n": n, "k": k, "samples": p["samples"], "structure_violations": hl.violations,
           "max_abs_z_vs_formula": float(np.max(np.abs(hl.estimate - hl.formula) / np.maximum(hl.stderr, 1e-300))),
           "max_abs_z_vs_enumeration": float(np.max(np.abs(hl.estimate - ex) / np.maximum(hl.stderr, 1e-300)))}
    header = ["k", "empirical", "stderr", "formula_1_over_2n_plus_k", "enumerated"]
    return rec, {"prop51.csv": _csv(header, rows)}, {}


def cmd_discrete(p, seed):
    n = p["n"]
    space = exact.StateSpace(n)
    counts = np.zeros(len(space))
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(p["samples"]):
        eta = ctmc.discrete_time_fvsp(n, p["steps"], None, child)
        counts[space.index_of(eta)] += 1
    emp = counts / p["samples"]
    mu = exact._mu(n)
    rows = [[k, space.heights_text(k), float(mu[k]), float(emp[k])] for k in range(len(space))]
    rec = {"n": n, "steps": p["steps"], "samples": p["samples"], "tv_to_uniform_recurrent": _tv(emp, mu)}
    return rec, {"law.csv": _csv(["state_index", "heights", "stationary", "empirical"], rows)}, {}


COMMANDS: Dict[str, Callable] = {
    "stabilize": cmd_stabilize,
    "avalanche": cmd_avalanche,
    "couple": cmd_couple,
    "fvsp": cmd_fvsp,
    "exact": cmd_exact,
    "series": cmd_series,
    "theorem51": cmd_theorem51,
    "prop51": cmd_prop51,
    "discrete": cmd_discrete,
}


# ---------------------------------------------------------------------- #
# execution and output
# ---------------------------------------------------------------------- #
def execute(sc: Scenario, out: str = None) -> Dict[str, Any]:
    """Run a scenario; write files when an output directory is given."""
    params, warns = normalize(sc.command, sc.params)
    for w in warns:
        logger.warning(w)
    t0 = time.perf_counter()
    result, tables, files = COMMANDS[sc.command](params, sc.seed)
    elapsed = time.perf_counter() - t0
    record = {
        "tool": "sandpile1d",
        "version": __version__,
        "backend": kernels.BACKEND,
        "scenario": sc.canonical(),
        "scenario_hash": sc.digest(),
        "seed": sc.seed,
        "result": result,
    }
    out = out or sc.output
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "result.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        for name, text in {**tables, **files}.items():
            (d / name).write_text(text)
        (d / "timing.json").write_text(json.dumps(
            {"scenario_hash": record["scenario_hash"], "wall_clock_seconds": elapsed}) + "\n")
    return record


def _error(exc: BaseException, command: str) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, ScenarioError):
        rec["field"] = exc.field
    sys.stderr.write(json.dumps(rec) + "\n")
    return 2 if isinstance(exc, ScenarioError) else 1


HELP = {
    "stabilize": "stabilize a grain field on [-n, n]",
    "avalanche": "simulate the avalanche chain of critical sets",
    "couple": "check order preservation of a coupled pair",
    "fvsp": "finite-volume law at time t via Poisson grains",
    "exact": "exact finite-volume generator checks",
    "series": "power-series value of a local observable",
    "theorem51": "absorption probability at the origin vs 1/(2n+1)",
    "prop51": "hole at the origin after k avalanche jumps",
    "discrete": "discrete-time chain vs the uniform recurrent law",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sandpile1d", description="One-dimensional sandpile laboratory.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--name", help="scenario name recorded in the output")

    for name, schema in SCHEMA.items():
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        for pname, p in schema.items():
            flag = "--" + pname.replace("_", "-")
            default = None
            sp.add_argument(flag, dest=pname, default=default, help=p.help or None,
                            required=False)

    rp = sub.add_parser("run", help="run a scenario file")
    rp.add_argument("scenario")
    rp.add_argument("--out", help="override the output directory")
    vp = sub.add_parser("validate", help="check a scenario file without running it")
    vp.add_argument("scenario")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            ok, msgs = validate(args.scenario)
            for m in msgs:
                print(m)
            return 0 if ok else 2
        if args.command == "run":
            sc = load(args.scenario)
            out = args.out
        else:
            raw = {k: getattr(args, k) for k in SCHEMA[args.command]}
            params, _ = normalize(args.command, raw)
            sc = Scenario(args.name or args.command, args.command, params, args.seed, args.out)
            out = args.out
        record = execute(sc, out)
        if not (out or sc.output):
            print(json.dumps(record, indent=2, sort_keys=True))
        return 0
    except (SandpileError, ScenarioError, ValueError, OSError) as exc:
        return _error(exc, getattr(args, "command", ""))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
