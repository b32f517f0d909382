"""Command-line surface: generate, solve, verify, bench.

Exit codes: 0 success, 1 error, 2 infeasible instance.  All reports are JSON
on stdout; bench writes CSV.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time

from . import oracle as oracle_mod
from .instance import (
    GENERATORS,
    Instance,
    InstanceError,
    generate_instance,
    normalize_weights,
    read_instance,
    write_instance,
)
from .matching import CapacityProfile, CapMatching
from .simulate import ModelSpec, round_budget, run_simulation, verify_message_budget
from .solvers import (
    Assignment,
    InfeasibleError,
    MultiAssignment,
    solve_backup,
    solve_sequential,
    solve_unweighted,
    solve_weighted_congest,
    solve_weighted_local,
    split_assignment_seq,
)

SOLVE_ALGOS = ("seq", "congest-unweighted", "congest-weighted", "local-weighted", "backup")

_SIM_MODEL = {
    "congest-unweighted": "CONGEST",
    "congest-weighted": "CONGEST",
    "local-weighted": "LOCAL",
    "backup": "CONGEST",
}

_SIM_ID = {
    "congest-unweighted": "congest-unweighted",
    "congest-weighted": "congest-weighted",
    "local-weighted": "local-weighted",
    "backup": "congest-backup",
}


def instance_digest(inst: Instance) -> str:
    doc = {
        "clients": [[c, inst.weight[c]] for c in inst.clients],
        "servers": list(inst.servers),
        "edges": [list(e) for e in inst.edges],
    }
    blob = json.dumps(doc, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _norms(lv, extra_p=()) -> dict:
    out = {"1": lv.norm(1), "2": lv.norm(2), "3": lv.norm(3), "inf": lv.norm(math.inf)}
    for p in extra_p:
        out[str(p)] = lv.norm(p)
    return out


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    params = {}
    if args.clients is not None:
        params["n_clients"] = args.clients
    if args.servers is not None:
        params["n_servers"] = args.servers
    if args.p is not None:
        params["p"] = args.p
    if args.k is not None:
        params["k"] = args.k
    if args.exponent is not None:
        params["exponent"] = args.exponent
    if args.max_weight is not None:
        params["max_weight"] = args.max_weight
    inst = generate_instance(args.generator, seed=args.seed, **params)
    write_instance(inst, args.out)
    print(json.dumps({"digest": instance_digest(inst), "n": inst.n, "m": inst.m}))
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _run_algo(inst: Instance, algo: str, r: int):
    if algo == "seq":
        return solve_sequential(inst)
    if algo == "congest-unweighted":
        return solve_unweighted(inst)[0]
    if algo == "congest-weighted":
        return solve_weighted_congest(inst)
    if algo == "local-weighted":
        return solve_weighted_local(inst)
    if algo == "backup":
        return solve_backup(inst, r)
    raise ValueError(f"unknown algorithm {algo!r}")


def _oracle_comparison(inst: Instance, algo: str, r: int, lv) -> dict:
    out: dict = {}
    try:
        if algo == "backup":
            opt = oracle_mod.opt_backup_enum(inst, r)
            out["opt_linf"] = opt
            out["ratio_linf"] = lv.max() / opt if opt else None
            return out
        if inst.is_unit_weight():
            out["opt_minmax"] = oracle_mod.opt_minmax_unweighted(inst)
        optima, _ = oracle_mod.opt_allnorm_enum(inst, (1, 2, 3, math.inf))
        out["opt_norms"] = {
            "1": optima[1], "2": optima[2], "3": optima[3], "inf": optima[math.inf]
        }
        out["ratios"] = {
            key: (lv.norm(p) / optima[p] if optima[p] else None)
            for key, p in (("1", 1), ("2", 2), ("3", 3), ("inf", math.inf))
        }
    except oracle_mod.EnumerationTooLarge:
        out["skipped"] = "instance too large for oracle enumeration"
    return out


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    if args.algo == "congest-unweighted" and not inst.is_unit_weight():
        raise ValueError(
            "congest-unweighted requires unit weights; normalize and use "
            "congest-weighted (or local-weighted) for weighted instances"
        )
    normalized = False
    if args.algo in ("seq", "congest-weighted", "local-weighted", "backup"):
        if not inst.is_normalized():
            inst = normalize_weights(inst)
            normalized = True
    if args.algo == "backup" and args.r is None:
        raise ValueError("backup requires --r")
    r = args.r if args.r is not None else 1

    report: dict = {
        "instance": instance_digest(inst),
        "algorithm": args.algo,
        "normalized": normalized,
    }
    start = time.perf_counter()
    trace = None
    if args.simulate:
        if args.algo == "seq":
            raise ValueError("seq is a sequential algorithm; nothing to simulate")
        model = ModelSpec(model=_SIM_MODEL[args.algo])
        result, trace = run_simulation(inst, _SIM_ID[args.algo], model, seed=args.seed, r=r)
    else:
        result = _run_algo(inst, args.algo, r)
    elapsed = time.perf_counter() - start

    lv = result.load_vector()
    report["loads"] = {str(s): v for s, v in sorted(lv.loads.items())}
    report["norms"] = _norms(lv, args.p or ())
    if isinstance(result, MultiAssignment):
        report["assignment"] = {str(c): list(ss) for c, ss in sorted(result.mapping.items())}
        report["r"] = r
    else:
        report["assignment"] = {str(c): s for c, s in sorted(result.mapping.items())}
    if args.oracle:
        report["oracle"] = _oracle_comparison(inst, args.algo, r, lv)
        ratios = report["oracle"].get("ratios", {})
        for val in ratios.values():
            if val is not None and val < 1 - 1e-9:
                raise AssertionError(f"solver beat the exact optimum: ratio {val}")
    if trace is not None:
        report["charged_rounds"] = trace.charged_rounds
        if args.trace_out:
            trace.write(args.trace_out)
    report["wall_time_s"] = round(elapsed, 6)

    if args.dump_matchings and args.algo in ("congest-unweighted", "seq"):
        _dump_matchings(inst, args.algo, args.dump_matchings)

    print(json.dumps(report, indent=1))
    return 0


def _dump_matchings(inst: Instance, algo: str, directory: str) -> None:
    import os

    os.makedirs(directory, exist_ok=True)
    if algo == "congest-unweighted":
        _, per_b = solve_unweighted(inst)
    else:
        _, per_b = split_assignment_seq(inst)
    for b, matching in per_b.items():
        doc = {
            "kappa": {str(c): matching.profile.kappa[c] for c in inst.clients},
            "tau": {str(s): matching.profile.tau[s] for s in inst.servers},
            "edge_cap": matching.profile.edge_cap
            if isinstance(matching.profile.edge_cap, (int, type(None)))
            else None,
            "mult": [[c, s, x] for (c, s), x in sorted(matching.mult.items())],
        }
        with open(os.path.join(directory, f"B{b}.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _load_matching_artifact(inst: Instance, doc: dict) -> CapMatching:
    kappa = {int(c): v for c, v in doc["kappa"].items()}
    tau = {int(s): v for s, v in doc["tau"].items()}
    profile = CapacityProfile(kappa, tau, doc.get("edge_cap"))
    mult = {(c, s): x for c, s, x in doc["mult"]}
    return CapMatching(inst, profile, mult)


def cmd_verify(args) -> int:
    inst = read_instance(args.instance)
    with open(args.artifact, encoding="utf-8") as fh:
        doc = json.load(fh)
    results = []
    ok = True
    for check in args.check:
        name, _, param = check.partition(":")
        entry: dict = {"check": check}
        try:
            if name == "validity":
                mapping = {int(c): s for c, s in doc["assignment"].items()}
                Assignment(inst, mapping)
                entry["pass"] = True
            elif name == "cost-reducing":
                mapping = {int(c): s for c, s in doc["assignment"].items()}
                path = oracle_mod.find_cost_reducing_path(inst, Assignment(inst, mapping))
                entry["pass"] = path is None
                if path is not None:
                    entry["witness"] = path
            elif name == "no-short-aug-paths":
                k = int(param)
                matching = _load_matching_artifact(inst, doc)
                verdict = oracle_mod.verify_no_short_aug_paths(inst, matching.profile, matching, k)
                entry["pass"] = verdict is True
                if verdict is not True:
                    entry["witness"] = verdict.vertices
            elif name == "expansion":
                alpha = float(param) if param else 2.0
                matching = _load_matching_artifact(inst, doc)
                base_tau = {s: math.ceil(t / alpha) for s, t in matching.profile.tau.items()}
                verdict = oracle_mod.verify_expansion_lemma(
                    inst, matching.profile.kappa, base_tau, alpha, matching
                )
                entry["pass"] = verdict is True
                if verdict is not True:
                    entry["witness_client"] = verdict.client
            elif name == "budget":
                model = ModelSpec(model="LOCAL" if doc["algorithm"] == "local-weighted"
                                  else "CONGEST")
                expected = round_budget(doc["algorithm"], doc["n"], model,
                                        n_expanded=doc.get("nExpanded"))
                from .simulate import SimTrace

                trace = SimTrace(doc["algorithm"], doc["n"], doc.get("nExpanded", doc["n"]),
                                 doc["chargedRounds"], doc["phases"], doc["simulatedMessages"])
                entry["pass"] = (doc["chargedRounds"] == expected
                                 and verify_message_budget(trace, model))
                entry["expected_rounds"] = expected
            else:
                raise ValueError(f"unknown check {name!r}")
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"artifact missing data for check {check!r}: {exc}") from exc
        ok = ok and entry["pass"]
        results.append(entry)
    print(json.dumps({"checks": results, "pass": ok}, indent=1))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _doubling_suite(lo: int, hi: int, seed: int) -> list[dict]:
    suite = []
    exp = lo
    while exp <= hi:
        n = 1 << exp
        suite.append(
            {
                "generator": "weighted-random",
                "params": {"n_clients": n // 2, "n_servers": n // 2, "p": min(1.0, 8 / n),
                           "max_weight": 4},
                "seed": seed,
                "algo": "seq",
            }
        )
        exp += 1
    return suite


def cmd_bench(args) -> int:
    if args.suite:
        with open(args.suite, encoding="utf-8") as fh:
            suite = json.load(fh)
    elif args.doubling:
        lo, hi = args.doubling
        suite = _doubling_suite(lo, hi, args.seed)
    else:
        suite = []
    rows = []
    for entry in suite:
        inst = generate_instance(entry["generator"], seed=entry.get("seed", 0),
                                 **entry.get("params", {}))
        algo = entry["algo"]
        work = normalize_weights(inst) if algo != "congest-unweighted" else inst
        start = time.perf_counter_ns()
        if entry.get("simulate"):
            model = ModelSpec(model=_SIM_MODEL[algo])
            result, trace = run_simulation(work, _SIM_ID[algo], model,
                                           seed=entry.get("seed", 0), r=entry.get("r", 2))
            charged = trace.charged_rounds
        else:
            result = _run_algo(work, algo, entry.get("r", 1))
            charged = ""
        elapsed = time.perf_counter_ns() - start
        lv = result.load_vector()
        ratio = ""
        if entry.get("oracle"):
            try:
                optima, _ = oracle_mod.opt_allnorm_enum(work, (math.inf,))
                ratio = lv.max() / optima[math.inf]
            except oracle_mod.EnumerationTooLarge:
                ratio = ""
        rows.append([work.n, work.m, algo, elapsed, lv.max(), ratio, charged])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "algo", "time_ns", "linf", "ratio", "charged_rounds"])
        writer.writerows(rows)
    print(json.dumps({"rows": len(rows), "out": args.out}))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semimatch")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("generator", choices=GENERATORS)
    gen.add_argument("--clients", type=int)
    gen.add_argument("--servers", type=int)
    gen.add_argument("--p", type=float)
    gen.add_argument("--k", type=int)
    gen.add_argument("--exponent", type=float)
    gen.add_argument("--max-weight", type=int, dest="max_weight")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out", required=True)
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="solve an instance")
    solve.add_argument("instance")
    solve.add_argument("--algo", choices=SOLVE_ALGOS, required=True)
    solve.add_argument("--r", type=int)
    solve.add_argument("--oracle", action="store_true")
    solve.add_argument("--simulate", action="store_true")
    solve.add_argument("--trace-out", dest="trace_out")
    solve.add_argument("--dump-matchings", dest="dump_matchings")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--p", type=float, action="append",
                       help="report an additional l_p norm")
    solve.set_defaults(func=cmd_solve)

    verify = sub.add_parser("verify", help="verify a solve/matching artifact")
    verify.add_argument("instance")
    verify.add_argument("artifact")
    verify.add_argument("--check", action="append", required=True,
                        help="validity | no-short-aug-paths:K | expansion:ALPHA | "
                             "cost-reducing | budget")
    verify.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="run a benchmark suite to CSV")
    bench.add_argument("--suite")
    bench.add_argument("--doubling", nargs=2, type=int, metavar=("LO", "HI"),
                       help="doubling series of the sequential solver, n = 2^LO .. 2^HI")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("-o", "--out", required=True)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(json.dumps({"error": "infeasible", "detail": str(exc),
                          "client": exc.client}), file=sys.stderr)
        return 2
    except (InstanceError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
