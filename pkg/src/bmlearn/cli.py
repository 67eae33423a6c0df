"""Command line: ``bmlearn [global flags] <command> ...``.

Exit codes: 0 success, 1 a run or suite failed, 2 bad usage or input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from .boosting import SampleWeakLearner, bbm_boost, sq_bbm_boost, sq_bbm_params, BoostParams
from .core import ConceptClass, Distribution, ExampleStream, as_concept, loss
from .errors import BMLearnError
from .generators import GenSpec, generate
from .io import load_class, load_distribution, to_jsonable
from .memory import (
    EnumerationTester,
    IndexAdvanceLearner,
    StoreAllERM,
    run_stream,
)
from .oracle import ExactOracle, SamplingOracle
from .pipelines import enumeration_sq_learner, perturbed_distribution
from .reductions import exact_identify, pac_rejection_learn, properify, sq_rejection_learn, ReductionResult
from .schemas import CSV_COLUMNS
from .sqdim import ball_max_sqdim, sq_dim_exact, sq_dim_greedy

GEN_KINDS = ("parity", "sparse_parity", "threshold", "random")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- inputs


def resolve_class(spec: str) -> tuple[ConceptClass, Distribution | None]:
    if spec.split(":")[0] in GEN_KINDS and not Path(spec).exists():
        return generate(GenSpec.parse(spec))
    if not Path(spec).exists():
        raise UsageError(f"no such class file or generator: {spec}")
    return load_class(spec)


def resolve_dist(spec: str | None, cls: ConceptClass, default: Distribution | None) -> Distribution:
    if spec is None:
        return default if default is not None else Distribution.uniform(cls.domain_size)
    if spec == "uniform":
        return Distribution.uniform(cls.domain_size)
    if spec.startswith("perturb:"):
        # perturb:<mu>:<seed> -- seeded ratio perturbation of the class's default distribution
        _, mu, seed = spec.split(":")
        base = default if default is not None else Distribution.uniform(cls.domain_size)
        return perturbed_distribution(base, float(mu), int(seed))
    if not Path(spec).exists():
        raise UsageError(f"no such distribution file: {spec}")
    D = load_distribution(spec)
    if D.size != cls.domain_size:
        raise UsageError("distribution length differs from the class domain")
    return D


def _target(cls: ConceptClass, index: int | None, rng) -> tuple[int, np.ndarray]:
    i = int(rng.integers(len(cls))) if index is None else index
    if not 0 <= i < len(cls):
        raise UsageError(f"target index {i} out of range")
    return i, cls.matrix[i]


def _dimension(cls: ConceptClass, P: Distribution, seed) -> int:
    cap = _config.get_config().exact_cap
    return (sq_dim_exact(cls, P) if len(cls) <= cap else sq_dim_greedy(cls, P, seed)).dim


# ---------------------------------------------------------------- commands


def cmd_sqdim(args) -> tuple[dict, bool]:
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.dist, cls, dflt)
    if args.mu is not None:
        est = ball_max_sqdim(cls, P, args.mu, args.restarts, args.seed)
        out = est.to_dict()
        out["mode"] = "ball"
        return out, True
    w = sq_dim_exact(cls, P) if args.mode == "exact" else sq_dim_greedy(cls, P, args.seed)
    return {**w.to_dict(), "mode": args.mode}, True


def cmd_ball(args) -> tuple[dict, bool]:
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.dist, cls, dflt)
    est = ball_max_sqdim(cls, P, args.mu, args.restarts, args.seed)
    return {**est.to_dict(), "mode": "ball"}, True


def _aggregate(rows: list[dict], eps: float) -> dict:
    losses = [r["final_loss"] for r in rows if r["final_loss"] is not None]
    ok = sum(1 for v in losses if v <= eps)
    return {"trials": len(rows), "success_rate": ok / max(len(rows), 1),
            "median_final_loss": float(np.median(losses)) if losses else None,
            "median_rounds": float(np.median([r["rounds_used"] for r in rows]))}


def cmd_boost(args) -> tuple[dict, bool]:
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.dist, cls, dflt)
    d = args.d or _dimension(cls, P, args.seed)
    if args.gamma in (None, "auto"):
        params = sq_bbm_params(d, args.eps)
    else:
        params = BoostParams.auto(float(args.gamma), args.eps)
    rows = []
    for k in range(args.trials):
        seed = args.seed + k
        rng = np.random.default_rng(seed)
        ti, c = _target(cls, args.target, rng)
        res = bbm_boost(ExampleStream(P, c, rng), SampleWeakLearner(cls, 4 * d), params, rng)
        rows.append({"trial": k, "seed": seed, "target": ti, **res.to_dict()})
    agg = _aggregate(rows, args.eps)
    return {"params": params.to_dict(), "d": d, "trials": rows, "aggregates": agg}, True


def cmd_sqboost(args) -> tuple[dict, bool]:
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.dist, cls, dflt)
    rows = []
    for k in range(args.trials):
        seed = args.seed + k
        rng = np.random.default_rng(seed)
        ti, c = _target(cls, args.target, rng)
        if args.oracle == "exact":
            oracle = ExactOracle(c, P)
        else:
            oracle = SamplingOracle(c, P, fail_prob=args.fail_prob, seed=rng)
        res = sq_bbm_boost(oracle, cls, P, args.d, args.eps)
        row = {"trial": k, "seed": seed, "target": ti, **res.to_dict()}
        row["final_loss"] = loss(res.majority.as_concept(), c, P) if res.rounds_used else None
        rows.append(row)
    return {"d": args.d, "trials": rows, "aggregates": _aggregate(rows, args.eps)}, True


STRONG_LEARNERS = {
    "index_advance": lambda cls, eps: (IndexAdvanceLearner(cls), None),
    "enumeration": lambda cls, eps: (EnumerationTester(cls, eps), None),
    "store_all": lambda cls, eps: (StoreAllERM(cls, 64), 64),
}


def cmd_reduce(args) -> tuple[dict, bool]:
    rng = np.random.default_rng(args.seed)
    if args.kind == "identify":
        data = json.loads(Path(args.witness).read_text())
        H = ConceptClass(data["concepts"])
        Q = Distribution(data["probs"]) if data.get("probs") else Distribution.uniform(H.domain_size)
        h = as_concept(data["hypothesis"], H.domain_size)
        member, idx = exact_identify(h, H, Q, args.radius)
        res = ReductionResult(member, 0, None, None, True, {"index": idx})
        return res.to_dict(), True
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.P, cls, dflt)
    ti, c = _target(cls, args.target, rng)
    if args.kind == "properify":
        h = c.copy()
        flip = rng.permutation(P.size)[: args.flips]
        h[flip] *= -1
        res = properify(h, cls, P, args.eps, rng)
        out = res.to_dict()
        out["loss"] = None if res.output_hypothesis is None else loss(res.output_hypothesis, c, P)
        return out, res.success
    Q = resolve_dist(args.Q, cls, dflt)
    if args.kind == "pac":
        learner, cap = STRONG_LEARNERS[args.strong](cls, args.eps)
        m = args.m or cap or 200
        res = pac_rejection_learn(learner, P, Q, c, args.eps, m, rng_seed=args.seed)
    else:
        tau = args.tau or args.eps / 4
        res = sq_rejection_learn(enumeration_sq_learner(cls, tau), ExactOracle(c, Q), P, Q, args.eps)
        res.details["loss_Q"] = loss(res.output_hypothesis, c, Q)
    return res.to_dict(), res.success


LEARNERS = {
    "index_advance": lambda cls, args: IndexAdvanceLearner(cls),
    "enumeration": lambda cls, args: EnumerationTester(cls, args.eps),
    "store_all": lambda cls, args: StoreAllERM(cls, args.m),
}


def cmd_stream(args) -> tuple[dict, bool]:
    cls, dflt = resolve_class(args.cls)
    P = resolve_dist(args.dist, cls, dflt)
    rng = np.random.default_rng(args.seed)
    ti, c = _target(cls, args.target, rng)
    learner = LEARNERS[args.learner](cls, args)
    tr = run_stream(learner, P, c, args.m, rng, epsilon=args.eps)
    if args.trace:
        with open(args.trace, "w") as fh:
            for ev in tr.events:
                fh.write(json.dumps(to_jsonable(ev)) + "\n")
    return {**tr.to_dict(), "learner": learner.name, "target": ti}, True


def cmd_bench(args) -> tuple[dict, bool]:
    from .acceptance import run_suite

    report = run_suite(args.suite, None, write_constants=args.write_constants)
    for line in report.pop("lines", []):
        print(line, file=sys.stderr)
    return report, bool(report["passed"])


# ---------------------------------------------------------------- parser and output


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmlearn", description="SQ dimension, boosting and bounded-memory reductions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--config", help=f"constants file (default: ${_config.ENV_VAR} or the packaged one)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dist_flag="--dist"):
        sp.add_argument("--class", dest="cls", required=True, help="class file or generator spec, e.g. threshold:16")
        sp.add_argument(dist_flag, dest=dist_flag.strip("-"), help="distribution file, 'uniform' or perturb:<mu>:<seed>")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    s = sub.add_parser("sqdim", help="SQ dimension of a class")
    common(s)
    s.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    s.add_argument("--mu", type=float)
    s.add_argument("--restarts", type=int, default=10)
    s.set_defaults(func=cmd_sqdim)

    s = sub.add_parser("ball", help="heuristic max SQ dimension over a closeness ball")
    common(s)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--restarts", type=int, default=10)
    s.set_defaults(func=cmd_ball)

    s = sub.add_parser("boost", help="sample-based boost-by-majority")
    common(s)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--gamma", default="auto")
    s.add_argument("--d", type=int)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--target", type=int)
    s.set_defaults(func=cmd_boost)

    s = sub.add_parser("sqboost", help="boosting in the SQ model with simulated queries")
    common(s)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--oracle", choices=["exact", "sampling"], default="exact")
    s.add_argument("--fail-prob", type=float, default=1e-6)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--target", type=int)
    s.set_defaults(func=cmd_sqboost)

    s = sub.add_parser("reduce", help="PAC/SQ transfer, properify, exact identification")
    rs = s.add_subparsers(dest="kind", required=True)
    for kind in ("pac", "sq"):
        r = rs.add_parser(kind)
        r.add_argument("--class", dest="cls", required=True)
        r.add_argument("--P", help="distribution the strong learner is built for")
        r.add_argument("--Q", required=True, help="distribution examples come from")
        r.add_argument("--eps", type=float, required=True)
        r.add_argument("--target", type=int)
        if kind == "pac":
            r.add_argument("--strong", choices=sorted(STRONG_LEARNERS), default="index_advance")
            r.add_argument("--m", type=int)
        else:
            r.add_argument("--tau", type=float)
        r.set_defaults(func=cmd_reduce)
    r = rs.add_parser("properify")
    r.add_argument("--class", dest="cls", required=True)
    r.add_argument("--P", help="distribution")
    r.add_argument("--eps", type=float, required=True)
    r.add_argument("--flips", type=int, default=1, help="points of the target flipped to make the improper input")
    r.add_argument("--target", type=int)
    r.set_defaults(func=cmd_reduce)
    r = rs.add_parser("identify")
    r.add_argument("--witness", required=True, help="JSON with concepts, optional probs, and hypothesis")
    r.add_argument("--radius", type=float)
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("stream", help="run a built-in streaming learner")
    common(s)
    s.add_argument("--learner", choices=sorted(LEARNERS), default="index_advance")
    s.add_argument("--m", type=int, default=200)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--target", type=int)
    s.add_argument("--trace", help="write per-event JSON lines here")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("bench", help="run a suite")
    s.add_argument("--suite", choices=["acceptance", "smoke", "calibration"], default="smoke")
    s.add_argument("--write-constants", action="store_true", help="calibration: update the packaged constants")
    s.set_defaults(func=cmd_bench)
    return p


def to_csv(command: str, payload: dict) -> str:
    cols = CSV_COLUMNS.get(command)
    if command in ("boost", "sqboost"):
        rows = payload["trials"]
    elif command == "bench":
        rows = payload.get("criteria", [])
    else:
        rows = [payload]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(to_jsonable(v)) if isinstance(v, (list, dict)) else v
                    for k, v in to_jsonable(r).items()})
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.config:
        os.environ[_config.ENV_VAR] = args.config
    try:
        payload, ok = args.func(args)
    except (UsageError, BMLearnError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"bmlearn: error: {exc}", file=sys.stderr)
        return 2
    text = to_csv(args.command, payload) if args.format == "csv" else json.dumps(to_jsonable(payload), indent=2)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
