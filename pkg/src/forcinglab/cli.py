"""Command-line front end.

Every subcommand prints one report and exits 0 when all checks pass, 1 when
a property is violated or an assignment is inconsistent, and 2 on usage or
input errors.  Rationals are printed as reduced "p/q" strings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from fractions import Fraction
from math import isqrt
from typing import Any

from . import cichon, creature, deltasys, fam, famlimit, params, probtree
from .creature import Condition, CreatureSpace
from .randomtree import RandomCondition, loss_random

PRECISION_ENV = "FORCINGLAB_PRECISION"


class UsageError(Exception):
    pass


def rat(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _jsonable(obj: Any):
    if isinstance(obj, Fraction):
        return rat(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    return obj


def emit(report, out) -> None:
    out.write(json.dumps(_jsonable(report), indent=2, sort_keys=True, ensure_ascii=False))
    out.write("\n")


def load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


def default_precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return params.DEFAULT_PRECISION
    try:
        v = int(raw)
    except ValueError:
        raise UsageError(f"{PRECISION_ENV} must be an integer, got {raw!r}") from None
    if v < 8:
        raise UsageError(f"{PRECISION_ENV} must be at least 8")
    return v


def parse_rational_arg(s: str) -> Fraction:
    try:
        if "." in s or "e" in s.lower():
            raise ValueError
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {s!r}") from None


def parse_int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {s!r}") from None


# ---------------------------------------------------------------------------
# seeded suites


def suite_ramsey(trials: int, seed: int) -> dict:
    """Random instances of the four counting-lemma items on flag-valid spaces."""
    rng = random.Random(seed)
    counts = {"a": 0, "b": 0, "c": 0, "d": 0}
    violations: list[dict] = []
    for t in range(trials):
        # (a): norm >= 1 forces many survivors
        h = rng.randint(1, 6)
        a = rng.randint(h * h + 1, h * h + 200)
        M = rng.randint(2, 10 ** 6)
        lo = -(-M * (a - 1) // a)
        n = rng.randint(lo, M)
        while not creature.norm_cmp(M, a, n, 1):
            n += 1
        first, second = creature.count_bound_holds(M, a, h, n)
        counts["a"] += 1
        if not (first and second):
            violations.append({"item": "a", "M": M, "a": a, "h": h, "n": n})
        # (b): dropping one successor costs less than 1/h
        h = rng.randint(1, 8)
        a = rng.randint(2 ** h + 1, 2 ** h + 300)
        M = rng.randint(2, 10 ** 6)
        n = rng.randint(1, M - 1)
        counts["b"] += 1
        if not creature.removal_drop_ok(M, a, h, n):
            violations.append({"item": "b", "M": M, "a": a, "h": h, "n": n})
        # (c): intersecting j sets costs less than 1/h
        j = rng.randint(1, 5)
        h = rng.randint(1, 4)
        a = rng.randint(j ** h + 1, j ** h + 50)
        M = rng.randint(2, 3000)
        sets = []
        for _ in range(j):
            k = rng.randint(max(1, M - rng.randint(1, max(1, M // 3))), M - 1) if M > 1 else 1
            sets.append(rng.sample(range(M), k))
        x = min(creature.norm_floor(M, a, len(A), 1000) for A in sets)
        counts["c"] += 1
        if not creature.intersection_norm_ok(M, a, h, sets, x):
            violations.append({"item": "c", "M": M, "a": a, "h": h, "x": x})
        # (d): the weighted success set keeps norm > x - 1/h
        h = rng.randint(1, 3)
        a = rng.randint(h ** (2 * h) + 1, h ** (2 * h) + 60)
        M = rng.randint(2, 3000)
        sp = CreatureSpace((M,), (a,))
        k = rng.randint(1, 6)
        sets = [rng.sample(range(M), rng.randint(max(1, M - 1 - rng.randint(0, M // 4)), M - 1))
                for _ in range(k)]
        raw = [rng.randint(1, 20) for _ in range(k)]
        ws = [Fraction(r, sum(raw)) for r in raw]
        x = min(creature.norm_floor(M, a, len(A), 1000) for A in sets)
        counts["d"] += 1
        if not creature.weighted_norm_ok(sp, (), list(zip(sets, ws)), h, x):
            violations.append({"item": "d", "M": M, "a": a, "h": h, "x": x})
    return {"suite": "ramsey", "seed": seed, "trials": trials, "instances": counts,
            "violations": violations}


def companion_linked_space() -> CreatureSpace:
    """Small space with a nontrivial norm at level 2; intersectValid(h, 3) on levels >= 2."""
    return CreatureSpace((2, 2, 100, 2, 2), (2, 2, 17, 730, 730))


def suite_linked(trials: int, seed: int, space: CreatureSpace | None = None,
                 loss_star: Fraction = Fraction(1, 3)) -> dict:
    """m = floor(1/loss) random conditions with a common stem and norms >= 1 + loss have a refinement."""
    rng = random.Random(seed)
    sp = space or companion_linked_space()
    m = int(1 / loss_star)
    stem = (0, 1)
    failures = []
    for t in range(trials):
        conds = [creature.random_condition(sp, rng, stem, 1 + loss_star) for _ in range(m)]
        if not all(c.stem == stem for c in conds):
            continue
        r = creature.common_refinement(conds, stem)
        if r is None or not all(r.leq(c) for c in conds) or not creature.is_condition(r):
            failures.append({"trial": t})
    return {"suite": "linked", "seed": seed, "trials": trials, "m": m,
            "lossStar": loss_star, "violations": failures}


def measure_space() -> CreatureSpace:
    return CreatureSpace((2,) * 7 + (360, 3), tuple(max(2, h * h + 1) for h in range(9)))


def suite_measure(trials: int, seed: int, space: CreatureSpace | None = None) -> dict:
    """relative_count >= 1 - loss/2 on random conditions with defined loss."""
    rng = random.Random(seed)
    sp = space or measure_space()
    H = sp.height
    checked = 0
    violations = []
    for t in range(trials):
        hs = rng.randint(7, H - 1)
        stem = tuple(rng.randrange(sp.succ_count[h]) for h in range(hs))
        m = (hs - 1) // 3
        c = creature.random_condition(sp, rng, stem, 1 + Fraction(1, m))
        ls = creature.loss(c)
        if ls is None:
            continue
        checked += 1
        for h in range(c.stem_height + 1, H + 1):
            rc = creature.relative_count(c, h)
            if rc < 1 - ls / 2:
                violations.append({"trial": t, "h": h, "relativeCount": rc, "loss": ls})
    return {"suite": "measure", "seed": seed, "trials": trials, "checked": checked,
            "violations": violations}


def suite_loss(trials: int, seed: int, space: CreatureSpace | None = None) -> dict:
    """Whenever loss = 1/m is defined: loss < 1, loss > 3/h*, norms >= 1 + loss."""
    rng = random.Random(seed)
    sp = space or measure_space()
    violations = []
    checked = 0
    for t in range(trials):
        hs = rng.randint(1, sp.height - 1)
        stem = tuple(rng.randrange(sp.succ_count[h]) for h in range(hs))
        c = creature.random_condition(sp, rng, stem)
        ls = creature.loss(c)
        if ls is None:
            continue
        checked += 1
        ok = ls < 1 and ls > Fraction(3, c.stem_height) and all(c.norm_ok(n, 1 + ls) for n in c.above_stem())
        if not ok:
            violations.append({"trial": t, "loss": ls, "stemHeight": c.stem_height})
    return {"suite": "loss", "seed": seed, "trials": trials, "checked": checked,
            "violations": violations}


SCENARIO_SPACE = CreatureSpace((2, 16, 2, 2), (2, 3, 5, 9))


def random_clopen(rng: random.Random, stem: str, depth: int, loss_star: Fraction) -> RandomCondition:
    """A clopen set with the given stem and random loss at most loss_star."""
    cone = sorted(stem + w for w in RandomCondition.full(depth - len(stem)).words)
    half = len(cone) // 2
    while True:
        drop = rng.randint(0, max(0, int(len(cone) * loss_star)))
        gone = set(rng.sample(cone, drop))
        # keep one word on each side of the stem so the stem does not grow
        if cone[0] in gone or cone[half] in gone:
            continue
        c = RandomCondition(depth, frozenset(w for w in cone if w not in gone))
        if c.stem == stem and loss_random(c) <= loss_star:
            return c


def scenario_condition(rng: random.Random, stem: tuple, loss_star: Fraction) -> Condition:
    """A condition on the scenario space whose level-2 share is at least 1 - loss/2."""
    sp = SCENARIO_SPACE
    while True:
        c = creature.random_condition(sp, rng, stem, 1 + loss_star)
        if c.stem == stem and creature.relative_count(c, 2) >= 1 - loss_star / 2:
            return c


def scenario(rng: random.Random, bits: int = 64) -> dict:
    """find_k, then one tree level per (round, job) built by a step kernel, then the exact DP."""
    j_star = rng.randint(1, 3)
    losses = [Fraction(1, rng.randint(2, 16)) for _ in range(j_star)]
    part = famlimit.IntervalPartition.from_sizes(range(1, 80))
    k = probtree.find_k(part, losses, j_star, bits)
    n = len(part.interval(k))
    p_lows = [probtree.success_probs(ls, bits)[1] for ls in losses]
    levels = []
    job_levels: dict[int, list[int]] = {j: [] for j in range(j_star)}
    kernels = {"random": 0, "creature": 0}
    for _ in range(n):
        for j in range(j_star):
            # the creature kernel's space joins at most two conditions
            if j_star > 2 or rng.random() < 0.5:
                stem = "".join(rng.choice("01") for _ in range(rng.randint(0, 2)))
                r = random_clopen(rng, stem, 6, losses[j])
                outs = probtree.random_step([r], losses[j], j_star)
                kernels["random"] += 1
            else:
                r = scenario_condition(rng, (rng.randrange(2),), losses[j])
                outs = probtree.creature_step(SCENARIO_SPACE, [r], 2, j_star)
                kernels["creature"] += 1
            if probtree.step_success(outs, 0) < p_lows[j]:
                raise AssertionError("kernel success below the lower bound")
            job_levels[j].append(len(levels))
            merged: dict[bool, Fraction] = {}
            for o in outs:
                merged[o.success[0]] = merged.get(o.success[0], Fraction(0)) + o.prob
            levels.append([(pr, {j} if hit else set()) for hit, pr in sorted(merged.items())])
    tree = probtree.tree_from_levels(levels)
    thresholds = []
    for ls in losses:
        # bad for j: fewer than n(1 - sqrt(loss)) successes
        d = n * n * ls
        thresholds.append(n - isqrt(d.numerator // d.denominator))
    bad = probtree.bad_branch_measure(tree, [(job_levels[j], thresholds[j]) for j in range(j_star)])
    return {"jStar": j_star, "losses": losses, "k": k, "intervalSize": n, "kernels": kernels,
            "thresholds": thresholds, "badPerJob": bad.per_job, "badAny": bad.any_job,
            "good": 1 - bad.any_job, "ok": bad.any_job <= Fraction(1, 2)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_params(args, out) -> int:
    t = params.tower(args.hmax, args.exact_bits, args.precision)
    rows = list(t.records())
    checks = params.verify_tower_identities(t) if args.verify else []
    failed = [c for c in checks if not c.passed]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["h", "field", "exact", "log2lo", "log2hi", "logDepth"],
                           lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        out.write(buf.getvalue())
    else:
        report = {"records": rows}
        if args.verify:
            report["identities"] = [{"h": c.h, "identity": c.identity, "passed": c.passed,
                                     "method": c.method} for c in checks]
        emit(report, out)
    return 1 if failed else 0


def cmd_verify(args, out) -> int:
    space = CreatureSpace.from_json(load_json(args.space)) if args.space else None
    if args.suite == "ramsey":
        rep = suite_ramsey(args.trials, args.seed)
    elif args.suite == "linked":
        rep = suite_linked(args.trials, args.seed, space)
    elif args.suite == "measure":
        rep = suite_measure(args.trials, args.seed, space)
    else:
        rep = suite_loss(args.trials, args.seed, space)
    emit(rep, out)
    return 1 if rep["violations"] else 0


def _limit_inputs(doc):
    space = CreatureSpace.from_json(doc["space"])
    part = famlimit.IntervalPartition(tuple(doc["partition"]))
    fams = [famlimit.ConditionFamily.from_json(space, f) for f in doc.get("families", [])]
    return space, part, fams


def cmd_limit(args, out) -> int:
    doc = load_json(args.input)
    space, part, fams = _limit_inputs(doc)
    if args.action == "build-qk":
        f = fams[0]
        q = famlimit.build_qk(f, part, args.k)
        H = space.height
        z = famlimit.zeta_tilde(f.h_star, H)
        n = len(part.interval(args.k))
        bad = []
        for x in q.leaves():
            c = famlimit.branch_hit_count(x, f, part, args.k, q)
            if c < n * (1 - z):
                bad.append(list(x))
        emit({"qk": q.to_json(), "stem": list(q.stem), "branchViolations": bad}, out)
        return 1 if bad else 0
    if args.action == "weighted":
        ws = {int(k): Fraction(v) for k, v in doc["weights"].items()}
        f = fams[0]
        qks = [(famlimit.build_qk(f, part, k), w) for k, w in sorted(ws.items())]
        lim = famlimit.weighted_limit(space, qks)
        emit({"limit": lim.to_json(), "stem": list(lim.stem)}, out)
        return 0
    limits = [Condition.from_json(space, c) for c in doc["limits"]]
    q = Condition.from_json(space, doc["q"])
    blocks = [(set(b["ks"]), Fraction(b["w"])) for b in doc["blocks"]]
    w = famlimit.strong_limit_witness(space, fams, limits, q, part, blocks,
                                      Fraction(doc["eps"]), int(doc["kStar"]), int(doc["sizeCap"]))
    if w is None:
        emit({"witness": None}, out)
        return 1
    emit({"u": sorted(w.u), "qPrime": w.q_prime.to_json(), "node": list(w.node),
          "blockErrors": w.block_errors, "averages": w.averages,
          "blockBullet": w.block_bullet, "averageBullet": w.average_bullet}, out)
    return 0 if w.verified else 1


def cmd_probtree(args, out) -> int:
    if args.action == "cdf":
        out.write(rat(probtree.binom_cdf(args.l, args.n, args.p)) + "\n")
        return 0
    if args.action == "find-k":
        part = famlimit.IntervalPartition.from_sizes(args.sizes)
        try:
            k = probtree.find_k(part, args.loss, len(args.loss), args.precision)
        except probtree.PrefixExhausted as e:
            emit({"k": None, "error": str(e)}, out)
            return 1
        emit({"k": k, "intervalSize": len(part.interval(k))}, out)
        return 0
    rng = random.Random(args.seed)
    runs = [scenario(rng, args.precision) for _ in range(args.trials)]
    emit({"seed": args.seed, "scenarios": runs}, out)
    return 0 if all(r["ok"] for r in runs) else 1


def cmd_delta(args, out) -> int:
    doc = load_json(args.input)
    if args.action == "extract":
        family = [deltasys.LabeledSupport.from_json(d) for d in doc["family"]]
        ds = deltasys.extract_delta(family, int(doc.get("minSize", 2)))
        if ds is None:
            emit({"delta": None}, out)
            return 1
        errs = deltasys.validate(ds)
        emit({"delta": ds.to_json(), "problems": errs}, out)
        return 1 if errs else 0
    partials = [{int(k): v for k, v in p.items()} for p in doc["partials"]]
    universe = {int(k): v for k, v in doc.get("labels", {}).items()}
    cover = deltasys.guardrail_cover(partials, universe)
    missing = [i for i, p in enumerate(partials) if not any(deltasys.extends(t, p) for t in cover)]
    emit({"cover": cover, "uncovered": missing}, out)
    return 1 if missing else 0


def cmd_fam(args, out) -> int:
    doc = load_json(args.input)
    m = fam.MeasureAssignment.from_json(doc["assignment"])
    if args.action == "approx":
        eps = Fraction(doc["eps"])
        w = fam.approximate_support(m, eps, int(doc.get("kStar", 0)))
        ok = all(e < eps for e in w.per_set_error.values())
        emit({**w.to_json(), "ok": ok}, out)
        return 0 if ok else 1
    if "candidates" in doc:
        v = fam.intersection_violation(m, doc["candidates"])
        emit({"intersectionHypothesis": v is None,
              "violation": None if v is None else {"atom": sorted(v[0]), "subfamily": list(v[1])}}, out)
        return 0 if v is None else 1
    w = fam.check_average_hypothesis(m, doc["partition"], [(s["a"], s["b"]) for s in doc.get("seqs", [])],
                                     Fraction(doc["eps"]), int(doc.get("kStar", 0)), int(doc["sizeCap"]))
    emit({"witness": None if w is None else w.to_json()}, out)
    return 0 if w is not None else 1


def cmd_cichon(args, out) -> int:
    if args.action == "fixtures":
        fx = cichon.fixtures()
        rows = [{"name": k, "ranks": v, "violations": cichon.check(v)} for k, v in fx.items()]
        emit(rows, out)
        return 1 if any(r["violations"] for r in rows) else 0
    if args.action == "enumerate":
        rows = cichon.enumerate_two_valued()
        emit({"count": len(rows), "assignments": rows}, out)
        return 0
    if not args.file:
        raise UsageError("cichon check needs a JSON file")
    doc = load_json(args.file)
    if not isinstance(doc, dict):
        raise UsageError("expected a JSON object mapping entries to ranks")
    try:
        v = cichon.check(doc)
    except cichon.IncompleteAssignment as e:
        raise UsageError(str(e)) from None
    emit({"consistent": not v, "violations": v}, out)
    return 1 if v else 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    prec = default_precision()
    p = _Parser(prog="forcinglab", description="Exact checks for finite forcing combinatorics.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    pp = sub.add_parser("params", help="parameter tower")
    pp.add_argument("--hmax", type=int, default=2)
    pp.add_argument("--exact-bits", type=int, default=params.DEFAULT_EXACT_BITS)
    pp.add_argument("--precision", type=int, default=prec)
    pp.add_argument("--format", choices=("json", "csv"), default="json")
    pp.add_argument("--verify", action="store_true", help="also check the tower identities")
    pp.set_defaults(func=cmd_params)

    pv = sub.add_parser("verify", help="seeded property suites")
    pv.add_argument("suite", choices=("ramsey", "loss", "linked", "measure"))
    pv.add_argument("--trials", type=int, default=100)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--space", help="JSON space {height, succCount, base}")
    pv.set_defaults(func=cmd_verify)

    pl = sub.add_parser("limit", help="interval limits")
    pl.add_argument("action", choices=("build-qk", "weighted", "witness"))
    pl.add_argument("--input", required=True)
    pl.add_argument("--k", type=int, default=0)
    pl.set_defaults(func=cmd_limit)

    pt = sub.add_parser("probtree", help="binomial tails and the probability tree")
    pt.add_argument("action", choices=("cdf", "find-k", "simulate"))
    pt.add_argument("--l", type=int, default=0)
    pt.add_argument("--n", type=int, default=0)
    pt.add_argument("--p", type=parse_rational_arg, default=Fraction(1, 2))
    pt.add_argument("--sizes", type=parse_int_list, default=list(range(1, 40)))
    pt.add_argument("--loss", type=parse_rational_arg, action="append", default=[])
    pt.add_argument("--precision", type=int, default=prec)
    pt.add_argument("--trials", type=int, default=5)
    pt.add_argument("--seed", type=int, default=0)
    pt.set_defaults(func=cmd_probtree)

    pd = sub.add_parser("delta", help="Delta-systems and guardrail covers")
    pd.add_argument("action", choices=("extract", "cover"))
    pd.add_argument("--input", required=True)
    pd.set_defaults(func=cmd_delta)

    pf = sub.add_parser("fam", help="finite measure approximations")
    pf.add_argument("action", choices=("approx", "check"))
    pf.add_argument("--input", required=True)
    pf.set_defaults(func=cmd_fam)

    pc = sub.add_parser("cichon", help="Cichon diagram constraints")
    pc.add_argument("action", choices=("check", "enumerate", "fixtures"))
    pc.add_argument("file", nargs="?")
    pc.set_defaults(func=cmd_cichon)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as e:
        print(f"error: invalid input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
