"""The ten acceptance criteria, each at its stated scale and time limit.

Every test records one PASS/FAIL line (shown in the terminal summary) and
then asserts.  Criteria 4, 7 and 8 name tiny spaces on which loss-based
statements are degenerate; they run there literally and, in addition, on
the smallest spaces where the statements have content.
"""

import random
import time
from fractions import Fraction
from itertools import combinations_with_replacement

import pytest

import oracles
from acceptance_report import record
from forcinglab import cichon, cli, creature, deltasys, fam, famlimit, params, probtree
from forcinglab.creature import Condition, CreatureSpace, norm_cmp


def finish(n, ok, detail):
    line = record(n, ok, detail)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. parameter tower


def test_criterion_1_parameter_tower():
    t0 = time.perf_counter()
    t = params.tower(4)
    exact = {("rho", 0): 2, ("pi", 0): 2, ("a", 0): 4, ("bigM", 0): 16, ("b", 0): 2, ("b", 1): 1024}
    problems = [k for k, v in exact.items() if t.value(*k).exact != v]
    for f, bits in (("pi", 160), ("a", 480), ("bigM", 960)):
        v = t.value(f, 1)
        if not (v.is_exact and v.exact == 2 ** bits):
            problems.append((f, 1))
    checks = params.verify_tower_identities(t)
    wanted = {(h, name) for h in range(5) for name in ("pi=b^(rho^h)", "pi>h^2")}
    wanted |= {(h, "a>pi^h") for h in range(1, 5)}
    have = {(c.h, c.identity) for c in checks if c.passed}
    missing = wanted - have
    elapsed = time.perf_counter() - t0
    ok = not problems and not missing and elapsed < 5
    finish(1, ok, f"exact values ok={not problems}, {len(wanted - missing)}/{len(wanted)} identities, "
                  f"{elapsed:.2f}s (<5s)")


# ---------------------------------------------------------------------------
# 2. counting lemma


def test_criterion_2_counting_lemma():
    t0 = time.perf_counter()
    rep = cli.suite_ramsey(1000, seed=2024)
    boundary = creature.removal_drop_ok(4, 4, 2, 3)
    flag_invalid = not CreatureSpace((4,) * 3, (4,) * 3).ed_valid(2)
    elapsed = time.perf_counter() - t0
    counts = rep["instances"]
    ok = (all(counts[i] == 1000 for i in "abcd") and not rep["violations"]
          and boundary is False and flag_invalid and elapsed < 60)
    finish(2, ok, f"{sum(counts.values())} instances, {len(rep['violations'])} violations, "
                  f"boundary counterexample (a=4, h=2) reproduced={boundary is False}, {elapsed:.1f}s (<60s)")


# ---------------------------------------------------------------------------
# 3. zeta


def test_criterion_3_zeta():
    bad = []
    for hs in range(2, 51):
        for h in range(hs, 201):
            z = famlimit.zeta_tilde(hs, h)
            if z != oracles.zeta_closed(hs, h) or not z < Fraction(1, hs):
                bad.append((hs, h))
    legal = 0
    for hs in range(2, 101):
        for m in range(2, hs + 1):
            ls = Fraction(1, m)
            if not ls > Fraction(3, hs):
                continue
            legal += 1
            # zeta increases to 1/hs, which is at most ls/3
            if not Fraction(1, hs) <= ls / 3:
                bad.append(("limit", hs, m))
            for h in (hs, hs + 1, hs + 7, 2 * hs, 400):
                if not famlimit.zeta_tilde(hs, h) < ls / 3:
                    bad.append(("loss", hs, m, h))
    finish(3, not bad, f"closed form on 49 stem heights x h<=200, {legal} legal (h*, loss) pairs, "
                       f"{len(bad)} failures")


# ---------------------------------------------------------------------------
# 4. step-1 and step-2 limits


def _declared_members(space, stem, loss_star):
    thr = 1 + loss_star
    return [c for c in creature.iter_conditions(space, stem_heights=[len(stem)])
            if c.stem == stem and all(c.norm_ok(t, thr) for t in c.above_stem())]


def _check_limits(space, pool, stem, loss_star, rng, n_families):
    """Sample families from pool, run build_qk and weighted_limit, return failure notes."""
    fails = []
    hs = len(stem)
    H = space.height
    for _ in range(n_families):
        sizes = [rng.randint(1, 4) for _ in range(rng.randint(1, 3))]
        part = famlimit.IntervalPartition.from_sizes(sizes)
        members = [rng.choice(pool) for _ in range(part.end)]
        f = famlimit.ConditionFamily(space, tuple(members), stem, loss_star, strict=False)
        qks = []
        for k in range(len(part)):
            q = famlimit.build_qk(f, part, k)
            qks.append(q)
            for t in q.above_stem():
                h = len(t)
                if not norm_cmp(space.succ_count[h], space.base[h], len(q.succ(t)),
                                1 + loss_star - Fraction(1, h), strict=True):
                    fails.append(("qk-norm", t))
            n = len(part.interval(k))
            z = famlimit.zeta_tilde(hs, H)
            for x in q.leaves():
                if len(x) == H and famlimit.branch_hit_count(x, f, part, k, q) < n * (1 - z):
                    fails.append(("hits", x))
        raw = [rng.randint(1, 9) for _ in qks]
        weighted = [(q, Fraction(r, sum(raw))) for q, r in zip(qks, raw)]
        lim = famlimit.weighted_limit(space, weighted)
        for t in lim.nodes:
            if len(t) > hs:
                parent = famlimit.node_weight(weighted, t[:-1])
                hp = len(t) - 1
                if not famlimit.node_weight(weighted, t) > parent * (1 - Fraction(1, hp * hp)):
                    fails.append(("weight", t))
        for t in lim.above_stem():
            h = len(t)
            if not norm_cmp(space.succ_count[h], space.base[h], len(lim.succ(t)),
                            1 + loss_star - Fraction(2, h)):
                fails.append(("limit-norm", t))
    return fails


def test_criterion_4_limits():
    t0 = time.perf_counter()
    rng = random.Random(4)
    loss_star = Fraction(1, 3)
    # the named scale: succ counts <= 6, height 4
    tiny = CreatureSpace((2, 2, 6, 6), (2, 2, 17, 730))
    fails = []
    tiny_pool = {}
    for stem in tiny.nodes_at(2):
        tiny_pool[stem] = _declared_members(tiny, stem, loss_star)
    for stem, pool in tiny_pool.items():
        fails += _check_limits(tiny, pool, stem, loss_star, rng, 50)
    # the smallest space where members can differ: 98..100 of 100 children kept at level 2
    comp = CreatureSpace((2, 2, 100, 2), (2, 2, 17, 730))
    stem = (0, 1)

    def member(drop):
        return Condition.from_succ(comp, lambda t: [stem[len(t)]] if len(t) < 2 else
                                   [i for i in range(comp.succ_count[len(t)]) if len(t) != 2 or i not in drop])

    comp_pool = [member(rng.sample(range(100), rng.randint(0, 2))) for _ in range(60)]
    fails += _check_limits(comp, comp_pool, stem, loss_star, rng, 200)
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 300
    finish(4, ok, f"200 families on the 6-successor space ({sum(len(p) for p in tiny_pool.values())} "
                  f"admissible members), 200 on the 100-successor companion, {len(fails)} failures, "
                  f"{elapsed:.1f}s (<300s)")


# ---------------------------------------------------------------------------
# 5. FAM approximation


def _random_assignment(rng):
    n = rng.randint(0, 4)
    L = rng.randint(1, 6)
    k_star = rng.randint(0, 10)
    cells = [tuple(bool(i >> j & 1) for j in range(n)) for i in range(2 ** n)]
    per_cell = L * 2 ** n + k_star + 1 + rng.randint(0, 5)
    W = per_cell * len(cells)
    order = list(range(W))
    rng.shuffle(order)
    sets = {f"A{j}": set() for j in range(n)}
    for ci, sig in enumerate(cells):
        for x in order[ci * per_cell:(ci + 1) * per_cell]:
            for j, inside in enumerate(sig):
                if inside:
                    sets[f"A{j}"].add(x)
    raw = [rng.randint(0, 30) for _ in cells]
    if not any(raw):
        raw[0] = 1
    weights = {sig: Fraction(r, sum(raw)) for sig, r in zip(cells, raw)}
    return fam.MeasureAssignment.from_sets(W, sets, weights), Fraction(1, L), k_star


def test_criterion_5_fam_approximation():
    t0 = time.perf_counter()
    rng = random.Random(5)
    bad = 0
    for _ in range(500):
        m, eps, k_star = _random_assignment(rng)
        w = fam.approximate_support(m, eps, k_star)
        xi = {k: m.xi(s) for k, s in m.sets.items()}
        err = oracles.support_error(m.sets, xi, w.u)
        if not (all(e < eps for e in err.values()) and len(w.u) <= fam.size_bound(len(m.sets), eps)
                and min(w.u) > k_star):
            bad += 1
    elapsed = time.perf_counter() - t0
    finish(5, bad == 0 and elapsed < 30, f"500 instances, {bad} failures, {elapsed:.2f}s (<30s)")


# ---------------------------------------------------------------------------
# 6. binomial machinery


def _random_tree(rng, depth, n_jobs, job_levels):
    if depth == 0:
        return []
    k = rng.randint(1, 3)
    raw = [rng.randint(1, 6) for _ in range(k)]
    return [(Fraction(r, sum(raw)), frozenset(j for j in range(n_jobs) if rng.random() < 0.6),
             _random_tree(rng, depth - 1, n_jobs, job_levels)) for r in raw]


def _to_node(tree):
    if not tree:
        return probtree.LEAF
    return probtree.ProbNode(tuple(probtree.Outcome(p, s, _to_node(sub)) for p, s, sub in tree))


def _min_success(tree, j, lv, level=0):
    if not tree:
        return Fraction(1)
    here = sum((p for p, s, _ in tree if j in s), Fraction(0)) if level in lv else Fraction(1)
    return min([here] + [_min_success(sub, j, lv, level + 1) for _, _, sub in tree])


def test_criterion_6_binomial_machinery():
    homog_bad = 0
    homog = 0
    for n in range(1, 13):
        for p in (Fraction(0), Fraction(1, 7), Fraction(1, 3), Fraction(1, 2), Fraction(5, 6), Fraction(1)):
            tree = probtree.homogeneous_tree(n, p)
            for t in range(n + 1):
                homog += 1
                m = probtree.bad_branch_measure(tree, [(range(n), t)])
                if m.per_job[0] != probtree.binom_cdf(t - 1, n, p):
                    homog_bad += 1
    rng = random.Random(6)
    dom_bad = 0
    for _ in range(500):
        depth = rng.randint(1, 5)
        n_jobs = rng.randint(1, 2)
        lvls = [frozenset(rng.sample(range(depth), rng.randint(1, depth))) for _ in range(n_jobs)]
        tree = _random_tree(rng, depth, n_jobs, lvls)
        jobs = [(lv, rng.randint(0, len(lv))) for lv in lvls]
        m = probtree.bad_branch_measure(_to_node(tree), jobs)
        per, anyb = oracles.bad_measure_nested(tree, jobs)
        if [m.per_job[j] for j in range(n_jobs)] != per or m.any_job != anyb:
            dom_bad += 1
        for j, (lv, t) in enumerate(jobs):
            if not m.per_job[j] <= probtree.binom_cdf(t - 1, len(lv), _min_success(tree, j, lv)):
                dom_bad += 1
    srng = random.Random(66)
    runs = [cli.scenario(srng) for _ in range(20)]
    scen_bad = sum(1 for r in runs if not (r["ok"] and r["good"] >= Fraction(1, 2)))
    kernels = {k: sum(r["kernels"][k] for r in runs) for k in ("random", "creature")}
    ok = homog_bad == 0 and dom_bad == 0 and scen_bad == 0 and all(kernels.values())
    finish(6, ok, f"{homog} homogeneous cases, 500 random trees, 20 scenarios "
                  f"(kernels {kernels['random']} random / {kernels['creature']} creature), "
                  f"{homog_bad + dom_bad + scen_bad} failures")


# ---------------------------------------------------------------------------
# 7. measure bound


def test_criterion_7_measure_bound():
    # literal tiny space: loss needs stem height >= 7, so nothing qualifies
    tiny = CreatureSpace((2, 2, 2, 2), (2, 2, 2, 2))
    tiny_all = list(creature.iter_conditions(tiny))
    tiny_with_loss = [c for c in tiny_all if creature.loss(c) is not None]
    # the smallest height with defined losses; every condition with a loss enumerated
    sc = (2,) * 7 + (400,)
    base = tuple(max(2, h * h + 1) for h in range(7)) + (50,)
    space = CreatureSpace(sc, base)
    sizes = space.allowed_sizes(7, Fraction(3, 2))
    checked = 0
    bad = 0
    for stem in space.nodes_at(7):
        prefix = frozenset(stem[:i] for i in range(8))
        for n in sizes:
            if n < 2:
                continue
            for drop in ([()] if n == 400 else [(i,) for i in range(400)] if n == 399 else []):
                kids = frozenset(stem + (i,) for i in range(400) if i not in drop)
                c = Condition(space, prefix | kids)
                ls = creature.loss(c)
                if ls is None:
                    bad += 1
                    continue
                checked += 1
                if creature.relative_count(c, 8) < 1 - ls / 2:
                    bad += 1
    # a condition just below the admissible sizes has no loss
    near = Condition(space, frozenset({(0,) * i for i in range(8)}) | {(0,) * 7 + (i,) for i in range(398)})
    below_ok = creature.loss(near) is None and set(sizes) == {399, 400}
    # full-depth stems carry loss 1/2 and have nothing above them
    for x in space.nodes_at(8):
        c = Condition(space, frozenset(x[:i] for i in range(9)))
        checked += creature.loss(c) == Fraction(1, 2)
    rep = cli.suite_measure(500, seed=7)
    ok = (not tiny_with_loss and bad == 0 and below_ok and checked == 128 * 401 + 128 * 400
          and rep["checked"] > 0 and not rep["violations"])
    finish(7, ok, f"tiny space: {len(tiny_all)} conditions, none with a loss; height-8 space: "
                  f"{checked} conditions with loss, {bad} failures; sampled: {rep['checked']} of 500 "
                  f"with loss, {len(rep['violations'])} violations")


# ---------------------------------------------------------------------------
# 8. linkedness


def test_criterion_8_linkedness():
    checked = 0
    fails = 0
    degenerate = True
    for sc, base in (((2, 2, 4, 4), (2, 2, 17, 730)), ((2, 2, 3, 4), (2, 2, 17, 730)),
                     ((4, 4, 4, 4), (2, 2, 17, 730))):
        space = CreatureSpace(sc, base)
        conds = list(creature.iter_conditions(space, stem_heights=[2, 3]))
        for loss_star in (Fraction(1, 2), Fraction(1, 3)):
            m = int(1 / loss_star)
            assert all(space.intersect_valid(h, m) for h in range(2, space.height))
            thr = 1 + loss_star
            groups = {}
            for c in conds:
                if all(c.norm_ok(t, thr) for t in c.above_stem()):
                    groups.setdefault(c.stem, []).append(c)
            for stem, group in groups.items():
                if 2 * len(stem) > space.height:
                    continue
                degenerate &= all(c == Condition.cone(space, stem) for c in group)
                for tup in combinations_with_replacement(group, m):
                    checked += 1
                    r = creature.common_refinement(list(tup), stem)
                    if r is None or not all(r.leq(c) for c in tup) or not creature.is_condition(r):
                        fails += 1
    rep = cli.suite_linked(200, seed=8)
    ok = fails == 0 and checked > 0 and not rep["violations"]
    finish(8, ok, f"exhaustive: {checked} tuples, {fails} failures "
                  f"({'only full cones admissible' if degenerate else 'nontrivial members'}); "
                  f"companion space: {rep['trials']} random triples, {len(rep['violations'])} failures")


# ---------------------------------------------------------------------------
# 9. Cichon checker


def test_criterion_9_cichon():
    fx = cichon.fixtures()
    fixture_bad = [k for k, v in fx.items() if cichon.check(v)]
    needed = {"left", "ten", "old-order", "step5", "step6", "step7", "step8", "step9"}
    mutation_bad = []
    for x, y in cichon.ARROWS:
        v = cichon.check(cichon.raise_above(fx["ten"], x, y))
        if cichon.arrow_name(x, y) not in v:
            mutation_bad.append((x, y))
    count = len(cichon.enumerate_two_valued())
    want = oracles.cichon_two_valued_count()
    ok = not fixture_bad and needed <= set(fx) and not mutation_bad and len(cichon.ARROWS) == 15 and count == want
    finish(9, ok, f"{len(fx)} fixtures pass, {15 - len(mutation_bad)}/15 mutations named, "
                  f"two-valued count {count} (oracle {want})")


# ---------------------------------------------------------------------------
# 10. Delta-systems


def test_criterion_10_delta_systems():
    rng = random.Random(10)
    labels = [("S3", "s", Fraction(1, 4)), ("S4", "t", Fraction(1, 2)), ("S0", 0), ("S0", 1)]
    invalid = 0
    for _ in range(500):
        k = rng.randint(1, 4)
        fam_ = []
        for _ in range(rng.randint(1, 12)):
            coords = tuple(sorted(rng.sample(range(12), k)))
            lab = labels[:1] if rng.random() < 0.7 else labels
            fam_.append(deltasys.LabeledSupport(coords, tuple(rng.choice(lab) for _ in coords)))
        ds = deltasys.extract_delta(fam_, 1)
        if ds is None or deltasys.validate(ds) or not oracles.is_delta_oracle(
                [(s.coords, s.labels) for s in ds.members]):
            invalid += 1
    sunflower_bad = []
    for k in (1, 2, 3):
        for m in (1, 2, 3):
            need = oracles.sunflower_threshold(k, m) + 1
            for trial in range(10):
                ground = rng.sample(range(60), k + 6)
                pool = [tuple(sorted(rng.sample(ground, k))) for _ in range(need * 4)]
                pool = list(dict.fromkeys(pool))[:need]
                if len(pool) < need:
                    continue
                ds = deltasys.extract_delta([deltasys.LabeledSupport(c, (labels[0],) * k) for c in pool], m)
                if ds is None or deltasys.validate(ds):
                    sunflower_bad.append((k, m, trial))
    uncovered = 0
    for _ in range(500):
        ncoords = rng.randint(1, 10)
        universe = {c: ["a", "b", "c"][: rng.randint(1, 3)] for c in range(ncoords)}
        partials = []
        for _ in range(rng.randint(0, 50)):
            dom = rng.sample(range(ncoords), rng.randint(1, ncoords))
            partials.append({c: rng.choice(universe[c]) for c in dom})
        cover = deltasys.guardrail_cover(partials, universe)
        uncovered += sum(1 for p in partials if not any(deltasys.extends(t, p) for t in cover))
    ok = invalid == 0 and not sunflower_bad and uncovered == 0
    finish(10, ok, f"500 extractions ({invalid} invalid), sunflower k,m<=3 ({len(sunflower_bad)} misses), "
                   f"500 covers ({uncovered} uncovered partials)")
