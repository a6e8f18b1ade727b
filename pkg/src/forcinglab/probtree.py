"""Exact binomial tails and the finite probability tree of the ground-model argument.

Each level of the tree resolves one coordinate.  A node offers weighted
outcomes; an outcome succeeds for some of the jobs j.  A branch is bad for
j when it collects too few successes on j's levels.  Everything is exact
rational arithmetic; sqrt(2) and sqrt(loss) only enter through one-sided
dyadic bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, isqrt
from typing import Iterable, Mapping, Sequence

from .creature import (
    CapacityError,
    Condition,
    CreatureSpace,
    EnumerationInfeasible,
    common_refinement,
    DEFAULT_ENUM_CAP,
)
from .fam import parse_rational, round_to_total
from .famlimit import IntervalPartition
from .randomtree import RandomCondition, loss_random

DEFAULT_STATE_CAP = 1_000_000


class PrefixExhausted(LookupError):
    pass


class StateCapExceeded(RuntimeError):
    pass


class EmptyIntersection(ValueError):
    pass


# ---------------------------------------------------------------------------
# binomial tails


def binom_cdf(l: int, n: int, p) -> Fraction:
    """P(at most l successes in n trials with success probability p)."""
    p = parse_rational(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if l < 0:
        return Fraction(0)
    q = 1 - p
    return sum((comb(n, i) * p ** i * q ** (n - i) for i in range(min(l, n) + 1)), Fraction(0))


def _sqrt_floor(x: Fraction, bits: int) -> Fraction:
    """Largest multiple of 2^-bits that is <= sqrt(x)."""
    scaled = x * 4 ** bits
    return Fraction(isqrt(scaled.numerator // scaled.denominator), 2 ** bits)


def sqrt2_upper(bits: int) -> Fraction:
    return Fraction(isqrt(2 * 4 ** bits) + 1, 2 ** bits)


def success_probs(loss, bits: int) -> tuple[Fraction, Fraction]:
    """(upper bound on 1 - sqrt(loss), lower bound on 1 - (1+sqrt2)/2 * loss)."""
    loss = parse_rational(loss)
    if not 0 < loss <= Fraction(1, 2):
        raise ValueError("loss must lie in (0, 1/2]")
    p_prime_upper = 1 - _sqrt_floor(loss, bits)
    p_lower = 1 - (1 + sqrt2_upper(bits)) / 2 * loss
    return p_prime_upper, p_lower


def tail_ok(n: int, loss, j_star: int, bits: int) -> bool:
    pu, pl = success_probs(loss, bits)
    l = (n * pu).numerator // (n * pu).denominator
    return binom_cdf(l, n, pl) < Fraction(1, 2 * j_star)


def find_k(part: IntervalPartition, losses: Sequence, j_star: int, bits: int = 64) -> int:
    """Least k whose interval size makes every job's binomial tail < 1/(2 j*)."""
    if j_star != len(losses):
        raise ValueError("jStar must equal the number of jobs")
    for k in range(len(part)):
        n = len(part.interval(k))
        if all(tail_ok(n, ls, j_star, bits) for ls in losses):
            return k
    raise PrefixExhausted(f"no k < {len(part)} satisfies the tail bound")


# ---------------------------------------------------------------------------
# tree


@dataclass(frozen=True, eq=False)
class ProbNode:
    """A node; outcomes are (probability, jobs succeeding, child or None at a leaf)."""

    outcomes: tuple = ()

    def __post_init__(self):
        outs = tuple(Outcome(parse_rational(o.prob), frozenset(o.success), o.child)
                     if isinstance(o, Outcome) else
                     Outcome(parse_rational(o[0]), frozenset(o[1]), o[2] if len(o) > 2 else None)
                     for o in self.outcomes)
        object.__setattr__(self, "outcomes", outs)
        if outs:
            if any(o.prob < 0 for o in outs):
                raise ValueError("negative probability")
            if sum(o.prob for o in outs) != 1:
                raise ValueError("outcome probabilities do not sum to 1")

    @property
    def is_leaf(self) -> bool:
        return not self.outcomes


@dataclass(frozen=True, eq=False)
class Outcome:
    prob: Fraction
    success: frozenset
    child: ProbNode | None = None


LEAF = ProbNode(())


def node_from_json(doc, memo=None) -> ProbNode:
    if doc is None:
        return LEAF
    outs = []
    for o in doc.get("outcomes", []):
        child = node_from_json(o.get("child"))
        outs.append(Outcome(parse_rational(o["p"]), frozenset(o.get("success", [])), child))
    return ProbNode(tuple(outs))


def node_to_json(node: ProbNode) -> dict:
    return {"outcomes": [{"p": f"{o.prob.numerator}/{o.prob.denominator}",
                          "success": sorted(o.success),
                          **({"child": node_to_json(o.child)} if o.child and not o.child.is_leaf else {})}
                         for o in node.outcomes]}


def homogeneous_tree(n_levels: int, p, jobs_at_level: Sequence[Iterable] | None = None) -> ProbNode:
    """Each level succeeds for its jobs with probability p (shared subtrees)."""
    p = parse_rational(p)
    node = LEAF
    for lvl in reversed(range(n_levels)):
        js = frozenset(jobs_at_level[lvl]) if jobs_at_level is not None else frozenset({0})
        outs = []
        if p > 0:
            outs.append(Outcome(p, js, node))
        if p < 1:
            outs.append(Outcome(1 - p, frozenset(), node))
        node = ProbNode(tuple(outs))
    return node


def tree_from_levels(levels: Sequence[Sequence[tuple]]) -> ProbNode:
    """Stack per-level outcome lists (prob, successes); every node of a level is alike."""
    node = LEAF
    for outs in reversed(levels):
        node = ProbNode(tuple(Outcome(parse_rational(p), frozenset(s), node) for p, s in outs))
    return node


@dataclass
class BadMeasure:
    per_job: dict
    any_job: Fraction
    states: int = 0


def bad_branch_measure(tree: ProbNode, jobs: Sequence[tuple[Iterable[int], int]],
                       state_cap: int = DEFAULT_STATE_CAP) -> BadMeasure:
    """Probability that a random branch has fewer than threshold_j successes on job j's levels.

    jobs[j] = (levels of job j, threshold).  Counts are truncated at the
    threshold, so the state space stays small; shared subtrees are merged.
    """
    specs = [(frozenset(lv), int(t)) for lv, t in jobs]
    for lv, t in specs:
        if t > len(lv):
            raise ValueError("threshold exceeds the number of job levels")
    cur: dict[tuple, Fraction] = {(id(tree), (0,) * len(specs)): Fraction(1)}
    nodes = {id(tree): tree}
    level = 0
    finished: dict[tuple, Fraction] = {}
    peak = 1
    while cur:
        nxt: dict[tuple, Fraction] = {}
        for (nid, counts), pr in cur.items():
            node = nodes[nid]
            if node.is_leaf:
                finished[counts] = finished.get(counts, Fraction(0)) + pr
                continue
            for o in node.outcomes:
                if o.prob == 0:
                    continue
                c2 = tuple(min(c + 1, t) if (level in lv and j in o.success) else c
                           for j, (c, (lv, t)) in enumerate(zip(counts, specs)))
                child = o.child if o.child is not None else LEAF
                nodes[id(child)] = child
                key = (id(child), c2)
                nxt[key] = nxt.get(key, Fraction(0)) + pr * o.prob
        if len(nxt) > state_cap:
            raise StateCapExceeded(f"{len(nxt)} states at level {level + 1}")
        peak = max(peak, len(nxt))
        cur = nxt
        level += 1
    per_job = {j: sum((pr for c, pr in finished.items() if c[j] < t), Fraction(0))
               for j, (_, t) in enumerate(specs)}
    any_bad = sum((pr for c, pr in finished.items()
                   if any(c[j] < t for j, (_, t) in enumerate(specs))), Fraction(0))
    return BadMeasure(per_job, any_bad, peak)


# ---------------------------------------------------------------------------
# step kernels


@dataclass
class StepOutcome:
    prob: Fraction
    refined: object
    success: tuple


def _lt_sqrt2_times(d: Fraction, c: Fraction) -> bool:
    """d < (sqrt2 - 1) c for d >= 0, c > 0, i.e. (d + c)^2 < 2 c^2."""
    return (d + c) ** 2 < 2 * c * c


def random_step(conds: Sequence[RandomCondition], loss_star, j_star: int,
                rounding_denominator: int | None = None) -> list[StepOutcome]:
    """Split the stem cone into the positive atoms generated by the inputs."""
    if not conds:
        raise ValueError("need at least one condition")
    loss_star = parse_rational(loss_star)
    stems = {c.stem for c in conds}
    if len(stems) != 1:
        raise ValueError("conditions do not share a stem")
    stem = stems.pop()
    for i, c in enumerate(conds):
        if loss_random(c) > loss_star:
            raise ValueError(f"condition {i} has loss {loss_random(c)} > {loss_star}")
    D = max(c.depth for c in conds)
    sets = [c.redepth(D).words for c in conds]
    cone = RandomCondition.full(D - len(stem)).words
    universe = [stem + w for w in sorted(cone)]
    atoms: dict[tuple, list[str]] = {}
    for w in universe:
        atoms.setdefault(tuple(w in s for s in sets), []).append(w)
    total = len(universe)
    keys = sorted(atoms, reverse=True)
    exact = [Fraction(len(atoms[k]), total) for k in keys]
    if rounding_denominator is None:
        ys = exact
    else:
        ells = round_to_total(exact, rounding_denominator, [min(atoms[k]) for k in keys])
        ys = [Fraction(e, rounding_denominator) for e in ells]
        bound = loss_star / 2 / 2 ** j_star
        for y, l in zip(ys, exact):
            if not _lt_sqrt2_times(abs(y - l), bound):
                raise ValueError("rounding denominator too small for the error budget")
    return [StepOutcome(y, RandomCondition(D, frozenset(atoms[k])), k)
            for k, y in zip(keys, ys) if y > 0]


def random_success_bound_holds(outs: Sequence[StepOutcome], j: int, loss_star) -> bool:
    """sum of y_x over atoms inside conds[j] >= 1 - (1+sqrt2)/2 loss*, decided exactly."""
    loss_star = parse_rational(loss_star)
    s = sum((o.prob for o in outs if o.success[j]), Fraction(0))
    # s >= 1 - L/2 - sqrt2 L/2  <=>  sqrt2 L/2 >= 1 - L/2 - s
    lhs = 1 - loss_star / 2 - s
    if lhs <= 0:
        return True
    return 2 * (loss_star / 2) ** 2 >= lhs * lhs


def creature_step(space: CreatureSpace, conds: Sequence[Condition], h_hat: int, j_star: int,
                  cap: int = DEFAULT_ENUM_CAP) -> list[StepOutcome]:
    """One outcome per node of height h_hat above the common stem, uniformly weighted."""
    if not conds:
        raise ValueError("need at least one condition")
    stems = {c.stem for c in conds}
    if len(stems) != 1:
        raise ValueError("conditions do not share a stem")
    stem = stems.pop()
    H = space.height
    if not len(stem) <= h_hat:
        raise ValueError("h_hat must be at least the stem height")
    if H < 2 * h_hat:
        raise CapacityError(f"space height {H} < 2 * hHat = {2 * h_hat}")
    width = max(len(conds), j_star, 1)
    for h in range(h_hat, H):
        if not space.intersect_valid(h, width):
            raise CapacityError(f"a({h}) = {space.base[h]} does not exceed {width}^{h}")
    n = space.cone_size(len(stem), h_hat)
    if n > cap:
        raise EnumerationInfeasible(f"{n} nodes at height {h_hat}")
    pr = Fraction(1, n)
    out = []
    for x in space.nodes_at(h_hat, stem):
        hit = tuple(x in c.nodes for c in conds)
        chosen = [c for c, b in zip(conds, hit) if b]
        if chosen:
            r = common_refinement(chosen, x)
            if r is None:
                raise CapacityError(f"no common refinement at {x}")
        else:
            r = Condition.cone(space, x)
        out.append(StepOutcome(pr, r, hit))
    return out


def step_success(outs: Sequence[StepOutcome], j: int) -> Fraction:
    return sum((o.prob for o in outs if o.success[j]), Fraction(0))


def outcomes_to_node(outs: Sequence[StepOutcome], jobs: Sequence[int], child: ProbNode = LEAF) -> ProbNode:
    """A tree node whose outcome succeeds for jobs[i] when input i was hit."""
    return ProbNode(tuple(Outcome(o.prob, frozenset(j for j, b in zip(jobs, o.success) if b), child)
                          for o in outs))


def check_level_jobs(level_inputs: Sequence[tuple[int, object]]) -> None:
    """Reject a level where one job contributes more than one condition."""
    seen = set()
    for j, _ in level_inputs:
        if j in seen:
            raise ValueError(f"job {j} has more than one condition on this level")
        seen.add(j)
