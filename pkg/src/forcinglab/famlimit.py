"""Limits of sequences of creature conditions along a fixed interval partition.

For a family (p_l) sharing stem and loss, build_qk collects the nodes kept by
most members of one interval I_k; weighted_limit merges the resulting q_k under
a finitely supported weight vector; strong_limit_witness searches a finite set
u of indices and a condition q' that realise the limit property.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import prod
from typing import Iterable, Mapping, Sequence

from .creature import (
    CapacityError,
    Condition,
    CreatureSpace,
    Node,
    common_refinement,
    loss,
    weighted_success_set,
)
from .fam import parse_rational


class EmptyLevelError(ValueError):
    pass


class NoWitness(LookupError):
    pass


class RefinementFailure(ValueError):
    pass


class BranchNotInQk(ValueError):
    pass


@dataclass(frozen=True)
class IntervalPartition:
    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 2 or b[0] != 0:
            raise ValueError("boundaries must start at 0 and describe at least one interval")
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing")

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> "IntervalPartition":
        b = [0]
        for s in sizes:
            b.append(b[-1] + s)
        return cls(tuple(b))

    def __len__(self) -> int:
        return len(self.boundaries) - 1

    def interval(self, k: int) -> range:
        if not 0 <= k < len(self):
            raise IndexError(f"interval {k} is outside the represented prefix")
        return range(self.boundaries[k], self.boundaries[k + 1])

    @property
    def end(self) -> int:
        return self.boundaries[-1]


@dataclass(frozen=True)
class ConditionFamily:
    """Conditions p_l for l in [offset, offset + len(members)) sharing (stem, loss).

    With strict=False the loss is only declared: members need the common
    stem and norms >= 1 + loss above it.  This admits small test spaces on
    which no condition has a defined loss.
    """

    space: CreatureSpace
    members: tuple
    stem_star: Node
    loss_star: Fraction
    offset: int = 0
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "stem_star", tuple(self.stem_star))
        object.__setattr__(self, "loss_star", parse_rational(self.loss_star))
        if len(self.stem_star) < 2:
            raise ValueError("stem height must be at least 2")
        if not 0 < self.loss_star < 1:
            raise ValueError("loss must lie in (0, 1)")
        thr = 1 + self.loss_star
        for i, c in enumerate(self.members):
            if c.space != self.space:
                raise ValueError(f"member {i} lives on another space")
            if c.stem != self.stem_star:
                raise ValueError(f"member {i} has stem {c.stem}")
            if self.strict:
                if loss(c) != self.loss_star:
                    raise ValueError(f"member {i} has loss {loss(c)}")
            elif not all(c.norm_ok(t, thr) for t in c.above_stem()):
                raise ValueError(f"member {i} has a norm below 1 + loss")

    @property
    def h_star(self) -> int:
        return len(self.stem_star)

    def member(self, l: int) -> Condition:
        i = l - self.offset
        if not 0 <= i < len(self.members):
            raise IndexError(f"member {l} not represented")
        return self.members[i]

    def covers(self, r: range) -> bool:
        return self.offset <= r.start and r.stop <= self.offset + len(self.members)

    def to_json(self) -> dict:
        ls = self.loss_star
        return {"stem": list(self.stem_star), "loss": f"{ls.numerator}/{ls.denominator}",
                "offset": self.offset, "strict": self.strict,
                "members": [c.to_json() for c in self.members]}

    @classmethod
    def from_json(cls, space: CreatureSpace, doc: dict) -> "ConditionFamily":
        return cls(space, tuple(Condition.from_json(space, m) for m in doc["members"]),
                   tuple(doc["stem"]), parse_rational(doc["loss"]),
                   int(doc.get("offset", 0)), bool(doc.get("strict", True)))


@dataclass(frozen=True)
class WeightVector:
    weights: Mapping[int, Fraction]

    def __post_init__(self):
        w = {int(k): parse_rational(v) for k, v in self.weights.items()}
        if any(v < 0 for v in w.values()):
            raise ValueError("negative weight")
        if sum(w.values()) != 1:
            raise ValueError("weights do not sum to 1")
        object.__setattr__(self, "weights", w)

    def of(self, ks: Iterable[int]) -> Fraction:
        return sum((self.weights.get(k, Fraction(0)) for k in set(ks)), Fraction(0))


# ---------------------------------------------------------------------------
# step 1


def zeta_tilde(h_star: int, h: int) -> Fraction:
    """1 - prod_{m=h_star}^{h-1} (1 - 1/m^2)."""
    if not 2 <= h_star <= h:
        raise ValueError("need 2 <= hStar <= h")
    p = Fraction(1)
    for m in range(h_star, h):
        p *= 1 - Fraction(1, m * m)
    return 1 - p


def _threshold_met(count: int, n: int, z: Fraction) -> bool:
    # count >= n(1 - z)
    return count >= n * (1 - z)


def build_qk(fam: ConditionFamily, part: IntervalPartition, k: int) -> Condition:
    """Keep t iff at least |I_k|(1 - zeta(|t|)) members of I_k keep t."""
    I = part.interval(k)
    if not fam.covers(I):
        raise ValueError(f"family does not index all of I_{k}")
    space = fam.space
    H = space.height
    hs = fam.h_star
    if H <= hs:
        raise CapacityError("truncation height must exceed the stem height")
    members = [fam.member(l).nodes for l in I]
    n = len(members)
    zeta = [Fraction(0)] * (H + 1)
    for h in range(hs, H + 1):
        zeta[h] = zeta_tilde(hs, h)

    def in_y(t: Node) -> bool:
        return _threshold_met(sum(1 for ns in members if t in ns), n, zeta[len(t)])

    s = fam.stem_star
    nodes = {s[:i] for i in range(hs + 1)}
    frontier = [s]
    while frontier:
        nxt = []
        for t in frontier:
            if len(t) == H:
                continue
            kids = [t + (i,) for i in range(space.succ_count[len(t)]) if in_y(t + (i,))]
            if not kids:
                raise EmptyLevelError(f"no successor of {t} survives in q_{k}")
            nodes.update(kids)
            nxt.extend(kids)
        frontier = nxt
    return Condition(space, frozenset(nodes))


def branch_hit_count(x: Node, fam: ConditionFamily, part: IntervalPartition, k: int,
                     qk: Condition | None = None) -> int:
    """Members of I_k containing the full branch x."""
    if len(x) != fam.space.height:
        raise ValueError("x must have full depth")
    qk = qk if qk is not None else build_qk(fam, part, k)
    if x not in qk.nodes:
        raise BranchNotInQk(f"{x} is not a branch of q_{k}")
    return sum(1 for l in part.interval(k) if x in fam.member(l).nodes)


def hits(x: Node, fam: ConditionFamily, part: IntervalPartition, k: int) -> int:
    return sum(1 for l in part.interval(k) if x in fam.member(l).nodes)


def a_qbar_contains(k: int, x: Node, fam: ConditionFamily, part: IntervalPartition) -> bool:
    """count >= |I_k|(1 - sqrt(loss*)), decided as (n - count)^2 <= n^2 loss*."""
    n = len(part.interval(k))
    c = hits(x, fam, part, k)
    ls = fam.loss_star
    return (n - c) ** 2 * ls.denominator <= n * n * ls.numerator


# ---------------------------------------------------------------------------
# step 2


def weighted_limit(space: CreatureSpace, qks: Sequence[tuple[Condition, Fraction]]) -> Condition:
    """Merge conditions with a common stem under weights summing to 1."""
    if not qks:
        raise ValueError("need at least one condition")
    conds = [c for c, _ in qks]
    ws = [parse_rational(w) for _, w in qks]
    if any(w < 0 for w in ws) or sum(ws) != 1:
        raise ValueError("weights must be nonnegative and sum to 1")
    stem = conds[0].stem
    if any(c.stem != stem for c in conds):
        raise ValueError("conditions do not share a stem")
    H = space.height
    nodes = {stem[:i] for i in range(len(stem) + 1)}
    frontier = [stem]
    while frontier:
        nxt = []
        for s in frontier:
            if len(s) == H:
                continue
            groups: dict[frozenset, Fraction] = {}
            for c, w in zip(conds, ws):
                if s in c.nodes and w > 0:
                    A = c.children[s]
                    groups[A] = groups.get(A, Fraction(0)) + w
            z = sum(groups.values(), Fraction(0))
            if z == 0:
                raise EmptyLevelError(f"node {s} has zero weight")
            sets = [(A, w / z) for A, w in sorted(groups.items(), key=lambda e: sorted(e[0]))]
            B = weighted_success_set(space, s, sets, max(len(s), 1))
            if not B:
                raise EmptyLevelError(f"no successor of {s} survives in the limit")
            for i in sorted(B):
                nodes.add(s + (i,))
                nxt.append(s + (i,))
        frontier = nxt
    return Condition(space, frozenset(nodes))


def node_weight(qks: Sequence[tuple[Condition, Fraction]], s: Node) -> Fraction:
    """Total weight of the q_k keeping s."""
    return sum((parse_rational(w) for c, w in qks if s in c.nodes), Fraction(0))


# ---------------------------------------------------------------------------
# step 3


@dataclass
class LimitWitness:
    u: frozenset
    q_prime: Condition
    node: Node
    z_sets: list
    block_errors: list
    averages: list
    block_bullet: bool
    average_bullet: bool
    facts: dict = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return self.block_bullet and self.average_bullet


def _check_blocks(blocks, K: int):
    seen: set[int] = set()
    total = Fraction(0)
    out = []
    for ks, w in blocks:
        ks = frozenset(ks)
        w = parse_rational(w)
        if w < 0:
            raise ValueError("negative block weight")
        if ks & seen:
            raise ValueError("blocks overlap")
        seen |= ks
        total += w
        out.append((ks, w))
    if seen != set(range(K)):
        raise ValueError(f"blocks must partition the window [0, {K})")
    if total != 1:
        raise ValueError("block weights do not sum to 1")
    return out


def strong_limit_witness(space: CreatureSpace, families: Sequence[ConditionFamily],
                         limits: Sequence[Condition], q: Condition, part: IntervalPartition,
                         blocks, eps, k_star: int, size_cap: int) -> LimitWitness | None:
    """Run Step 3 on a finite window of k.

    Returns None when no u of size <= size_cap satisfies both frequency
    bullets.  "q' forces p in G" is read as: the least branch of q' runs
    through p.
    """
    eps = parse_rational(eps)
    K = len(part)
    blocks = _check_blocks(blocks, K)
    j_star = len(families)
    if len(limits) != j_star:
        raise ValueError("one limit per family")
    for lim in limits:
        if not q.leq(lim):
            raise ValueError("q must refine every limit")
    H = space.height
    h = max(size_cap * j_star + 1, q.stem_height)
    if h > H:
        raise RefinementFailure(f"need a node of height {h} but the space has height {H}")
    s = min(t for t in q.nodes if len(t) == h)
    qks = [[build_qk(f, part, k) for k in range(K)] for f in families]
    zs = [frozenset(k for k in range(K) if s in qk[k].nodes) for qk in qks]
    losses = [f.loss_star for f in families]

    u = None
    pool = range(k_star + 1, K)
    for size in range(1, size_cap + 1):
        for cand in combinations(pool, size):
            cs = frozenset(cand)
            if any(abs(Fraction(len(B & cs), size) - w) > eps for B, w in blocks):
                continue
            if all(Fraction(len(z & cs), size) >= 1 - ls / 3 - eps for z, ls in zip(zs, losses)):
                u = cs
                break
        if u is not None:
            break
    if u is None:
        return None

    used = [qks[j][k] for j in range(j_star) for k in sorted(u & zs[j])]
    if used:
        if 2 * h > H:
            raise RefinementFailure(f"joining at height {h} needs space height {2 * h}")
        r = common_refinement([q] + used, s)
        if r is None:
            raise RefinementFailure("the q_k and q have no common refinement at s")
    else:
        r = q
    q_prime = _absorb(r, families, part, u)

    x = q_prime.branch()
    block_errors = [abs(Fraction(len(B & u), len(u)) - w) for B, w in blocks]
    averages = []
    for f in families:
        tot = Fraction(0)
        for k in u:
            I = part.interval(k)
            tot += Fraction(sum(1 for l in I if q_prime.leq(f.member(l))), len(I))
        averages.append(tot / len(u))
    return LimitWitness(
        u=u, q_prime=q_prime, node=s, z_sets=zs, block_errors=block_errors, averages=averages,
        block_bullet=all(e <= eps for e in block_errors),
        average_bullet=all(a >= 1 - ls - eps for a, ls in zip(averages, losses)),
        facts={"branch": x, "refined": bool(used)},
    )


def _absorb(r: Condition, families, part: IntervalPartition, u) -> Condition:
    """Strengthen r below every p_l (l in I_k, k in u) that its least branch runs through."""
    x = r.branch()
    ps = []
    for f in families:
        for k in sorted(u):
            for l in part.interval(k):
                p = f.member(l)
                if x in p.nodes and not r.leq(p):
                    ps.append(p)
    if not ps:
        return r
    try:
        joined = common_refinement([r] + ps, r.stem)
    except (CapacityError, ValueError):
        joined = None
    if joined is not None and all(joined.leq(p) for p in ps):
        return joined
    return Condition(r.space, frozenset(x[:i] for i in range(len(x) + 1)))
