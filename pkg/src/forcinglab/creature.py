"""Finite creature spaces, condition trees and the norm calculus.

A space of height H fixes, for each level h < H, the number of successors
M(h) of a node and the norm base a(h).  The norm of keeping n of the M
successors is log_a(M / (M - n)), infinite when n = M.  Every comparison
of norms is reduced to a comparison of integer powers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product
from math import lcm, prod
from typing import Callable, Iterable, Iterator, Sequence

Node = tuple[int, ...]

DEFAULT_ENUM_CAP = 200_000


class EnumerationInfeasible(RuntimeError):
    pass


class WitnessNotCommon(ValueError):
    pass


class WouldEmpty(ValueError):
    pass


class CapacityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# norms


def log_ratio_cmp(num: int, den: int, base: int, r: Fraction) -> int:
    """Sign of log_base(num/den) - r, for positive integers num, den."""
    p, q = r.numerator, r.denominator
    if p >= 0:
        left, right = num ** q, base ** p * den ** q
    else:
        left, right = num ** q * base ** (-p), den ** q
    return (left > right) - (left < right)


def norm_cmp(bigM: int, base: int, n: int, threshold: Fraction | int, strict: bool = False) -> bool:
    """Decide mu(n) >= threshold (or > when strict), mu(n) = log_base(bigM/(bigM-n))."""
    if not 0 <= n <= bigM:
        raise ValueError("need 0 <= n <= bigM")
    if base < 2:
        raise ValueError("norm base must be >= 2")
    if n == bigM:
        return True
    s = log_ratio_cmp(bigM, bigM - n, base, Fraction(threshold))
    return s > 0 or (s == 0 and not strict)


def norm_diff_cmp(bigM: int, base: int, n1: int, n2: int, r: Fraction) -> int:
    """Sign of mu(n1) - mu(n2) - r on one level (infinite norms allowed)."""
    if n1 == bigM and n2 == bigM:
        return 0 if r == 0 else (-1 if r > 0 else 1)
    if n1 == bigM:
        return 1
    if n2 == bigM:
        return -1
    return log_ratio_cmp(bigM - n2, bigM - n1, base, Fraction(r))


def norm_float(bigM: int, base: int, n: int) -> float:
    """Floating-point norm, for reports only."""
    from math import log, inf
    return inf if n == bigM else log(bigM / (bigM - n), base)


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class CreatureSpace:
    succ_count: tuple[int, ...]
    base: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "succ_count", tuple(int(m) for m in self.succ_count))
        object.__setattr__(self, "base", tuple(int(a) for a in self.base))
        if len(self.succ_count) != len(self.base):
            raise ValueError("succCount and base must have the same length")
        if any(m < 2 for m in self.succ_count) or any(a < 2 for a in self.base):
            raise ValueError("successor counts and bases must be >= 2")

    @classmethod
    def from_json(cls, doc: dict) -> "CreatureSpace":
        sp = cls(tuple(doc["succCount"]), tuple(doc["base"]))
        if "height" in doc and doc["height"] != sp.height:
            raise ValueError("height does not match succCount length")
        return sp

    def to_json(self) -> dict:
        return {"height": self.height, "succCount": list(self.succ_count), "base": list(self.base)}

    @classmethod
    def uniform(cls, height: int, succ: int, base: int) -> "CreatureSpace":
        return cls((succ,) * height, (base,) * height)

    @property
    def height(self) -> int:
        return len(self.succ_count)

    # validity flags surfaced from the proofs' use of the giant parameters
    def ed_valid(self, h: int) -> bool:
        return self.base[h] > 2 ** h

    def intersect_valid(self, h: int, j: int) -> bool:
        return self.base[h] > j ** h

    def fubini_valid(self, h: int) -> bool:
        return self.base[h] > h ** (2 * h)

    def count_valid(self, h: int) -> bool:
        return self.base[h] > h * h

    def level_size(self, h: int) -> int:
        return prod(self.succ_count[:h])

    def cone_size(self, start: int, h: int) -> int:
        return prod(self.succ_count[start:h])

    def nodes_at(self, h: int, below: Node = ()) -> Iterator[Node]:
        for tail in product(*(range(m) for m in self.succ_count[len(below):h])):
            yield below + tail

    def norm_at_least(self, h: int, n: int, threshold: Fraction, strict: bool = False) -> bool:
        return norm_cmp(self.succ_count[h], self.base[h], n, threshold, strict)

    def allowed_sizes(self, h: int, threshold: Fraction | None) -> list[int]:
        """Successor-set sizes at level h whose norm reaches threshold (None: infinite)."""
        m = self.succ_count[h]
        if threshold is None:
            return [m]
        return [n for n in range(m + 1) if self.norm_at_least(h, n, threshold)]


def tower_space(height: int) -> CreatureSpace:
    """The space with M(h), a(h) from the parameter tower (height <= 2)."""
    from .params import tower
    if height > 2:
        raise EnumerationInfeasible("M(2) has no exact representation")
    t = tower(max(height - 1, 0))
    return CreatureSpace(tuple(t.bigM(h).exact for h in range(height)),
                         tuple(t.a(h).exact for h in range(height)))


# ---------------------------------------------------------------------------
# conditions


def _stem_threshold(h: int) -> Fraction | None:
    return None if h == 0 else 1 + Fraction(1, h)


@dataclass(frozen=True)
class Condition:
    """A downward-closed subtree of the full tree, given by its node set."""

    space: CreatureSpace
    nodes: frozenset

    def __post_init__(self):
        if not isinstance(self.nodes, frozenset):
            object.__setattr__(self, "nodes", frozenset(self.nodes))

    # construction -------------------------------------------------------
    @classmethod
    def full(cls, space: CreatureSpace) -> "Condition":
        return cls.cone(space, ())

    @classmethod
    def cone(cls, space: CreatureSpace, node: Node) -> "Condition":
        """Single branch up to node, everything above it."""
        nodes = {node[:i] for i in range(len(node) + 1)}
        for h in range(len(node) + 1, space.height + 1):
            nodes.update(space.nodes_at(h, node))
        return cls(space, frozenset(nodes))

    @classmethod
    def from_succ(cls, space: CreatureSpace, succ: Callable[[Node], Iterable[int]],
                  root: Node = ()) -> "Condition":
        """Grow the tree from root, asking succ for the kept child indices."""
        nodes = {root[:i] for i in range(len(root) + 1)}
        frontier = [root]
        while frontier:
            nxt = []
            for s in frontier:
                if len(s) == space.height:
                    continue
                for i in succ(s):
                    t = s + (i,)
                    nodes.add(t)
                    nxt.append(t)
            frontier = nxt
        c = cls(space, frozenset(nodes))
        c.validate()
        return c

    @classmethod
    def from_json(cls, space: CreatureSpace, doc) -> "Condition":
        nodes = doc["nodes"] if isinstance(doc, dict) else doc
        c = cls(space, frozenset(tuple(n) for n in nodes))
        c.validate()
        return c

    def to_json(self) -> list[list[int]]:
        return [list(n) for n in sorted(self.nodes, key=lambda n: (len(n), n))]

    def validate(self) -> None:
        H = self.space.height
        if () not in self.nodes:
            raise ValueError("condition must contain the root")
        for t in self.nodes:
            if len(t) > H or any(not 0 <= x < m for x, m in zip(t, self.space.succ_count)):
                raise ValueError(f"node {t} outside the space")
            if t and t[:-1] not in self.nodes:
                raise ValueError(f"node {t} has no parent")
        for t, kids in self.children.items():
            if len(t) < H and not kids:
                raise ValueError(f"node {t} has no successors")

    # structure ----------------------------------------------------------
    @cached_property
    def children(self) -> dict:
        out: dict[Node, set[int]] = {t: set() for t in self.nodes if len(t) < self.space.height}
        for t in self.nodes:
            if t:
                out[t[:-1]].add(t[-1])
        return {t: frozenset(v) for t, v in out.items()}

    def succ(self, t: Node) -> frozenset:
        return self.children[t]

    @cached_property
    def stem(self) -> Node:
        t: Node = ()
        while len(t) < self.space.height:
            kids = self.children[t]
            if len(kids) != 1:
                break
            t = t + (next(iter(kids)),)
        return t

    @property
    def stem_height(self) -> int:
        return len(self.stem)

    def level(self, h: int) -> list[Node]:
        return [t for t in self.nodes if len(t) == h]

    def leaves(self) -> list[Node]:
        return self.level(self.space.height)

    def above_stem(self) -> Iterator[Node]:
        hs, H = self.stem_height, self.space.height
        for t in self.nodes:
            if hs <= len(t) < H:
                yield t

    def norm_ok(self, t: Node, threshold: Fraction | None, strict: bool = False) -> bool:
        h = len(t)
        n = len(self.children[t])
        if threshold is None:
            return n == self.space.succ_count[h]
        return self.space.norm_at_least(h, n, threshold, strict)

    def leq(self, other: "Condition") -> bool:
        """self is stronger than other (as subtrees)."""
        return self.nodes <= other.nodes

    def branch(self) -> Node:
        """Lexicographically least full-depth branch."""
        t: Node = ()
        while len(t) < self.space.height:
            t = t + (min(self.children[t]),)
        return t


# ---------------------------------------------------------------------------
# predicates


def is_condition(c: Condition) -> bool:
    """Every node at or above the stem has norm >= 1 + 1/stem height."""
    thr = _stem_threshold(c.stem_height)
    return all(c.norm_ok(t, thr) for t in c.above_stem())


def loss(c: Condition) -> Fraction | None:
    """1/m for the largest m >= 2 with stem height > 3m and all norms >= 1 + 1/m."""
    m = (c.stem_height - 1) // 3
    if m < 2:
        return None
    thr = 1 + Fraction(1, m)
    if all(c.norm_ok(t, thr) for t in c.above_stem()):
        return Fraction(1, m)
    return None


def relative_count(c: Condition, h: int) -> Fraction:
    """Kept nodes at height h over all nodes of height h above the stem."""
    hs = c.stem_height
    if not hs < h <= c.space.height:
        raise ValueError("need stem height < h <= space height")
    kept = sum(1 for t in c.nodes if len(t) == h)
    return Fraction(kept, c.space.cone_size(hs, h))


# ---------------------------------------------------------------------------
# refinements


def common_refinement(conds: Sequence[Condition], witness: Node) -> Condition | None:
    """A condition below every input, grown from a common node.

    Intersect the inputs inside the cone of the witness (height h), prune
    dead ends and, from height 2h on, nodes whose surviving successors
    have norm below 1 + 1/(2h).  Then follow the lexicographically least
    branch x up to height 2h and keep everything of the pruned tree above
    x restricted to 2h.
    """
    if not conds:
        raise ValueError("need at least one condition")
    space = conds[0].space
    H = space.height
    h = len(witness)
    for c in conds:
        if c.space != space:
            raise ValueError("conditions live on different spaces")
        if witness not in c.nodes:
            raise WitnessNotCommon(f"witness {witness} not kept in every condition")
        if witness[:c.stem_height] != c.stem:
            raise WitnessNotCommon(f"witness {witness} lies below a stem")
    if 2 * h > H:
        raise CapacityError(f"space height {H} < 2*|witness| = {2 * h}")
    target = 2 * h
    thr = _stem_threshold(target)
    node_sets = [c.nodes for c in conds]

    def common(t: Node) -> bool:
        return all(t in ns for ns in node_sets)

    alive: dict[Node, frozenset] = {}

    def grow(t: Node) -> bool:
        ht = len(t)
        if ht == H:
            return True
        kids = frozenset(i for i in range(space.succ_count[ht])
                         if common(t + (i,)) and grow(t + (i,)))
        if not kids:
            return False
        if ht >= target:
            n = len(kids)
            if thr is None:
                if n != space.succ_count[ht]:
                    return False
            elif not space.norm_at_least(ht, n, thr):
                return False
        alive[t] = kids
        return True

    if not grow(witness):
        return None
    x = witness
    while len(x) < target:
        x = x + (min(alive[x]),)
    nodes = {x[:i] for i in range(len(x) + 1)}
    frontier = [x]
    while frontier:
        nxt = []
        for t in frontier:
            for i in alive.get(t, ()):
                nodes.add(t + (i,))
                nxt.append(t + (i,))
        frontier = nxt
    return Condition(space, frozenset(nodes))


def avoid_level(c: Condition, h: int, value: int) -> Condition:
    """Drop child `value` (and its subtree) at every kept node of height h."""
    if h < c.stem_height:
        raise ValueError("level must be at or above the stem")
    if h >= c.space.height:
        raise ValueError("no successors at the top level")
    removed = set()
    for t in c.level(h):
        kids = c.children[t]
        if value in kids:
            if len(kids) == 1:
                raise WouldEmpty(f"node {t} keeps only child {value}")
            removed.add(t + (value,))
    if not removed:
        return c
    nodes = frozenset(t for t in c.nodes if not (len(t) > h and t[:h + 1] in removed))
    return Condition(c.space, nodes)


def weighted_success_set(space: CreatureSpace, s: Node,
                         sets: Sequence[tuple[Iterable[int], Fraction]], h: int) -> frozenset:
    """{t : total weight of the sets containing t > 1 - 1/h^2}."""
    if h < 1:
        raise ValueError("need h >= 1")
    ws = [Fraction(w) for _, w in sets]
    if any(w < 0 for w in ws):
        raise ValueError("negative weight")
    total = sum(ws, Fraction(0))
    if total != 1:
        raise ValueError(f"weights sum to {total}, not 1")
    # integer masses over a common denominator
    D = lcm(*(w.denominator for w in ws)) if ws else 1
    mass: dict[int, int] = {}
    for (A, _), w in zip(sets, ws):
        n = w.numerator * (D // w.denominator)
        if n:
            for t in set(A):
                mass[t] = mass.get(t, 0) + n
    hh = h * h
    M = space.succ_count[len(s)]
    return frozenset(t for t, m in mass.items() if m * hh > D * (hh - 1) and 0 <= t < M)


@dataclass(frozen=True)
class LinkedPiece:
    """Conditions keeping `node` and having stem height <= height."""

    node: Node
    height: int

    def __call__(self, c: Condition) -> bool:
        return self.node in c.nodes and c.stem_height <= self.height


def linked_family(space: CreatureSpace, h: int, cap: int = DEFAULT_ENUM_CAP) -> list[LinkedPiece]:
    if h >= space.height:
        raise ValueError("need h < space height")
    if space.level_size(h) > cap:
        raise EnumerationInfeasible(f"level {h} has {space.level_size(h)} nodes")
    return [LinkedPiece(s, h) for s in space.nodes_at(h)]


# ---------------------------------------------------------------------------
# enumeration on tiny spaces


def iter_conditions(space: CreatureSpace, cap: int = DEFAULT_ENUM_CAP,
                    stem_heights: Iterable[int] | None = None) -> Iterator[Condition]:
    """Every condition of the space, grouped by stem.

    Raises EnumerationInfeasible once more than `cap` conditions would be
    produced for a single stem.
    """
    H = space.height
    heights = range(H + 1) if stem_heights is None else stem_heights
    for hs in heights:
        thr = _stem_threshold(hs)
        for stem in space.nodes_at(hs):
            if hs == H:
                yield Condition(space, frozenset(stem[:i] for i in range(H + 1)))
                continue
            trees = list(_subtrees(space, stem, thr, cap, at_stem=True))
            for tree in trees:
                yield Condition(space, frozenset(tree) | {stem[:i] for i in range(hs)})


def _subtrees(space: CreatureSpace, t: Node, thr, cap: int, at_stem: bool = False):
    h = len(t)
    if h == space.height:
        yield (t,)
        return
    sizes = [n for n in space.allowed_sizes(h, thr) if n >= (2 if at_stem else 1)]
    count = 0
    for n in sizes:
        for kids in combinations(range(space.succ_count[h]), n):
            options = [list(_subtrees(space, t + (i,), thr, cap)) for i in kids]
            total = prod(len(o) for o in options)
            count += total
            if count > cap:
                raise EnumerationInfeasible(f"more than {cap} subtrees above {t}")
            for choice in product(*options):
                out = [t]
                for part in choice:
                    out.extend(part)
                yield tuple(out)


def common_extension(c1: Condition, c2: Condition) -> Condition | None:
    """A condition below both, searched from common nodes above both stems.

    Nodes low enough for common_refinement are tried first (least height,
    then lexicographically); otherwise the least shared branch, which is a
    condition on its own, is returned.
    """
    low = max(c1.stem_height, c2.stem_height)
    H = c1.space.height
    for h in range(low, H // 2 + 1):
        for s in sorted(t for t in c1.nodes if len(t) == h and t in c2.nodes):
            if s[:c1.stem_height] != c1.stem or s[:c2.stem_height] != c2.stem:
                continue
            r = common_refinement([c1, c2], s)
            if r is not None:
                return r
    shared = sorted(t for t in c1.nodes if len(t) == H and t in c2.nodes)
    if not shared:
        return None
    x = shared[0]
    return Condition(c1.space, frozenset(x[:i] for i in range(H + 1)))


def compatible(c1: Condition, c2: Condition) -> bool:
    return common_extension(c1, c2) is not None


# ---------------------------------------------------------------------------
# counting lemma, executable form


def count_bound_holds(bigM: int, base: int, h: int, n: int) -> tuple[bool, bool | None]:
    """For mu(n) >= 1: (n >= M(1 - 1/a), n >= M(1 - 1/h^2) when a > h^2 else None)."""
    if not norm_cmp(bigM, base, n, 1):
        raise ValueError("item (a) needs norm >= 1")
    first = n * base >= bigM * (base - 1)
    second = n * h * h >= bigM * (h * h - 1) if base > h * h else None
    return first, second


def removal_drop_ok(bigM: int, base: int, h: int, n: int) -> bool:
    """mu(n-1) > mu(n) - 1/h for a proper set of size n >= 1."""
    if not 1 <= n < bigM:
        raise ValueError("need a proper nonempty set")
    return norm_diff_cmp(bigM, base, n, n - 1, Fraction(1, h)) < 0


def intersection_norm_ok(bigM: int, base: int, h: int, sets: Sequence[Iterable[int]], x: Fraction) -> bool:
    """mu(intersection of sets) > x - 1/h."""
    common = set.intersection(*(set(A) for A in sets))
    return norm_cmp(bigM, base, len(common), Fraction(x) - Fraction(1, h), strict=True)


def weighted_norm_ok(space: CreatureSpace, s: Node, sets, h: int, x: Fraction) -> bool:
    """mu(weighted_success_set) > x - 1/h."""
    B = weighted_success_set(space, s, sets, h)
    lvl = len(s)
    return space.norm_at_least(lvl, len(B), Fraction(x) - Fraction(1, h), strict=True)


def norm_floor(bigM: int, base: int, n: int, denom: int) -> Fraction:
    """Largest p/denom <= mu(n) (mu finite)."""
    if n >= bigM:
        raise ValueError("norm is infinite")
    lo, hi = 0, 1
    while norm_cmp(bigM, base, n, Fraction(hi, denom)):
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if norm_cmp(bigM, base, n, Fraction(mid, denom)):
            lo = mid
        else:
            hi = mid
    return Fraction(lo, denom)


def random_condition(space: CreatureSpace, rng, stem: Node,
                     threshold: Fraction | None = None) -> Condition:
    """A random condition with the given stem and norms >= threshold above it.

    The default threshold is 1 + 1/|stem|.  Successor-set sizes are drawn
    uniformly among the admissible ones; the stem node keeps at least two.
    """
    hs, H = len(stem), space.height
    thr = threshold if threshold is not None else _stem_threshold(hs)
    sizes = {h: space.allowed_sizes(h, thr) for h in range(hs, H)}

    def succ(t: Node):
        h = len(t)
        if h < hs:
            return [stem[h]]
        opts = [n for n in sizes[h] if n >= (2 if h == hs else 1)]
        if not opts:
            raise ValueError(f"no admissible successor set at level {h}")
        n = rng.choice(opts)
        return sorted(rng.sample(range(space.succ_count[h]), n))

    return Condition.from_succ(space, succ)
