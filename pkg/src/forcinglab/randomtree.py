"""Clopen random-forcing conditions on the binary tree, and the bridge to creature trees."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import prod

from .creature import Condition, EnumerationInfeasible, DEFAULT_ENUM_CAP


def _common_prefix(words) -> str:
    it = iter(words)
    first = next(it)
    n = len(first)
    for w in it:
        k = 0
        while k < n and w[k] == first[k]:
            k += 1
        n = k
    return first[:n]


@dataclass(frozen=True)
class RandomCondition:
    """A nonempty union of depth-D cylinders, stored as the set of words."""

    depth: int
    words: frozenset

    def __post_init__(self):
        words = frozenset(self.words)
        object.__setattr__(self, "words", words)
        if not words:
            raise ValueError("a random condition needs at least one word")
        for w in words:
            if len(w) != self.depth or set(w) - {"0", "1"}:
                raise ValueError(f"word {w!r} is not a bit string of length {self.depth}")

    @classmethod
    def of(cls, *words: str) -> "RandomCondition":
        return cls(len(words[0]), frozenset(words))

    @classmethod
    def full(cls, depth: int) -> "RandomCondition":
        return cls(depth, frozenset(format(i, f"0{depth}b") if depth else "" for i in range(2 ** depth)))

    @classmethod
    def from_json(cls, doc: dict) -> "RandomCondition":
        return cls(int(doc["depth"]), frozenset(doc["words"]))

    def to_json(self) -> dict:
        return {"depth": self.depth, "words": sorted(self.words)}

    @property
    def stem(self) -> str:
        return _common_prefix(self.words)

    def redepth(self, depth: int) -> "RandomCondition":
        """Same clopen set written with longer words."""
        if depth < self.depth:
            raise ValueError("can only refine to a larger depth")
        ext = RandomCondition.full(depth - self.depth).words
        return RandomCondition(depth, frozenset(w + e for w in self.words for e in ext))


def leb(c: RandomCondition) -> Fraction:
    return Fraction(len(c.words), 2 ** c.depth)


def stem_measure(c: RandomCondition) -> Fraction:
    return Fraction(1, 2 ** len(c.stem))


def loss_random(c: RandomCondition) -> Fraction:
    """0 on a full cone; else 1/m for the largest m with Leb(c) > Leb([stem])(1 - 1/m).

    With ratio r = Leb(c)/Leb([stem]) < 1 the condition is 1/m > 1 - r,
    so m is the largest integer below 1/(1 - r).
    """
    r = leb(c) / stem_measure(c)
    if r == 1:
        return Fraction(0)
    inv = 1 / (1 - r)
    m = -(-inv.numerator // inv.denominator) - 1
    return Fraction(1, m)


def intersect(c1: RandomCondition, c2: RandomCondition) -> RandomCondition | None:
    d = max(c1.depth, c2.depth)
    w = c1.redepth(d).words & c2.redepth(d).words
    return RandomCondition(d, w) if w else None


@dataclass(frozen=True)
class MeasureSet:
    """Kept nodes at one level of a creature space with their product-measure weights."""

    depth: int
    weights: dict

    @property
    def measure(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def meets(self, other: "MeasureSet") -> bool:
        return bool(self.weights.keys() & other.weights.keys())


def from_creature(c: Condition, depth: int, cap: int = DEFAULT_ENUM_CAP) -> MeasureSet:
    """The clopen set of branches through c, cut at `depth`."""
    sp = c.space
    if depth > sp.height:
        raise ValueError("depth exceeds the space height")
    if sp.level_size(depth) > cap:
        raise EnumerationInfeasible(f"level {depth} has {sp.level_size(depth)} nodes")
    w = Fraction(1, prod(sp.succ_count[:depth]))
    return MeasureSet(depth, {t: w for t in c.level(depth)})
