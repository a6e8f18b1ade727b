"""Finite Delta-systems of labelled supports, their countable subsystems and guardrail covers.

A support is an increasing list of coordinates; each coordinate carries a
label: ("S0", token) or ("S3" | "S4", stem, loss).  A Delta-system is a
subfamily whose supports pairwise meet in one heart, and which look alike
position by position: same size, same place relative to each heart element,
same class, and (off S0) the same (stem, loss).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

CLASSES = ("S0", "S3", "S4")
PACKING_BUDGET = 200_000


class InvalidBeta(ValueError):
    pass


class TooFewMembers(ValueError):
    pass


def _label(raw) -> tuple:
    raw = tuple(raw)
    if not raw or raw[0] not in CLASSES:
        raise ValueError(f"bad label {raw!r}")
    if raw[0] == "S0":
        if len(raw) != 2:
            raise ValueError("S0 labels are (S0, token)")
        return ("S0", _freeze(raw[1]))
    if len(raw) != 3:
        raise ValueError("S3/S4 labels are (class, stem, loss)")
    return (raw[0], _freeze(raw[1]), Fraction(raw[2]))


def _freeze(x):
    if isinstance(x, list):
        return tuple(_freeze(v) for v in x)
    return x


@dataclass(frozen=True)
class LabeledSupport:
    coords: tuple
    labels: tuple

    def __post_init__(self):
        c = tuple(int(x) for x in self.coords)
        if any(a >= b for a, b in zip(c, c[1:])):
            raise ValueError("coords must be strictly increasing")
        labs = tuple(_label(l) for l in self.labels)
        if len(labs) != len(c):
            raise ValueError("one label per coordinate")
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "labels", labs)

    @property
    def size(self) -> int:
        return len(self.coords)

    def label_at(self, coord: int):
        return self.labels[self.coords.index(coord)]

    def signature(self) -> tuple:
        """Per-position class, and (stem, loss) off S0."""
        return tuple(l[0] if l[0] == "S0" else l for l in self.labels)

    def truncate(self, beta: int) -> "LabeledSupport":
        keep = [i for i, x in enumerate(self.coords) if x < beta]
        return LabeledSupport(tuple(self.coords[i] for i in keep), tuple(self.labels[i] for i in keep))

    @classmethod
    def from_json(cls, doc: dict) -> "LabeledSupport":
        return cls(tuple(doc["coords"]), tuple(tuple(l) for l in doc["labels"]))

    def to_json(self) -> dict:
        def enc(l):
            if l[0] == "S0":
                return list(l)
            return [l[0], l[1], f"{l[2].numerator}/{l[2].denominator}"]
        return {"coords": list(self.coords), "labels": [enc(l) for l in self.labels]}


def _pattern(s: LabeledSupport, heart: tuple) -> tuple:
    """Heart index, or number of heart elements below, per position."""
    out = []
    hs = set(heart)
    for x in s.coords:
        if x in hs:
            out.append(("H", heart.index(x)))
        else:
            out.append(("N", sum(1 for y in heart if y < x)))
    return tuple(out)


@dataclass(frozen=True)
class DeltaSystem:
    members: tuple
    heart: frozenset

    @property
    def m(self) -> int:
        return self.members[0].size if self.members else 0

    @property
    def heart_positions(self) -> frozenset:
        if not self.members:
            return frozenset()
        return frozenset(i for i, x in enumerate(self.members[0].coords) if x in self.heart)

    def to_json(self) -> dict:
        return {"heart": sorted(self.heart), "size": self.m,
                "heartPositions": sorted(self.heart_positions),
                "members": [s.to_json() for s in self.members]}


def validate(ds: DeltaSystem) -> list[str]:
    """Every way ds fails to be a Delta-system (empty list when valid)."""
    errs = []
    mem = ds.members
    if not mem:
        return ["no members"]
    heart = tuple(sorted(ds.heart))
    if len({s.size for s in mem}) != 1:
        errs.append("support sizes differ")
        return errs
    if len(mem) == 1:
        if not ds.heart <= set(mem[0].coords):
            errs.append("heart not inside the only member")
    for a, b in combinations(range(len(mem)), 2):
        inter = set(mem[a].coords) & set(mem[b].coords)
        if inter != set(ds.heart):
            errs.append(f"members {a},{b} meet in {sorted(inter)}, not the heart")
    pats = {_pattern(s, heart) for s in mem}
    if len(pats) != 1:
        errs.append("positions differ relative to the heart")
    if len({s.signature() for s in mem}) != 1:
        errs.append("classes or (stem, loss) differ by position")
    for x in heart:
        if len({s.label_at(x) for s in mem if x in s.coords}) > 1:
            errs.append(f"heart coordinate {x} carries different labels")
    return errs


def _max_packing(sets: Sequence[frozenset], budget: int = PACKING_BUDGET) -> list[int]:
    """Largest family of pairwise disjoint sets (indices, lexicographically first among optima)."""
    n = len(sets)
    conflict = [{j for j in range(n) if j != i and sets[i] & sets[j]} for i in range(n)]
    best: list[int] = []
    # greedy start gives a bound quickly
    chosen: list[int] = []
    for i in range(n):
        if not any(j in conflict[i] for j in chosen):
            chosen.append(i)
    best = chosen
    steps = 0

    def go(i: int, cur: list[int], blocked: set[int]):
        nonlocal best, steps
        steps += 1
        if steps > budget:
            return
        free = [j for j in range(i, n) if j not in blocked]
        if len(cur) + len(free) <= len(best):
            return
        if not free:
            if len(cur) > len(best):
                best = list(cur)
            return
        j = free[0]
        cur.append(j)
        go(j + 1, cur, blocked | conflict[j])
        cur.pop()
        go(j + 1, cur, blocked | {j})

    go(0, [], set())
    return sorted(best)


def extract_delta(family: Sequence[LabeledSupport], min_size: int) -> DeltaSystem | None:
    """Largest uniform Delta-subsystem (ties: smaller heart), or None below min_size."""
    family = list(family)
    if not family:
        return None
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(family):
        groups.setdefault((s.size, s.signature()), []).append(i)
    best: tuple | None = None  # (key, members, heart)
    for idxs in groups.values():
        hearts = {frozenset(family[idxs[0]].coords)}
        for a, b in combinations(idxs, 2):
            hearts.add(frozenset(family[a].coords) & frozenset(family[b].coords))
        for heart in sorted(hearts, key=lambda h: (len(h), sorted(h))):
            ht = tuple(sorted(heart))
            buckets: dict[tuple, list[int]] = {}
            for i in idxs:
                s = family[i]
                if not heart <= set(s.coords):
                    continue
                key = (_pattern(s, ht), tuple(s.label_at(x) for x in ht))
                buckets.setdefault(key, []).append(i)
            for bucket in buckets.values():
                petals = [frozenset(family[i].coords) - heart for i in bucket]
                pick = [bucket[j] for j in _max_packing(petals)]
                if len(pick) >= 2:
                    inter = frozenset.intersection(*(frozenset(family[i].coords) for i in pick))
                    if inter != heart:
                        continue
                elif frozenset(family[pick[0]].coords) != heart:
                    continue
                rank = (-len(pick), len(heart), sorted(heart), pick)
                if best is None or rank < best[0]:
                    best = (rank, pick, heart)
    if best is None or len(best[1]) < min_size:
        return None
    return DeltaSystem(tuple(family[i] for i in best[1]), best[2])


def countable_subsystem(ds: DeltaSystem) -> DeltaSystem:
    """Longest ordering in which every non-heart position strictly increases."""
    hp = ds.heart_positions
    free = [i for i in range(ds.m) if i not in hp]
    mem = sorted(ds.members, key=lambda s: tuple(s.coords[i] for i in free))
    if not free:
        out = mem
    else:
        n = len(mem)
        below = lambda a, b: all(mem[a].coords[i] < mem[b].coords[i] for i in free)
        length = [1] * n
        prev = [-1] * n
        for b in range(n):
            for a in range(b):
                if below(a, b) and length[a] + 1 > length[b]:
                    length[b], prev[b] = length[a] + 1, a
        end = max(range(n), key=lambda i: (length[i], -i))
        chain = []
        while end != -1:
            chain.append(end)
            end = prev[end]
        out = [mem[i] for i in reversed(chain)]
    if len(out) < 2:
        raise TooFewMembers("fewer than two members remain")
    return DeltaSystem(tuple(out), ds.heart)


def restrict(ds: DeltaSystem, beta: int) -> DeltaSystem:
    """Cut every member below beta; beta must be a heart element, max(heart)+1, or above everything."""
    top = max(ds.heart, default=-1)
    everything = max((s.coords[-1] for s in ds.members if s.coords), default=-1)
    if not (beta in ds.heart or beta == top + 1 or beta > everything):
        raise InvalidBeta(f"beta={beta} is not in the heart, max(heart)+1 or above all coordinates")
    return DeltaSystem(tuple(s.truncate(beta) for s in ds.members),
                       frozenset(x for x in ds.heart if x < beta))


# ---------------------------------------------------------------------------
# guardrails


Guardrail = Mapping[int, Hashable]


def compatible_maps(a: Guardrail, b: Guardrail) -> bool:
    return all(b[k] == v for k, v in a.items() if k in b)


def extends(total: Guardrail, partial: Guardrail) -> bool:
    return all(k in total and total[k] == v for k, v in partial.items())


def guardrail_cover(partials: Sequence[Guardrail],
                    label_universe: Mapping[int, Iterable]) -> list[dict]:
    """Total maps on the union of domains, each input extended by one of them.

    Inputs are merged greedily into the first compatible map; remaining
    coordinates get the least label available.
    """
    merged: list[dict] = []
    for p in partials:
        for m in merged:
            if compatible_maps(m, p):
                m.update(p)
                break
        else:
            merged.append(dict(p))
    domain = sorted({k for p in partials for k in p})
    out = []
    for m in merged:
        total = {}
        for k in domain:
            if k in m:
                total[k] = m[k]
            else:
                choices = sorted(label_universe.get(k, ()), key=repr)
                if not choices:
                    raise ValueError(f"no labels available for coordinate {k}")
                total[k] = choices[0]
        out.append(total)
    if not out and not partials:
        return []
    return out
