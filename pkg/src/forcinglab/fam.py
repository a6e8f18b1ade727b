"""Finite traces of finitely additive measures and counting-measure approximations.

A MeasureAssignment only records what the constructions consume: a window
[0, W), some named subsets, and weights on the atoms of the set algebra they
generate.  It does not model that a real FAM vanishes on singletons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil
from typing import Iterable, Mapping, Sequence


class InfeasibleWindow(ValueError):
    pass


class NotUnitFraction(ValueError):
    pass


def parse_rational(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        raise TypeError("floats are not accepted as exact rationals")
    return Fraction(v)


@dataclass(frozen=True)
class MeasureAssignment:
    window: int
    sets: Mapping[str, frozenset]
    atoms: tuple  # ((frozenset, Fraction), ...)

    def __post_init__(self):
        sets = {k: frozenset(v) for k, v in self.sets.items()}
        atoms = tuple((frozenset(a), parse_rational(w)) for a, w in self.atoms)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "atoms", atoms)
        W = self.window
        for name, s in sets.items():
            if any(not 0 <= x < W for x in s):
                raise ValueError(f"set {name!r} leaves the window")
        seen: set[int] = set()
        sigs = set()
        for a, w in atoms:
            if not a:
                raise ValueError("empty atom")
            if w < 0:
                raise ValueError("negative atom weight")
            if a & seen:
                raise ValueError("atoms overlap")
            seen |= a
            sig = self._signature(a)
            if sig is None:
                raise ValueError(f"atom {sorted(a)[:5]}... is split by a named set")
            if sig in sigs:
                raise ValueError("two atoms lie in the same cell of the generated algebra")
            sigs.add(sig)
        if seen != set(range(W)):
            raise ValueError("atoms do not partition the window")
        if sum(w for _, w in atoms) != 1:
            raise ValueError("atom weights do not sum to 1")

    def _signature(self, a: frozenset):
        sig = []
        for name in sorted(self.sets):
            s = self.sets[name]
            inside = a <= s
            if not inside and a & s:
                return None
            sig.append(inside)
        return tuple(sig)

    @classmethod
    def from_sets(cls, window: int, sets: Mapping[str, Iterable[int]],
                  weight_of: Mapping[tuple, Fraction] | None = None) -> "MeasureAssignment":
        """Atoms computed from the sets; weight_of maps signatures to weights (uniform by default)."""
        sets = {k: frozenset(v) for k, v in sets.items()}
        names = sorted(sets)
        cells: dict[tuple, set] = {}
        for x in range(window):
            cells.setdefault(tuple(x in sets[n] for n in names), set()).add(x)
        if weight_of is None:
            atoms = [(frozenset(c), Fraction(len(c), window)) for c in cells.values()]
        else:
            atoms = [(frozenset(c), parse_rational(weight_of.get(sig, 0))) for sig, c in cells.items()]
        return cls(window, sets, tuple(atoms))

    @classmethod
    def from_json(cls, doc: dict) -> "MeasureAssignment":
        return cls(int(doc["window"]), {k: frozenset(v) for k, v in doc["sets"].items()},
                   tuple((frozenset(e["atom"]), parse_rational(e["w"])) for e in doc["atomWeights"]))

    def to_json(self) -> dict:
        return {"window": self.window,
                "sets": {k: sorted(v) for k, v in self.sets.items()},
                "atomWeights": [{"atom": sorted(a), "w": f"{w.numerator}/{w.denominator}"}
                                for a, w in self.atoms]}

    def xi(self, A: Iterable[int]) -> Fraction:
        """Weight of a union of atoms."""
        A = frozenset(A)
        total = Fraction(0)
        for a, w in self.atoms:
            if a <= A:
                total += w
            elif a & A:
                raise ValueError("set is not a union of atoms")
        return total

    def positive_atoms(self) -> list[tuple[frozenset, Fraction]]:
        return [(a, w) for a, w in self.atoms if w > 0]


@dataclass(frozen=True)
class SupportWitness:
    u: frozenset
    per_set_error: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"u": sorted(self.u),
                "perSetError": {k: f"{e.numerator}/{e.denominator}" for k, e in self.per_set_error.items()}}


def size_bound(n: int, eps) -> int:
    eps = parse_rational(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ceil(1 / eps) * 2 ** n


def round_to_total(weights: Sequence[Fraction], total: int,
                   tiebreak: Sequence | None = None) -> list[int]:
    """Integers l_i with |l_i - w_i*total| < 1 and sum total (largest remainder).

    Leftover units go to the largest fractional parts; ties prefer larger
    weight, then the smaller tiebreak key.
    """
    scaled = [w * total for w in weights]
    base = [s.numerator // s.denominator for s in scaled]
    left = total - sum(base)
    keys = tiebreak if tiebreak is not None else range(len(weights))
    order = sorted(range(len(weights)),
                   key=lambda i: (-(scaled[i] - base[i]), -weights[i], keys[i]))
    for i in order[:left]:
        base[i] += 1
    return base


def approximate_support(m: MeasureAssignment, eps, k_star: int) -> SupportWitness:
    """A set u above k_star whose counting measure tracks xi on every named set."""
    eps = parse_rational(eps)
    if eps <= 0 or eps.numerator != 1:
        raise NotUnitFraction(f"eps must be 1/L, got {eps}")
    L = eps.denominator
    D = L * 2 ** len(m.sets)
    pos = m.positive_atoms()
    ells = round_to_total([w for _, w in pos], D, [min(a) for a, _ in pos])
    u: set[int] = set()
    for (a, _), ell in zip(pos, ells):
        pts = sorted(x for x in a if x > k_star)[:ell]
        if len(pts) < ell:
            raise InfeasibleWindow(f"atom starting at {min(a)} has {len(pts)} points above {k_star}, needs {ell}")
        u.update(pts)
    if not u:
        raise InfeasibleWindow("empty support")
    n = len(u)
    err = {name: abs(Fraction(len(s & u), n) - m.xi(s)) for name, s in m.sets.items()}
    return SupportWitness(frozenset(u), err)


def intersection_violation(m: MeasureAssignment, candidates: Sequence[Iterable[int]]):
    """Smallest (atom, subfamily) whose intersection is empty, or None.

    Only positive atoms need checking: any positive union contains one.
    Subfamilies are tried by size, then in index order.
    """
    cands = [frozenset(c) for c in candidates]
    for a, _ in m.positive_atoms():
        full = a.intersection(*cands) if cands else a
        if full:
            continue
        for size in range(1, len(cands) + 1):
            for idx in combinations(range(len(cands)), size):
                if not a.intersection(*(cands[i] for i in idx)):
                    return a, idx
    return None


def check_intersection_hypothesis(m: MeasureAssignment, candidates: Sequence[Iterable[int]]) -> bool:
    return intersection_violation(m, candidates) is None


def check_average_hypothesis(m: MeasureAssignment, partition: Sequence[Iterable[int]],
                             seqs: Sequence[tuple[Sequence, object]], eps, k_star: int,
                             size_cap: int) -> SupportWitness | None:
    """First u (by size, then lexicographically) meeting both averaging bullets."""
    eps = parse_rational(eps)
    cells = [frozenset(c) for c in partition]
    xis = [m.xi(c) for c in cells]
    seqs = [([parse_rational(v) for v in a], parse_rational(b)) for a, b in seqs]
    for a, _ in seqs:
        if any(v < 0 for v in a):
            raise ValueError("sequences must be nonnegative")
    pool = list(range(k_star + 1, m.window))
    for size in range(1, size_cap + 1):
        for u in combinations(pool, size):
            us = frozenset(u)
            errs = [abs(Fraction(len(c & us), size) - x) for c, x in zip(cells, xis)]
            if any(e > eps for e in errs):
                continue
            if all(Fraction(sum(a[k] for k in u), size) >= b - eps for a, b in seqs):
                return SupportWitness(us, {f"cell{i}": e for i, e in enumerate(errs)})
    return None
