"""Parameter tower rho, pi, a, M, b with exact and certified-interval values.

Small levels are exact integers.  Larger values are carried as iterated
base-2 logarithm enclosures: a ``LogBound`` of depth d certifies
``lo <= log2^(d)(v) <= hi`` (depth 1 is an ordinary log2 range).  All
interval endpoints are rationals rounded outward to a dyadic grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, ceil
from typing import Iterator

from mpmath.ctx_iv import MPIntervalContext
from mpmath.libmp import to_rational

DEFAULT_EXACT_BITS = 1 << 20
DEFAULT_PRECISION = 64
REFINEMENT_BUDGET = 256
MAX_HEIGHT = 8
# depth-0 interval endpoints above 2**LOWER_LIMIT are kept one log deeper
LOWER_LIMIT = 4096
MAX_MAGNITUDE_BITS = 1 << 16
MAX_LOG_DEPTH = 10

FIELDS = ("levelCount", "rho", "b", "pi", "a", "bigM")


class RepresentationOverflow(ArithmeticError):
    pass


class InconclusiveInterval(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# certified elementary functions on rationals


def _ctx(bits: int) -> MPIntervalContext:
    c = MPIntervalContext()
    c.prec = bits
    return c


def _iv(c: MPIntervalContext, x: Fraction):
    return c.mpf(x.numerator) / c.mpf(x.denominator)


def _endpoints(v) -> tuple[Fraction, Fraction]:
    a, b = v._mpi_
    return Fraction(*to_rational(a)), Fraction(*to_rational(b))


def _round_out(lo: Fraction, hi: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    scale = 1 << prec
    return (Fraction(floor(lo * scale), scale), Fraction(ceil(hi * scale), scale))


def _bits(x: Fraction) -> int:
    return max(abs(x.numerator).bit_length(), x.denominator.bit_length())


def log2_interval(lo: Fraction, hi: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    """Outward enclosure of [log2 lo, log2 hi] for 0 < lo <= hi."""
    if lo <= 0:
        raise ValueError("log2 of a non-positive interval")
    exact = []
    for x in (lo, hi):
        n, d = x.numerator, x.denominator
        if n & (n - 1) == 0 and d & (d - 1) == 0:
            exact.append(Fraction(n.bit_length() - d.bit_length()))
        else:
            exact.append(None)
    if exact[0] is not None and exact[1] is not None:
        return exact[0], exact[1]
    c = _ctx(max(_bits(lo), _bits(hi)) + prec + 64)
    ln2 = c.log(2)
    a, _ = _endpoints(c.log(_iv(c, lo)) / ln2)
    _, b = _endpoints(c.log(_iv(c, hi)) / ln2)
    if exact[0] is not None:
        a = exact[0]
    if exact[1] is not None:
        b = exact[1]
    return _round_out(a, b, prec)


def exp2_interval(lo: Fraction, hi: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    """Outward enclosure of [2**lo, 2**hi]."""
    if lo == hi and lo.denominator == 1:
        v = Fraction(2) ** int(lo)
        return v, v
    c = _ctx(max(int(ceil(abs(hi))), 1) + max(_bits(lo), _bits(hi)) + prec + 64)
    a, _ = _endpoints(c.mpf(2) ** _iv(c, lo))
    _, b = _endpoints(c.mpf(2) ** _iv(c, hi))
    return _round_out(a, b, prec)


# ---------------------------------------------------------------------------
# iterated-log enclosures


@dataclass(frozen=True)
class LogBound:
    """Enclosure lo <= log2^(depth)(v) <= hi of a positive value v."""

    depth: int
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty enclosure")
        if self.depth > MAX_LOG_DEPTH:
            raise RepresentationOverflow(f"log depth {self.depth} exceeds {MAX_LOG_DEPTH}")
        if self.depth == 0 and _bits(self.hi) > MAX_MAGNITUDE_BITS:
            raise RepresentationOverflow("interval endpoint exceeds magnitude bound")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def intersect(self, other: "LogBound") -> "LogBound":
        if other.depth != self.depth:
            return self
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ArithmeticError("disjoint enclosures of the same value")
        return LogBound(self.depth, lo, hi)


def exact(v: int | Fraction) -> LogBound:
    v = Fraction(v)
    return LogBound(0, v, v)


def lb_log2(x: LogBound, prec: int) -> LogBound:
    if x.depth >= 1:
        return LogBound(x.depth - 1, x.lo, x.hi)
    return LogBound(0, *log2_interval(x.lo, x.hi, prec))


def _normalize(x: LogBound, prec: int) -> LogBound:
    while x.depth >= 1 and x.hi <= LOWER_LIMIT:
        x = LogBound(x.depth - 1, *exp2_interval(x.lo, x.hi, prec))
    return x


def lb_exp2(x: LogBound, prec: int) -> LogBound:
    return _normalize(LogBound(x.depth + 1, x.lo, x.hi), prec)


def _raise(x: LogBound, depth: int, prec: int) -> LogBound:
    while x.depth < depth:
        x = LogBound(x.depth + 1, *log2_interval(x.lo, x.hi, prec))
    return x


def lb_cmp(x: LogBound, y: LogBound, prec: int = DEFAULT_PRECISION) -> int | None:
    """Sign of x - y, or None when the enclosures overlap."""
    flip = 1
    if x.depth < y.depth:
        x, y, flip = y, x, -1
    # x is deeper: every iterated log of x below its depth is at least 4
    while y.depth < x.depth:
        if y.hi < 4:
            return flip
        y = _raise(y, y.depth + 1, prec)
    if x.lo > y.hi:
        return flip
    if x.hi < y.lo:
        return -flip
    if x.lo == x.hi == y.lo == y.hi:
        return 0
    return None


def lb_add(x: LogBound, y: LogBound, prec: int) -> LogBound:
    """Enclosure of x + y for positive x, y."""
    if x.depth == 0 and y.depth == 0:
        return LogBound(0, *_round_out(x.lo + y.lo, x.hi + y.hi, prec))
    if x.depth < y.depth:
        x, y = y, x
    if y.depth == 0 and y.hi <= 0:
        return x
    lx, ly = lb_log2(x, prec), lb_log2(y, prec)
    gap = lb_add(ly, exact(prec + 1), prec) if ly.lo > 0 else exact(prec + 1)
    if lb_cmp(lx, gap, prec) == 1:
        # log2(x + y) - log2(x) <= 2**(1 + log2 y - log2 x) <= 2**-prec
        return lb_exp2(lb_add(lx, exact(Fraction(1, 1 << prec)), prec), prec)
    top = _raise(lx, max(lx.depth, ly.depth), prec)
    other = _raise(ly, top.depth, prec)
    hull = LogBound(top.depth, max(top.lo, other.lo), max(top.hi, other.hi))
    return lb_exp2(lb_add(hull, exact(1), prec), prec)


def lb_mul(x: LogBound, y: LogBound, prec: int) -> LogBound:
    """Enclosure of x * y for x, y >= 1."""
    if x.depth == 0 and y.depth == 0:
        return LogBound(0, *_round_out(x.lo * y.lo, x.hi * y.hi, prec))
    lx, ly = lb_log2(x, prec), lb_log2(y, prec)
    if lx.depth == 0 and lx.hi == 0:
        return y
    if ly.depth == 0 and ly.hi == 0:
        return x
    return lb_exp2(lb_add(lx, ly, prec), prec)


def lb_pow(x: LogBound, e: LogBound, prec: int) -> LogBound:
    """Enclosure of x ** e for x >= 1, e >= 1."""
    lx = lb_log2(x, prec)
    if lx.depth == 0 and lx.hi == 0:
        return exact(1)
    return lb_exp2(lb_mul(e, lx, prec), prec)


# ---------------------------------------------------------------------------
# tower values


@dataclass(frozen=True)
class ParamValue:
    """An exact natural, or an enclosure of its iterated log2.

    ``log_depth == 1`` is a plain log2 range; deeper values carry an
    enclosure of log2(log2(...)).
    """

    exact: int | None = None
    lo: Fraction | None = None
    hi: Fraction | None = None
    log_depth: int = 1

    def __post_init__(self):
        if self.exact is not None:
            if self.exact < 1:
                raise ValueError("exact tower values are >= 1")
        elif self.lo is None or self.hi is None or self.lo > self.hi:
            raise ValueError("log range needs lo <= hi")

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def bound(self) -> LogBound:
        if self.exact is not None:
            return exact(self.exact)
        return LogBound(self.log_depth, self.lo, self.hi)

    def log2_range(self, prec: int = DEFAULT_PRECISION) -> tuple[Fraction, Fraction]:
        """Enclosure of log2 of the value (needs log_depth <= 1)."""
        if self.exact is not None:
            return log2_interval(Fraction(self.exact), Fraction(self.exact), prec)
        if self.log_depth != 1:
            raise RepresentationOverflow("log2 of this value is itself only known by its log")
        return self.lo, self.hi

    def record(self) -> dict:
        if self.exact is not None:
            return {"exact": str(self.exact)}
        out = {"log2lo": _fmt(self.lo), "log2hi": _fmt(self.hi)}
        if self.log_depth != 1:
            out["logDepth"] = self.log_depth
        return out


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _from_bound(x: LogBound, exact_bits: int, prec: int = DEFAULT_PRECISION) -> ParamValue:
    if x.depth == 0:
        if x.lo == x.hi and x.lo.denominator == 1 and int(x.lo).bit_length() <= exact_bits:
            return ParamValue(exact=int(x.lo))
        x = LogBound(1, *log2_interval(x.lo, x.hi, prec))
    if x.depth == 1 and x.hi < exact_bits and x.lo == x.hi and x.lo.denominator == 1:
        return ParamValue(exact=1 << int(x.lo))
    return ParamValue(lo=x.lo, hi=x.hi, log_depth=x.depth)


class _Q:
    """A tower quantity: exact integer when small, LogBound otherwise.

    ``recipe`` records how the value was formed, for structural checks.
    """

    __slots__ = ("val", "bound", "recipe")

    def __init__(self, val: int | None, bound: LogBound, recipe: tuple = ()):
        self.val = val
        self.bound = bound
        self.recipe = recipe

    @classmethod
    def of(cls, n: int) -> "_Q":
        return cls(n, exact(n), ("const", n))


class _Arith:
    def __init__(self, exact_bits: int, prec: int):
        self.exact_bits = exact_bits
        self.prec = prec

    def _log_bound(self, q: _Q) -> LogBound:
        if q.val is not None:
            n = q.val
            if n & (n - 1) == 0:
                return exact(n.bit_length() - 1)
            return LogBound(0, *log2_interval(Fraction(n), Fraction(n), self.prec))
        return lb_log2(q.bound, self.prec)

    def _wrap_log(self, lg: LogBound, recipe: tuple) -> _Q:
        b = lb_exp2(lg, self.prec)
        if b.depth == 0 and b.lo == b.hi and b.lo.denominator == 1:
            v = int(b.lo)
            if v.bit_length() <= self.exact_bits:
                return _Q(v, b, recipe)
            # too long to keep: store log2 instead
            b = LogBound(1, *log2_interval(b.lo, b.hi, self.prec))
        return _Q(None, b, recipe)

    def mul(self, x: _Q, y: _Q, recipe: tuple = ()) -> _Q:
        recipe = recipe or ("mul", x, y)
        if x.val is not None and y.val is not None:
            if x.val.bit_length() + y.val.bit_length() <= self.exact_bits + 1:
                v = x.val * y.val
                if v.bit_length() <= self.exact_bits:
                    return _Q(v, exact(v), recipe)
        return self._wrap_log(lb_add(self._log_bound(x), self._log_bound(y), self.prec), recipe)

    def pow(self, x: _Q, e: _Q, recipe: tuple = ()) -> _Q:
        recipe = recipe or ("pow", x, e)
        if x.val is not None and e.val is not None:
            if e.val == 0 or x.val == 1:
                return _Q(1, exact(1), recipe)
            if x.val.bit_length() * e.val <= self.exact_bits + e.val:
                v = x.val ** e.val
                if v.bit_length() <= self.exact_bits:
                    return _Q(v, exact(v), recipe)
        lx = self._log_bound(x)
        le = e.bound if e.val is None else exact(e.val)
        return self._wrap_log(lb_mul(le, lx, self.prec), recipe)

    def max(self, x: _Q, y: _Q) -> _Q:
        if x.val is not None and y.val is not None:
            return x if x.val >= y.val else y
        s = lb_cmp(x.bound, y.bound, self.prec)
        if s is None:
            raise InconclusiveInterval("cannot order tower values")
        return x if s >= 0 else y


@dataclass(frozen=True)
class ParamTower:
    max_height: int
    exact_bits: int
    precision: int
    levels: tuple[dict, ...] = field(repr=False)
    _q: tuple[dict, ...] = field(repr=False, compare=False)

    def value(self, name: str, h: int) -> ParamValue:
        return self.levels[h][name]

    def levelCount(self, h: int) -> ParamValue:
        return self.value("levelCount", h)

    def rho(self, h: int) -> ParamValue:
        return self.value("rho", h)

    def pi(self, h: int) -> ParamValue:
        return self.value("pi", h)

    def a(self, h: int) -> ParamValue:
        return self.value("a", h)

    def bigM(self, h: int) -> ParamValue:
        return self.value("bigM", h)

    def b(self, h: int) -> ParamValue:
        return self.value("b", h)

    def records(self) -> Iterator[dict]:
        for h, row in enumerate(self.levels):
            for name in FIELDS:
                yield {"h": h, "field": name, **row[name].record()}

    def refined(self, precision: int) -> "ParamTower":
        """Recompute at higher precision, intersecting with the current enclosures."""
        finer = tower(self.max_height, self.exact_bits, precision)
        levels = []
        for old, new in zip(self.levels, finer.levels):
            row = {}
            for name in FIELDS:
                o, n = old[name], new[name]
                if o.is_exact or n.is_exact or o.log_depth != n.log_depth:
                    row[name] = n
                else:
                    nb = n.bound().intersect(o.bound())
                    row[name] = ParamValue(lo=nb.lo, hi=nb.hi, log_depth=nb.depth)
            levels.append(row)
        return ParamTower(self.max_height, self.exact_bits, precision, tuple(levels), finer._q)


def tower(hMax: int, exactBitThreshold: int = DEFAULT_EXACT_BITS,
          precision: int = DEFAULT_PRECISION) -> ParamTower:
    """Evaluate levelCount, rho, b, pi, a, bigM for h = 0..hMax."""
    if hMax < 0 or hMax > MAX_HEIGHT:
        raise ValueError(f"hMax must lie in [0, {MAX_HEIGHT}]")
    ar = _Arith(exactBitThreshold, precision)
    count = _Q.of(1)
    levels, qs = [], []
    for h in range(hMax + 1):
        rho = ar.max(count, _Q.of(h + 2))
        b = ar.mul(_Q.of((h + 1) ** 2), ar.pow(rho, _Q.of(h + 1)), ("b", h))
        rho_h = ar.pow(rho, _Q.of(h))
        pi = ar.pow(b, rho_h, ("pow", b, rho_h))
        a = ar.pow(pi, _Q.of(h + 2), ("pow", pi, h + 2))
        big_m = ar.pow(a, _Q.of(2), ("pow", a, 2))
        q = {"levelCount": count, "rho": rho, "b": b, "pi": pi, "a": a, "bigM": big_m}
        qs.append(q)
        levels.append({k: (ParamValue(exact=v.val) if v.val is not None
                           else _from_bound(v.bound, exactBitThreshold, precision))
                       for k, v in q.items()})
        if h < hMax:
            count = ar.mul(count, big_m)
    return ParamTower(hMax, exactBitThreshold, precision, tuple(levels), tuple(qs))


# ---------------------------------------------------------------------------
# identity checks


@dataclass(frozen=True)
class IdentityCheck:
    h: int
    identity: str
    passed: bool
    method: str


def _compare(t: ParamTower, x: LogBound, y: LogBound, make) -> tuple[int | None, ParamTower]:
    s = lb_cmp(x, y, t.precision)
    if s is None and t.precision < REFINEMENT_BUDGET:
        t = t.refined(REFINEMENT_BUDGET)
        x, y = make(t)
        s = lb_cmp(x, y, t.precision)
    return s, t


def verify_tower_identities(t: ParamTower, strict: bool = False) -> list[IdentityCheck]:
    """Check pi = b^(rho^h), a > pi^h (h >= 1), pi > h^2, rho >= h + 2 per level.

    Each check is settled exactly when the values are exact, by certified
    intervals when those separate the two sides, and otherwise by the
    exponent structure of the construction (same base, larger exponent).
    With ``strict`` an interval that fails to separate raises instead.
    """
    out: list[IdentityCheck] = []
    prec = t.precision
    for h in range(t.max_height + 1):
        q = t._q[h]
        pi, b, rho, a = q["pi"], q["b"], q["rho"], q["a"]

        # pi(h) = b(h)^(rho(h)^h)
        if pi.val is not None and b.val is not None and rho.val is not None:
            ok = pi.val == b.val ** (rho.val ** h)
            out.append(IdentityCheck(h, "pi=b^(rho^h)", ok, "exact"))
        else:
            ar = _Arith(t.exact_bits, prec)
            again = ar.pow(b, ar.pow(rho, _Q.of(h)))
            x, y = pi.bound, again.bound
            overlap = (x.depth == y.depth and x.lo <= y.hi and y.lo <= x.hi)
            structural = (pi.recipe[0] == "pow" and pi.recipe[1] is b
                          and _same_power(pi.recipe[2], rho, h))
            out.append(IdentityCheck(h, "pi=b^(rho^h)", overlap and structural,
                                     "interval+structure"))

        # a(h) > pi(h)^h
        if h >= 1:
            if a.val is not None and pi.val is not None:
                out.append(IdentityCheck(h, "a>pi^h", a.val > pi.val ** h, "exact"))
            else:
                def make(tt, h=h):
                    qq = tt._q[h]
                    ar2 = _Arith(tt.exact_bits, tt.precision)
                    return qq["a"].bound, ar2.pow(qq["pi"], _Q.of(h)).bound
                s, _ = _compare(t, *make(t), make)
                if s is not None:
                    out.append(IdentityCheck(h, "a>pi^h", s > 0, "interval"))
                elif strict:
                    raise InconclusiveInterval(f"a({h}) vs pi({h})^{h} not separated")
                else:
                    gt1 = lb_cmp(pi.bound, exact(1), prec) == 1
                    same_base = a.recipe[0] == "pow" and a.recipe[1] is pi
                    out.append(IdentityCheck(h, "a>pi^h",
                                             gt1 and same_base and a.recipe[2] > h,
                                             "structure"))

        # pi(h) > h^2
        s = lb_cmp(pi.bound, exact(h * h), prec)
        if s is None:
            raise InconclusiveInterval(f"pi({h}) vs {h}^2 not separated")
        out.append(IdentityCheck(h, "pi>h^2", s > 0, "exact" if pi.val is not None else "interval"))

        # rho(h) >= h + 2
        s = lb_cmp(rho.bound, exact(h + 2), prec)
        if s is None:
            raise InconclusiveInterval(f"rho({h}) vs {h + 2} not separated")
        out.append(IdentityCheck(h, "rho>=h+2", s >= 0, "exact" if rho.val is not None else "interval"))
    return out


def _same_power(e: _Q, rho: _Q, h: int) -> bool:
    if e.val is not None and rho.val is not None:
        return e.val == rho.val ** h
    return e.recipe[:1] == ("pow",) and e.recipe[1] is rho and e.recipe[2].val == h


# ---------------------------------------------------------------------------
# small helpers used by the slalom and null-set estimates


def slalom_capacity(h: int, e_h: int, t: ParamTower | None = None) -> ParamValue:
    """rho(h) ** e_h, the number of slots of the slalom at level h."""
    if e_h < 0 or e_h > h:
        raise ValueError("need 0 <= e_h <= h")
    t = t if t is not None and t.max_height >= h else tower(h)
    q = t._q[h]["rho"]
    ar = _Arith(t.exact_bits, t.precision)
    v = ar.pow(q, _Q.of(e_h))
    return ParamValue(exact=v.val) if v.val is not None else _from_bound(v.bound, t.exact_bits, t.precision)


def tail_product_lower(k: int, H: int) -> Fraction:
    """Exact prod_{h=k+1}^{H} (1 - 1/(h+1)^3)."""
    if H <= k:
        raise ValueError("tail product needs H > k")
    out = Fraction(1)
    for h in range(k + 1, H + 1):
        out *= 1 - Fraction(1, (h + 1) ** 3)
    return out
