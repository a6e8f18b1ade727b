"""Order constraints of Cichon's diagram on ranked assignments.

Entries are mapped to natural-number ranks that only stand in for the order
of the cardinals; no cardinal arithmetic is implied.
"""

from __future__ import annotations

from itertools import product
from typing import Mapping

ENTRIES = ("aleph1", "addN", "covN", "addM", "b", "nonM",
           "covM", "d", "nonN", "cofM", "cofN", "c")
FREE_ENTRIES = tuple(e for e in ENTRIES if e not in ("addM", "cofM"))

DISPLAY = {
    "aleph1": "ℵ1", "addN": "add(N)", "covN": "cov(N)", "addM": "add(M)", "b": "b",
    "nonM": "non(M)", "covM": "cov(M)", "d": "d", "nonN": "non(N)", "cofM": "cof(M)",
    "cofN": "cof(N)", "c": "2^ℵ0",
}

ARROWS = (
    ("aleph1", "addN"), ("addN", "addM"), ("addN", "covN"), ("addM", "b"),
    ("addM", "covM"), ("b", "nonM"), ("b", "d"), ("covN", "nonM"),
    ("nonM", "cofM"), ("covM", "d"), ("covM", "nonN"), ("d", "cofM"),
    ("nonN", "cofN"), ("cofM", "cofN"), ("cofN", "c"),
)

ALIASES = {
    "ℵ1": "aleph1", "ℵ₁": "aleph1", "add(N)": "addN", "add(𝒩)": "addN", "cov(N)": "covN",
    "cov(𝒩)": "covN", "add(M)": "addM", "add(ℳ)": "addM", "𝔟": "b", "non(M)": "nonM",
    "non(ℳ)": "nonM", "cov(M)": "covM", "cov(ℳ)": "covM", "𝔡": "d", "non(N)": "nonN",
    "non(𝒩)": "nonN", "cof(M)": "cofM", "cof(ℳ)": "cofM", "cof(N)": "cofN", "cof(𝒩)": "cofN",
    "2^aleph0": "c", "2^ℵ0": "c", "2^{ℵ₀}": "c", "continuum": "c",
}


class IncompleteAssignment(ValueError):
    pass


def normalize(a: Mapping[str, int]) -> dict[str, int]:
    """Canonical keys; addM and cofM are derived when both are absent."""
    out = {}
    for k, v in a.items():
        key = ALIASES.get(k, k)
        if key not in ENTRIES:
            raise IncompleteAssignment(f"unknown entry {k!r}")
        if isinstance(v, bool) or not isinstance(v, int):
            raise IncompleteAssignment(f"rank of {k!r} must be an integer")
        out[key] = v
    missing = [e for e in FREE_ENTRIES if e not in out]
    if missing:
        raise IncompleteAssignment(f"missing entries: {', '.join(missing)}")
    has_add, has_cof = "addM" in out, "cofM" in out
    if has_add != has_cof:
        raise IncompleteAssignment("give both add(M) and cof(M), or neither")
    if not has_add:
        out["addM"] = min(out["b"], out["covM"])
        out["cofM"] = max(out["d"], out["nonM"])
    return {e: out[e] for e in ENTRIES}


def arrow_name(x: str, y: str) -> str:
    return f"{DISPLAY[x]}≤{DISPLAY[y]}"


def check(a: Mapping[str, int]) -> list[str]:
    """Violated arrows and equalities, in a fixed order."""
    r = normalize(a)
    out = [arrow_name(x, y) for x, y in ARROWS if r[x] > r[y]]
    if r["addM"] != min(r["b"], r["covM"]):
        out.append("add(M)=min(b,cov(M))")
    if r["cofM"] != max(r["d"], r["nonM"]):
        out.append("cof(M)=max(d,non(M))")
    return out


def enumerate_two_valued() -> list[dict[str, int]]:
    """All consistent assignments with aleph1 -> 1, continuum -> 2, the rest in {1, 2}."""
    inner = [e for e in ENTRIES if e not in ("aleph1", "c")]
    out = []
    for vals in product((1, 2), repeat=len(inner)):
        a = {"aleph1": 1, "c": 2, **dict(zip(inner, vals))}
        if not check(a):
            out.append(a)
    return out


def _ranked(addN, b, covN, nonM, covM, nonN, d, cofN, c) -> dict[str, int]:
    return normalize({"aleph1": 0, "addN": addN, "b": b, "covN": covN, "nonM": nonM,
                      "covM": covM, "nonN": nonN, "d": d, "cofN": cofN, "c": c})


def fixtures() -> dict[str, dict[str, int]]:
    """Value tables of the construction; aleph1 has rank 0 and lambda_i rank i."""
    return {
        "ten": _ranked(1, 2, 3, 4, 5, 6, 7, 8, 9),
        "old-order": _ranked(1, 3, 2, 4, 5, 7, 6, 8, 9),
        "left": _ranked(1, 2, 3, 4, 5, 5, 5, 5, 5),
        "step5": _ranked(1, 2, 3, 4, 5, 5, 5, 5, 5),
        "step6": _ranked(1, 2, 3, 4, 5, 6, 6, 6, 6),
        "step7": _ranked(1, 2, 3, 4, 5, 6, 7, 7, 7),
        "step8": _ranked(1, 2, 3, 4, 5, 6, 7, 8, 8),
        "step9": _ranked(1, 2, 3, 4, 5, 6, 7, 8, 9),
    }


def raise_above(a: Mapping[str, int], x: str, y: str) -> dict[str, int]:
    """Copy of a with x pushed one rank above y (breaks the arrow x -> y)."""
    r = dict(normalize(a))
    r[x] = r[y] + 1
    return r
