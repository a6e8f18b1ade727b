import pytest
from hypothesis import given, strategies as st

import oracles
from forcinglab.cichon import (
    ARROWS,
    ENTRIES,
    IncompleteAssignment,
    arrow_name,
    check,
    enumerate_two_valued,
    fixtures,
    normalize,
    raise_above,
)


def flat(v):
    return {e: v for e in ENTRIES}


def test_all_equal_is_consistent():
    assert check(flat(3)) == []


def test_ten_value_assignment():
    ten = fixtures()["ten"]
    assert check(ten) == []
    assert [ten[e] for e in ("addN", "b", "covN", "nonM", "covM", "nonN", "d", "cofN", "c")] == list(range(1, 10))
    assert ten["addM"] == ten["b"] and ten["cofM"] == ten["d"]


def test_d_below_b_reported():
    a = dict(fixtures()["ten"])
    a["d"], a["cofM"] = 1, 4
    assert arrow_name("b", "d") in check(a)
    assert arrow_name("b", "d") == "b≤d"


def test_equalities_checked_in_twelve_entry_mode():
    a = flat(2)
    a["addM"] = 1
    assert "add(M)=min(b,cov(M))" in check(a)
    a = flat(2)
    a["cofM"] = 3
    assert "cof(M)=max(d,non(M))" in check(a)


def test_normalize_errors_and_aliases():
    ten = fixtures()["ten"]
    ten_free = {k: v for k, v in ten.items() if k not in ("addM", "cofM")}
    with pytest.raises(IncompleteAssignment):
        normalize({k: v for k, v in ten_free.items() if k != "b"})
    with pytest.raises(IncompleteAssignment):
        normalize({**ten_free, "addM": 2})
    with pytest.raises(IncompleteAssignment):
        normalize({**ten_free, "bogus": 1})
    with pytest.raises(IncompleteAssignment):
        normalize({**ten_free, "b": 1.5})
    renamed = {("𝔟" if k == "b" else "cov(𝒩)" if k == "covN" else k): v for k, v in ten_free.items()}
    assert normalize(renamed) == ten


def test_fixtures_all_pass():
    fx = fixtures()
    assert set(fx) == {"ten", "old-order", "left", "step5", "step6", "step7", "step8", "step9"}
    for name, a in fx.items():
        assert check(a) == [], name


def test_old_and_new_order_differ_by_two_swaps():
    fx = fixtures()
    old, new = fx["old-order"], fx["ten"]
    diff = {e for e in ENTRIES if old[e] != new[e]}
    assert diff == {"covN", "b", "nonN", "d", "addM", "cofM"}
    assert (old["covN"], old["b"]) == (new["b"], new["covN"])
    assert (old["nonN"], old["d"]) == (new["d"], new["nonN"])


def test_step_tables():
    fx = fixtures()
    right = ("covM", "nonN", "d", "cofM", "cofN", "c")
    assert {fx["step5"][e] for e in right} == {5}
    assert fx["step9"] == fx["ten"]
    assert fx["step6"]["c"] == 6 and fx["step7"]["c"] == 7 and fx["step8"]["c"] == 8
    # every step only raises values
    order = ["step5", "step6", "step7", "step8", "step9"]
    for a, b in zip(order, order[1:]):
        assert all(fx[a][e] <= fx[b][e] for e in ENTRIES)


@pytest.mark.parametrize("x,y", ARROWS)
def test_each_arrow_mutation_reported(x, y):
    mutated = raise_above(fixtures()["ten"], x, y)
    assert arrow_name(x, y) in check(mutated)


def test_arrow_list_matches_grid_encoding():
    assert len(ARROWS) == 15
    assert set(ARROWS) == oracles._grid_edges()


def test_two_valued_enumeration():
    twos = enumerate_two_valued()
    assert len(twos) == oracles.cichon_two_valued_count() == 23
    low = {e: 1 for e in ENTRIES}
    low["c"] = 2
    high = {e: 2 for e in ENTRIES}
    high["aleph1"] = 1
    assert low in twos and high in twos
    assert all(oracles.cichon_consistent(a) for a in twos)


@given(st.lists(st.integers(0, 6), min_size=12, max_size=12), st.lists(st.integers(1, 5), min_size=7, max_size=7))
def test_check_invariant_under_monotone_remap(ranks, gaps):
    a = dict(zip(ENTRIES, ranks))
    cuts = [0]
    for g in gaps:
        cuts.append(cuts[-1] + g)
    b = {e: cuts[v] for e, v in a.items()}
    assert check(a) == check(b)
    assert (check(a) == []) == oracles.cichon_consistent(a)
