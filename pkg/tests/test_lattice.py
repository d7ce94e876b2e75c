import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarlat.lattice import (BadOrderMap, IncomparablePair, LatticeError, NotDistributive,
                              admissible_intervals, chain_lattice, divisor_lattice, divisors,
                              explicit_lattice, is_prime, m_set, prime_factors, raw_lattice,
                              s_set, sublattice, verify_laws)

PENTAGON = (["0", "a", "b", "c", "1"],
            [("0", "a"), ("a", "b"), ("b", "1"), ("0", "c"), ("c", "1")])
M3 = (["0", "x", "y", "z", "1"],
      [("0", "x"), ("0", "y"), ("0", "z"), ("x", "1"), ("y", "1"), ("z", "1")])
DIAMOND = (["bot", "a", "b", "top"], [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")])


def test_number_helpers():
    assert divisors(12) == [1, 2, 3, 4, 6, 12]
    assert divisors(1) == [1]
    assert prime_factors(360) == {2: 3, 3: 2, 5: 1}
    assert prime_factors(1) == {}
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]


def test_divisor_lattice_small():
    assert list(divisor_lattice(1).elements) == [1]
    two = divisor_lattice(2)
    assert two.join(1, 2) == 2 and two.meet(1, 2) == 1
    twelve = divisor_lattice(12)
    assert list(twelve.elements) == [1, 2, 3, 4, 6, 12]
    assert twelve.join(4, 6) == 12
    assert twelve.meet(4, 6) == 2
    assert twelve.bottom == 1 and twelve.top == 12
    assert twelve.order_of(4) == 4


@pytest.mark.parametrize("n", [1, 2, 6, 12, 30, 36, 360])
def test_divisor_tables_match_lcm_gcd(n):
    lat = divisor_lattice(n)
    for a, b in product(lat.elements, repeat=2):
        assert lat.join(a, b) == math.lcm(a, b)
        assert lat.meet(a, b) == math.gcd(a, b)
        assert lat.leq(a, b) == (b % a == 0)


def test_divisor_lattice_rejects_bad_modulus():
    with pytest.raises(LatticeError):
        divisor_lattice(0)


def test_chain_lattice():
    single = chain_lattice(2, 0)
    assert list(single.elements) == [0] and single.order_of(0) == 1
    bec = chain_lattice(2, 1)
    assert bec.orders == divisor_lattice(2).orders
    assert np.array_equal(bec.leq_table, divisor_lattice(2).leq_table)
    c = chain_lattice(3, 2)
    assert [c.order_of(k) for k in c.elements] == [1, 3, 9]
    assert c.is_chain()
    assert not divisor_lattice(6).is_chain()
    with pytest.raises(LatticeError):
        chain_lattice(4, 2)


def test_explicit_constructors():
    lat = explicit_lattice(*DIAMOND, {"bot": 1, "a": 2, "b": 3, "top": 6})
    assert lat.join("a", "b") == "top" and lat.meet("a", "b") == "bot"
    assert verify_laws(lat).ok
    with pytest.raises(NotDistributive):
        explicit_lattice(*PENTAGON, {"0": 1, "a": 2, "b": 4, "c": 3, "1": 12})
    with pytest.raises(NotDistributive):
        explicit_lattice(*M3, {"0": 1, "x": 2, "y": 3, "z": 5, "1": 30})
    with pytest.raises(BadOrderMap):
        explicit_lattice(*DIAMOND, {"bot": 1, "a": 2, "b": 2, "top": 6})


def test_m_set_examples():
    lat = divisor_lattice(12)
    assert m_set(lat, 1, 2) == []
    assert m_set(lat, 1, 6) == [2, 3]
    assert m_set(lat, 1, 4) == [2]
    with pytest.raises(IncomparablePair):
        m_set(lat, 4, 6)


def test_s_set_examples():
    lat = divisor_lattice(12)
    assert s_set(lat, 1) == [4, 6]
    assert s_set(lat, 2) == [12]
    assert s_set(lat, 12) == []


def _brute_m(lat, a, b):
    return [c for c in lat.elements if lat.lt(a, c) and lat.lt(c, b)]


def _brute_s(lat, k):
    out = []
    for h in lat.elements:
        if not lat.lt(k, h):
            continue
        mids = _brute_m(lat, k, h)
        chain3 = any(lat.lt(x, y) for x in mids for y in mids)
        if mids and not chain3:
            out.append(h)
    return out


@pytest.mark.parametrize("lat", [divisor_lattice(n) for n in (12, 30, 72, 360)]
                         + [chain_lattice(2, 5)], ids=lambda l: l.name)
def test_set_operators_match_brute_force(lat):
    for a in lat.elements:
        assert s_set(lat, a) == _brute_s(lat, a)
        for b in lat.elements:
            if lat.leq(a, b):
                assert m_set(lat, a, b) == _brute_m(lat, a, b)


@pytest.mark.parametrize("lat", [divisor_lattice(n) for n in (2, 6, 12, 30, 360)]
                         + [chain_lattice(2, 6), chain_lattice(3, 4), chain_lattice(2, 4)],
                         ids=lambda l: l.name)
def test_laws_hold(lat):
    rep = verify_laws(lat)
    assert rep.ok, rep.to_dict()
    assert rep.checked["distributivity_join"] == lat.size**3


def test_raw_pentagon_reports_violations():
    rep = verify_laws(raw_lattice(*PENTAGON))
    assert not rep.ok
    assert "modularity" in rep.laws_violated()
    assert "distributivity_meet" in rep.laws_violated()
    assert "meet_splitting" in rep.laws_violated()


def test_raw_m3_is_modular_but_not_distributive():
    rep = verify_laws(raw_lattice(*M3))
    assert "modularity" not in rep.laws_violated()
    assert "distributivity_join" in rep.laws_violated()


def test_admissible_intervals_have_at_most_two_middles():
    lat = divisor_lattice(360)
    for a, b in admissible_intervals(lat):
        assert len(m_set(lat, a, b)) <= 2


def test_sublattice_is_closed():
    lat = divisor_lattice(360)
    sub = sublattice(lat, [8, 9, 5])
    assert set(sub.elements) == {1, 5, 8, 9, 40, 45, 72, 360}
    for a, b in product(sub.elements, repeat=2):
        assert sub.join(a, b) == math.lcm(a, b)
        assert sub.meet(a, b) == math.gcd(a, b)


def test_canonical_order_is_by_order_then_id():
    lat = explicit_lattice(["t", "q", "p", "b"], [("b", "p"), ("b", "q"), ("p", "t"), ("q", "t")],
                           {"b": 1, "p": 3, "q": 2, "t": 6})
    assert list(lat.elements) == ["b", "q", "p", "t"]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 2000), st.data())
def test_order_identity_and_cover_consistency(n, data):
    lat = divisor_lattice(n)
    a = data.draw(st.sampled_from(lat.elements))
    b = data.draw(st.sampled_from(lat.elements))
    assert lat.order_of(lat.join(a, b)) * lat.order_of(lat.meet(a, b)) == a * b
    assert lat.leq(a, b) == (lat.meet(a, b) == a) == (lat.join(a, b) == b)
    for c in lat.covers(a):
        assert is_prime(c // a)
