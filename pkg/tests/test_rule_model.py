import itertools
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from esrules.conn_model import IP_MAX, PORT_MAX
from esrules.rule_model import BOUNDS, Rule, RuleGenome, decode, encode, match_mask, matches
from conftest import rec
from oracles import box_members, grid_dataset, intervals

PAPER_RULE = Rule((1360267777, 1860267777), (1678445057, 1678445057), (1200, 3150))


def test_decode_zero_genome():
    r = decode(RuleGenome((0.0,) * 6))
    assert r.ranges == ((0, 0), (0, 0), (0, 0))


def test_decode_full_universe():
    r = decode(RuleGenome((0, 1, 0, 1, 0, 1)))
    assert r.ranges == ((0, IP_MAX), (0, IP_MAX), (0, PORT_MAX))
    assert r == Rule.universe()


def test_decode_swaps_disordered_pair():
    r = decode(RuleGenome((0.6, 0.4, 0, 0, 0, 0)))
    assert r.src_ip_range == (round(0.4 * IP_MAX), round(0.6 * IP_MAX))


def test_decode_known_address_gene():
    g = 1360267777 / 4294967295
    assert g == pytest.approx(0.31671, abs=1e-5)
    expected = int(g * 4294967295 + 0.5)  # direct arithmetic
    assert expected == 1360267777
    r = decode(RuleGenome((g, g, 0, 0, 0, 0)))
    assert r.src_ip_range == (1360267777, 1360267777)


def test_decode_rounds_half_up():
    # 0.5 / 65535 of the port scale sits exactly on a half
    g = 0.5 / PORT_MAX
    r = decode(RuleGenome((0, 0, 0, 0, g, g)))
    assert r.dst_port_range == (1, 1)


def test_encode_examples():
    assert encode(Rule.universe()).genes == (0, 1, 0, 1, 0, 1)
    assert encode(Rule((0, 0), (0, 0), (0, 0))).genes == (0.0,) * 6


def _random_rule(rnd):
    pairs = []
    for _, hi in BOUNDS:
        a, b = rnd.randint(0, hi), rnd.randint(0, hi)
        pairs.append((min(a, b), max(a, b)))
    return Rule(*pairs)


def test_encode_decode_identity_1000():
    rnd = random.Random(1)
    for _ in range(1000):
        r = _random_rule(rnd)
        assert decode(encode(r)) == r


@given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
def test_decode_always_valid_and_idempotent(genes):
    r = decode(RuleGenome(tuple(genes)))
    for (lo, hi), (bmin, bmax) in zip(r.ranges, BOUNDS):
        assert bmin <= lo <= hi <= bmax
    assert decode(encode(r)) == r


def test_genome_validation():
    with pytest.raises(ValueError):
        RuleGenome((0.1,) * 5)
    with pytest.raises(ValueError):
        RuleGenome((1.1, 0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        RuleGenome((0.1,) * 6, sigma=-1)


def test_rule_validation():
    with pytest.raises(ValueError):
        Rule((5, 4), (0, 0), (0, 0))
    with pytest.raises(ValueError):
        Rule((0, 0), (0, 0), (0, 70000))
    with pytest.raises(ValueError):
        Rule((0, 0), (0, 0), (0, 0), action=" ")


def test_matches_paper_rule():
    assert not matches(PAPER_RULE, rec(1360267777, 1678445057, 53))
    assert matches(PAPER_RULE, rec(1500000000, 1678445057, 2000))
    assert not matches(PAPER_RULE, rec(1360267776, 1678445057, 2000))


def test_matches_inclusive_at_every_boundary():
    r = PAPER_RULE
    (a, b), (c, d), (e, f) = r.ranges
    for y in itertools.product((a, b), (c, d), (e, f)):
        assert matches(r, rec(*y))
    assert not matches(r, rec(b + 1, c, e))
    assert not matches(r, rec(a, d + 1, e))
    assert not matches(r, rec(a, c, f + 1))
    assert not matches(r, rec(a, c, e - 1))


def test_scalar_matches_agrees_with_enumeration_0_to_3():
    n = 4
    grid = grid_dataset(n)
    for ranges in itertools.product(intervals(n), repeat=3):
        rule = Rule(*ranges)
        expected = box_members(ranges, n)
        got = np.array([matches(rule, c) for c in grid])
        assert np.array_equal(got, expected), ranges


def test_match_mask_equals_scalar(five_records):
    rnd = random.Random(3)
    for _ in range(200):
        lo = sorted(rnd.randint(0, 100) for _ in range(2))
        rule = Rule(tuple(lo), (0, 60), (4, 55))
        assert list(match_mask(rule, five_records)) == [matches(rule, c) for c in five_records]


@given(st.data())
def test_monotone_widening(data):
    def pair(lo_max):
        a = data.draw(st.integers(0, lo_max))
        b = data.draw(st.integers(a, lo_max))
        return a, b
    inner = Rule(pair(40), pair(40), pair(40))
    outer = Rule(*[(data.draw(st.integers(0, lo)), data.draw(st.integers(hi, 40))) for lo, hi in inner.ranges])
    assert outer.contains(inner)
    c = rec(*(data.draw(st.integers(0, 40)) for _ in range(3)))
    if matches(inner, c):
        assert matches(outer, c)


def test_rule_json_roundtrip():
    obj = PAPER_RULE.to_json()
    assert obj == {"src_ip_low": 1360267777, "src_ip_high": 1860267777, "dst_ip_low": 1678445057,
                   "dst_ip_high": 1678445057, "dst_port_low": 1200, "dst_port_high": 3150,
                   "action": "stop the connection"}
    assert Rule.from_json(obj) == PAPER_RULE
