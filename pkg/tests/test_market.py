"""Market core: utilities, the greedy demand oracle, verification,
structural checks, preprocessing, and the exchange reduction."""

import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from splcmarket.market import (Buyer, InfiniteOptimum, Market, MarketError,
                               add_money_greedy, eval_utility,
                               fisher_to_exchange, is_reducible, is_simple,
                               optimal_bundle, preprocess_reducible,
                               reinsert_removed, remove_money_greedy,
                               segment_amounts, utility, verify_equilibrium,
                               verify_exchange_equilibrium)
from splcmarket.oracles import dp_optimal_bundle
from support import inverter_cycle_market, random_small_splc_market, random_prices


def test_eval_utility_examples():
    u = utility((2, 1), (1, None))
    assert eval_utility(u, F(3, 2)) == F(5, 2)
    assert eval_utility(u, F(0)) == 0
    capped = utility((3, 2))  # min(3x, 6)
    assert eval_utility(capped, F(4)) == 6


def test_slopes_must_strictly_decrease():
    with pytest.raises(MarketError):
        utility((1, 1), (1, None))
    with pytest.raises(MarketError):
        utility((1, None), (2, 1))  # infinite segment must come last


def test_optimal_bundle_single_good():
    b = Buyer(F(1), {"g": utility((1, None))})
    q, s, u = optimal_bundle(b, {"g": F(2)}, F(1))
    assert q == {"g": F(1, 2)} and u == F(1, 2)


def test_optimal_bundle_two_goods():
    b = Buyer(F(1), {"A": utility((3, F(1, 4))), "B": utility((1, None))})
    prices = {"A": F(1), "B": F(1)}
    q, s, u = optimal_bundle(b, prices, F(1))
    assert q == {"A": F(1, 4), "B": F(3, 4)}
    assert u == F(3, 2)
    # cross-checked against the money-discretized dynamic program
    assert dp_optimal_bundle(b, prices, F(1), F(1, 100)) == F(3, 2)


def test_optimal_bundle_infinite():
    b = Buyer(F(1), {"g": utility((1, None))})
    with pytest.raises(InfiniteOptimum):
        optimal_bundle(b, {"g": F(0)}, F(1))


def test_free_capped_good_is_taken():
    b = Buyer(F(1), {"A": utility((1, 2)), "B": utility((1, None))})
    q, _, u = optimal_bundle(b, {"A": F(0), "B": F(1)}, F(1))
    assert q["A"] == 2 and q["B"] == 1
    assert u == 3


def test_verify_examples():
    m = Market(("g",), (Buyer(F(1), {"g": utility((1, None))}),))
    ok = verify_equilibrium(m, {"g": F(1)}, {0: {"g": F(1)}}, F(0), F(0))
    assert ok.accepted and ok.min_eps == 0 and ok.min_delta == 0

    off = verify_equilibrium(m, {"g": F(1)}, {0: {"g": F(19, 20)}}, F(0), F(0))
    assert not off.accepted
    assert off.min_eps == F(1, 20) and off.min_delta == F(1, 20)

    free = verify_equilibrium(m, {"g": F(0)}, {0: {"g": F(1)}}, F(1), F(9, 10))
    assert not free.accepted and free.min_delta == 1


def test_verify_rejects_overspending():
    m = Market(("g",), (Buyer(F(1), {"g": utility((1, None))}),))
    rep = verify_equilibrium(m, {"g": F(2)}, {0: {"g": F(1)}}, F(1), F(1))
    assert not rep.accepted and rep.buyers[0].over_budget


def test_verify_monotone():
    rng = random.Random(3)
    for _ in range(20):
        m = random_small_splc_market(rng)
        prices = random_prices(rng, m.goods)
        alloc = {i: {g: F(rng.randint(0, 4), 4) for g in m.goods}
                 for i in range(len(m.buyers))}
        base = verify_equilibrium(m, prices, alloc, F(1, 10), F(1, 10))
        wider = verify_equilibrium(m, prices, alloc, F(1, 2), F(1, 2))
        if base.accepted:
            assert wider.accepted


@given(st.lists(st.tuples(st.integers(1, 8), st.integers(1, 8)),
                min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_eval_utility_concave_chord(raw):
    slopes = sorted({F(s, 2) for s, _ in raw}, reverse=True)
    segs = [(s, F(l, 2)) for s, (_, l) in zip(slopes, raw)]
    u = utility(*segs)
    pts = [F(k, 3) for k in range(8)]
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        mid = eval_utility(u, b)
        # chord condition: value at b is above the a-c interpolation
        lhs = mid * (c - a)
        rhs = eval_utility(u, a) * (c - b) + eval_utility(u, c) * (b - a)
        assert lhs >= rhs


def test_greedy_never_skips_better_segment():
    rng = random.Random(11)
    for _ in range(40):
        m = random_small_splc_market(rng)
        prices = random_prices(rng, m.goods)
        for buyer in m.buyers:
            q, spending, _ = optimal_bundle(buyer, prices, buyer.budget)
            # if some segment is only partially bought, every strictly better
            # bang-per-buck segment must be fully bought
            items = []
            for g, u in buyer.utilities.items():
                amounts = segment_amounts(u, q.get(g, F(0)))
                for k, seg in enumerate(u.segments):
                    if seg.slope > 0:
                        items.append((seg.slope / prices[g], seg, amounts[k]))
            for bpb1, seg1, got1 in items:
                if seg1.length is not None and got1 < seg1.length:
                    for bpb2, seg2, got2 in items:
                        if bpb2 > bpb1 and seg2.length is not None:
                            assert got2 == seg2.length or got1 == 0


def test_is_simple_clauses():
    mkt, _, _ = inverter_cycle_market(random.Random(5))
    assert is_simple(mkt).ok

    capped = Market(("g",), (Buyer(F(1), {"g": utility((1, 1))}),))
    rep = is_simple(capped)
    assert not rep.ok and any("satiated" in v for v in rep.violations)

    budgets = Market(("g",), (Buyer(F(1), {"g": utility((1, None))}),
                              Buyer(F(2), {"g": utility((1, None))})))
    rep = is_simple(budgets)
    assert not rep.ok and any("CEEI" in v for v in rep.violations)


def test_is_reducible_clauses():
    m = Market(("g", "h"), (
        Buyer(F(1), {"g": utility((2, 1)), "h": utility((1, None))}),
    ))
    assert is_reducible(m, d=2, e_min=F(1), e_max=F(1), kappa=F(2),
                        max_segments=2).ok
    rep = is_reducible(m, d=2, e_min=F(1), e_max=F(1), kappa=F(3, 2),
                       max_segments=2)
    assert not rep.ok and any("slope" in v for v in rep.violations)


def test_preprocess_truncates_and_removes():
    m = Market(("long", "weak", "fine"), (
        Buyer(F(1), {"long": utility((2, 5), (1, None)),
                     "fine": utility((3, 1)),
                     "weak": utility((1, 1))}),
        Buyer(F(1), {"fine": utility((2, 2), (1, None))}),
    ))
    reduced, removed = preprocess_reducible(m, F(1, 10))
    # domain clipped at two units: the length-5 head shrinks to 2 and the
    # tail disappears
    u = reduced.buyers[0].utilities["long"]
    assert [(s.slope, s.length) for s in u.segments] == [(F(2), F(2))]
    # "weak" has total interested length 1 <= 1 + 1/10 and is removed
    assert [r.good for r in removed] == ["weak"]
    assert removed[0].interest_total == 1
    assert "weak" not in reduced.goods

    again, removed2 = preprocess_reducible(reduced, F(1, 10))
    assert again == reduced and removed2 == []


def test_reinsert_examples():
    from splcmarket.market import RemovedGood
    prices = {"a": F(1)}
    alloc = {0: {"a": F(1)}, 1: {}}
    # no interest: lowest-indexed buyer gets the unit
    p2, x2 = reinsert_removed([RemovedGood("z", F(0), {})], prices, alloc, F(1, 10))
    assert p2["z"] == 0 and x2[0]["z"] == 1
    # proportional shares clear the good exactly
    r = RemovedGood("y", F(21, 20), {0: F(1, 2), 1: F(11, 20)})
    p3, x3 = reinsert_removed([r], prices, alloc, F(1, 10))
    assert x3[0]["y"] + x3[1]["y"] == 1
    assert x3[0]["y"] == F(1, 2) / F(21, 20)
    # empty removal list is the identity
    p4, x4 = reinsert_removed([], prices, alloc, F(1, 10))
    assert p4 == prices and x4 == alloc


def test_fisher_to_exchange_endowments():
    mkt, prices, alloc = inverter_cycle_market(random.Random(1))
    em = fisher_to_exchange(mkt)
    n = len(mkt.buyers)
    assert all(w == F(1, n) for e in em.endowments for w in e.values())

    single = Market(("g",), (Buyer(F(1), {"g": utility((1, None))}),))
    em1 = fisher_to_exchange(single)
    assert em1.endowments[0]["g"] == 1


def test_exchange_verify_scale_invariance():
    mkt, prices, alloc = inverter_cycle_market(random.Random(2))
    em = fisher_to_exchange(mkt)
    r1 = verify_exchange_equilibrium(em, prices, alloc, F(0), F(0))
    scaled = {g: 7 * p for g, p in prices.items()}
    r2 = verify_exchange_equilibrium(em, scaled, alloc, F(0), F(0))
    assert r1.accepted == r2.accepted
    assert r1.min_eps == r2.min_eps and r1.min_delta == r2.min_delta


def test_fisher_exchange_transfer():
    rng = random.Random(4)
    for _ in range(5):
        mkt, prices, alloc = inverter_cycle_market(rng)
        fisher = verify_equilibrium(mkt, prices, alloc, F(0), F(0))
        em = fisher_to_exchange(mkt)
        total = sum(prices.values(), F(0))
        norm = {g: p * len(mkt.buyers) / total for g, p in prices.items()}
        exch = verify_exchange_equilibrium(em, norm, alloc, F(0), F(0))
        assert fisher.accepted == exch.accepted
        assert fisher.min_eps == exch.min_eps
        assert fisher.min_delta == exch.min_delta


def test_money_add_remove_roundtrip():
    b = Buyer(F(1), {"A": utility((3, 1)), "B": utility((1, None))})
    prices = {"A": F(1), "B": F(1)}
    row = {"A": F(1, 2)}
    add_money_greedy(b, prices, row, F(1, 2))
    assert row == {"A": F(1)}
    add_money_greedy(b, prices, row, F(1, 4))
    assert row["B"] == F(1, 4)
    remove_money_greedy(b, prices, row, F(1, 4))
    assert row["B"] == 0 and row["A"] == 1
