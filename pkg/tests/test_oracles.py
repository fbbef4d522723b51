"""The independent reference implementations."""

import random
from fractions import Fraction as F

import pytest

from splcmarket.circuits import (NAND, PURIFY, PureCircuitInstance, PureGate,
                                 satisfaction_fraction)
from splcmarket.market import Buyer, Market, optimal_bundle, utility, verify_equilibrium
from splcmarket.oracles import (OracleError, SearchConfig, brute_force_pure_solve,
                                dp_optimal_bundle, search_equilibrium)
from support import inverter_cycle_market, random_prices, random_small_splc_market


def test_dp_matches_greedy_single_linear_good():
    b = Buyer(F(1), {"g": utility((2, None))})
    for unit in (F(1, 10), F(1, 100)):
        assert dp_optimal_bundle(b, {"g": F(1)}, F(1), unit) == 2


def test_dp_zero_budget():
    b = Buyer(F(1), {"g": utility((2, None))})
    assert dp_optimal_bundle(b, {"g": F(1)}, F(0), F(1, 10)) == 0


def test_dp_requires_divisible_unit():
    b = Buyer(F(1), {"g": utility((2, None))})
    with pytest.raises(OracleError):
        dp_optimal_bundle(b, {"g": F(1)}, F(1, 3), F(1, 10))


def test_dp_never_beats_greedy():
    rng = random.Random(23)
    unit = F(1, 200)
    for _ in range(30):
        market = random_small_splc_market(rng)
        prices = random_prices(rng, market.goods)
        for buyer in market.buyers:
            budget = F(1)
            _, _, greedy = optimal_bundle(buyer, prices, budget)
            dp = dp_optimal_bundle(buyer, prices, budget, unit)
            assert dp <= greedy
            items = sum(1 for g, u in buyer.utilities.items()
                        for s in u.segments if s.slope > 0)
            max_bpb = max((s.slope / prices[g] for g, u in buyer.utilities.items()
                           for s in u.segments if s.slope > 0), default=F(0))
            assert dp >= greedy - max_bpb * unit * (items + 1)


def test_brute_force_three_node():
    inst = PureCircuitInstance(3, (PureGate(PURIFY, 0, 1, 2),
                                   PureGate(NAND, 1, 2, 0)))
    a = brute_force_pure_solve(inst)
    assert satisfaction_fraction(inst, a) == 1


def test_brute_force_single_gates():
    # single forced rows of the tables come out satisfied
    inst = PureCircuitInstance(3, (PureGate(NAND, 0, 1, 2),))
    a = brute_force_pure_solve(inst)
    assert satisfaction_fraction(inst, a) == 1


def test_brute_force_empty():
    assert brute_force_pure_solve(PureCircuitInstance(0, ())) == {}


def test_brute_force_cap():
    with pytest.raises(OracleError):
        brute_force_pure_solve(PureCircuitInstance(13, ()))


def test_search_single_good():
    m = Market(("g",), (Buyer(F(1), {"g": utility((1, None))}),))
    found = search_equilibrium(m, F(0), F(0))
    assert found is not None
    prices, alloc = found
    assert prices == {"g": F(1)}
    assert alloc[0]["g"] == 1


def test_search_ceei_cycle():
    rng = random.Random(17)
    for _ in range(3):
        market, _, _ = inverter_cycle_market(rng)
        found = search_equilibrium(market, F(1, 50), F(0))
        assert found is not None
        prices, alloc = found
        rep = verify_equilibrium(market, prices, alloc, F(1, 50), F(0))
        assert rep.accepted
