"""Inverter buyers, the ternary-circuit-to-market reduction, price decoding,
and the exact parameter validator."""

import random
from fractions import Fraction as F

import pytest

from splcmarket.circuits import (BOT, NAND, PURIFY, PureCircuitInstance,
                                 PureGate, satisfaction_fraction)
from splcmarket.hardness import (HardnessError, HardnessParams, Infeasible,
                                 InverterSpec, decode_prices, gate_audit,
                                 make_inverter, reduce_pure_to_market,
                                 solve_params, validate_params)
from splcmarket.market import eval_utility, is_simple, optimal_bundle
from support import random_strict_pure

THREE_NODE = PureCircuitInstance(3, (PureGate(PURIFY, 0, 1, 2),
                                     PureGate(NAND, 1, 2, 0)))


def test_make_inverter():
    spec = InverterSpec("in", "out", F(2, 9), F(1000))
    buyer = make_inverter(spec)
    assert buyer.budget == 1
    # input utility caps at a * t
    assert eval_utility(buyer.utilities["in"], F(1)) == F(2000, 9)
    # uncapped slope-one output
    assert eval_utility(buyer.utilities["out"], F(3)) == 3
    assert buyer.utilities["out"].never_satiated
    assert set(buyer.utilities) == {"in", "out"}

    zero_t = make_inverter(InverterSpec("in", "out", F(0), F(1000)))
    assert "in" not in zero_t.utilities  # identically zero input utility


def test_inverter_spec_validation():
    with pytest.raises(HardnessError):
        InverterSpec("g", "g", F(1, 2), F(1000))
    with pytest.raises(HardnessError):
        InverterSpec("in", "out", F(2), F(1000))


def params_for_tests():
    return solve_params(F(1, 10), F(1, 2), "pcp")


def test_solve_params_and_grid():
    params = params_for_tests()
    assert validate_params(params).ok
    # frozen by re-running the validator oracle over the grid
    assert params.a == 10 ** 5
    assert params.delta_m == F(1, 10 ** 9)

    inv = solve_params(F(1, 10), F(1, 200), "inverse-poly")
    assert validate_params(inv).ok
    assert inv.delta_m <= F(1, 10 ** 9)

    with pytest.raises(Infeasible):
        solve_params(F(1, 9), F(1, 2))


def test_validate_params_examples():
    # the computed truth for the spec's example point: the fifth inequality
    # (purify output threshold) fails at delta_m = 1e-9, passes at 1e-10
    p9 = HardnessParams(F(1, 10), F(1, 10 ** 9), F(10 ** 6), F(1, 2))
    rep = validate_params(p9)
    assert not rep.ok
    assert rep.violations == [
        "purify-output-high: 8091/1900 >= 9/2 fails"]
    p10 = HardnessParams(F(1, 10), F(1, 10 ** 10), F(10 ** 6), F(1, 2))
    assert validate_params(p10).ok

    small_a = HardnessParams(F(1, 10), F(1, 10 ** 9), F(100), F(1, 2))
    rep = validate_params(small_a)
    assert not rep.ok and any("a = 100" in v for v in rep.violations)

    big_f = HardnessParams(F(1, 10), F(1, 2), F(10 ** 6), F(1, 100))
    rep = validate_params(big_f)
    assert big_f.fault_budget == 1600 > 1
    assert any(v.startswith("fault-budget") for v in rep.violations)


def test_fault_budget_modes():
    base = dict(eps_m=F(1, 10), delta_m=F(1, 1000), a=F(10 ** 5), delta_c=F(1, 4))
    assert HardnessParams(**base, mode="pcp").fault_budget == 32 * F(1, 1000) / F(1, 4)
    assert HardnessParams(**base, mode="nonzero-spend").fault_budget == 20 * F(1, 1000)


def test_reduce_three_node_instance():
    market, decode = reduce_pure_to_market(THREE_NODE, params_for_tests())
    assert len(market.goods) == 4
    assert len(market.buyers) == 15  # 7 for the purify gadget, 8 for nand
    assert "aux:0" in market.goods
    assert is_simple(market).ok
    assert decode.gates[0].kind == PURIFY and len(decode.gates[0].buyers) == 7
    assert decode.gates[1].kind == NAND and len(decode.gates[1].buyers) == 8


def test_reduce_empty_instance():
    market, decode = reduce_pure_to_market(PureCircuitInstance(0, ()),
                                           params_for_tests())
    assert market.goods == () and market.buyers == ()


def test_reduce_rejects_non_strict():
    loose = PureCircuitInstance(3, (PureGate(PURIFY, 0, 1, 2),))
    with pytest.raises(HardnessError):
        reduce_pure_to_market(loose, params_for_tests())


def test_reduce_counts_and_degrees():
    rng = random.Random(21)
    params = params_for_tests()
    for _ in range(25):
        inst = random_strict_pure(rng, rng.randint(1, 6))
        market, _ = reduce_pure_to_market(inst, params)
        rep = is_simple(market)
        assert rep.ok
        assert len(market.buyers) <= 8 * inst.n
        assert rep.constants["max_good_degree"] <= 12
        assert rep.constants["max_buyer_degree"] <= 2


def test_decode_prices_thresholds():
    params = params_for_tests()
    a = params.a
    prices = {"n0": F(9, 2), "n1": F(100) / a, "n2": F(1), "aux:0": F(7)}
    decoded = decode_prices(prices, params)
    assert decoded == {0: 1, 1: 0, 2: BOT}  # aux goods skipped, bounds inclusive


def test_decode_monotone_in_price():
    params = params_for_tests()
    grid = [F(k, 8) for k in range(1, 48)]
    last = 0
    order = {0: 0, BOT: 1, 1: 2}
    for p in grid:
        val = decode_prices({"n0": p}, params)[0]
        assert order[val] >= last
        last = order[val]


def planted_gadget_equilibrium():
    params = params_for_tests()
    market, decode = reduce_pure_to_market(THREE_NODE, params)
    prices = {"n0": F(1116, 257), "n1": F(1398, 257), "n2": F(1017, 257),
              "aux:0": F(324, 257)}
    alloc = {}
    for i, b in enumerate(market.buyers):
        q, _, _ = optimal_bundle(b, prices, b.budget)
        alloc[i] = q
    return params, market, decode, prices, alloc


def test_gate_audit_on_exact_equilibrium():
    params, market, decode, prices, alloc = planted_gadget_equilibrium()
    audit = gate_audit(market, decode, prices, alloc, params)
    assert all(f == 0 for f in audit.wasted_money.values())
    assert not audit.faulty_goods
    assert all(a.decoded_ok for a in audit.gates)
    assert audit.satisfied_fraction == 1
    assert satisfaction_fraction(THREE_NODE, audit.decoded) == 1


def test_gate_audit_flags_wasted_money():
    params, market, decode, prices, alloc = planted_gadget_equilibrium()
    # buyer 0 additionally holds a good it has zero utility for
    waste_good = next(g for g in market.goods
                      if g not in market.buyers[0].utilities)
    alloc[0][waste_good] = alloc[0].get(waste_good, F(0)) + F(1, 2)
    audit = gate_audit(market, decode, prices, alloc, params)
    assert audit.wasted_money[waste_good] == prices[waste_good] / 2
    assert waste_good in audit.faulty_goods
    assert any(a.faulty for a in audit.gates)
