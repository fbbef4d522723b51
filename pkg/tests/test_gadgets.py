"""Unary-vector gadgets: formatting, the gate library, lowering, trimming,
and whole-circuit reduction with decode replay."""

import random
from fractions import Fraction as F

import pytest

from splcmarket.circuits import (ADD, BOT, CONST, COPY, GCircuitInstance,
                                 GGate, LAND, LESS, LNOT, LOR, NAND, NOT, OR,
                                 PURIFY, PureCircuitInstance, PureGate, SCALE,
                                 SUB, check_gcircuit_gate, check_pure_gate,
                                 validate_structure)
from splcmarket.gadgets import (GadgetError, PureBuilder, build_formatting_subgadget,
                                build_gate_gadget, decode_pure_to_gcircuit,
                                forward_simulate_pure, gcircuit_to_pure,
                                is_sorted_vector, lower_to_base, replay_removals,
                                sorted_vector_assignment, soundness_factor,
                                trim_to_strict, unary_counts, unary_value,
                                vector_size)
from splcmarket.oracles import brute_force_pure_solve

M = 7


def test_vector_size_formula():
    assert vector_size(F(1), F(1)) == 7
    assert vector_size(F(1, 2), F(1)) == 14
    assert vector_size(F(1), F(1, 100)) == 10   # 10^3 >= 900 > 9^3
    assert soundness_factor(7) == 320 * 7 ** 4


def test_forward_simulation_choices():
    b = PureBuilder()
    u, v = b.fresh(), b.fresh()
    w = b.nand(u, v)
    a = forward_simulate_pure(b.gates, {u: 1, v: 1})
    assert a[w] == 0
    a = forward_simulate_pure(b.gates, {u: 0, v: BOT})
    assert a[w] == 1

    b2 = PureBuilder()
    src = b2.fresh()
    x, y = b2.purify(src)
    a = forward_simulate_pure(b2.gates, {src: BOT})
    assert (a[x], a[y]) == (0, BOT)
    assert all(check_pure_gate(g, a) for g in b2.gates)


def test_forward_simulation_detects_cycles():
    gates = (PureGate(NOT, 0, 1), PureGate(NOT, 1, 0))
    with pytest.raises(GadgetError):
        forward_simulate_pure(gates, {})


def test_unary_decode():
    nodes = list(range(M))
    ones = {n: 1 for n in nodes}
    assert unary_value(ones, nodes) == 1
    sorted_a = sorted_vector_assignment(nodes, 3, 1, 3)
    assert unary_value(sorted_a, nodes) == F(3, 7)
    assert is_sorted_vector(sorted_a, nodes)


def test_formatting_claim_bound():
    fmt = build_formatting_subgadget(M)
    for zeros in range(M + 1):
        for bots in range(3):
            ones = M - zeros - bots
            if ones < 0:
                continue
            frontier = sorted_vector_assignment(fmt.u_nodes, zeros, bots, ones)
            a = forward_simulate_pure(fmt.gates, frontier)
            assert all(check_pure_gate(g, a) for g in fmt.gates)
            z, o, bb = unary_counts(a, fmt.outputs)
            assert ones <= o <= ones + bots
            assert bb <= 1
            assert is_sorted_vector(a, fmt.outputs)


def test_formatting_accounting():
    fmt = build_formatting_subgadget(M)
    # the paper-style unit count (comparators count once) meets M^4/2 + 2M^2
    units = fmt.trace.purify_gates + fmt.trace.comparator_count
    assert units <= M ** 4 / 2 + 2 * M ** 2
    assert fmt.trace.comparator_count == (M * M) * (M * M - 1) // 2


def test_copy_gadget_uses_2m_gates():
    g = build_gate_gadget(COPY, M)
    assert g.trace.gate_count == 2 * M


def test_gadget_lowered_counts():
    for kind, c in [(ADD, None), (SUB, None), (SCALE, F(3, 7)), (LESS, None),
                    (LOR, None), (LAND, None), (LNOT, None), (COPY, None),
                    (CONST, F(2, 7))]:
        g = build_gate_gadget(kind, M, c)
        lowered, _ = lower_to_base(g.gates, 10 ** 6)
        assert len(lowered) <= 20 * M ** 4


def _simulate_gadget(gadget, u1, v1=None, u_bots=0, v_bots=0):
    frontier = sorted_vector_assignment(gadget.u_nodes, M - u1 - u_bots, u_bots, u1)
    if gadget.v_nodes is not None:
        frontier.update(sorted_vector_assignment(
            gadget.v_nodes, M - v1 - v_bots, v_bots, v1))
    frontier.update(dict(gadget.constants))
    a = forward_simulate_pure(gadget.gates, frontier)
    return unary_counts(a, gadget.outputs)[1], a


def test_add_gadget_bound_spotcheck():
    g = build_gate_gadget(ADD, M)
    for u1, v1 in [(0, 0), (3, 2), (7, 7), (4, 4), (1, 6)]:
        w1, _ = _simulate_gadget(g, u1, v1)
        assert min(u1 + v1, M) - 2 <= w1 <= min(u1 + v1, M) + 4


def test_not_gadget_output_sorted_and_bounded():
    g = build_gate_gadget(LNOT, M)
    for u1 in range(M + 1):
        w1, a = _simulate_gadget(g, u1)
        assert M - u1 - 1 <= w1 <= M - u1 + 1
        assert is_sorted_vector(a, g.outputs)


def test_lowering_pass_semantics():
    # AND, OR, NOT simulated over {NAND, PURIFY} force the same pure rows
    b = PureBuilder()
    u, v = b.fresh(), b.fresh()
    w = b.and_(u, v)
    lowered, _ = lower_to_base(b.gates, b.next_node)
    assert all(g.kind in (NAND, PURIFY) for g in lowered)
    assert len(lowered) <= 5
    for uu in (0, 1):
        for vv in (0, 1):
            a = forward_simulate_pure(lowered, {u: uu, v: vv})
            assert a[w] == (uu and vv)
            assert all(check_pure_gate(g, a) for g in lowered)


def test_trim_to_strict_and_replay():
    # chain with a dead NAND output and a half-dead PURIFY
    b = PureBuilder()
    u = b.fresh()
    x, y = b.purify(u)                 # y will have no consumer
    z = b.nand(u, x)                   # z has no consumer either
    gates, log, _ = trim_to_strict(b.gates, b.next_node)
    produced = {n for g in gates for n in g.outputs}
    consumed = {n for g in gates for n in g.inputs}
    assert all(n in consumed for n in produced)
    # replay extends satisfying assignments over removed nodes
    base = {u: 1}
    a = forward_simulate_pure(gates, base) if gates else dict(base)
    full = replay_removals(a, log)
    for entry in log:
        assert check_pure_gate(entry.gate, full)


def test_full_reduction_small_circuit():
    gc = GCircuitInstance(("w", "y"), (
        GGate(CONST, None, None, "w", F(1, 2)),
        GGate(LNOT, "w", None, "y", None),
    ))
    red = gcircuit_to_pure(gc, F(1), F(1))
    assert red.encoding.m == 7
    assert red.encoding.kappa == 320 * 7 ** 4
    assert validate_structure(red.instance, strict=True).ok
    a = brute_force_pure_solve(red.instance)
    values, fraction = decode_pure_to_gcircuit(a, red, gc, F(1))
    assert values["w"] == F(3, 7)      # floor(c * M) / M
    assert values["y"] == F(4, 7)
    assert fraction == 1


def test_full_reduction_cyclic_circuit():
    gc = GCircuitInstance(("w", "y"), (
        GGate(LNOT, "y", None, "w", None),
        GGate(COPY, "w", None, "y", None),
    ))
    red = gcircuit_to_pure(gc, F(1), F(1))
    assert validate_structure(red.instance, strict=True).ok
    a = brute_force_pure_solve(red.instance) if red.instance.n <= 12 else None
    if a is not None:
        values, fraction = decode_pure_to_gcircuit(a, red, gc, F(1))
        assert fraction == 1


def test_full_reduction_same_variable_both_slots():
    gc = GCircuitInstance(("x", "s"), (
        GGate(CONST, None, None, "x", F(2, 7)),
        GGate(ADD, "x", "x", "s", None),
    ))
    red = gcircuit_to_pure(gc, F(1), F(1))
    assert validate_structure(red.instance, strict=True).ok


def test_gadget_traces_recorded():
    gc = GCircuitInstance(("w", "y"), (
        GGate(CONST, None, None, "w", F(1, 2)),
        GGate(SCALE, "w", None, "y", F(1, 2)),
    ))
    red = gcircuit_to_pure(gc, F(1), F(1))
    kinds = [t.kind for t in red.traces]
    assert CONST in kinds and SCALE in kinds
    assert any(t.kind == "fan-out" for t in red.traces)
