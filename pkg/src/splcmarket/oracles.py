"""Independent brute-force references used by the tests and acceptance suite.

Nothing here shares code paths with the operations it checks: the bundle
oracle is a money-discretized dynamic program, the ternary solver enumerates
assignments, and the equilibrium finder is grid search plus coordinate
descent with exact re-verification of every candidate it proposes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .circuits import BOT, PureCircuitInstance, TERNARY, check_pure_gate
from .market import (Allocation, Buyer, InfiniteOptimum, Market, Prices,
                     optimal_bundle, positive_segments, verify_equilibrium)
from .rational import frac_floor


class OracleError(RuntimeError):
    pass


@dataclass
class SearchConfig:
    price_grid: dict[str, list[Fraction]] | None = None
    default_grid: list[Fraction] = field(
        default_factory=lambda: [Fraction(1, 4), Fraction(1, 2), Fraction(1),
                                 Fraction(2), Fraction(4)])
    descent_rounds: int = 400
    max_candidates: int = 10 ** 6
    dp_unit: Fraction = Fraction(1, 1000)


# ---------------------------------------------------------------------------
# money-discretized bundle oracle

def dp_optimal_bundle(buyer: Buyer, prices: Prices, budget: Fraction,
                      unit: Fraction) -> Fraction:
    """Best utility spending money in multiples of `unit`.

    Dynamic program over money with per-segment spending caps; segment
    multiplicities are binary-split so each piece is a 0/1 knapsack item.
    The float table only picks the plan; the returned value re-evaluates the
    chosen plan exactly, so it is always the utility of a feasible bundle.
    """
    steps = budget / unit
    if steps.denominator != 1:
        raise OracleError("unit must divide the budget")
    steps = steps.numerator

    free_utility = Fraction(0)
    pieces = []  # (cost in units, exact value per unit of money * unit)
    for g, k, seg in positive_segments(buyer):
        p = prices[g]
        if p == 0:
            if seg.length is None:
                raise InfiniteOptimum(f"good {g!r} is free and never satiates")
            free_utility += seg.slope * seg.length
            continue
        cap = steps if seg.length is None else min(steps, frac_floor(p * seg.length / unit))
        value = seg.slope / p * unit  # utility per money step on this segment
        count = cap
        chunk = 1
        while count > 0:
            take = min(chunk, count)
            pieces.append((take, value * take))
            count -= take
            chunk *= 2

    dp = [0.0] * (steps + 1)
    history = []
    for cost, value in pieces:
        fval = float(value)
        history.append(dp.copy())
        for m in range(steps, cost - 1, -1):
            cand = dp[m - cost] + fval
            if cand > dp[m]:
                dp[m] = cand

    best_m = max(range(steps + 1), key=lambda m: dp[m])
    total = free_utility
    m = best_m
    for i in range(len(pieces) - 1, -1, -1):
        cost, value = pieces[i]
        before = history[i]
        if m >= cost and dp[m] > before[m]:
            total += value
            m -= cost
            dp = before  # walk the table stack downwards
        else:
            dp = before
    return total


# ---------------------------------------------------------------------------
# ternary enumeration

def brute_force_pure_solve(inst: PureCircuitInstance):
    """DFS over all 3^n assignments, pruning on fully-assigned gates."""
    if inst.n > 12:
        raise OracleError("brute force is capped at 12 nodes")
    if inst.n == 0:
        return {}
    # gates become checkable once their highest-numbered node is assigned
    by_last = [[] for _ in range(inst.n)]
    for gate in inst.gates:
        by_last[max(gate.inputs + gate.outputs)].append(gate)

    assignment: dict[int, int] = {}

    def descend(node: int) -> bool:
        for value in TERNARY:
            assignment[node] = value
            if all(check_pure_gate(g, assignment) for g in by_last[node]):
                if node + 1 == inst.n or descend(node + 1):
                    return True
        del assignment[node]
        return False

    if not descend(0):
        raise OracleError("no satisfying assignment found; the model is wrong")
    return dict(assignment)


# ---------------------------------------------------------------------------
# desk-scale equilibrium search

def _float_demands(market: Market, prices: list[float], goods: list[str]):
    """Greedy demand for every good at float prices; mirrors the exact oracle."""
    index = {g: i for i, g in enumerate(goods)}
    demand = [0.0] * len(goods)
    for buyer in market.buyers:
        items = []
        for g, k, seg in positive_segments(buyer):
            p = prices[index[g]]
            if p <= 0:
                continue
            items.append((-(float(seg.slope) / p), g, k, seg, p))
        items.sort(key=lambda t: (t[0], t[1], t[2]))
        remaining = float(buyer.budget)
        for _, g, k, seg, p in items:
            if remaining <= 0:
                break
            cost = remaining if seg.length is None else min(remaining, p * float(seg.length))
            demand[index[g]] += cost / p
            remaining -= cost
    return demand


def _descend(market: Market, start: list[float], goods: list[str], rounds: int):
    """Damped per-coordinate price adjustment on excess demand.

    Each round multiplies every price by a clipped power of its demand, which
    walks downhill on the worst clearing violation; returns the best iterate.
    Flat demand plateaus make exact root-finding per coordinate ill-posed, so
    the update is deliberately conservative.
    """
    prices = list(start)
    best = (float("inf"), list(prices))
    for _ in range(rounds):
        demands = _float_demands(market, prices, goods)
        gap = max(abs(d - 1.0) for d in demands)
        if gap < best[0]:
            best = (gap, list(prices))
        if gap < 1e-12:
            break
        for j in range(len(goods)):
            ratio = min(2.0, max(0.5, demands[j]))
            prices[j] *= ratio ** 0.35
    return best[1]


def search_equilibrium(market: Market, eps: Fraction, delta: Fraction,
                       cfg: SearchConfig | None = None):
    """Grid seeds plus coordinate descent; every candidate is re-verified
    exactly and the first accepted pair is returned, else None."""
    cfg = cfg or SearchConfig()
    goods = list(market.goods)
    if len(goods) > 5:
        raise OracleError("search is capped at 5 goods")
    grids = [(cfg.price_grid or {}).get(g, cfg.default_grid) for g in goods]

    def exact_candidate(floats):
        prices = {g: Fraction(x).limit_denominator(10 ** 6) for g, x in zip(goods, floats)}
        if any(p <= 0 for p in prices.values()):
            return None
        alloc: Allocation = {}
        for i, buyer in enumerate(market.buyers):
            try:
                quantities, _, _ = optimal_bundle(buyer, prices, buyer.budget)
            except InfiniteOptimum:
                return None
            alloc[i] = quantities
        report = verify_equilibrium(market, prices, alloc, eps, delta)
        return (prices, alloc) if report.accepted else None

    evaluations = 0
    for seed in itertools.product(*grids):
        if evaluations >= cfg.max_candidates:
            break
        evaluations += 1
        found = exact_candidate([float(p) for p in seed])
        if found:
            return found
        polished = _descend(market, [float(p) for p in seed], goods, cfg.descent_rounds)
        evaluations += 1
        found = exact_candidate(polished)
        if found:
            return found
    return None
