"""Turning an approximate circuit solution into an exact-clearing equilibrium.

The pipeline consumes a decoded (prices, allocation) pair for a preprocessed
market and runs five repairs: replace buyers whose bundles are far from
optimal, normalize every buyer onto its bang-per-buck window, burn and shift
money through a flow network until no good over-clears (pumping prices of
the residually-reachable goods when the flow stalls), spend the burned money
on the under-clearing goods, and finally rescale so that every good clears
exactly at unit demand.

Every intermediate state keeps exact budget accounting: spend + burn equals
the budget throughout step 3, and budgets bind with equality afterwards.
The ConstantLedger pins all thresholds up front: the clearing slack, the
window ratio, the burn cap, and the f/g/g'/g'' guarantee chain evaluated at
the caller's (eps_c, delta_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .encode import GCPlusEncoding, decode_gcplus_solution, market_constants
from .flow import FlowNetwork, max_flow, unsaturated_forward_reachable
from .market import (Allocation, Buyer, Market, Prices, add_money_greedy,
                     eval_utility, optimal_bundle, optimal_utility,
                     parked_quantity, positive_segments, remove_money_greedy,
                     segment_states, verify_equilibrium)

SOURCE = ("s",)
SINK = ("t",)


class PipelineError(RuntimeError):
    pass


class RoundLimitExceeded(PipelineError):
    pass


@dataclass
class ConstantLedger:
    """Concrete constants threading through the repair, with provenance.

    The paper-style f/g chain is evaluated with one master constant c that
    dominates every per-step loss bound at desk scale; the pipeline reports
    the delta it actually achieves, the chain is the promise it certifies.
    """
    d: int
    e_min: Fraction
    e_max: Fraction
    kappa: Fraction
    max_segments: int
    m_max: int
    p_min: Fraction
    p_max: Fraction
    eps_c: Fraction
    delta_c: Fraction
    c_budget: int
    c2: Fraction
    c3: Fraction
    c: Fraction
    round_ceiling: int
    notes: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_market(cls, market: Market, eps_c: Fraction, delta_c: Fraction):
        if not (0 < eps_c < 1 and 0 < delta_c < 1):
            raise PipelineError("eps_c and delta_c must lie in (0, 1)")
        d, e_min, e_max, kappa, max_segments, m_i = market_constants(market)
        m_max = max(m_i.values(), default=1)
        p_min = e_min / (8 * d * kappa)
        p_max = 2 * d * e_max
        c_budget = m_max + 1
        c2 = (4 * d * c_budget + 2) / p_min + 1
        c3 = Fraction(2)
        c = 4 * (c2 + d * c_budget / p_min + c3 + 1 / e_min + 1)
        ceiling = int(math.ceil(math.log(float(p_max / p_min) + 2.0)
                                / math.log1p(float(eps_c)))) + 2
        notes = {
            "c_budget": "budget drift of a decoded buyer, per unit of eps_c",
            "c2": "clearing slack after the decode and window preprocessing",
            "c3": "window ratio; anything above the pump factor works",
            "c": "master constant dominating every per-step loss bound",
            "round_ceiling": "pump rounds until any over-clearing price "
                             "passes the demand ceiling",
        }
        return cls(d, e_min, e_max, kappa, max_segments, m_max, p_min, p_max,
                   eps_c, delta_c, c_budget, c2, c3, c, ceiling, notes)

    @property
    def clear_slack(self) -> Fraction:
        return self.c2 * self.eps_c

    @property
    def window_ratio(self) -> Fraction:
        return 1 + self.c3 * self.eps_c

    @property
    def pump_factor(self) -> Fraction:
        return 1 + self.eps_c

    @property
    def theta(self) -> Fraction:
        """Optimality ratio below which a decoded buyer counts as broken."""
        return max(Fraction(0), 1 - self.c * self.eps_c)

    @property
    def f(self) -> Fraction:
        return self.c * self.eps_c + self.c * (self.delta_c / self.eps_c)

    @property
    def g(self) -> Fraction:
        return max(Fraction(0),
                   (1 - self.c * (self.delta_c / self.eps_c)) * (1 - self.c * self.eps_c))

    @property
    def g_prime(self) -> Fraction:
        return (1 - self.f) / (1 + self.f) * self.g

    @property
    def g_second(self) -> Fraction:
        return (1 - self.f) / (1 + self.f) * self.g_prime

    def max_usable_eps(self) -> Fraction:
        """Largest z with f(z, z^2) < 1, i.e. the step-5 scaling stays positive."""
        return Fraction(1, 2) / self.c


# ---------------------------------------------------------------------------
# windows

def marginal_bpb(buyer: Buyer, prices: Prices, row: dict[str, Fraction]):
    """Bang-per-buck of the best not-fully-bought positive segment, with its
    identity; None when every positive segment is fully bought."""
    best = None
    for g, k, seg, bought in segment_states(buyer, row):
        if seg.slope <= 0:
            continue
        if seg.length is not None and bought >= seg.length:
            continue
        bpb = seg.slope / prices[g]
        key = (-bpb, g, k)
        if best is None or key < best[0]:
            best = (key, bpb, (g, k))
    if best is None:
        return None
    return best[1], best[2]


def window(buyer: Buyer, prices: Prices, row, c3: Fraction, eps_c: Fraction):
    """[marginal/(1 + c3 eps), marginal], or None when nothing is unfilled."""
    m = marginal_bpb(buyer, prices, row)
    if m is None:
        return None
    bpb = m[0]
    return bpb / (1 + c3 * eps_c), bpb


def check_invariant(market: Market, prices: Prices, alloc: Allocation,
                    c3: Fraction, eps_c: Fraction) -> list[str]:
    """Money strictly below a buyer's window is an invariant violation."""
    violations = []
    for i, buyer in enumerate(market.buyers):
        row = alloc.get(i, {})
        win = window(buyer, prices, row, c3, eps_c)
        if win is None:
            continue
        lower = win[0]
        for g, k, seg, bought in segment_states(buyer, row):
            if bought > 0 and seg.slope / prices[g] < lower:
                violations.append(f"buyer {i} spends on segment ({g!r}, {k}) "
                                  "below its window")
        for g, q in parked_quantity(buyer, row).items():
            if q > 0:
                violations.append(f"buyer {i} parks money on {g!r} below its window")
    return violations


# ---------------------------------------------------------------------------
# step 2: replace broken buyers

def fix_broken_buyers(market: Market, prices: Prices, alloc: Allocation,
                      theta: Fraction) -> Allocation:
    """Buyers below a theta fraction of their optimum get a fresh greedy
    optimal bundle; everyone continues to meet the budget with equality."""
    out: Allocation = {}
    for i, buyer in enumerate(market.buyers):
        row = dict(alloc.get(i, {}))
        achieved = sum(
            (eval_utility(buyer.utilities[g], q) for g, q in row.items()
             if g in buyer.utilities), Fraction(0))
        opt = optimal_utility(buyer, prices, buyer.budget)
        broken = opt is not None and opt > 0 and achieved < theta * opt
        if broken:
            quantities, _, _ = optimal_bundle(buyer, prices, buyer.budget)
            row = dict(quantities)
            spent = sum((prices[g] * q for g, q in row.items()), Fraction(0))
            if spent < buyer.budget:
                add_money_greedy(buyer, prices, row, buyer.budget - spent)
        out[i] = row
    return out


# ---------------------------------------------------------------------------
# step 3 preprocessing: establish the window invariant

def establish_invariant(market: Market, prices: Prices, alloc: Allocation,
                        c3: Fraction, eps_c: Fraction) -> Allocation:
    """Drain money sitting strictly below each buyer's window onto the
    marginal segment, to a fixpoint."""
    alloc = {i: dict(alloc.get(i, {})) for i in range(len(market.buyers))}
    total_segments = sum(len(positive_segments(b)) for b in market.buyers) + 1
    for i, buyer in enumerate(market.buyers):
        row = alloc[i]
        for _ in range(4 * total_segments):
            m = marginal_bpb(buyer, prices, row)
            if m is None:
                break
            target_bpb, (tg, tk) = m
            lower = target_bpb / (1 + c3 * eps_c)
            sources = []
            for g, k, seg, bought in segment_states(buyer, row):
                if bought > 0 and seg.slope / prices[g] < lower:
                    sources.append((seg.slope / prices[g], g, k,
                                    bought * prices[g]))
            for g, q in sorted(parked_quantity(buyer, row).items()):
                sources.append((Fraction(0), g, -1, q * prices[g]))
            if not sources:
                break
            sources.sort(key=lambda s: (s[0], s[1], s[2]))
            _, sg, _, money = sources[0]
            seg = buyer.utilities[tg].segments[tk]
            states = {(g, k): b for g, k, _, b in segment_states(buyer, row)}
            room = (seg.length - states[(tg, tk)]) * prices[tg]
            move = min(money, room)
            row[sg] -= move / prices[sg]
            row[tg] = row.get(tg, Fraction(0)) + move / prices[tg]
        else:
            raise PipelineError(f"window preprocessing for buyer {i} diverged")
    return alloc


# ---------------------------------------------------------------------------
# step 3: shift-and-burn / pump-and-shift

def demands(market: Market, alloc: Allocation) -> dict[str, Fraction]:
    out = {g: Fraction(0) for g in market.goods}
    for row in alloc.values():
        for g, q in row.items():
            out[g] += q
    return out


def build_flow_network(market: Market, prices: Prices, alloc: Allocation,
                       burn: dict[int, Fraction], eps_c: Fraction,
                       over_slack: Fraction, c3: Fraction) -> FlowNetwork:
    """Source feeds each over-clearing good its excess money; in-window
    segments carry used/residual money edges; buyers drain into the sink up
    to their remaining burn allowance."""
    net = FlowNetwork()
    net.add_node(SOURCE)
    net.add_node(SINK)
    demand = demands(market, alloc)
    for g in market.goods:
        if demand[g] > 1 + over_slack:
            net.add_edge(SOURCE, ("g", g),
                         prices[g] * (demand[g] - (1 + over_slack)),
                         tag=("src", g))
    for i, buyer in enumerate(market.buyers):
        net.add_edge(("b", i), SINK, max(Fraction(0), eps_c - burn[i]),
                     tag=("burn", i))
        row = alloc.get(i, {})
        win = window(buyer, prices, row, c3, eps_c)
        if win is None:
            continue
        lower, upper = win
        for g, k, seg, bought in segment_states(buyer, row):
            if seg.slope <= 0:
                continue
            bpb = seg.slope / prices[g]
            if not (lower <= bpb <= upper):
                continue
            used = bought * prices[g]
            net.add_edge(("g", g), ("b", i), used, tag=("used", i, g, k))
            net.add_edge(("b", i), ("g", g), seg.length * prices[g] - used,
                         tag=("room", i, g, k))
    return net


def shift_and_burn(market: Market, prices: Prices, alloc: Allocation,
                   burn: dict[int, Fraction], ledger: ConstantLedger):
    """Re-runs the flow until no buyer's marginal bang-per-buck moves;
    returns the new allocation, burn ledger, and the final (solved) network."""
    alloc = {i: dict(alloc.get(i, {})) for i in range(len(market.buyers))}
    burn = dict(burn)
    total_segments = sum(len(positive_segments(b)) for b in market.buyers) + 2
    for _ in range(total_segments):
        before = [marginal_bpb(b, prices, alloc[i]) for i, b in enumerate(market.buyers)]
        net = build_flow_network(market, prices, alloc, burn, ledger.eps_c,
                                 ledger.clear_slack, ledger.c3)
        max_flow(net, SOURCE, SINK)
        for edge in net.edges:
            if edge.flow == 0:
                continue
            kind = edge.tag[0]
            if kind == "burn":
                burn[edge.tag[1]] += edge.flow
            elif kind == "used":
                _, i, g, _ = edge.tag
                alloc[i][g] = alloc[i].get(g, Fraction(0)) - edge.flow / prices[g]
            elif kind == "room":
                _, i, g, _ = edge.tag
                alloc[i][g] = alloc[i].get(g, Fraction(0)) + edge.flow / prices[g]
        after = [marginal_bpb(b, prices, alloc[i]) for i, b in enumerate(market.buyers)]
        if before == after:
            return alloc, burn, net
    raise PipelineError("shift-and-burn did not stabilize")


def restricted_flow_graph(net: FlowNetwork):
    """Goods and buyers reachable from the source along unsaturated edges."""
    reach = unsaturated_forward_reachable(net, {SOURCE})
    goods = {node[1] for node in reach if node[0] == "g"}
    buyers = {node[1] for node in reach if node[0] == "b"}
    return goods, buyers


def pump_and_shift(market: Market, prices: Prices, alloc: Allocation,
                   pumped: set[str], c3: Fraction, eps_c: Fraction):
    """Raise the pumped goods' prices and re-fill each affected buyer's
    segments in bang-per-buck order from its worst money."""
    new_prices = {g: p * (1 + eps_c) if g in pumped else p
                  for g, p in prices.items()}
    out: Allocation = {}
    for i, buyer in enumerate(market.buyers):
        row = alloc.get(i, {})
        interested = any(g in pumped for g in buyer.utilities
                         if not buyer.utilities[g].is_zero)
        if not interested and not any(g in pumped for g in row):
            out[i] = dict(row)
            continue
        out[i] = _shift_buyer(buyer, prices, new_prices, row, c3, eps_c)
    return new_prices, out


def _shift_buyer(buyer: Buyer, old_prices: Prices, new_prices: Prices,
                 row: dict[str, Fraction], c3: Fraction, eps_c: Fraction):
    states = segment_states(buyer, row)
    money = {(g, k): bought * old_prices[g] for g, k, _, bought in states}
    target_units = {(g, k): bought for g, k, _, bought in states}
    parked = {g: q * old_prices[g] for g, q in parked_quantity(buyer, row).items()}
    segments = {(g, k): seg for g, k, seg, _ in states}

    def new_bpb(key):
        g, k = key
        return segments[key].slope / new_prices[g]

    order = sorted((key for key in segments if segments[key].slope > 0),
                   key=lambda key: (-new_bpb(key), key))
    for key in order:
        g, k = key
        want = target_units[key] * new_prices[g]  # money restoring old units
        while money[key] < want:
            sources = [(new_bpb(k2), k2) for k2 in segments
                       if money[k2] > 0 and new_bpb(k2) < new_bpb(key)]
            sources += [(Fraction(0), ("~parked", pg)) for pg, q in sorted(parked.items())
                        if q > 0]
            if not sources:
                return _rebuild_row(buyer, money, parked, new_prices)
            sources.sort(key=lambda s: (s[0], s[1]))
            _, src = sources[0]
            if src[0] == "~parked":
                pool = parked
                src_key = src[1]
            else:
                pool = money
                src_key = src
            move = min(pool[src_key], want - money[key])
            pool[src_key] -= move
            money[key] += move
    return _rebuild_row(buyer, money, parked, new_prices)


def _rebuild_row(buyer: Buyer, money, parked, prices: Prices):
    row: dict[str, Fraction] = {}
    for (g, k), amount in money.items():
        if amount:
            row[g] = row.get(g, Fraction(0)) + amount / prices[g]
    for g, amount in parked.items():
        if amount:
            row[g] = row.get(g, Fraction(0)) + amount / prices[g]
    return row


def step3(market: Market, prices: Prices, alloc: Allocation,
          burn: dict[int, Fraction], ledger: ConstantLedger, trace=None):
    """Alternate shift-and-burn and pump-and-shift until nothing over-clears."""
    rounds = 0
    while True:
        alloc, burn, net = shift_and_burn(market, prices, alloc, burn, ledger)
        if trace is not None:
            trace.append(_snapshot("step3:shift-and-burn", prices, alloc, burn, net))
        demand = demands(market, alloc)
        if all(demand[g] <= 1 + ledger.clear_slack for g in market.goods):
            return prices, alloc, burn
        rounds += 1
        if rounds > ledger.round_ceiling:
            raise RoundLimitExceeded(f"over-clearing survived {rounds} pump rounds")
        pumped, _ = restricted_flow_graph(net)
        prices, alloc = pump_and_shift(market, prices, alloc, pumped,
                                       ledger.c3, ledger.eps_c)
        if trace is not None:
            trace.append(_snapshot("step3:pump-and-shift", prices, alloc, burn))


# ---------------------------------------------------------------------------
# step 4: spend the burned money, fix under-clearing

def step4(market: Market, prices: Prices, alloc: Allocation,
          burn: dict[int, Fraction], ledger: ConstantLedger) -> Allocation:
    """Burned money goes to under-clearing goods; leftover burn spreads evenly
    over all goods; a remaining deficit is covered by taxing every buyer's
    worst segments equally.  Assignments are lowest-index first."""
    alloc = {i: dict(alloc.get(i, {})) for i in range(len(market.buyers))}
    burn = dict(burn)
    low = 1 - ledger.clear_slack

    def give(i: int, g: str, money: Fraction):
        alloc[i][g] = alloc[i].get(g, Fraction(0)) + money / prices[g]

    # phase 1: burned money onto under-clearing goods
    for g in market.goods:
        deficit = (low - demands(market, alloc)[g]) * prices[g]
        for i in range(len(market.buyers)):
            if deficit <= 0:
                break
            amount = min(burn[i], deficit)
            if amount > 0:
                give(i, g, amount)
                burn[i] -= amount
                deficit -= amount

    remaining_burn = sum(burn.values(), Fraction(0))
    demand = demands(market, alloc)
    under = [g for g in market.goods if demand[g] < low]

    if remaining_burn > 0 and not under:
        # phase 2: spread the leftover evenly across all goods
        share = remaining_burn / len(market.goods)
        for g in market.goods:
            need = share
            for i in range(len(market.buyers)):
                if need == 0:
                    break
                amount = min(burn[i], need)
                if amount > 0:
                    give(i, g, amount)
                    burn[i] -= amount
                    need -= amount
    elif under and remaining_burn == 0:
        # phase 3: tax everyone's worst segments to clear the deficit
        deficits = {g: max(Fraction(0), (low - demand[g]) * prices[g]) for g in under}
        total = sum(deficits.values(), Fraction(0))
        share = total / len(market.buyers)
        contrib = {}
        for i, buyer in enumerate(market.buyers):
            remove_money_greedy(buyer, prices, alloc[i], share)
            contrib[i] = share
        for g in market.goods:
            need = deficits.get(g, Fraction(0))
            for i in range(len(market.buyers)):
                if need == 0:
                    break
                amount = min(contrib[i], need)
                if amount > 0:
                    give(i, g, amount)
                    contrib[i] -= amount
                    need -= amount
    return alloc


# ---------------------------------------------------------------------------
# step 5: exact clearing

def step5(market: Market, prices: Prices, alloc: Allocation,
          ledger: ConstantLedger):
    """Scale demand to exactly 1 - f, respend the surplus evenly, then scale
    prices so every good clears at exactly one unit."""
    f = ledger.f
    if f >= 1:
        raise PipelineError("f >= 1; pick a smaller eps_c")
    demand = demands(market, alloc)
    for g in market.goods:
        if not (1 - f <= demand[g] <= 1 + f):
            raise PipelineError(
                f"good {g!r} clears to {demand[g]}, outside the ledger's f-band")

    # 5.1: uniform per-good scaling to demand exactly 1 - f
    x1: Allocation = {
        i: {g: q * (1 - f) / demand[g] for g, q in row.items()}
        for i, row in alloc.items()
    }

    # 5.2: spend each buyer's surplus at S_i / P units of every good
    price_sum = sum(prices.values(), Fraction(0))
    total_extra = Fraction(0)
    x2: Allocation = {}
    for i, buyer in enumerate(market.buyers):
        row = dict(x1.get(i, {}))
        spend = sum((prices[g] * q for g, q in row.items()), Fraction(0))
        surplus = buyer.budget - spend
        if surplus < 0:
            raise PipelineError(f"buyer {i} overspends after 5.1")
        if surplus > 0:
            bump = surplus / price_sum
            for g in market.goods:
                row[g] = row.get(g, Fraction(0)) + bump
            total_extra += bump
        x2[i] = row

    level = 1 - f + total_extra
    if not (1 - f <= level <= 1 + f):
        raise PipelineError("common demand level escaped the f-band")

    # 5.3: scale prices by the common level, quantities down by it
    p3 = {g: p * level for g, p in prices.items()}
    x3 = {i: {g: q / level for g, q in row.items()} for i, row in x2.items()}
    return p3, x3


# ---------------------------------------------------------------------------
# the full chain

@dataclass
class Snapshot:
    stage: str
    prices: Prices
    alloc: Allocation
    burn: dict[int, Fraction]
    flow_edges: list | None = None


def _snapshot(stage, prices, alloc, burn, net=None) -> Snapshot:
    edges = None
    if net is not None:
        edges = [(e.src, e.dst, e.cap, e.flow, e.tag) for e in net.edges]
    return Snapshot(stage, dict(prices), {i: dict(r) for i, r in alloc.items()},
                    dict(burn), edges)


@dataclass
class RepairResult:
    prices: Prices
    alloc: Allocation
    report: object
    ledger: ConstantLedger
    trace: list[Snapshot]


def repair_steps(market: Market, prices: Prices, alloc: Allocation,
                 ledger: ConstantLedger, collect_trace: bool = True):
    """Steps 2-5 on an already-decoded state."""
    trace: list[Snapshot] = []
    burn = {i: Fraction(0) for i in range(len(market.buyers))}

    def snap(stage, p, x, b, net=None):
        if collect_trace:
            trace.append(_snapshot(stage, p, x, b, net))

    snap("input", prices, alloc, burn)
    alloc = fix_broken_buyers(market, prices, alloc, ledger.theta)
    snap("step2:fix-broken", prices, alloc, burn)
    alloc = establish_invariant(market, prices, alloc, ledger.c3, ledger.eps_c)
    snap("step3:invariant", prices, alloc, burn)
    prices, alloc, burn = step3(market, prices, alloc, burn, ledger,
                                trace if collect_trace else None)
    alloc = step4(market, prices, alloc, burn, ledger)
    burn = {i: Fraction(0) for i in burn}
    snap("step4:under-clearing", prices, alloc, burn)
    prices, alloc = step5(market, prices, alloc, ledger)
    snap("step5:exact", prices, alloc, burn)
    return prices, alloc, trace


def repair_full(market: Market, enc: GCPlusEncoding, sol, eps_c: Fraction,
                delta_c: Fraction, collect_trace: bool = True) -> RepairResult:
    """Decode a circuit solution and repair it into an exact equilibrium."""
    ledger = ConstantLedger.from_market(market, eps_c, delta_c)
    prices, alloc = decode_gcplus_solution(market, enc, sol)
    prices, alloc, trace = repair_steps(market, prices, alloc, ledger,
                                        collect_trace)
    report = verify_equilibrium(market, prices, alloc, Fraction(0),
                                max(Fraction(0), 1 - ledger.g_second))
    return RepairResult(prices, alloc, report, ledger, trace)
