"""Encoding a preprocessed market as a bounded arithmetic circuit.

One price variable per good in [P_min, P_max] with P_min = e_min/(8 d kappa)
and P_max = 2 d e_max, and one spending variable per positive-slope segment
in [0, length * P_max].  The fixed-point constraints are: prices absorb
excess demand, a budget signal pushes every segment of an over/under
spending buyer down/up, pairwise cross-multiplied bang-per-buck comparators
rank segments without division, and each spending variable moves by its
aggregate signal, truncated to [0, price * length].

Only the decode direction is exercised end to end: a solution's p and q
variables are read back into prices and an allocation, and each buyer's
budget is then balanced exactly by greedy addition or removal of money.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .circuits import (ADD, CONST, COPY, GCircuitPlusInstance, GGate, LESS,
                       MAXC, SCALE, SUB, RealAssignment)
from .market import (Allocation, Buyer, Market, Prices, add_money_greedy,
                     positive_segments, remove_money_greedy)


class EncodeError(ValueError):
    pass


def price_var(good: str) -> str:
    return f"p:{good}"


def spend_var(buyer: int, good: str, k: int) -> str:
    return f"q:{buyer}:{good}:{k}"


@dataclass
class GCPlusEncoding:
    instance: GCircuitPlusInstance
    p_min: Fraction
    p_max: Fraction
    price_vars: dict[str, str]                       # good -> variable
    spend_vars: dict[tuple[int, str, int], str]      # (buyer, good, k) -> variable
    segment_count: dict[int, int]                    # M_i per buyer
    gate_count_per_good: dict[str, int]
    gate_count_per_buyer: dict[int, int]


class _CircuitSink:
    def __init__(self):
        self.gates: list[GGate] = []
        self.bounds: dict[str, tuple[Fraction, Fraction]] = {}
        self.counter = 0

    def var(self, lo: Fraction, hi: Fraction, name: str | None = None) -> str:
        if name is None:
            name = f"t:{self.counter}"
            self.counter += 1
        self.bounds[name] = (lo, hi)
        return name

    def gate(self, kind, u, v, w, c=None) -> str:
        self.gates.append(GGate(kind, u, v, w, c))
        return w

    def chain_sum(self, terms: list[str], eps: Fraction) -> str:
        """Left fold of additions with non-truncating bounds."""
        acc = terms[0]
        for term in terms[1:]:
            lo = self.bounds[acc][0] + self.bounds[term][0] - eps
            hi = self.bounds[acc][1] + self.bounds[term][1] + eps
            acc = self.gate(ADD, acc, term, self.var(lo, hi))
        return acc


def market_constants(market: Market):
    """d, e_min, e_max, kappa, max segment count, per-buyer M_i."""
    degrees_b = []
    good_deg = {g: 0 for g in market.goods}
    slopes = []
    max_segments = 0
    m_i = {}
    for i, b in enumerate(market.buyers):
        deg = 0
        count = 0
        for g, u in b.utilities.items():
            if u.is_zero:
                continue
            deg += 1
            good_deg[g] += 1
            max_segments = max(max_segments, len(u.segments))
            for seg in u.segments:
                if seg.slope > 0:
                    slopes.append(seg.slope)
                    count += 1
        degrees_b.append(deg)
        m_i[i] = count
    d = max(max(degrees_b, default=0), max(good_deg.values(), default=0), 1)
    e_min = min(b.budget for b in market.buyers)
    e_max = max(b.budget for b in market.buyers)
    kappa = max(slopes, default=Fraction(1))
    return d, e_min, e_max, kappa, max_segments, m_i


def encode_market(market: Market, eps_c: Fraction) -> GCPlusEncoding:
    """Build the fixed-point instance for a preprocessed market."""
    for i, b in enumerate(market.buyers):
        for g, u in b.utilities.items():
            for seg in u.segments:
                if seg.length is None:
                    raise EncodeError(f"utility ({i}, {g!r}) has an infinite segment; "
                                      "preprocess the market first")
                if seg.length > 2:
                    raise EncodeError(f"utility ({i}, {g!r}) has a segment longer than 2")
    d, e_min, e_max, kappa, _, m_i = market_constants(market)
    p_min = e_min / (8 * d * kappa)
    p_max = 2 * d * e_max

    sink = _CircuitSink()
    one = sink.gate(CONST, None, None, sink.var(Fraction(0), Fraction(2), "one"),
                    Fraction(1))

    prices = {g: sink.var(p_min, p_max, price_var(g)) for g in market.goods}
    spends: dict[tuple[int, str, int], str] = {}
    by_good: dict[str, list[str]] = {g: [] for g in market.goods}
    by_buyer: dict[int, list[tuple[str, int, str]]] = {}
    for i, b in enumerate(market.buyers):
        by_buyer[i] = []
        for g, k, seg in positive_segments(b):
            v = sink.var(Fraction(0), seg.length * p_max, spend_var(i, g, k))
            spends[(i, g, k)] = v
            by_good[g].append(v)
            by_buyer[i].append((g, k, v))

    gates_before = len(sink.gates)
    per_good = {}
    for g in market.goods:
        start = len(sink.gates)
        terms = by_good[g]
        if not terms:
            raise EncodeError(f"good {g!r} has no interested segment")
        total = sink.chain_sum(terms, eps_c)
        lo = sink.bounds[total][0] - p_max - eps_c
        hi = sink.bounds[total][1] - p_min + eps_c
        excess = sink.gate(SUB, total, prices[g], sink.var(lo, hi))
        nxt = sink.gate(ADD, prices[g], excess, sink.var(p_min, p_max))
        sink.gate(COPY, nxt, None, prices[g])
        per_good[g] = len(sink.gates) - start

    def signal_pm_one(flag: str) -> str:
        """Rescale a [0, 1] comparison flag to roughly {-1, +1}."""
        two = sink.gate(SCALE, flag, None,
                        sink.var(Fraction(-1), Fraction(3)), Fraction(2))
        return sink.gate(SUB, two, one, sink.var(Fraction(-2), Fraction(2)))

    per_buyer = {}
    for i, b in enumerate(market.buyers):
        start = len(sink.gates)
        segs = by_buyer[i]
        spent = sink.chain_sum([v for _, _, v in segs], eps_c)
        budget = sink.gate(CONST, None, None,
                           sink.var(b.budget - 1, b.budget + 1), b.budget)
        under = sink.gate(LESS, spent, budget,
                          sink.var(Fraction(0), Fraction(1)))
        budget_signal = signal_pm_one(under)

        comparators: dict[tuple, str] = {}
        for g, k, _ in segs:
            s_here = b.utilities[g].segments[k].slope
            for g2, k2, _ in segs:
                if (g, k) == (g2, k2):
                    continue
                s_there = b.utilities[g2].segments[k2].slope
                lhs = sink.gate(SCALE, prices[g2], None,
                                sink.var(Fraction(0), s_here * p_max + 1), s_here)
                rhs = sink.gate(SCALE, prices[g], None,
                                sink.var(Fraction(0), s_there * p_max + 1), s_there)
                worse = sink.gate(LESS, rhs, lhs,
                                  sink.var(Fraction(0), Fraction(1)))
                comparators[(g, k, g2, k2)] = signal_pm_one(worse)

        weight = Fraction(m_i[i] + 1)
        for g, k, qv in segs:
            received = []
            for g2, k2, _ in segs:
                if (g, k) == (g2, k2):
                    continue
                label = comparators[(g2, k2, g, k)]
                received.append(sink.gate(
                    MAXC, label, None, sink.var(Fraction(-1), Fraction(2)),
                    Fraction(0)))
            weighted = sink.gate(SCALE, budget_signal, None,
                                 sink.var(-weight - 1, weight + 1), weight)
            total_signal = sink.chain_sum(received + [weighted], eps_c)

            seg = b.utilities[g].segments[k]
            t_lo = sink.bounds[qv][0] + sink.bounds[total_signal][0] - eps_c
            t_hi = sink.bounds[qv][1] + sink.bounds[total_signal][1] + eps_c
            moved = sink.gate(ADD, qv, total_signal, sink.var(t_lo, t_hi))
            cap = sink.gate(SCALE, prices[g], None,
                            sink.var(Fraction(0), seg.length * p_max + 1),
                            seg.length)
            over = sink.gate(SUB, moved, cap,
                             sink.var(Fraction(0), t_hi - sink.bounds[cap][0] + 1))
            capped = sink.gate(SUB, moved, over, sink.var(t_lo - 1, t_hi + 1))
            nxt = sink.gate(MAXC, capped, None,
                            sink.var(Fraction(0), seg.length * p_max),
                            Fraction(0))
            sink.gate(COPY, nxt, None, qv)
        per_buyer[i] = len(sink.gates) - start

    lo = min(l for l, _ in sink.bounds.values())
    hi = max(h for _, h in sink.bounds.values())
    bit_budget = max(
        max(abs(g.c.numerator).bit_length() + g.c.denominator.bit_length()
            for g in sink.gates if g.c is not None), 1)
    inst = GCircuitPlusInstance(tuple(sink.bounds), tuple(sink.gates),
                                dict(sink.bounds), lo, hi, bit_budget)
    return GCPlusEncoding(inst, p_min, p_max, {g: price_var(g) for g in market.goods},
                          spends, m_i, per_good, per_buyer)


# ---------------------------------------------------------------------------
# reading a solution back into market terms

def decode_gcplus_solution(market: Market, enc: GCPlusEncoding,
                           sol: RealAssignment):
    """Prices and allocation from a solution, with budgets balanced exactly.

    Buyers left underspending add money greedily in bang-per-buck order;
    overspending buyers remove money from their worst segments first.  If a
    buyer's positive segments fill up, leftover money parks on its first
    utility good (zero marginal value, harmless for clearing accounting).
    """
    prices: Prices = {}
    for g in market.goods:
        p = sol[enc.price_vars[g]]
        if not (enc.p_min <= p <= enc.p_max):
            raise EncodeError(f"price of {g!r} out of bounds")
        prices[g] = p

    alloc: Allocation = {}
    for i, b in enumerate(market.buyers):
        money = {}
        for g, k, seg in positive_segments(b):
            q = sol[enc.spend_vars[(i, g, k)]]
            money[g] = money.get(g, Fraction(0)) + q
        row = {g: q / prices[g] for g, q in money.items() if q > 0}
        alloc[i] = balance_budget(b, prices, row)
    return prices, alloc


def solution_from_state(market: Market, enc: GCPlusEncoding, prices: Prices,
                        alloc: Allocation) -> RealAssignment:
    """Write a (prices, allocation) pair into the p/q variables of a solution.

    Only the variables the decoder reads are filled; intermediate circuit
    variables are not reconstructed.
    """
    from .market import segment_states

    sol: RealAssignment = {}
    for g in market.goods:
        sol[enc.price_vars[g]] = prices[g]
    for i, b in enumerate(market.buyers):
        row = alloc.get(i, {})
        for g, k, seg, bought in segment_states(b, row):
            key = (i, g, k)
            if key in enc.spend_vars:
                sol[enc.spend_vars[key]] = bought * prices[g]
    return sol


def balance_budget(buyer: Buyer, prices: Prices, row: dict[str, Fraction]):
    """Adjust a bundle to spend the budget exactly, greedily by bang-per-buck."""
    row = dict(row)
    spend = sum((prices[g] * v for g, v in row.items()), Fraction(0))
    missing = buyer.budget - spend
    if missing > 0:
        add_money_greedy(buyer, prices, row, missing)
    elif missing < 0:
        remove_money_greedy(buyer, prices, row, -missing)
    return row
