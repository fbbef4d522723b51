"""Fisher and exchange markets with separable piecewise-linear concave utilities.

A utility for one good is a list of (slope, length) segments with strictly
decreasing slopes; the last segment may have infinite length.  Everything is
exact: prices, budgets, quantities and utilities are Fractions, and the
demand oracle / equilibrium verifier never touch floating point.

The verifier follows the two-sided contract: a price vector and allocation
are accepted at (eps, delta) iff every good's demand is within eps of the
unit supply and every buyer's bundle is within budget and achieves at least
a (1 - delta) fraction of its optimal utility at those prices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .rational import rat

Prices = dict[str, Fraction]
# Allocation rows: buyer index -> good -> quantity (missing = 0).
Allocation = dict[int, dict[str, Fraction]]


class MarketError(ValueError):
    pass


class InfiniteOptimum(MarketError):
    """A zero-price good with an unbounded positive-slope segment."""


@dataclass(frozen=True)
class Segment:
    slope: Fraction
    length: Fraction | None  # None encodes infinite length

    def __post_init__(self):
        if self.slope < 0:
            raise MarketError("segment slope must be >= 0")
        if self.length is not None and self.length <= 0:
            raise MarketError("segment length must be > 0")


@dataclass(frozen=True)
class SplcUtility:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        for a, b in zip(self.segments, self.segments[1:]):
            if a.length is None:
                raise MarketError("only the last segment may be infinite")
            if not a.slope > b.slope:
                raise MarketError("slopes must strictly decrease")

    @property
    def is_zero(self) -> bool:
        return all(s.slope == 0 for s in self.segments)

    @property
    def never_satiated(self) -> bool:
        return bool(self.segments) and self.segments[-1].length is None and self.segments[-1].slope > 0


def utility(*pairs) -> SplcUtility:
    """Shorthand: utility((slope, length), ...); length None = infinite."""
    segs = tuple(Segment(rat(s), None if l is None else rat(l)) for s, l in pairs)
    return SplcUtility(segs)


@dataclass(frozen=True)
class Buyer:
    budget: Fraction
    utilities: dict[str, SplcUtility] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget <= 0:
            raise MarketError("budget must be > 0")


@dataclass(frozen=True)
class Market:
    goods: tuple[str, ...]
    buyers: tuple[Buyer, ...]

    def __post_init__(self):
        known = set(self.goods)
        if len(known) != len(self.goods):
            raise MarketError("duplicate good ids")
        for i, b in enumerate(self.buyers):
            for g in b.utilities:
                if g not in known:
                    raise MarketError(f"buyer {i} references unknown good {g!r}")


@dataclass(frozen=True)
class ExchangeMarket:
    goods: tuple[str, ...]
    buyers: tuple[Buyer, ...]              # Buyer.budget is ignored
    endowments: tuple[dict[str, Fraction], ...]  # one map per buyer


# ---------------------------------------------------------------------------
# utility evaluation and canonical segment packing

def eval_utility(u: SplcUtility, x: Fraction) -> Fraction:
    """Exact piecewise-linear value of u at quantity x >= 0."""
    if x < 0:
        raise MarketError("quantity must be >= 0")
    total = Fraction(0)
    remaining = x
    for seg in u.segments:
        if seg.length is None or remaining <= seg.length:
            return total + seg.slope * remaining
        total += seg.slope * seg.length
        remaining -= seg.length
    return total  # beyond the last finite segment the function is flat


def segment_amounts(u: SplcUtility, x: Fraction) -> list[Fraction]:
    """Split a quantity across segments in prefix order (earlier filled first).

    Quantity beyond the last segment is not represented here; callers that
    track parked spending handle it separately.
    """
    out = []
    remaining = x
    for seg in u.segments:
        if seg.length is None:
            out.append(remaining)
            remaining = Fraction(0)
        else:
            take = min(remaining, seg.length)
            out.append(take)
            remaining -= take
    return out


def total_positive_length(u: SplcUtility) -> Fraction | None:
    """Sum of lengths of positive-slope segments; None when unbounded."""
    total = Fraction(0)
    for seg in u.segments:
        if seg.slope > 0:
            if seg.length is None:
                return None
            total += seg.length
    return total


# ---------------------------------------------------------------------------
# greedy demand oracle

def positive_segments(buyer: Buyer) -> list[tuple[str, int, Segment]]:
    out = []
    for g in sorted(buyer.utilities):
        for k, seg in enumerate(buyer.utilities[g].segments):
            if seg.slope > 0:
                out.append((g, k, seg))
    return out


def bpb_order(items: list[tuple[str, int, Segment]], prices: Prices):
    """Sort segments by decreasing bang-per-buck, ties by (good, index).

    Zero-price segments have infinite bang-per-buck and come first.
    """
    def key(item):
        g, k, seg = item
        p = prices[g]
        if p == 0:
            return (0, Fraction(0), g, k)
        return (1, -(seg.slope / p), g, k)

    return sorted(items, key=key)


def optimal_bundle(buyer: Buyer, prices: Prices, budget: Fraction):
    """Greedy utility maximization under a budget.

    Returns (quantities, spending, utility) where quantities maps good ->
    units, spending maps (good, segment index) -> money.  Fills segments in
    strictly decreasing bang-per-buck order and spends exactly
    min(budget, cost of all positive-slope segments).

    Raises InfiniteOptimum when a zero-price good has an unbounded
    positive-slope segment.
    """
    items = positive_segments(buyer)
    for g, k, seg in items:
        if prices[g] == 0 and seg.length is None:
            raise InfiniteOptimum(f"good {g!r} is free and never satiates")

    quantities: dict[str, Fraction] = {}
    spending: dict[tuple[str, int], Fraction] = {}
    util = Fraction(0)
    remaining = budget
    for g, k, seg in bpb_order(items, prices):
        price = prices[g]
        if price == 0:
            quantities[g] = quantities.get(g, Fraction(0)) + seg.length
            util += seg.slope * seg.length
            continue
        if remaining == 0:
            break
        cost = None if seg.length is None else price * seg.length
        spend = remaining if cost is None else min(remaining, cost)
        amount = spend / price
        quantities[g] = quantities.get(g, Fraction(0)) + amount
        spending[(g, k)] = spend
        util += seg.slope * amount
        remaining -= spend
    return quantities, spending, util


def optimal_utility(buyer: Buyer, prices: Prices, budget: Fraction) -> Fraction | None:
    """Optimal utility, or None when it is infinite."""
    try:
        return optimal_bundle(buyer, prices, budget)[2]
    except InfiniteOptimum:
        return None


def segment_states(buyer: Buyer, row: dict[str, Fraction]):
    """(good, k, segment, bought amount) under canonical prefix packing."""
    out = []
    for g in sorted(buyer.utilities):
        u = buyer.utilities[g]
        amounts = segment_amounts(u, row.get(g, Fraction(0)))
        for k, seg in enumerate(u.segments):
            out.append((g, k, seg, amounts[k]))
    return out


def parked_quantity(buyer: Buyer, row: dict[str, Fraction]) -> dict[str, Fraction]:
    """Units held beyond each good's segment list (flat-utility spending)."""
    out = {}
    for g, q in row.items():
        u = buyer.utilities.get(g)
        if u and any(s.length is None for s in u.segments):
            continue
        covered = sum((s.length for s in u.segments), Fraction(0)) if u else Fraction(0)
        if q > covered:
            out[g] = q - covered
    return out


def add_money_greedy(buyer: Buyer, prices: Prices, row: dict[str, Fraction],
                     amount: Fraction) -> None:
    """Spend extra money on the best unfilled segments; park any leftover on
    the buyer's first good once every positive-slope segment is full."""
    states = {(g, k): bought for g, k, _, bought in segment_states(buyer, row)}
    for g, k, seg in bpb_order(positive_segments(buyer), prices):
        if amount == 0:
            return
        price = prices[g]
        if price == 0:
            continue
        room = None if seg.length is None else seg.length - states[(g, k)]
        if room is not None and room <= 0:
            continue
        cost = amount if room is None else min(amount, room * price)
        row[g] = row.get(g, Fraction(0)) + cost / price
        amount -= cost
    if amount > 0:
        goods = sorted(buyer.utilities) or sorted(prices)
        g = goods[0]
        row[g] = row.get(g, Fraction(0)) + amount / prices[g]


def remove_money_greedy(buyer: Buyer, prices: Prices, row: dict[str, Fraction],
                        amount: Fraction) -> None:
    """Take money off the bundle, parked spending first, then worst segments."""
    parked = parked_quantity(buyer, row)
    for g in sorted(parked):
        if amount == 0:
            return
        take = min(parked[g] * prices[g], amount)
        row[g] -= take / prices[g]
        amount -= take
    states = segment_states(buyer, row)
    order = bpb_order([(g, k, seg) for g, k, seg, _ in states if seg.slope > 0], prices)
    bought = {(g, k): b for g, k, _, b in states}
    for g, k, seg in reversed(order):
        if amount == 0:
            return
        have = bought[(g, k)]
        if have <= 0:
            continue
        take = min(amount, have * prices[g])
        row[g] -= take / prices[g]
        amount -= take
    if amount > 0:
        raise MarketError("cannot remove more money than the buyer spends")


# ---------------------------------------------------------------------------
# equilibrium verification

@dataclass
class GoodReport:
    demand: Fraction
    gap: Fraction  # |demand - 1|


@dataclass
class BuyerReport:
    spend: Fraction
    achieved: Fraction
    optimal: Fraction | None  # None = infinite optimum
    ratio: Fraction | None    # achieved / optimal; None when optimal is infinite
    min_delta: Fraction
    over_budget: bool


@dataclass
class EquilibriumReport:
    accepted: bool
    eps: Fraction
    delta: Fraction
    min_eps: Fraction
    min_delta: Fraction
    goods: dict[str, GoodReport]
    buyers: list[BuyerReport]
    violations: list[str]


def _verify(goods, buyers, budgets, prices, alloc, eps, delta) -> EquilibriumReport:
    good_reports = {}
    violations = []
    min_eps = Fraction(0)
    for g in goods:
        demand = sum((alloc.get(i, {}).get(g, Fraction(0)) for i in range(len(buyers))), Fraction(0))
        gap = abs(demand - 1)
        good_reports[g] = GoodReport(demand=demand, gap=gap)
        min_eps = max(min_eps, gap)
        if gap > eps:
            violations.append(f"good {g!r} clears to {demand}, off by {gap} > eps")

    buyer_reports = []
    min_delta = Fraction(0)
    feasible = True
    for i, buyer in enumerate(buyers):
        row = alloc.get(i, {})
        spend = sum((prices[g] * q for g, q in row.items()), Fraction(0))
        achieved = sum(
            (eval_utility(buyer.utilities[g], q) for g, q in row.items() if g in buyer.utilities),
            Fraction(0),
        )
        opt = optimal_utility(buyer, prices, budgets[i])
        over = spend > budgets[i]
        if over:
            feasible = False
            violations.append(f"buyer {i} spends {spend} over budget {budgets[i]}")
        if opt is None:
            need = Fraction(1)
            ratio = None
            violations.append(f"buyer {i} has an infinite optimum (free unbounded good)")
        elif opt == 0:
            need = Fraction(0)
            ratio = Fraction(1)
        else:
            ratio = achieved / opt
            need = max(Fraction(0), 1 - ratio)
        if need > delta:
            violations.append(f"buyer {i} is only {ratio}-optimal, needs delta >= {need}")
        min_delta = max(min_delta, need)
        buyer_reports.append(BuyerReport(spend, achieved, opt, ratio, need, over))

    accepted = feasible and min_eps <= eps and min_delta <= delta
    return EquilibriumReport(accepted, eps, delta, min_eps, min_delta,
                             good_reports, buyer_reports, violations)


def verify_equilibrium(market: Market, prices: Prices, alloc: Allocation,
                       eps: Fraction, delta: Fraction) -> EquilibriumReport:
    budgets = [b.budget for b in market.buyers]
    return _verify(market.goods, market.buyers, budgets, prices, alloc, eps, delta)


def verify_exchange_equilibrium(em: ExchangeMarket, prices: Prices, alloc: Allocation,
                                eps: Fraction, delta: Fraction) -> EquilibriumReport:
    """As the Fisher verifier, with budgets derived by selling endowments."""
    budgets = [
        sum((prices[g] * w for g, w in em.endowments[i].items()), Fraction(0))
        for i in range(len(em.buyers))
    ]
    return _verify(em.goods, em.buyers, budgets, prices, alloc, eps, delta)


# ---------------------------------------------------------------------------
# structural checks

@dataclass
class StructureReport:
    ok: bool
    violations: list[str]
    constants: dict[str, Fraction | int | None]


def _degrees(goods, buyers):
    buyer_deg = [sum(1 for u in b.utilities.values() if not u.is_zero) for b in buyers]
    good_deg = {
        g: sum(1 for b in buyers if g in b.utilities and not b.utilities[g].is_zero)
        for g in goods
    }
    return buyer_deg, good_deg


def is_simple(market: Market) -> StructureReport:
    """Linear-capped utilities, unit budgets, and the never-satiated condition.

    Degree and slope-ratio bounds are family-level constants; for a single
    market they are reported rather than thresholded.
    """
    violations = []
    for i, b in enumerate(market.buyers):
        if b.budget != 1:
            violations.append(f"buyer {i} budget {b.budget} != 1 (CEEI)")
        for g, u in b.utilities.items():
            if len(u.segments) > 1:
                violations.append(f"buyer {i} utility for {g!r} is not linear capped")
        if not any(u.never_satiated for u in b.utilities.values()):
            violations.append(f"buyer {i} is satiated with every good")

    buyer_deg, good_deg = _degrees(market.goods, market.buyers)
    slopes = [s.slope for b in market.buyers for u in b.utilities.values()
              for s in u.segments if s.slope > 0]
    constants = {
        "max_buyer_degree": max(buyer_deg, default=0),
        "max_good_degree": max(good_deg.values(), default=0),
        "slope_ratio": (max(slopes) / min(slopes)) if slopes else None,
    }
    return StructureReport(not violations, violations, constants)


def is_reducible(market: Market, d: int, e_min: Fraction, e_max: Fraction,
                 kappa: Fraction, max_segments: int) -> StructureReport:
    """Degree, budget, slope-range, segment-count and satiation clauses."""
    violations = []
    buyer_deg, good_deg = _degrees(market.goods, market.buyers)
    for i, deg in enumerate(buyer_deg):
        if deg > d:
            violations.append(f"buyer {i} is interested in {deg} > {d} goods")
    for g, deg in good_deg.items():
        if deg > d:
            violations.append(f"good {g!r} interests {deg} > {d} buyers")
    for i, b in enumerate(market.buyers):
        if not (e_min <= b.budget <= e_max):
            violations.append(f"buyer {i} budget {b.budget} outside [{e_min}, {e_max}]")
        for g, u in b.utilities.items():
            if len(u.segments) > max_segments:
                violations.append(f"utility ({i}, {g!r}) has {len(u.segments)} > {max_segments} segments")
            for seg in u.segments:
                if seg.slope != 0 and not (1 <= seg.slope <= kappa):
                    violations.append(f"utility ({i}, {g!r}) slope {seg.slope} outside [1, {kappa}]")
        if not any(u.never_satiated for u in b.utilities.values()):
            violations.append(f"buyer {i} is satiated with every good")
    constants = {
        "max_buyer_degree": max(buyer_deg, default=0),
        "max_good_degree": max(good_deg.values(), default=0),
    }
    return StructureReport(not violations, violations, constants)


# ---------------------------------------------------------------------------
# preprocessing for the repair pipeline

@dataclass(frozen=True)
class RemovedGood:
    good: str
    interest_total: Fraction                  # r_j, total interested length
    interest: dict[int, Fraction]             # buyer -> interested length


def _clip_utility(u: SplcUtility, cap: Fraction) -> SplcUtility:
    """Truncate the utility's domain at `cap` units of the good."""
    segs = []
    used = Fraction(0)
    for seg in u.segments:
        room = cap - used
        if room <= 0:
            break
        if seg.length is None or seg.length > room:
            segs.append(Segment(seg.slope, room))
            break
        segs.append(seg)
        used += seg.length
    return SplcUtility(tuple(segs))


def preprocess_reducible(market: Market, delta: Fraction):
    """Clip utilities at two units per good and drop weakly-demanded goods.

    A good stays only if the total length of positive-slope segments across
    buyers strictly exceeds 1 + delta; removed goods are returned with the
    interest data needed to reinsert them afterwards.
    """
    if not (0 < delta < 1):
        raise MarketError("delta must lie in (0, 1)")
    clipped = [
        {g: _clip_utility(u, Fraction(2)) for g, u in b.utilities.items()}
        for b in market.buyers
    ]
    removed: list[RemovedGood] = []
    kept: list[str] = []
    for g in market.goods:
        interest = {}
        for i in range(len(market.buyers)):
            u = clipped[i].get(g)
            if u is None:
                continue
            length = sum((s.length for s in u.segments if s.slope > 0), Fraction(0))
            if length > 0:
                interest[i] = length
        total = sum(interest.values(), Fraction(0))
        if total > 1 + delta:
            kept.append(g)
        else:
            removed.append(RemovedGood(g, total, interest))

    dropped = {r.good for r in removed}
    buyers = tuple(
        Buyer(b.budget, {g: u for g, u in clipped[i].items() if g not in dropped})
        for i, b in enumerate(market.buyers)
    )
    return Market(tuple(kept), buyers), removed


def reinsert_removed(removed: list[RemovedGood], prices: Prices, alloc: Allocation,
                     delta: Fraction):
    """Return removed goods at price zero, splitting each unit pro rata.

    With r_j = 0 the unit goes to the lowest-indexed buyer; otherwise each
    interested buyer receives a 1/r_j share of its interested length, so the
    good clears exactly and every buyer keeps a (1 - delta)-optimal bundle.
    """
    prices = dict(prices)
    alloc = {i: dict(row) for i, row in alloc.items()}
    for r in removed:
        prices[r.good] = Fraction(0)
        if r.interest_total == 0:
            alloc.setdefault(0, {})[r.good] = Fraction(1)
            continue
        for i, length in sorted(r.interest.items()):
            alloc.setdefault(i, {})[r.good] = length / r.interest_total
    return prices, alloc


# ---------------------------------------------------------------------------
# Fisher -> exchange reduction

def fisher_to_exchange(market: Market) -> ExchangeMarket:
    """Endow every buyer with a 1/|B| share of each good.

    Requires unit budgets (a simple market); with prices normalized so that
    they sum to |B|, equilibria transfer verbatim between the two models.
    """
    n = len(market.buyers)
    for i, b in enumerate(market.buyers):
        if b.budget != 1:
            raise MarketError(f"buyer {i} budget {b.budget} != 1; market is not simple")
    share = Fraction(1, n)
    endow = tuple({g: share for g in market.goods} for _ in range(n))
    return ExchangeMarket(market.goods, market.buyers, endow)
