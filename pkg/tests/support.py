"""Shared fixtures: deterministic random markets and circuits for the tests."""

from __future__ import annotations

import random
from fractions import Fraction

from splcmarket.circuits import (GCircuitPlusInstance, GGate, NAND, PURIFY,
                                 PureCircuitInstance, PureGate,
                                 ADD, CONST, COPY, LAND, LESS, LNOT, LOR,
                                 MAXC, MINC, SCALE, SUB)
from splcmarket.market import Buyer, Market, SplcUtility, Segment, utility

PRICE_POOL = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)]


def planted_market(rng: random.Random):
    """A reducible market with a planted exact equilibrium on grid prices.

    Each good's revenue is split among one or two buyers; every buyer's
    segments are sized so the greedy bundle buys them exactly, with uncapped
    slope-1 tails (assigned to cover every good) soaking up the interested
    length the preprocessing step requires.  Returns (market, prices, alloc).
    """
    n_goods = rng.randint(2, 4)
    n_buyers = rng.randint(2, 4)
    goods = [f"g{j}" for j in range(n_goods)]
    prices = {g: rng.choice(PRICE_POOL) for g in goods}

    shares: dict[int, dict[str, Fraction]] = {i: {} for i in range(n_buyers)}
    for g in goods:
        owners = rng.sample(range(n_buyers), rng.choice([1, 2]))
        cuts = [Fraction(rng.randint(1, 3)) for _ in owners]
        total = sum(cuts)
        for i, cut in zip(owners, cuts):
            shares[i][g] = shares[i].get(g, Fraction(0)) + prices[g] * cut / total
    # every buyer must hold at least one share
    for i in range(n_buyers):
        if not shares[i]:
            g = rng.choice(goods)
            donor = next(j for j in range(n_buyers) if shares[j].get(g, 0) > 0)
            half = shares[donor][g] / 2
            shares[donor][g] -= half
            shares[i][g] = half

    tails: dict[int, list[str]] = {i: [] for i in range(n_buyers)}
    for idx, g in enumerate(goods):
        tails[idx % n_buyers].append(g)

    buyers = []
    alloc = {}
    for i in range(n_buyers):
        utilities: dict[str, list] = {}
        row = {}
        ordered = sorted(shares[i])
        k = len(ordered)
        for pos, g in enumerate(ordered):
            rank = k - pos + 2  # bang-per-buck ranks k+2 .. 3, all above tails
            length = shares[i][g] / prices[g]
            utilities[g] = [(rank * prices[g], length)]
            row[g] = length
        for g in tails[i]:
            utilities.setdefault(g, []).append((Fraction(1), None))
        buyers.append(Buyer(sum(shares[i].values()),
                            {g: utility(*segs) for g, segs in utilities.items()}))
        alloc[i] = row
    return Market(tuple(goods), tuple(buyers)), prices, alloc


def inverter_cycle_market(rng: random.Random):
    """A simple (unit-budget, linear-capped) market whose planted equilibrium
    has all prices equal to one: buyers form cycles, each buying a capped
    slice of its own good and the remainder of the next good in the cycle."""
    n = rng.randint(2, 4)
    goods = [f"g{j}" for j in range(n)]
    buyers = []
    alloc = {}
    order = list(range(n))
    if n == 4 and rng.random() < 0.5:
        cycles = [order[:2], order[2:]]
    else:
        cycles = [order]
    for cycle in cycles:
        t = rng.choice([Fraction(1, 5), Fraction(1, 4), Fraction(1, 3)])
        for pos, i in enumerate(cycle):
            nxt = cycle[(pos + 1) % len(cycle)]
            slope = Fraction(rng.randint(2, 6))
            buyers.append((i, {goods[i]: utility((slope, t)),
                               goods[nxt]: utility((1, None))}))
            alloc[i] = {goods[i]: t, goods[nxt]: 1 - t}
    buyers.sort(key=lambda pair: pair[0])
    market = Market(tuple(goods),
                    tuple(Buyer(Fraction(1), u) for _, u in buyers))
    prices = {g: Fraction(1) for g in goods}
    return market, prices, alloc


def random_strict_pure(rng: random.Random, t: int) -> PureCircuitInstance:
    """A strict ternary instance with t NAND and t PURIFY gates over 3t nodes."""
    n = 3 * t
    nodes = list(range(n))
    rng.shuffle(nodes)
    nand_out = nodes[:t]
    purify_out = [(nodes[t + 2 * i], nodes[t + 2 * i + 1]) for i in range(t)]
    while True:
        slots = list(range(n))
        rng.shuffle(slots)
        gates = []
        ok = True
        pos = 0
        for i in range(t):
            u, v = slots[pos], slots[pos + 1]
            pos += 2
            w = nand_out[i]
            if len({u, v, w}) != 3:
                ok = False
                break
            gates.append(PureGate(NAND, u, v, w))
        if ok:
            for i in range(t):
                u = slots[pos]
                pos += 1
                v, w = purify_out[i]
                if len({u, v, w}) != 3:
                    ok = False
                    break
                gates.append(PureGate(PURIFY, u, v, w))
        if ok:
            return PureCircuitInstance(n, tuple(gates))


def random_small_splc_market(rng: random.Random):
    """Up to 3 goods / 3 buyers / 3 segments with slopes in [1/4, 4]."""
    n_goods = rng.randint(1, 3)
    goods = [f"g{j}" for j in range(n_goods)]
    buyers = []
    for _ in range(rng.randint(1, 3)):
        utilities = {}
        for g in rng.sample(goods, rng.randint(1, n_goods)):
            count = rng.randint(1, 3)
            slopes = sorted({Fraction(rng.randint(1, 16), 4) for _ in range(count)},
                            reverse=True)
            segs = []
            for idx, s in enumerate(slopes):
                last = idx == len(slopes) - 1
                if last and rng.random() < 0.3:
                    segs.append((s, None))
                else:
                    segs.append((s, Fraction(rng.randint(1, 8), 4)))
            utilities[g] = utility(*segs)
        if utilities:
            buyers.append(Buyer(rng.choice([Fraction(1, 2), Fraction(1), Fraction(2)]),
                                utilities))
    if not buyers:
        buyers.append(Buyer(Fraction(1), {goods[0]: utility((1, None))}))
    return Market(tuple(goods), tuple(buyers))


def random_prices(rng: random.Random, goods):
    return {g: Fraction(rng.randint(1, 16), 4) for g in goods}


def random_gcplus(rng: random.Random, max_gates: int = 5) -> GCircuitPlusInstance:
    """A tiny bounded arithmetic instance with legal structure."""
    bounds: dict[str, tuple[Fraction, Fraction]] = {}
    gates = []
    unit = (Fraction(0), Fraction(1))

    def new_var(lo, hi, kind, u=None, v=None, c=None):
        name = f"v{len(bounds)}"
        bounds[name] = (lo, hi)
        gates.append(GGate(kind, u, v, name, c))
        return name

    # seed constants so logical gates always have [0, 1] inputs available
    unit_vars = [new_var(*unit, CONST, c=Fraction(rng.randint(0, 4), 4))]
    any_vars = list(unit_vars)
    wide = (Fraction(-2), Fraction(2))
    any_vars.append(new_var(*wide, CONST, c=Fraction(rng.randint(-4, 4), 4)))

    for _ in range(rng.randint(1, max_gates)):
        kind = rng.choice([ADD, SUB, SCALE, MINC, MAXC, LESS, COPY, LNOT, LOR, LAND])
        if kind in (LNOT,):
            unit_vars.append(new_var(*unit, kind, u=rng.choice(unit_vars)))
        elif kind in (LOR, LAND):
            unit_vars.append(new_var(*unit, kind, u=rng.choice(unit_vars),
                                     v=rng.choice(unit_vars)))
        elif kind == LESS:
            unit_vars.append(new_var(*unit, kind, u=rng.choice(any_vars),
                                     v=rng.choice(any_vars)))
        elif kind == SCALE:
            c = Fraction(rng.randint(-6, 6), 2)
            any_vars.append(new_var(Fraction(-2), Fraction(2), kind,
                                    u=rng.choice(any_vars), c=c))
        elif kind in (MINC, MAXC):
            c = Fraction(rng.randint(-4, 4), 4)
            any_vars.append(new_var(Fraction(-2), Fraction(2), kind,
                                    u=rng.choice(any_vars), c=c))
        elif kind == COPY:
            src = rng.choice(any_vars)
            name = f"v{len(bounds)}"
            bounds[name] = bounds[src]
            gates.append(GGate(COPY, src, None, name, None))
            any_vars.append(name)
        else:  # ADD / SUB
            any_vars.append(new_var(Fraction(-2), Fraction(2), kind,
                                    u=rng.choice(any_vars), v=rng.choice(any_vars)))

    consts = [g.c for g in gates if g.c is not None]
    lo = min([l for l, _ in bounds.values()] + consts)
    hi = max([h for _, h in bounds.values()] + consts)
    return GCircuitPlusInstance(tuple(bounds), tuple(gates), bounds, lo, hi, 64)


def exact_gate_value(gate: GGate, bounds, values):
    """Reference evaluation of one bounded gate at eps = 0."""
    u = values.get(gate.u)
    v = values.get(gate.v)
    lo, hi = bounds[gate.w]

    def clamp(x):
        return max(lo, min(hi, x))

    if gate.kind == CONST:
        return gate.c
    if gate.kind == SCALE:
        return clamp(u * gate.c)
    if gate.kind == COPY:
        return u
    if gate.kind == ADD:
        return clamp(u + v)
    if gate.kind == SUB:
        return clamp(u - v)
    if gate.kind == MINC:
        return min(u, gate.c)
    if gate.kind == MAXC:
        return max(u, gate.c)
    # the logical gates' vacuous middle bands are resolved the way the
    # comparison-based lowering resolves them: a sharp test against one half
    half = Fraction(1, 2)
    if gate.kind == LESS:
        return Fraction(1) if u < v else Fraction(0)
    if gate.kind == LOR:
        return Fraction(1) if (u > half or v > half) else Fraction(0)
    if gate.kind == LAND:
        return Fraction(1) if (u >= half and v >= half) else Fraction(0)
    if gate.kind == LNOT:
        return Fraction(1) if u < half else Fraction(0)
    raise ValueError(gate.kind)
