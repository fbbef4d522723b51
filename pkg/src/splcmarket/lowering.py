"""Lowering bounded arithmetic circuits to the plain [0, 1] form.

The chain runs in six stages: round every scale constant to a multiple of
eps, expand out-of-range scale constants into doubling chains, rewrite the
logical gates over comparisons, rescale all bounds into [-1, 1] while
re-imposing each variable's original bounds with explicit min/max gates,
expand those min/max gates, and finally split every variable into a
non-negative and a non-positive part with a one-sidedness gate after every
original gate.  The translation map records how to read values back:
value = scale * (plus_part - minus_part).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .circuits import (ADD, CONST, COPY, GCircuitInstance, GCircuitPlusInstance,
                       GGate, LAND, LESS, LNOT, LOR, MAXC, MINC, SCALE, SUB,
                       RealAssignment)
from .rational import frac_floor


@dataclass
class _Work:
    """Mutable circuit state threaded through the stages."""
    gates: list[GGate]
    bounds: dict[str, tuple[Fraction, Fraction]]
    counter: int = 0

    def fresh(self, lo: Fraction, hi: Fraction, tag: str = "lw") -> str:
        name = f"{tag}.{self.counter}"
        self.counter += 1
        self.bounds[name] = (lo, hi)
        return name


@dataclass
class LoweringMap:
    scale: Fraction                       # original value = scale * (plus - minus)
    plus: dict[str, str]
    minus: dict[str, str]
    error_factor: Fraction                # tolerance ratio between the two sides
    stage_gate_counts: dict[str, int] = field(default_factory=dict)

    def decode(self, a: RealAssignment) -> RealAssignment:
        return {
            var: self.scale * (a[self.plus[var]] - a[self.minus[var]])
            for var in self.plus
        }


WIDE = Fraction(1)  # slack added around exact envelopes so errors never clip


def _round_to_multiple(c: Fraction, eps: Fraction) -> Fraction:
    return frac_floor(c / eps + Fraction(1, 2)) * eps


def _stage_round_constants(w: _Work, eps: Fraction) -> None:
    out = []
    for g in w.gates:
        if g.kind == SCALE:
            g = GGate(SCALE, g.u, None, g.w, _round_to_multiple(g.c, eps))
        out.append(g)
    w.gates = out


def _stage_expand_scales(w: _Work) -> None:
    """Rewrite scale gates with c outside [0, 1] via doubling chains."""
    out = []
    for g in w.gates:
        if g.kind != SCALE or 0 <= g.c <= 1:
            out.append(g)
            continue
        c = abs(g.c)
        p, q = c.numerator, c.denominator
        lo, hi = w.bounds[g.u]

        # powers of two by self-addition
        powers = [(g.u, lo, hi)]
        while len(powers) < p.bit_length():
            prev, plo, phi = powers[-1]
            nlo, nhi = plo + plo, phi + phi
            t = w.fresh(nlo - WIDE, nhi + WIDE)
            out.append(GGate(ADD, prev, prev, t, None))
            powers.append((t, nlo, nhi))

        acc, alo, ahi = None, Fraction(0), Fraction(0)
        for i in range(p.bit_length()):
            if not (p >> i) & 1:
                continue
            term, tlo, thi = powers[i]
            if acc is None:
                acc, alo, ahi = term, tlo, thi
            else:
                alo, ahi = alo + tlo, ahi + thi
                t = w.fresh(alo - WIDE, ahi + WIDE)
                out.append(GGate(ADD, acc, term, t, None))
                acc = t
        # acc now holds p * u; divide by q, negate if needed
        if g.c < 0:
            t = w.fresh(alo / q - WIDE, ahi / q + WIDE)
            out.append(GGate(SCALE, acc, None, t, Fraction(1, q)))
            zero = w.fresh(-WIDE, WIDE)
            out.append(GGate(CONST, None, None, zero, Fraction(0)))
            out.append(GGate(SUB, zero, t, g.w, None))
        else:
            out.append(GGate(SCALE, acc, None, g.w, Fraction(1, q)))
    w.gates = out


def _stage_remove_logical(w: _Work) -> tuple[str, str]:
    """or / and / not become comparisons against one half; returns the shared
    constant variables (half, one)."""
    half = w.fresh(Fraction(0), Fraction(1), "c")
    one = w.fresh(Fraction(1, 2), Fraction(3, 2), "c")
    head = [GGate(CONST, None, None, half, Fraction(1, 2)),
            GGate(CONST, None, None, one, Fraction(1))]
    out = []

    def gt_half(src: str) -> str:
        t = w.fresh(Fraction(0), Fraction(1))
        out.append(GGate(LESS, half, src, t, None))
        return t

    def negate(src: str) -> str:
        d = w.fresh(Fraction(-2), Fraction(2))
        out.append(GGate(SUB, one, src, d, None))
        return d

    def emit_or(u: str, v: str, target: str):
        a, bb = gt_half(u), gt_half(v)
        s = w.fresh(Fraction(0), Fraction(2))
        out.append(GGate(ADD, a, bb, s, None))
        out.append(GGate(LESS, half, s, target, None))

    for g in w.gates:
        if g.kind == LOR:
            emit_or(g.u, g.v, g.w)
        elif g.kind == LNOT:
            out.append(GGate(LESS, half, negate(g.u), g.w, None))
        elif g.kind == LAND:
            na, nb = gt_half(negate(g.u)), gt_half(negate(g.v))
            s = w.fresh(Fraction(0), Fraction(2))
            out.append(GGate(ADD, na, nb, s, None))
            t = w.fresh(Fraction(0), Fraction(1))
            out.append(GGate(LESS, half, s, t, None))
            out.append(GGate(LESS, half, negate(t), g.w, None))
        else:
            out.append(g)
    w.gates = head + out


def _stage_rescale(w: _Work) -> Fraction:
    """Divide all bounds by m = 2 * max |bound| and re-impose each output's
    own interval with explicit against-constant min/max gates.

    Scaling values into [-1/2, 1/2] rather than [-1, 1] leaves the headroom
    the split stage needs: sums of two scaled values never clip against the
    [0, 1] range of a split part, so the two-sided chains are exact."""
    m = 2 * max(max(abs(lo), abs(hi)) for lo, hi in w.bounds.values())
    m = max(m, Fraction(1))
    unit = (Fraction(-1), Fraction(1))
    new_bounds = {}
    for var, (lo, hi) in w.bounds.items():
        new_bounds[var] = (lo / m, hi / m)
    w.bounds = new_bounds
    out = []
    redirected = []
    for g in w.gates:
        c = g.c
        if g.kind in (CONST, MINC, MAXC) and c is not None:
            c = c / m
        lo, hi = w.bounds[g.w]
        prime_bounds = (Fraction(0), Fraction(1)) if g.kind == LESS else unit
        prime = w.fresh(*prime_bounds)
        out.append(GGate(g.kind, g.u, g.v, prime, c))
        clip_lo = w.fresh(*unit)
        redirected.append(GGate(MAXC, prime, None, clip_lo, lo))
        redirected.append(GGate(MINC, clip_lo, None, g.w, hi))
    w.gates = out + redirected
    return m


def _stage_split(w: _Work):
    """Split every variable into [0, 1] halves and emit plain gates, with a
    one-sidedness pair after each original gate.

    Values entering this stage lie in [-1/2, 1/2], so every part-level chain
    below computes its target exactly: no intermediate sum of two parts can
    reach the plain clamp at 1, and stepwise subtraction under a max-0 clamp
    of one-sided quantities never loses mass."""
    plus = {v: f"{v}+" for v in w.bounds}
    minus = {v: f"{v}-" for v in w.bounds}
    gates: list[GGate] = []
    names: list[str] = []
    counter = 0

    def fresh() -> str:
        nonlocal counter
        counter += 1
        return f"os.{counter}"

    def chain(kind: str, u: str, v: str | None, out: str | None = None,
              c: Fraction | None = None) -> str:
        t = out or fresh()
        if out is None:
            names.append(t)
        gates.append(GGate(kind, u, v, t, c))
        return t

    def const(value: Fraction) -> str:
        t = fresh()
        names.append(t)
        gates.append(GGate(CONST, None, None, t, value))
        return t

    shared: dict[str, str] = {}

    def shared_const(key: str, value: Fraction) -> str:
        if key not in shared:
            shared[key] = const(value)
        return shared[key]

    def two_sided(op: str, u_parts, v_parts, tp=None, tm=None):
        """(tp, tm) one-sided parts of U + V or U - V."""
        up, um = u_parts
        vp, vm = v_parts if op == ADD else (v_parts[1], v_parts[0])
        t1 = chain(ADD, up, vp)
        t2 = chain(SUB, t1, um)
        tp = chain(SUB, t2, vm, tp)
        s1 = chain(ADD, um, vm)
        s2 = chain(SUB, s1, up)
        tm = chain(SUB, s2, vp, tm)
        return tp, tm

    def halved(var: str):
        hp = chain(SCALE, plus[var], None, c=Fraction(1, 2))
        hm = chain(SCALE, minus[var], None, c=Fraction(1, 2))
        return hp, hm

    def const_parts(value: Fraction):
        return (shared_const(f"c+{value}", max(value, Fraction(0))),
                shared_const(f"c-{value}", max(-value, Fraction(0))))

    def shifted(v: str) -> str:
        # 0.5 - v_minus/2 + v_plus/2, always in [0, 1]
        a = chain(SCALE, minus[v], None, c=Fraction(1, 2))
        b = chain(SCALE, plus[v], None, c=Fraction(1, 2))
        c = chain(SUB, shared_const("half", Fraction(1, 2)), a)
        return chain(ADD, c, b)

    zero = None

    def zero_var() -> str:
        nonlocal zero
        if zero is None:
            zero = shared_const("zero", Fraction(0))
        return zero

    for g in w.gates:
        tp, tm = fresh(), fresh()
        names.extend([tp, tm])
        if g.kind == CONST:
            gates.append(GGate(CONST, None, None, tp, max(g.c, Fraction(0))))
            gates.append(GGate(CONST, None, None, tm, max(-g.c, Fraction(0))))
        elif g.kind == SCALE:
            gates.append(GGate(SCALE, plus[g.u], None, tp, g.c))
            gates.append(GGate(SCALE, minus[g.u], None, tm, g.c))
        elif g.kind == COPY:
            gates.append(GGate(COPY, plus[g.u], None, tp, None))
            gates.append(GGate(COPY, minus[g.u], None, tm, None))
        elif g.kind in (ADD, SUB):
            two_sided(g.kind, (plus[g.u], minus[g.u]), (plus[g.v], minus[g.v]),
                      tp, tm)
        elif g.kind in (MINC, MAXC):
            # min(u, c) = c - max(c - u, 0); max(u, c) = c + max(u - c, 0),
            # computed at half scale and doubled at the end
            ch = const_parts(g.c / 2)
            uh = halved(g.u)
            if g.kind == MINC:
                ramp = two_sided(SUB, ch, uh)
                wh = two_sided(SUB, ch, (ramp[0], zero_var()))
            else:
                ramp = two_sided(SUB, uh, ch)
                wh = two_sided(ADD, ch, (ramp[0], zero_var()))
            two_sided(ADD, wh, wh, tp, tm)
        elif g.kind == LESS:
            gates.append(GGate(LESS, shifted(g.u), shifted(g.v), tp, None))
            gates.append(GGate(CONST, None, None, tm, Fraction(0)))
        else:
            raise ValueError(f"gate kind {g.kind!r} survived lowering")
        # one-sidedness: exactly one of the two halves survives truncation
        chain(SUB, tp, tm, plus[g.w])
        chain(SUB, tm, tp, minus[g.w])

    variables = tuple(list(plus.values()) + list(minus.values()) + names)
    return GCircuitInstance(variables, tuple(gates)), plus, minus


def gcircuitplus_to_gcircuit(inst: GCircuitPlusInstance, eps: Fraction,
                             delta: Fraction):
    """Full lowering chain; returns the plain instance and a translation map."""
    w = _Work(list(inst.gates), dict(inst.bounds))
    counts = {}

    _stage_round_constants(w, eps)
    counts["round-constants"] = len(w.gates)
    _stage_expand_scales(w)
    counts["expand-scales"] = len(w.gates)
    _stage_remove_logical(w)
    counts["remove-logical"] = len(w.gates)
    m = _stage_rescale(w)
    counts["rescale"] = len(w.gates)
    plain, plus, minus = _stage_split(w)
    counts["split"] = len(plain.gates)

    # loose but explicit composed tolerance ratio: constant rounding, chain
    # length, rescale factor and the per-gate expansions each contribute
    longest_chain = 8
    factor = (1 + inst.limit_hi / 2) * longest_chain * m * 3 * 10
    lmap = LoweringMap(m, {v: plus[v] for v in inst.variables},
                       {v: minus[v] for v in inst.variables},
                       factor, counts)
    return plain, lmap


def translate_assignment(plain: GCircuitInstance, lmap: LoweringMap,
                         w_bounds, x: RealAssignment) -> RealAssignment:
    """Forward-map original variable values onto the lowered instance.

    Original variables pin their split parts; every intermediate is then
    evaluated exactly in dependency order.  Gates whose output is an original
    variable's part are left to the checker: they are the consistency
    constraints of the translation.
    """
    a: RealAssignment = {}
    pinned = set()
    for var, node in lmap.plus.items():
        scaled = x[var] / lmap.scale
        a[node] = max(scaled, Fraction(0))
        pinned.add(node)
    for var, node in lmap.minus.items():
        scaled = x[var] / lmap.scale
        a[node] = max(-scaled, Fraction(0))
        pinned.add(node)

    unit = lambda v: max(Fraction(0), min(Fraction(1), v))
    pending = list(plain.gates)
    while pending:
        rest = []
        progress = False
        for g in pending:
            if g.w in pinned or g.w in a:
                continue
            if any(u not in a for u in g.inputs):
                rest.append(g)
                continue
            progress = True
            u = a[g.u] if g.u is not None else None
            v = a[g.v] if g.v is not None else None
            if g.kind == CONST:
                a[g.w] = g.c
            elif g.kind == SCALE:
                a[g.w] = unit(u * g.c)
            elif g.kind == COPY:
                a[g.w] = u
            elif g.kind == ADD:
                a[g.w] = unit(u + v)
            elif g.kind == SUB:
                a[g.w] = unit(u - v)
            elif g.kind == LESS:
                a[g.w] = Fraction(1) if u < v else Fraction(0)
            else:
                raise ValueError(g.kind)
        if not progress:
            break
        pending = rest
    for var in plain.variables:
        a.setdefault(var, Fraction(0))
    return a
