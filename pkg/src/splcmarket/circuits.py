"""Ternary and arithmetic constraint circuits and their satisfaction checkers.

Three formalisms live here:

* ternary circuits over values {0, 1, bot} with NAND / PURIFY gates (plus
  the derived NOT / OR / AND kinds used by the equivalence constructions);
* arithmetic circuits over [0, 1] with eps-tolerant gate constraints;
* the bounded variant where every variable carries its own rational interval
  and add / sub / scale saturate at the output variable's bounds instead of
  at 0 and 1, with minc / maxc gates against a rational constant.

Values satisfy a gate relation, not a function: rows the tables leave open
are vacuously satisfied.  `a = b +- eps` always means closed-interval
membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

BOT = -1
PURE = (0, 1)
TERNARY = (0, 1, BOT)

# gate kinds
NAND = "NAND"
PURIFY = "PURIFY"
NOT = "NOT"
OR = "OR"
AND = "AND"
PURE_KINDS = (NAND, PURIFY, NOT, OR, AND)
BASE_KINDS = (NAND, PURIFY)

CONST = "const"
SCALE = "scale"
COPY = "copy"
ADD = "add"
SUB = "sub"
LESS = "less"
LOR = "or"
LAND = "and"
LNOT = "not"
MINC = "minc"
MAXC = "maxc"
GC_KINDS = (CONST, SCALE, COPY, ADD, SUB, LESS, LOR, LAND, LNOT)
GCPLUS_KINDS = GC_KINDS + (MINC, MAXC)
LOGICAL = (LOR, LAND, LNOT)


class CircuitError(ValueError):
    pass


class BoundViolation(CircuitError):
    pass


# ---------------------------------------------------------------------------
# ternary circuits

@dataclass(frozen=True)
class PureGate:
    """One ternary gate; NAND/OR/AND read (u, v) -> w, NOT reads u -> v,
    PURIFY reads u -> (v, w)."""
    kind: str
    u: int
    v: int
    w: int | None = None

    def __post_init__(self):
        if self.kind not in PURE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if self.kind == NOT:
            if self.w is not None:
                raise CircuitError("NOT takes two nodes")
            nodes = (self.u, self.v)
        else:
            if self.w is None:
                raise CircuitError(f"{self.kind} takes three nodes")
            nodes = (self.u, self.v, self.w)
        if len(set(nodes)) != len(nodes):
            raise CircuitError("gate nodes must be distinct")

    @property
    def inputs(self) -> tuple[int, ...]:
        if self.kind == PURIFY or self.kind == NOT:
            return (self.u,)
        return (self.u, self.v)

    @property
    def outputs(self) -> tuple[int, ...]:
        if self.kind == PURIFY:
            return (self.v, self.w)
        if self.kind == NOT:
            return (self.v,)
        return (self.w,)


@dataclass(frozen=True)
class PureCircuitInstance:
    """Nodes 0..n-1; every node must be the output of exactly one gate."""
    n: int
    gates: tuple[PureGate, ...]


TernaryAssignment = dict[int, int]


def check_pure_gate(gate: PureGate, a: TernaryAssignment) -> bool:
    """Exact truth-table semantics over {0, 1, bot}."""
    if gate.kind == NAND:
        u, v, w = a[gate.u], a[gate.v], a[gate.w]
        if u == 0 or v == 0:
            return w == 1
        if u == 1 and v == 1:
            return w == 0
        return True
    if gate.kind == PURIFY:
        u, v, w = a[gate.u], a[gate.v], a[gate.w]
        if u in PURE:
            return v == u and w == u
        return v in PURE or w in PURE
    if gate.kind == NOT:
        u, v = a[gate.u], a[gate.v]
        if u in PURE:
            return v == 1 - u
        return True
    if gate.kind == OR:
        u, v, w = a[gate.u], a[gate.v], a[gate.w]
        if u == 1 or v == 1:
            return w == 1
        if u == 0 and v == 0:
            return w == 0
        return True
    if gate.kind == AND:
        u, v, w = a[gate.u], a[gate.v], a[gate.w]
        if u == 1 and v == 1:
            return w == 1
        if u == 0 or v == 0:
            return w == 0
        return True
    raise CircuitError(gate.kind)


def satisfaction_fraction(inst: PureCircuitInstance, a: TernaryAssignment) -> Fraction:
    if not inst.gates:
        return Fraction(1)
    good = sum(1 for g in inst.gates if check_pure_gate(g, a))
    return Fraction(good, len(inst.gates))


@dataclass
class StructureReport:
    ok: bool
    violations: list[str]


def validate_structure(inst: PureCircuitInstance, strict: bool = False) -> StructureReport:
    """Output-uniqueness always; in strict mode every node must also be the
    input of exactly one gate."""
    violations = []
    out_count = [0] * inst.n
    in_count = [0] * inst.n
    for g in inst.gates:
        for node in g.inputs + g.outputs:
            if not (0 <= node < inst.n):
                violations.append(f"gate references node {node} outside 0..{inst.n - 1}")
        for node in g.outputs:
            out_count[node] += 1
        for node in g.inputs:
            in_count[node] += 1
    for node in range(inst.n):
        if out_count[node] != 1:
            violations.append(f"node {node} is the output of {out_count[node]} gates")
        if strict and in_count[node] != 1:
            violations.append(f"node {node} is the input of {in_count[node]} gates")
    return StructureReport(not violations, violations)


# ---------------------------------------------------------------------------
# arithmetic circuits

@dataclass(frozen=True)
class GGate:
    kind: str
    u: str | None = None
    v: str | None = None
    w: str = ""
    c: Fraction | None = None

    def __post_init__(self):
        if self.kind not in GCPLUS_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if not self.w:
            raise CircuitError("gate has no output variable")
        want_u = self.kind != CONST
        want_v = self.kind in (ADD, SUB, LESS, LOR, LAND)
        want_c = self.kind in (CONST, SCALE, MINC, MAXC)
        if (self.u is not None) != want_u:
            raise CircuitError(f"{self.kind}: bad first input")
        if (self.v is not None) != want_v:
            raise CircuitError(f"{self.kind}: bad second input")
        if (self.c is not None) != want_c:
            raise CircuitError(f"{self.kind}: bad constant")

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(x for x in (self.u, self.v) if x is not None)


@dataclass(frozen=True)
class GCircuitInstance:
    variables: tuple[str, ...]
    gates: tuple[GGate, ...]


Bounds = dict[str, tuple[Fraction, Fraction]]
RealAssignment = dict[str, Fraction]


@dataclass(frozen=True)
class GCircuitPlusInstance:
    variables: tuple[str, ...]
    gates: tuple[GGate, ...]
    bounds: Bounds
    limit_lo: Fraction   # L: global lower limit containing every bound
    limit_hi: Fraction   # U
    bit_budget: int      # b: max bit-length of scale constants


def validate_gcircuit(inst: GCircuitInstance) -> StructureReport:
    """Plain-circuit legality: kinds, c in [0,1], unique gate per output."""
    violations = []
    known = set(inst.variables)
    outputs: dict[str, int] = {v: 0 for v in inst.variables}
    for g in inst.gates:
        if g.kind not in GC_KINDS:
            violations.append(f"gate kind {g.kind!r} is not a plain-circuit kind")
        if g.c is not None and not (0 <= g.c <= 1):
            violations.append(f"gate into {g.w!r} uses constant {g.c} outside [0, 1]")
        for var in g.inputs + (g.w,):
            if var not in known:
                violations.append(f"gate references unknown variable {var!r}")
        if g.w in outputs:
            outputs[g.w] += 1
    for var, cnt in outputs.items():
        if cnt != 1:
            violations.append(f"variable {var!r} is the output of {cnt} gates")
    return StructureReport(not violations, violations)


def validate_gcircuitplus(inst: GCircuitPlusInstance) -> StructureReport:
    """Bound-compatibility clauses on top of the structural ones."""
    violations = []
    outputs = {v: 0 for v in inst.variables}
    unit = (Fraction(0), Fraction(1))
    for var in inst.variables:
        lo, hi = inst.bounds[var]
        if not lo < hi:
            violations.append(f"variable {var!r} has empty bound interval")
        if lo < inst.limit_lo or hi > inst.limit_hi:
            violations.append(f"variable {var!r} bounds exceed the global limits")
    for g in inst.gates:
        outputs[g.w] = outputs.get(g.w, 0) + 1
        if g.kind == LESS and inst.bounds[g.w] != unit:
            violations.append(f"comparison output {g.w!r} must be bounded by [0, 1]")
        if g.kind in LOGICAL:
            for var in g.inputs + (g.w,):
                if inst.bounds[var] != unit:
                    violations.append(f"logical gate variable {var!r} must be bounded by [0, 1]")
        if g.kind == CONST:
            lo, hi = inst.bounds[g.w]
            if not (lo <= g.c <= hi):
                violations.append(f"constant {g.c} outside bounds of {g.w!r}")
        if g.kind == COPY and inst.bounds[g.u] != inst.bounds[g.w]:
            violations.append(f"copy gate {g.u!r} -> {g.w!r} must have equal bounds")
        if g.kind in (SCALE, MINC, MAXC) and not (inst.limit_lo <= g.c <= inst.limit_hi):
            violations.append(f"gate constant {g.c} outside the global limits")
    for var, cnt in outputs.items():
        if cnt != 1:
            violations.append(f"variable {var!r} is the output of {cnt} gates")
    return StructureReport(not violations, violations)


def _within(x: Fraction, target: Fraction, eps: Fraction) -> bool:
    return abs(x - target) <= eps


def check_gcircuit_gate(gate: GGate, a: RealAssignment, eps: Fraction) -> bool:
    """Constraint-table semantics over [0, 1]; the comparison and logical
    gates are vacuously satisfied in their unspecified middle ranges."""
    w = a[gate.w]
    u = a[gate.u] if gate.u is not None else None
    v = a[gate.v] if gate.v is not None else None
    if gate.kind == CONST:
        return _within(w, gate.c, eps)
    if gate.kind == SCALE:
        return _within(w, min(u * gate.c, Fraction(1)), eps)
    if gate.kind == COPY:
        return _within(w, u, eps)
    if gate.kind == ADD:
        return _within(w, min(u + v, Fraction(1)), eps)
    if gate.kind == SUB:
        return _within(w, max(u - v, Fraction(0)), eps)
    if gate.kind == LESS:
        if u < v - eps:
            return _within(w, Fraction(1), eps)
        if u > v + eps:
            return _within(w, Fraction(0), eps)
        return True
    if gate.kind == LOR:
        if u >= 1 - eps or v >= 1 - eps:
            return _within(w, Fraction(1), eps)
        if u <= eps and v <= eps:
            return _within(w, Fraction(0), eps)
        return True
    if gate.kind == LAND:
        if u >= 1 - eps and v >= 1 - eps:
            return _within(w, Fraction(1), eps)
        if u <= eps or v <= eps:
            return _within(w, Fraction(0), eps)
        return True
    if gate.kind == LNOT:
        if u <= eps:
            return _within(w, Fraction(1), eps)
        if u >= 1 - eps:
            return _within(w, Fraction(0), eps)
        return True
    raise CircuitError(gate.kind)


def check_gcircuitplus_gate(gate: GGate, bounds: Bounds, a: RealAssignment,
                            eps: Fraction) -> bool:
    """Saturated-arithmetic semantics clamped at the output's own bounds."""
    for var in gate.inputs + (gate.w,):
        lo, hi = bounds[var]
        if not (lo <= a[var] <= hi):
            raise BoundViolation(f"variable {var!r} = {a[var]} outside [{lo}, {hi}]")
    w = a[gate.w]
    u = a[gate.u] if gate.u is not None else None
    v = a[gate.v] if gate.v is not None else None
    lo, hi = bounds[gate.w]

    def clamp(x: Fraction) -> Fraction:
        return max(lo, min(x, hi))

    if gate.kind == CONST:
        return _within(w, gate.c, eps)
    if gate.kind == SCALE:
        return _within(w, clamp(u * gate.c), eps)
    if gate.kind == COPY:
        return _within(w, u, eps)
    if gate.kind == ADD:
        return _within(w, clamp(u + v), eps)
    if gate.kind == SUB:
        return _within(w, clamp(u - v), eps)
    if gate.kind == MINC:
        return _within(w, min(u, gate.c), eps)
    if gate.kind == MAXC:
        return _within(w, max(u, gate.c), eps)
    # comparison and logical gates keep the [0, 1] table semantics
    return check_gcircuit_gate(gate, a, eps)


def gcircuit_satisfaction(gates, a: RealAssignment, eps: Fraction,
                          bounds: Bounds | None = None) -> Fraction:
    if not gates:
        return Fraction(1)
    if bounds is None:
        good = sum(1 for g in gates if check_gcircuit_gate(g, a, eps))
    else:
        good = sum(1 for g in gates if check_gcircuitplus_gate(g, bounds, a, eps))
    return Fraction(good, len(gates))
