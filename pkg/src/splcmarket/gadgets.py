"""Arithmetic circuits compiled into ternary circuits via unary vectors.

Each arithmetic variable becomes M ternary nodes; the value is the fraction
of 1-bits.  Every gate is simulated by a gadget built from the extended
basis {NOT, OR, AND, NAND, PURIFY}: elementwise logic does the arithmetic,
and a purify/sort/select "formatting" pass re-normalizes vectors so that
they are sorted with at most one undetermined bit.  A final lowering pass
rewrites the extended gates over {NAND, PURIFY} and a trimming pass yields
an instance in which every node is the input of exactly one gate.

M = ceil(max(7/eps, (9/delta)^(1/3))), and a delta/kappa failure budget on
the ternary side (kappa = 320 M^4) translates back to a delta budget on the
arithmetic side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .circuits import (AND, BOT, CircuitError, GCircuitInstance, NAND, NOT, OR,
                       PURE, PURIFY, PureCircuitInstance, PureGate,
                       TernaryAssignment, check_gcircuit_gate,
                       ADD, CONST, COPY, LAND, LESS, LNOT, LOR, SCALE, SUB)
from .rational import frac_ceil, frac_floor

LOWERED_SIZE = {NAND: 1, PURIFY: 1, NOT: 2, AND: 3, OR: 5}


class GadgetError(CircuitError):
    pass


def vector_size(eps: Fraction, delta: Fraction) -> int:
    """Smallest M with M >= 7/eps and M^3 >= 9/delta."""
    m = frac_ceil(Fraction(7) / eps)
    while Fraction(m) ** 3 < Fraction(9) / delta:
        m += 1
    return m


def soundness_factor(m: int) -> int:
    return 320 * m ** 4


class PureBuilder:
    """Appends gates in dependency order and hands out fresh node ids."""

    def __init__(self):
        self.next_node = 0
        self.gates: list[PureGate] = []

    def fresh(self) -> int:
        node = self.next_node
        self.next_node += 1
        return node

    def fresh_vec(self, count: int) -> list[int]:
        return [self.fresh() for _ in range(count)]

    def nand(self, u: int, v: int) -> int:
        w = self.fresh()
        self.gates.append(PureGate(NAND, u, v, w))
        return w

    def purify(self, u: int) -> tuple[int, int]:
        v, w = self.fresh(), self.fresh()
        self.gates.append(PureGate(PURIFY, u, v, w))
        return v, w

    def not_(self, u: int) -> int:
        v = self.fresh()
        self.gates.append(PureGate(NOT, u, v))
        return v

    def or_(self, u: int, v: int) -> int:
        w = self.fresh()
        self.gates.append(PureGate(OR, u, v, w))
        return w

    def and_(self, u: int, v: int) -> int:
        w = self.fresh()
        self.gates.append(PureGate(AND, u, v, w))
        return w

    def purify_tree(self, root: int, leaves: int) -> list[int]:
        """Balanced tree of PURIFY gates fanning one node out to `leaves` copies."""
        nodes = [root]
        cursor = 0
        while len(nodes) - cursor < leaves:
            a, b = self.purify(nodes[cursor])
            cursor += 1
            nodes.append(a)
            nodes.append(b)
        return nodes[cursor:cursor + leaves]


@dataclass
class GadgetTrace:
    kind: str
    gate_count: int = 0          # extended-basis gates
    comparator_count: int = 0    # sort comparators; each contributes AND+OR
    purify_gates: int = 0        # gates in purification / fan-out trees
    stage_nodes: dict = field(default_factory=dict)
    outputs: list[int] = field(default_factory=list)
    constants: list[tuple[int, int]] = field(default_factory=list)

    def lowered_gate_count(self, gates) -> int:
        return sum(LOWERED_SIZE[g.kind] for g in gates)


def _bubble_sort(b: PureBuilder, wires: list[int], trace: GadgetTrace) -> list[int]:
    """Compare-exchange network: min by AND, max by OR; ascending (0s left)."""
    wires = list(wires)
    n = len(wires)
    for rnd in range(n - 1):
        for j in range(n - 1 - rnd):
            lo = b.and_(wires[j], wires[j + 1])
            hi = b.or_(wires[j], wires[j + 1])
            wires[j], wires[j + 1] = lo, hi
            trace.comparator_count += 1
    return wires


def _formatting(b: PureBuilder, inputs: list[int], trace: GadgetTrace) -> list[int]:
    """Purify each bit into M copies, sort all M^2, select every M-th."""
    m = len(inputs)
    leaves: list[int] = []
    before = len(b.gates)
    for node in inputs:
        leaves.extend(b.purify_tree(node, m))
    trace.purify_gates += len(b.gates) - before
    wires = _bubble_sort(b, leaves, trace)
    outputs = [wires[i * m - 1] for i in range(1, m + 1)]
    trace.stage_nodes.setdefault("selection", []).extend(outputs)
    return outputs


def _constant_vector(m: int, c: Fraction) -> int:
    """Number of 1-bits in a hardcoded vector for c: floor(c * M)."""
    if not (0 <= c <= 1):
        raise GadgetError(f"constant {c} outside [0, 1]")
    return frac_floor(c * m)


class ConstantSource:
    """Hands out nodes forced to 0 or 1.

    In a standalone gadget these are frontier nodes with recorded values; in
    a full reduction they are the outputs of the purity-seed construction and
    every request returns the same node (fan-out fixup clones it later).
    """

    def __init__(self, b: PureBuilder, trace: GadgetTrace, pooled: tuple[int, int] | None):
        self.b = b
        self.trace = trace
        self.pooled = pooled

    def bit(self, value: int) -> int:
        if self.pooled is not None:
            return self.pooled[value]
        node = self.b.fresh()
        self.trace.constants.append((node, value))
        return node

    def vector(self, m: int, ones: int) -> list[int]:
        return [self.bit(0) for _ in range(m - ones)] + [self.bit(1) for _ in range(ones)]


def _build_gadget(b: PureBuilder, kind: str, u: list[int] | None,
                  v: list[int] | None, c: Fraction | None, m: int,
                  consts: ConstantSource) -> tuple[list[int], GadgetTrace]:
    trace = consts.trace
    trace.kind = kind
    if kind == ADD:
        # OR against the mirrored second vector, then format
        r = [b.or_(u[i], v[m - 1 - i]) for i in range(m)]
        out = _formatting(b, r, trace)
    elif kind == SUB:
        vbar = [b.not_(x) for x in v]
        r = [b.and_(u[i], vbar[i]) for i in range(m)]
        out = _formatting(b, r, trace)
    elif kind == SCALE:
        cvec = consts.vector(m, _constant_vector(m, c))
        r = [b.and_(ui, cj) for ui in u for cj in cvec]
        wires = _bubble_sort(b, r, trace)
        out = [wires[i * m - 1] for i in range(1, m + 1)]
    elif kind == LESS:
        # difference v - u, then amplify the 5th-from-right bit
        vbar = [b.not_(x) for x in u]
        r = [b.and_(v[i], vbar[i]) for i in range(m)]
        diff = _formatting(b, r, trace)
        pivot = diff[m - 5]
        before = len(b.gates)
        t = b.purify_tree(pivot, m)
        trace.purify_gates += len(b.gates) - before
        out = _bubble_sort(b, t, trace)
    elif kind == CONST:
        out = consts.vector(m, _constant_vector(m, c))
    elif kind == LOR:
        r = [b.or_(u[i], v[i]) for i in range(m)]
        out = _formatting(b, r, trace)
    elif kind == LAND:
        r = [b.and_(u[i], v[i]) for i in range(m)]
        out = _formatting(b, r, trace)
    elif kind == LNOT:
        out = [0] * m
        for i in range(m):
            out[m - 1 - i] = b.not_(u[i])
    elif kind == COPY:
        mid = [0] * m
        for i in range(m):
            mid[m - 1 - i] = b.not_(u[i])
        out = [0] * m
        for i in range(m):
            out[m - 1 - i] = b.not_(mid[i])
    else:
        raise GadgetError(f"no gadget for gate kind {kind!r}")
    trace.outputs = out
    return out, trace


@dataclass
class StandaloneGadget:
    gates: tuple[PureGate, ...]
    u_nodes: list[int]
    v_nodes: list[int] | None
    outputs: list[int]
    constants: list[tuple[int, int]]   # frontier nodes with forced values
    trace: GadgetTrace


UNARY_KINDS = {SCALE, CONST, COPY, LNOT}


def build_gate_gadget(kind: str, m: int, c: Fraction | None = None) -> StandaloneGadget:
    """Construct one gadget over fresh input vectors, for direct simulation."""
    b = PureBuilder()
    u = b.fresh_vec(m) if kind != CONST else None
    v = b.fresh_vec(m) if kind not in UNARY_KINDS and kind != CONST else None
    trace = GadgetTrace(kind)
    consts = ConstantSource(b, trace, pooled=None)
    start = len(b.gates)
    out, trace = _build_gadget(b, kind, u, v, c, m, consts)
    trace.gate_count = len(b.gates) - start
    return StandaloneGadget(tuple(b.gates), u or [], v, out, trace.constants, trace)


def build_formatting_subgadget(m: int) -> StandaloneGadget:
    """The bare purify/sort/select pass over a fresh input vector."""
    b = PureBuilder()
    r = b.fresh_vec(m)
    trace = GadgetTrace("formatting")
    out = _formatting(b, r, trace)
    trace.gate_count = len(b.gates)
    trace.outputs = out
    return StandaloneGadget(tuple(b.gates), r, None, out, [], trace)


# ---------------------------------------------------------------------------
# canonical forward simulation

def forward_simulate_pure(gates, frontier: TernaryAssignment) -> TernaryAssignment:
    """Topological evaluation with canonical choices for unforced outputs.

    Forced rows follow the truth tables; otherwise single outputs get bot and
    PURIFY of bot gets (0, bot).  Raises on cyclic dependencies.
    """
    a: TernaryAssignment = dict(frontier)
    pending = list(gates)
    while pending:
        rest = []
        progress = False
        for gate in pending:
            if not all(x in a for x in gate.inputs):
                rest.append(gate)
                continue
            progress = True
            _simulate_gate(gate, a)
        if not progress:
            raise GadgetError("cyclic dependency among unevaluated nodes")
        pending = rest
    return a


def _simulate_gate(gate: PureGate, a: TernaryAssignment):
    if gate.kind == NAND:
        u, v = a[gate.u], a[gate.v]
        a[gate.w] = 1 if (u == 0 or v == 0) else (0 if (u == 1 and v == 1) else BOT)
    elif gate.kind == PURIFY:
        u = a[gate.u]
        if u in PURE:
            a[gate.v] = a[gate.w] = u
        else:
            a[gate.v], a[gate.w] = 0, BOT
    elif gate.kind == NOT:
        u = a[gate.u]
        a[gate.v] = 1 - u if u in PURE else BOT
    elif gate.kind == OR:
        u, v = a[gate.u], a[gate.v]
        a[gate.w] = 1 if (u == 1 or v == 1) else (0 if (u == 0 and v == 0) else BOT)
    elif gate.kind == AND:
        u, v = a[gate.u], a[gate.v]
        a[gate.w] = 1 if (u == 1 and v == 1) else (0 if (u == 0 or v == 0) else BOT)
    else:
        raise GadgetError(gate.kind)


def unary_value(a: TernaryAssignment, nodes: list[int]) -> Fraction:
    ones = sum(1 for n in nodes if a[n] == 1)
    return Fraction(ones, len(nodes))


def unary_counts(a: TernaryAssignment, nodes: list[int]) -> tuple[int, int, int]:
    vals = [a[n] for n in nodes]
    return vals.count(0), vals.count(1), vals.count(BOT)


def is_sorted_vector(a: TernaryAssignment, nodes: list[int]) -> bool:
    """0s to the left, 1s to the right, undetermined bits in between."""
    vals = [a[n] for n in nodes]
    rank = {0: 0, BOT: 1, 1: 2}
    return all(rank[x] <= rank[y] for x, y in zip(vals, vals[1:]))


def sorted_vector_assignment(nodes: list[int], zeros: int, bots: int, ones: int) -> TernaryAssignment:
    vals = [0] * zeros + [BOT] * bots + [1] * ones
    if len(vals) != len(nodes):
        raise GadgetError("vector shape mismatch")
    return dict(zip(nodes, vals))


# ---------------------------------------------------------------------------
# extended-basis lowering and strictness trimming

def lower_to_base(gates, next_node: int):
    """Rewrite NOT / OR / AND over {NAND, PURIFY}; at most 5 gates each."""
    out: list[PureGate] = []

    def fresh():
        nonlocal next_node
        next_node += 1
        return next_node - 1

    def emit_not(u, v):
        a, bb = fresh(), fresh()
        out.append(PureGate(PURIFY, u, a, bb))
        out.append(PureGate(NAND, a, bb, v))

    for g in gates:
        if g.kind in (NAND, PURIFY):
            out.append(g)
        elif g.kind == NOT:
            emit_not(g.u, g.v)
        elif g.kind == AND:
            t = fresh()
            out.append(PureGate(NAND, g.u, g.v, t))
            emit_not(t, g.w)
        elif g.kind == OR:
            a, bb = fresh(), fresh()
            emit_not(g.u, a)
            emit_not(g.v, bb)
            out.append(PureGate(NAND, a, bb, g.w))
        else:
            raise GadgetError(g.kind)
    return out, next_node


@dataclass(frozen=True)
class RemovalEntry:
    gate: PureGate
    removed: tuple[int, ...]
    kept: int | None = None   # surviving PURIFY output in the copy case


def trim_to_strict(gates, next_node: int):
    """Remove unconsumed nodes until every node is the input of exactly one gate.

    Unused NAND outputs drop the gate; an unused PURIFY output with a used
    sibling is replaced by a four-gate copy chain feeding the sibling.  The
    removal log allows assignments on the trimmed instance to be extended
    back over the removed nodes.
    """
    alive: dict[int, PureGate] = dict(enumerate(gates))
    next_idx = len(gates)
    producer: dict[int, int] = {}
    uses: dict[int, int] = {}
    for idx, g in alive.items():
        for node in g.outputs:
            producer[node] = idx
        for node in g.inputs:
            uses[node] = uses.get(node, 0) + 1

    log: list[RemovalEntry] = []
    worklist = [n for n in producer if uses.get(n, 0) == 0]

    def fresh():
        nonlocal next_node
        next_node += 1
        return next_node - 1

    def insert(gate: PureGate):
        nonlocal next_idx
        alive[next_idx] = gate
        for out in gate.outputs:
            producer[out] = next_idx
        next_idx += 1

    def drop_use(node: int):
        uses[node] -= 1
        if uses[node] == 0 and node in producer:
            worklist.append(node)

    while worklist:
        node = worklist.pop()
        idx = producer.get(node)
        if idx is None or idx not in alive or uses.get(node, 0) != 0:
            continue  # producing gate already handled or node re-consumed
        g = alive[idx]
        dead = [n for n in g.outputs if uses.get(n, 0) == 0]
        if g.kind == NAND or len(dead) == 2:
            del alive[idx]
            log.append(RemovalEntry(g, tuple(g.outputs)))
            for inp in g.inputs:
                drop_use(inp)
        else:
            # copy chain replaces the gate; the removed PURIFY's single use
            # of g.u transfers to the chain's head, so uses[g.u] is unchanged
            kept = g.v if g.w in dead else g.w
            del alive[idx]
            c1, c2, c3, c4, c5 = (fresh() for _ in range(5))
            for gate in (PureGate(PURIFY, g.u, c1, c2),
                         PureGate(NAND, c1, c2, c3),
                         PureGate(PURIFY, c3, c4, c5),
                         PureGate(NAND, c4, c5, kept)):
                insert(gate)
            for n in (c1, c2, c3, c4, c5):
                uses[n] = 1
            log.append(RemovalEntry(g, (dead[0],), kept))
    final = [alive[i] for i in sorted(alive)]
    return final, log, next_node


def replay_removals(a: TernaryAssignment, log) -> TernaryAssignment:
    """Extend an assignment over removed nodes, satisfying each removed gate
    whenever its surviving neighbourhood allows it."""
    a = dict(a)
    for entry in reversed(log):
        g = entry.gate
        if g.kind == NAND:
            u, v = a[g.u], a[g.v]
            a[g.w] = 1 if (u == 0 or v == 0) else (0 if u == 1 == v else BOT)
        elif entry.kept is None:
            u = a[g.u]
            if u in PURE:
                a[g.v] = a[g.w] = u
            else:
                a[g.v], a[g.w] = 0, BOT
        else:
            u = a[g.u]
            removed = entry.removed[0]
            if u in PURE:
                a[removed] = u
            else:
                a[removed] = BOT if a.get(entry.kept) in PURE else 0
    return a


# ---------------------------------------------------------------------------
# whole-circuit reduction

@dataclass
class UnaryEncoding:
    m: int
    kappa: int
    var_nodes: dict[str, list[int]]   # arithmetic variable -> build-time node ids


@dataclass
class PureReduction:
    instance: PureCircuitInstance
    encoding: UnaryEncoding
    node_map: dict[int, int]          # build-time id -> final id (surviving nodes)
    removal_log: list[RemovalEntry]
    traces: list[GadgetTrace]
    fanout_leaf_target: int


def gcircuit_to_pure(gc: GCircuitInstance, eps: Fraction, delta: Fraction) -> PureReduction:
    """Compile an arithmetic circuit into a strict ternary instance."""
    if not (0 < eps <= 1 and 0 < delta <= 1):
        raise GadgetError("eps and delta must lie in (0, 1]")
    m = vector_size(eps, delta)
    b = PureBuilder()
    traces: list[GadgetTrace] = []

    # purity seed: z is pure in every satisfying assignment, so OR(z, not z)
    # is forced to 1 and its negation to 0
    x, y, z = b.fresh(), b.fresh(), b.fresh()
    b.gates.append(PureGate(PURIFY, x, y, z))
    p, q = b.purify(y)
    b.gates.append(PureGate(NAND, p, q, x))
    zbar = b.not_(z)
    one = b.or_(z, zbar)
    zero = b.not_(one)
    pooled = (zero, one)

    # one placeholder vector per operand slot; reads resolve to real nodes
    # after every gadget exists, so circuits may be cyclic and a gate may
    # read the same variable through both slots
    slot_of: dict[int, tuple[str, int]] = {}

    def slots(var: str) -> list[int]:
        vec = b.fresh_vec(m)
        for i, placeholder in enumerate(vec):
            slot_of[placeholder] = (var, i)
        return vec

    produced: dict[str, list[int]] = {}
    for gate in gc.gates:
        trace = GadgetTrace(gate.kind)
        consts = ConstantSource(b, trace, pooled)
        start = len(b.gates)
        u = slots(gate.u) if gate.u is not None else None
        v = slots(gate.v) if gate.v is not None else None
        out, trace = _build_gadget(b, gate.kind, u, v, gate.c, m, consts)
        trace.gate_count = len(b.gates) - start
        traces.append(trace)
        produced[gate.w] = out

    resolve = {ph: produced[var][i] for ph, (var, i) in slot_of.items()}

    # fan-out fixup: clone every multiply-read node through a purify tree
    leaf_target = frac_ceil(Fraction(8) / delta)
    variable_nodes = {n for nodes in produced.values() for n in nodes}
    gates, b.next_node, fan_traces = _fixup_fanout(
        b.gates, b.next_node, resolve, variable_nodes, leaf_target)
    traces.extend(fan_traces)

    gates, next_node = lower_to_base(gates, b.next_node)
    gates, log, next_node = trim_to_strict(gates, next_node)

    # dense renumbering over surviving nodes
    seen: dict[int, int] = {}
    final_gates = []
    for g in gates:
        for node in g.inputs + g.outputs:
            if node not in seen:
                seen[node] = len(seen)
        final_gates.append(_rewire_all(g, seen))
    instance = PureCircuitInstance(len(seen), tuple(final_gates))
    encoding = UnaryEncoding(m, soundness_factor(m), {v: list(nd) for v, nd in produced.items()})
    return PureReduction(instance, encoding, seen, log, traces, leaf_target)


def _rewire_all(g: PureGate, table: dict[int, int]) -> PureGate:
    v = table[g.v] if g.v is not None else None
    w = table[g.w] if g.w is not None else None
    return PureGate(g.kind, table[g.u], v, w)


def _fixup_fanout(gates, next_node: int, resolve: dict[int, int],
                  variable_nodes: set[int], leaf_target: int):
    """Resolve slot placeholders and clone multiply-read nodes.

    Variable vectors get purify trees with at least `leaf_target` leaves;
    internal nodes (shared constants, outer-product operands) get exactly as
    many leaves as they have readers.  Surplus leaves are trimmed later.
    """
    def real(node: int) -> int:
        return resolve.get(node, node)

    uses: dict[int, int] = {}
    for g in gates:
        for node in g.inputs:
            uses[real(node)] = uses.get(real(node), 0) + 1

    b = PureBuilder()
    b.next_node = next_node
    trees: dict[int, list[int]] = {}
    fan_traces = []
    for node, count in sorted(uses.items()):
        if count < 2:
            continue
        leaves = max(count, leaf_target) if node in variable_nodes else count
        before = len(b.gates)
        trees[node] = b.purify_tree(node, leaves)
        trace = GadgetTrace("fan-out")
        trace.gate_count = len(b.gates) - before
        trace.purify_gates = trace.gate_count
        fan_traces.append(trace)

    cursor = {node: 0 for node in trees}

    def next_leaf(node: int) -> int:
        node = real(node)
        if node not in trees:
            return node
        leaf = trees[node][cursor[node]]
        cursor[node] += 1
        return leaf

    rewired = []
    for g in gates:
        u = next_leaf(g.u)
        v = next_leaf(g.v) if g.kind in (NAND, OR, AND) else g.v
        rewired.append(PureGate(g.kind, u, v, g.w))
    return rewired + b.gates, b.next_node, fan_traces


def decode_pure_to_gcircuit(a: TernaryAssignment, reduction: PureReduction,
                            gc: GCircuitInstance, eps: Fraction):
    """Read every variable back as its fraction of 1-bits and report the
    fraction of arithmetic gates satisfied at eps."""
    lifted = {orig: a[final] for orig, final in reduction.node_map.items()}
    lifted = replay_removals(lifted, reduction.removal_log)
    values = {
        var: unary_value(lifted, nodes)
        for var, nodes in reduction.encoding.var_nodes.items()
    }
    if not gc.gates:
        return values, Fraction(1)
    good = sum(1 for g in gc.gates if check_gcircuit_gate(g, values, eps))
    return values, Fraction(good, len(gc.gates))
