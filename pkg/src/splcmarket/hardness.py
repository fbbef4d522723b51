"""Ternary circuits embedded into simple Fisher markets via inverter buyers.

An inverter buyer has unit budget, linear uncapped utility for its output
good and a capped linear utility (slope a, cap at t units) for its input
good.  Eight inverters encode a NAND gate, and a PURIFY gate gets an
auxiliary good plus seven inverters.  Prices decode back to ternary values
through two thresholds: at or above 9/2 reads as 1, at or below 100/a reads
as 0, anything between is bot.

The parameter validator evaluates, in exact arithmetic, the five side
conditions under which every non-faulty gate of the market is guaranteed to
simulate its truth table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .circuits import (BOT, NAND, PURIFY, PureCircuitInstance, TernaryAssignment,
                       check_pure_gate, validate_structure)
from .market import Buyer, Market, Prices, SplcUtility, Segment, total_positive_length
from .rational import rat

MODES = ("pcp", "inverse-poly", "nonzero-spend")

H_THRESHOLD = Fraction(9, 2)


class HardnessError(ValueError):
    pass


class Infeasible(HardnessError):
    pass


@dataclass(frozen=True)
class InverterSpec:
    input_good: str
    output_good: str
    t: Fraction
    a: Fraction

    def __post_init__(self):
        if not (0 <= self.t <= 1):
            raise HardnessError("threshold t must lie in [0, 1]")
        if self.a <= 1:
            raise HardnessError("input slope must exceed 1")
        if self.input_good == self.output_good:
            raise HardnessError("input and output goods must differ")


def make_inverter(spec: InverterSpec) -> Buyer:
    """Unit-budget buyer: uncapped slope-1 output, slope-a input capped at t."""
    utilities = {spec.output_good: SplcUtility((Segment(Fraction(1), None),))}
    if spec.t > 0:
        utilities[spec.input_good] = SplcUtility((Segment(spec.a, spec.t),))
    return Buyer(Fraction(1), utilities)


@dataclass(frozen=True)
class HardnessParams:
    eps_m: Fraction
    delta_m: Fraction
    a: Fraction
    delta_c: Fraction
    mode: str = "pcp"

    def __post_init__(self):
        if self.mode not in MODES:
            raise HardnessError(f"unknown mode {self.mode!r}")

    @property
    def high(self) -> Fraction:
        return H_THRESHOLD

    @property
    def low(self) -> Fraction:
        return Fraction(100) / self.a

    @property
    def fault_budget(self) -> Fraction:
        """Zero-utility-spend threshold F above which a good counts as faulty."""
        if self.mode == "nonzero-spend":
            return 20 * self.delta_m
        return 32 * self.delta_m / self.delta_c


@dataclass
class Inequality:
    name: str
    lhs: Fraction
    rhs: Fraction
    relation: str  # "<=" or ">="

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs if self.relation == "<=" else self.lhs >= self.rhs


@dataclass
class ParamReport:
    ok: bool
    inequalities: list[Inequality]
    violations: list[str]


def validate_params(params: HardnessParams) -> ParamReport:
    """Exact evaluation of the five correctness side conditions."""
    violations = []
    if not params.eps_m < Fraction(1, 9):
        violations.append(f"eps_m = {params.eps_m} must be < 1/9")
    if not params.a > 100:
        violations.append(f"a = {params.a} must be > 100")
    if not (0 < params.delta_m < 1):
        violations.append(f"delta_m = {params.delta_m} must lie in (0, 1)")
    if not (0 < params.delta_c <= 1):
        violations.append(f"delta_c = {params.delta_c} must lie in (0, 1]")

    a, dm, em = params.a, params.delta_m, params.eps_m
    F = params.fault_budget
    ninth = Fraction(1, 9)
    checks = [
        Inequality("fault-budget", F, Fraction(1), "<="),
        Inequality("nand-output-low",
                   (F + 16 * dm) / (ninth - em) if em < ninth else Fraction(10 ** 9),
                   Fraction(100) / a, "<="),
        Inequality("nand-output-high",
                   (4 - Fraction(2000) / a - 100 * dm * a) / (ninth + em),
                   H_THRESHOLD, ">="),
        Inequality("purify-aux-high",
                   (4 - Fraction(1000) / a - 100 * dm * a) / (Fraction(5, 9) + em),
                   H_THRESHOLD, ">="),
        Inequality("purify-output-high",
                   (1 - Fraction(1000) / a - 100 * dm * a) / (ninth + em),
                   H_THRESHOLD, ">="),
    ]
    for ineq in checks:
        if not ineq.holds:
            violations.append(
                f"{ineq.name}: {ineq.lhs} {ineq.relation} {ineq.rhs} fails")
    return ParamReport(not violations, checks, violations)


A_GRID = [Fraction(10) ** k for k in range(3, 10)]
DELTA_GRID = [Fraction(1, 10 ** k) for k in range(2, 13)]


def solve_params(eps_m: Fraction, delta_c: Fraction, mode: str = "pcp") -> HardnessParams:
    """Coarse-to-fine grid search for a validated (a, delta_m) pair.

    Deterministic: smallest feasible a first, then the largest feasible
    delta_m for it.  Any validated pair is acceptable.
    """
    if not eps_m < Fraction(1, 9):
        raise Infeasible(f"eps_m = {eps_m} must be < 1/9")
    if not (0 < delta_c <= 1):
        raise Infeasible(f"delta_c = {delta_c} must lie in (0, 1]")
    for a in A_GRID:
        for dm in DELTA_GRID:
            params = HardnessParams(eps_m, dm, a, delta_c, mode)
            if validate_params(params).ok:
                return params
    raise Infeasible("parameter grid exhausted")


# ---------------------------------------------------------------------------
# the reduction itself

@dataclass(frozen=True)
class GateRecord:
    kind: str
    goods: tuple[str, ...]        # input goods, output goods, aux good if any
    buyers: tuple[int, ...]       # indices of this gate's inverter buyers
    circuit_gate: int             # position in the source instance


@dataclass(frozen=True)
class DecodeMap:
    node_goods: dict[int, str]
    aux_goods: tuple[str, ...]
    gates: tuple[GateRecord, ...]
    high: Fraction
    low: Fraction


def good_for_node(node: int) -> str:
    return f"n{node}"


def reduce_pure_to_market(inst: PureCircuitInstance, params: HardnessParams):
    """Compile a strict ternary circuit into a simple Fisher market.

    Per NAND gate: four t=2/9 inverters from each input good to the output
    good.  Per PURIFY gate: a fresh auxiliary good, four t=2/9 inverters
    input->aux, two t=2/9 inverters aux->first output, and one t=4/9
    inverter aux->second output.
    """
    structure = validate_structure(inst, strict=True)
    if not structure.ok:
        raise HardnessError("instance is not strict: " + "; ".join(structure.violations))

    t_main = Fraction(2, 9)
    t_second = Fraction(4, 9)
    goods = [good_for_node(i) for i in range(inst.n)]
    buyers: list[Buyer] = []
    records: list[GateRecord] = []
    aux_goods: list[str] = []

    def emit(in_good: str, out_good: str, t: Fraction) -> int:
        buyers.append(make_inverter(InverterSpec(in_good, out_good, t, params.a)))
        return len(buyers) - 1

    for gi, gate in enumerate(inst.gates):
        if gate.kind == NAND:
            u, v, w = good_for_node(gate.u), good_for_node(gate.v), good_for_node(gate.w)
            ids = tuple(emit(u, w, t_main) for _ in range(4)) + \
                tuple(emit(v, w, t_main) for _ in range(4))
            records.append(GateRecord(NAND, (u, v, w), ids, gi))
        elif gate.kind == PURIFY:
            u, v, w = good_for_node(gate.u), good_for_node(gate.v), good_for_node(gate.w)
            aux = f"aux:{gi}"
            aux_goods.append(aux)
            goods.append(aux)
            ids = tuple(emit(u, aux, t_main) for _ in range(4)) + \
                tuple(emit(aux, v, t_main) for _ in range(2)) + (emit(aux, w, t_second),)
            records.append(GateRecord(PURIFY, (u, v, w, aux), ids, gi))
        else:
            raise HardnessError(f"gate kind {gate.kind!r} must be lowered first")

    market = Market(tuple(goods), tuple(buyers))
    decode = DecodeMap({i: good_for_node(i) for i in range(inst.n)},
                       tuple(aux_goods), tuple(records), params.high, params.low)
    return market, decode


def decode_prices(prices: Prices, params: HardnessParams) -> TernaryAssignment:
    """Threshold decoding; auxiliary goods (named aux:*) are skipped."""
    out: TernaryAssignment = {}
    for good, price in prices.items():
        if good.startswith("aux:"):
            continue
        node = int(good[1:])
        if price >= params.high:
            out[node] = 1
        elif price <= params.low:
            out[node] = 0
        else:
            out[node] = BOT
    return out


# ---------------------------------------------------------------------------
# auditing a candidate equilibrium against the gadget semantics

@dataclass
class GateAudit:
    record: GateRecord
    faulty: bool
    decoded_ok: bool | None   # None when the gate is faulty


@dataclass
class AuditReport:
    wasted_money: dict[str, Fraction]      # f_j per good
    faulty_goods: set[str]
    gates: list[GateAudit]
    decoded: TernaryAssignment
    satisfied_fraction: Fraction


def gate_audit(market: Market, decode: DecodeMap, prices: Prices, alloc,
               params: HardnessParams) -> AuditReport:
    """Flag goods receiving >= F money that yields no utility, then check the
    decoded truth-table row of every non-faulty gate."""
    wasted = {g: Fraction(0) for g in market.goods}
    for i, buyer in enumerate(market.buyers):
        for g, quantity in alloc.get(i, {}).items():
            cap = Fraction(0)
            if g in buyer.utilities:
                cap = total_positive_length(buyer.utilities[g])
            if cap is None:
                continue
            beyond = max(Fraction(0), quantity - cap)
            wasted[g] += prices[g] * beyond

    F = params.fault_budget
    faulty_goods = {g for g, f in wasted.items() if f >= F}
    decoded = decode_prices(prices, params)

    audits = []
    good_count = 0
    for record in decode.gates:
        faulty = any(g in faulty_goods for g in record.goods)
        ok = None
        if not faulty:
            gate = _record_gate(record)
            ok = check_pure_gate(gate, decoded)
            good_count += 1 if ok else 0
        audits.append(GateAudit(record, faulty, ok))
    fraction = (Fraction(sum(1 for a in audits if a.decoded_ok or a.faulty),
                         len(audits)) if audits else Fraction(1))
    return AuditReport(wasted, faulty_goods, audits, decoded, fraction)


def _record_gate(record: GateRecord):
    from .circuits import PureGate

    def node_of(good: str) -> int:
        return int(good[1:])

    u, v, w = (node_of(g) for g in record.goods[:3])
    return PureGate(record.kind, u, v, w)
