"""JSON forms for every object the CLI reads or writes.

Rationals are always "num/den" strings (bit-exact round trips); infinite
segment lengths are the string "inf"; ternary values are "0", "1", "bot".
"""

from __future__ import annotations

import json
from fractions import Fraction

from .circuits import (BOT, GCircuitInstance, GCircuitPlusInstance, GGate,
                       PureCircuitInstance, PureGate)
from .encode import GCPlusEncoding
from .hardness import DecodeMap, GateRecord, HardnessParams
from .market import (Buyer, ExchangeMarket, Market, Segment, SplcUtility)
from .rational import fmt, parse_length, rat

TERN_TO_STR = {0: "0", 1: "1", BOT: "bot"}
STR_TO_TERN = {"0": 0, "1": 1, "bot": BOT}


def dump(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def load(path_or_file):
    if hasattr(path_or_file, "read"):
        return json.load(path_or_file)
    with open(path_or_file) as fh:
        return json.load(fh)


# --- markets ---------------------------------------------------------------

def utility_to_json(u: SplcUtility):
    return [{"slope": fmt(s.slope), "length": fmt(s.length)} for s in u.segments]


def utility_from_json(data) -> SplcUtility:
    return SplcUtility(tuple(
        Segment(rat(seg["slope"]), parse_length(seg["length"])) for seg in data))


def market_to_json(m: Market):
    return {
        "goods": list(m.goods),
        "buyers": [
            {"budget": fmt(b.budget),
             "utilities": {g: utility_to_json(u) for g, u in sorted(b.utilities.items())}}
            for b in m.buyers
        ],
    }


def market_from_json(data) -> Market:
    buyers = tuple(
        Buyer(rat(b["budget"]),
              {g: utility_from_json(u) for g, u in b["utilities"].items()})
        for b in data["buyers"]
    )
    return Market(tuple(data["goods"]), buyers)


def exchange_to_json(em: ExchangeMarket):
    return {
        "goods": list(em.goods),
        "buyers": [
            {"endowments": {g: fmt(w) for g, w in sorted(em.endowments[i].items())},
             "utilities": {g: utility_to_json(u) for g, u in sorted(b.utilities.items())}}
            for i, b in enumerate(em.buyers)
        ],
    }


def exchange_from_json(data) -> ExchangeMarket:
    buyers, endowments = [], []
    for b in data["buyers"]:
        buyers.append(Buyer(Fraction(1),
                            {g: utility_from_json(u) for g, u in b["utilities"].items()}))
        endowments.append({g: rat(w) for g, w in b["endowments"].items()})
    return ExchangeMarket(tuple(data["goods"]), tuple(buyers), tuple(endowments))


def prices_to_json(p):
    return {g: fmt(v) for g, v in sorted(p.items())}


def prices_from_json(data):
    return {g: rat(v) for g, v in data.items()}


def alloc_to_json(x):
    return {str(i): {g: fmt(q) for g, q in sorted(row.items())}
            for i, row in sorted(x.items())}


def alloc_from_json(data):
    return {int(i): {g: rat(q) for g, q in row.items()} for i, row in data.items()}


# --- circuits ----------------------------------------------------------------

def pure_to_json(inst: PureCircuitInstance):
    gates = []
    for g in inst.gates:
        entry = {"kind": g.kind, "u": g.u, "v": g.v}
        if g.w is not None:
            entry["w"] = g.w
        gates.append(entry)
    return {"nodes": inst.n, "gates": gates}


def pure_from_json(data) -> PureCircuitInstance:
    gates = tuple(PureGate(g["kind"], g["u"], g["v"], g.get("w"))
                  for g in data["gates"])
    return PureCircuitInstance(data["nodes"], gates)


def ternary_to_json(a):
    return {str(n): TERN_TO_STR[v] for n, v in sorted(a.items())}


def ternary_from_json(data):
    return {int(n): STR_TO_TERN[v] for n, v in data.items()}


def ggate_to_json(g: GGate):
    return {"kind": g.kind, "u": g.u, "v": g.v, "w": g.w,
            "c": None if g.c is None else fmt(g.c)}


def ggate_from_json(data) -> GGate:
    c = data.get("c")
    return GGate(data["kind"], data.get("u"), data.get("v"), data["w"],
                 None if c is None else rat(c))


def gcircuit_to_json(inst: GCircuitInstance):
    return {"variables": list(inst.variables),
            "gates": [ggate_to_json(g) for g in inst.gates]}


def gcircuit_from_json(data) -> GCircuitInstance:
    return GCircuitInstance(tuple(data["variables"]),
                            tuple(ggate_from_json(g) for g in data["gates"]))


def gcplus_to_json(inst: GCircuitPlusInstance):
    return {
        "variables": list(inst.variables),
        "gates": [ggate_to_json(g) for g in inst.gates],
        "bounds": {v: [fmt(lo), fmt(hi)] for v, (lo, hi) in sorted(inst.bounds.items())},
        "limits": {"lo": fmt(inst.limit_lo), "hi": fmt(inst.limit_hi),
                   "bits": inst.bit_budget},
    }


def gcplus_from_json(data) -> GCircuitPlusInstance:
    bounds = {v: (rat(lo), rat(hi)) for v, (lo, hi) in data["bounds"].items()}
    return GCircuitPlusInstance(
        tuple(data["variables"]),
        tuple(ggate_from_json(g) for g in data["gates"]),
        bounds, rat(data["limits"]["lo"]), rat(data["limits"]["hi"]),
        data["limits"]["bits"])


def real_assignment_to_json(a):
    return {v: fmt(x) for v, x in sorted(a.items())}


def real_assignment_from_json(data):
    return {v: rat(x) for v, x in data.items()}


# --- hardness ----------------------------------------------------------------

def params_to_json(p: HardnessParams):
    return {"eps_m": fmt(p.eps_m), "delta_m": fmt(p.delta_m), "a": fmt(p.a),
            "delta_c": fmt(p.delta_c), "mode": p.mode,
            "high": fmt(p.high), "low": fmt(p.low), "fault_budget": fmt(p.fault_budget)}


def params_from_json(data) -> HardnessParams:
    return HardnessParams(rat(data["eps_m"]), rat(data["delta_m"]),
                          rat(data["a"]), rat(data["delta_c"]), data["mode"])


def decode_map_to_json(d: DecodeMap):
    return {
        "node_goods": {str(n): g for n, g in sorted(d.node_goods.items())},
        "aux_goods": list(d.aux_goods),
        "high": fmt(d.high),
        "low": fmt(d.low),
        "gates": [
            {"kind": r.kind, "goods": list(r.goods), "buyers": list(r.buyers),
             "circuit_gate": r.circuit_gate}
            for r in d.gates
        ],
    }


def decode_map_from_json(data) -> DecodeMap:
    gates = tuple(GateRecord(r["kind"], tuple(r["goods"]), tuple(r["buyers"]),
                             r["circuit_gate"]) for r in data["gates"])
    return DecodeMap({int(n): g for n, g in data["node_goods"].items()},
                     tuple(data["aux_goods"]), gates,
                     rat(data["high"]), rat(data["low"]))


# --- encodings -----------------------------------------------------------------

def encoding_to_json(enc: GCPlusEncoding):
    return {
        "instance": gcplus_to_json(enc.instance),
        "p_min": fmt(enc.p_min),
        "p_max": fmt(enc.p_max),
        "price_vars": dict(sorted(enc.price_vars.items())),
        "spend_vars": [
            {"buyer": i, "good": g, "segment": k, "var": v}
            for (i, g, k), v in sorted(enc.spend_vars.items())
        ],
        "segment_count": {str(i): n for i, n in sorted(enc.segment_count.items())},
        "gates_per_good": dict(sorted(enc.gate_count_per_good.items())),
        "gates_per_buyer": {str(i): n for i, n in sorted(enc.gate_count_per_buyer.items())},
    }


def encoding_from_json(data) -> GCPlusEncoding:
    return GCPlusEncoding(
        gcplus_from_json(data["instance"]),
        rat(data["p_min"]), rat(data["p_max"]),
        dict(data["price_vars"]),
        {(s["buyer"], s["good"], s["segment"]): s["var"] for s in data["spend_vars"]},
        {int(i): n for i, n in data["segment_count"].items()},
        dict(data["gates_per_good"]),
        {int(i): n for i, n in data["gates_per_buyer"].items()},
    )


# --- reports -------------------------------------------------------------------

def report_to_json(r):
    return {
        "accepted": r.accepted,
        "eps": fmt(r.eps),
        "delta": fmt(r.delta),
        "min_eps": fmt(r.min_eps),
        "min_delta": fmt(r.min_delta),
        "goods": {g: {"demand": fmt(gr.demand), "gap": fmt(gr.gap)}
                  for g, gr in sorted(r.goods.items())},
        "buyers": [
            {"spend": fmt(br.spend), "achieved": fmt(br.achieved),
             "optimal": None if br.optimal is None else fmt(br.optimal),
             "ratio": None if br.ratio is None else fmt(br.ratio),
             "min_delta": fmt(br.min_delta), "over_budget": br.over_budget}
            for br in r.buyers
        ],
        "violations": list(r.violations),
    }


def ledger_to_json(ledger):
    return {
        "d": ledger.d, "e_min": fmt(ledger.e_min), "e_max": fmt(ledger.e_max),
        "kappa": fmt(ledger.kappa), "max_segments": ledger.max_segments,
        "m_max": ledger.m_max, "p_min": fmt(ledger.p_min), "p_max": fmt(ledger.p_max),
        "eps_c": fmt(ledger.eps_c), "delta_c": fmt(ledger.delta_c),
        "c_budget": ledger.c_budget, "c2": fmt(ledger.c2), "c3": fmt(ledger.c3),
        "c": fmt(ledger.c), "round_ceiling": ledger.round_ceiling,
        "clear_slack": fmt(ledger.clear_slack),
        "window_ratio": fmt(ledger.window_ratio),
        "pump_factor": fmt(ledger.pump_factor),
        "burn_cap": fmt(ledger.eps_c),
        "f": fmt(ledger.f), "g": fmt(ledger.g),
        "g_prime": fmt(ledger.g_prime), "g_second": fmt(ledger.g_second),
        "notes": dict(ledger.notes),
    }


def snapshot_to_json(snap):
    out = {
        "stage": snap.stage,
        "prices": prices_to_json(snap.prices),
        "alloc": alloc_to_json(snap.alloc),
        "burn": {str(i): fmt(v) for i, v in sorted(snap.burn.items())},
    }
    if snap.flow_edges is not None:
        out["flow"] = [
            {"src": list(src), "dst": list(dst), "cap": fmt(cap),
             "flow": fmt(flow), "tag": [str(t) for t in tag]}
            for src, dst, cap, flow, tag in snap.flow_edges
        ]
    return out


SCHEMAS = {
    "market": {"goods": ["good-id"],
               "buyers": [{"budget": "num/den",
                           "utilities": {"good-id": [{"slope": "num/den",
                                                      "length": "num/den | inf"}]}}]},
    "exchange-market": {"goods": ["good-id"],
                        "buyers": [{"endowments": {"good-id": "num/den"},
                                    "utilities": "as market"}]},
    "prices": {"good-id": "num/den"},
    "allocation": {"buyer-index": {"good-id": "num/den"}},
    "pure-circuit": {"nodes": "int",
                     "gates": [{"kind": "NAND | PURIFY | NOT | OR | AND",
                                "u": "int", "v": "int", "w": "int (absent for NOT)"}]},
    "ternary-assignment": {"node": "0 | 1 | bot"},
    "gcircuit": {"variables": ["name"],
                 "gates": [{"kind": "const | scale | copy | add | sub | less | or | and | not",
                            "u": "name | null", "v": "name | null", "w": "name",
                            "c": "num/den | null"}]},
    "gcircuit-plus": {"variables": ["name"], "gates": "as gcircuit plus minc | maxc",
                      "bounds": {"name": ["num/den", "num/den"]},
                      "limits": {"lo": "num/den", "hi": "num/den", "bits": "int"}},
    "real-assignment": {"variable": "num/den"},
    "hardness-params": {"eps_m": "num/den", "delta_m": "num/den", "a": "num/den",
                        "delta_c": "num/den", "mode": "pcp | inverse-poly | nonzero-spend"},
}
