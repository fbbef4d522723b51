"""Command-line front end.

Every subcommand is a thin adapter between JSON files and the library:
identical inputs give byte-identical outputs.  Exit codes: 0 on
success/accept, 1 on reject or not-found, 2 on usage errors (including
malformed JSON, reported with the offending path).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import serialize as ser
from .circuits import validate_gcircuit, validate_structure
from .encode import encode_market
from .gadgets import gcircuit_to_pure, decode_pure_to_gcircuit, replay_removals
from .hardness import (HardnessError, Infeasible, decode_prices, gate_audit,
                       reduce_pure_to_market, solve_params, validate_params)
from .lowering import gcircuitplus_to_gcircuit
from .market import (InfiniteOptimum, fisher_to_exchange, optimal_bundle,
                     preprocess_reducible, reinsert_removed, verify_equilibrium,
                     verify_exchange_equilibrium)
from .oracles import OracleError, SearchConfig, brute_force_pure_solve, search_equilibrium
from .rational import fmt, rat
from .repair import ConstantLedger, PipelineError, decode_gcplus_solution, repair_steps
from .serialize import dump, load


class UsageError(Exception):
    pass


def _load(path, parser=None):
    try:
        return load(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}")


def _emit(obj, out_path):
    text = dump(obj, out_path)
    if out_path is None:
        print(text)


def _rat(text: str) -> Fraction:
    try:
        return rat(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise UsageError(f"not a rational: {text!r}")


# --- subcommand bodies -------------------------------------------------------

def cmd_verify(args):
    market = ser.market_from_json(_load(args.market, None))
    prices = ser.prices_from_json(_load(args.prices, None))
    alloc = ser.alloc_from_json(_load(args.alloc, None))
    report = verify_equilibrium(market, prices, alloc, _rat(args.eps), _rat(args.delta))
    _emit(ser.report_to_json(report), args.out)
    return 0 if report.accepted else 1


def cmd_verify_exchange(args):
    em = ser.exchange_from_json(_load(args.market, None))
    prices = ser.prices_from_json(_load(args.prices, None))
    alloc = ser.alloc_from_json(_load(args.alloc, None))
    report = verify_exchange_equilibrium(em, prices, alloc, _rat(args.eps), _rat(args.delta))
    _emit(ser.report_to_json(report), args.out)
    return 0 if report.accepted else 1


def cmd_demand(args):
    market = ser.market_from_json(_load(args.market, None))
    prices = ser.prices_from_json(_load(args.prices, None))
    buyer = market.buyers[args.buyer]
    budget = _rat(args.budget) if args.budget else buyer.budget
    try:
        quantities, spending, utility = optimal_bundle(buyer, prices, budget)
    except InfiniteOptimum as exc:
        print(f"infinite optimum: {exc}", file=sys.stderr)
        return 1
    _emit({
        "quantities": {g: fmt(q) for g, q in sorted(quantities.items())},
        "spending": {f"{g}:{k}": fmt(m) for (g, k), m in sorted(spending.items())},
        "utility": fmt(utility),
    }, args.out)
    return 0


def cmd_reduce(args):
    inst = ser.pure_from_json(_load(args.circuit, None))
    if args.params:
        params = ser.params_from_json(_load(args.params, None))
    else:
        params = solve_params(_rat(args.eps_m), _rat(args.delta_c), args.mode)
    market, decode = reduce_pure_to_market(inst, params)
    _emit(ser.market_to_json(market), args.market_out)
    _emit(ser.decode_map_to_json(decode), args.decode_out)
    if args.params_out:
        _emit(ser.params_to_json(params), args.params_out)
    return 0


def cmd_decode_prices(args):
    prices = ser.prices_from_json(_load(args.prices, None))
    params = ser.params_from_json(_load(args.params, None))
    assignment = decode_prices(prices, params)
    _emit(ser.ternary_to_json(assignment), args.out)
    return 0


def cmd_validate_params(args):
    params = ser.params_from_json(_load(args.params, None))
    report = validate_params(params)
    _emit({
        "ok": report.ok,
        "inequalities": [
            {"name": q.name, "lhs": fmt(q.lhs), "relation": q.relation,
             "rhs": fmt(q.rhs), "holds": q.holds}
            for q in report.inequalities
        ],
        "violations": report.violations,
    }, args.out)
    return 0 if report.ok else 1


def cmd_solve_params(args):
    try:
        params = solve_params(_rat(args.eps_m), _rat(args.delta_c), args.mode)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    _emit(ser.params_to_json(params), args.out)
    return 0


def cmd_gc_to_pc(args):
    gc = ser.gcircuit_from_json(_load(args.circuit, None))
    red = gcircuit_to_pure(gc, _rat(args.eps), _rat(args.delta))
    _emit(ser.pure_to_json(red.instance), args.out)
    _emit({
        "m": red.encoding.m,
        "kappa": red.encoding.kappa,
        "fanout_leaves": red.fanout_leaf_target,
        "var_nodes": {v: nodes for v, nodes in sorted(red.encoding.var_nodes.items())},
        "node_map": {str(k): v for k, v in sorted(red.node_map.items())},
        "removals": [
            {"gate": {"kind": e.gate.kind, "u": e.gate.u, "v": e.gate.v,
                      "w": e.gate.w},
             "removed": list(e.removed), "kept": e.kept}
            for e in red.removal_log
        ],
        "gadgets": [
            {"kind": t.kind, "gates": t.gate_count, "comparators": t.comparator_count,
             "purify": t.purify_gates}
            for t in red.traces
        ],
    }, args.map_out)
    return 0


def cmd_gcp_to_gc(args):
    gcp = ser.gcplus_from_json(_load(args.circuit, None))
    plain, lmap = gcircuitplus_to_gcircuit(gcp, _rat(args.eps), _rat(args.delta))
    _emit(ser.gcircuit_to_json(plain), args.out)
    _emit({
        "scale": fmt(lmap.scale),
        "plus": dict(sorted(lmap.plus.items())),
        "minus": dict(sorted(lmap.minus.items())),
        "error_factor": fmt(lmap.error_factor),
        "stage_gate_counts": lmap.stage_gate_counts,
    }, args.map_out)
    return 0


def cmd_decode_unary(args):
    from .gadgets import unary_value
    assignment = ser.ternary_from_json(_load(args.assignment, None))
    mapping = _load(args.map, None)
    lifted = {int(orig): assignment[final]
              for orig, final in mapping["node_map"].items()}
    entries = []
    from .circuits import PureGate
    from .gadgets import RemovalEntry
    for e in mapping["removals"]:
        gate = PureGate(e["gate"]["kind"], e["gate"]["u"], e["gate"]["v"],
                        e["gate"].get("w"))
        entries.append(RemovalEntry(gate, tuple(e["removed"]), e.get("kept")))
    lifted = replay_removals(lifted, entries)
    values = {var: unary_value(lifted, nodes)
              for var, nodes in mapping["var_nodes"].items()}
    out = {"values": {v: fmt(x) for v, x in sorted(values.items())}}
    if args.circuit:
        gc = ser.gcircuit_from_json(_load(args.circuit, None))
        from .circuits import check_gcircuit_gate
        eps = _rat(args.eps)
        good = sum(1 for g in gc.gates if check_gcircuit_gate(g, values, eps))
        out["satisfied_fraction"] = fmt(Fraction(good, len(gc.gates))) if gc.gates else "1"
    _emit(out, args.out)
    return 0


def _preprocess_and_ledger(market, eps_c, delta_c):
    ledger = ConstantLedger.from_market(market, eps_c, delta_c)
    slack = 1 - ledger.g_second
    if not (0 < slack < 1):
        raise UsageError("eps-c too large for this market: the guarantee "
                         "chain degenerates; pick a smaller value")
    reduced, removed = preprocess_reducible(market, slack)
    return ledger, slack, reduced, removed


def cmd_encode_market(args):
    market = ser.market_from_json(_load(args.market, None))
    eps_c, delta_c = _rat(args.eps_c), _rat(args.delta_c)
    ledger, slack, reduced, removed = _preprocess_and_ledger(market, eps_c, delta_c)
    enc = encode_market(reduced, eps_c)
    _emit(ser.encoding_to_json(enc), args.out)
    if args.reduced_out:
        _emit(ser.market_to_json(reduced), args.reduced_out)
    return 0


def cmd_repair(args):
    market = ser.market_from_json(_load(args.market, None))
    sol = ser.real_assignment_from_json(_load(args.solution, None))
    eps_c, delta_c = _rat(args.eps_c), _rat(args.delta_c)
    try:
        ledger, slack, reduced, removed = _preprocess_and_ledger(market, eps_c, delta_c)
        enc = encode_market(reduced, eps_c)
        prices, alloc = decode_gcplus_solution(reduced, enc, sol)
        prices, alloc, trace = repair_steps(reduced, prices, alloc, ledger)
        prices, alloc = reinsert_removed(removed, prices, alloc, slack)
    except PipelineError as exc:
        print(f"repair failed: {exc}", file=sys.stderr)
        return 1
    report = verify_equilibrium(market, prices, alloc, Fraction(0), slack)
    _emit({
        "prices": ser.prices_to_json(prices),
        "alloc": ser.alloc_to_json(alloc),
        "report": ser.report_to_json(report),
        "ledger": ser.ledger_to_json(ledger),
    }, args.out)
    if args.trace:
        from .report import write_trace
        from .repair import RepairResult
        result = RepairResult(prices, alloc, report, ledger, trace)
        for path in write_trace(reduced, result, args.trace):
            print(path, file=sys.stderr)
    return 0 if report.accepted else 1


def cmd_fisher_to_exchange(args):
    market = ser.market_from_json(_load(args.market, None))
    em = fisher_to_exchange(market)
    _emit(ser.exchange_to_json(em), args.out)
    return 0


def cmd_search(args):
    market = ser.market_from_json(_load(args.market, None))
    cfg = SearchConfig()
    if args.config:
        raw = _load(args.config, None)
        if "price_grid" in raw:
            cfg.price_grid = {g: [rat(v) for v in vals]
                              for g, vals in raw["price_grid"].items()}
        if "default_grid" in raw:
            cfg.default_grid = [rat(v) for v in raw["default_grid"]]
        cfg.descent_rounds = raw.get("descent_rounds", cfg.descent_rounds)
        cfg.max_candidates = raw.get("max_candidates", cfg.max_candidates)
    found = search_equilibrium(market, _rat(args.eps), _rat(args.delta), cfg)
    if not found:
        print("no equilibrium found", file=sys.stderr)
        return 1
    prices, alloc = found
    _emit({"prices": ser.prices_to_json(prices), "alloc": ser.alloc_to_json(alloc)},
          args.out)
    return 0


def cmd_bfsolve(args):
    inst = ser.pure_from_json(_load(args.circuit, None))
    try:
        assignment = brute_force_pure_solve(inst)
    except OracleError as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return 1
    _emit(ser.ternary_to_json(assignment), args.out)
    return 0


def cmd_audit_gates(args):
    market = ser.market_from_json(_load(args.market, None))
    decode = ser.decode_map_from_json(_load(args.decode_map, None))
    prices = ser.prices_from_json(_load(args.prices, None))
    alloc = ser.alloc_from_json(_load(args.alloc, None))
    params = ser.params_from_json(_load(args.params, None))
    audit = gate_audit(market, decode, prices, alloc, params)
    _emit({
        "wasted_money": {g: fmt(v) for g, v in sorted(audit.wasted_money.items())},
        "faulty_goods": sorted(audit.faulty_goods),
        "decoded": ser.ternary_to_json(audit.decoded),
        "satisfied_fraction": fmt(audit.satisfied_fraction),
        "gates": [
            {"kind": a.record.kind, "goods": list(a.record.goods),
             "faulty": a.faulty, "decoded_ok": a.decoded_ok}
            for a in audit.gates
        ],
    }, args.out)
    return 0


# --- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splcmarket",
        description="SPLC Fisher markets, circuit reductions, and the "
                    "exact-clearing repair pipeline")
    parser.add_argument("--schema", action="store_true",
                        help="print the JSON schemas and exit")
    sub = parser.add_subparsers(dest="command")

    def add(name, fn, **flags):
        p = sub.add_parser(name)
        for flag, kwargs in flags.items():
            p.add_argument(f"--{flag.replace('_', '-')}", **kwargs)
        p.set_defaults(fn=fn)
        return p

    add("verify", cmd_verify,
        market={"required": True}, prices={"required": True},
        alloc={"required": True}, eps={"required": True},
        delta={"required": True}, out={})
    add("verify-exchange", cmd_verify_exchange,
        market={"required": True}, prices={"required": True},
        alloc={"required": True}, eps={"required": True},
        delta={"required": True}, out={})
    add("demand", cmd_demand,
        market={"required": True}, prices={"required": True},
        buyer={"required": True, "type": int}, budget={}, out={})
    add("reduce-pc-to-market", cmd_reduce,
        circuit={"required": True}, params={}, eps_m={}, delta_c={},
        mode={"default": "pcp"}, market_out={}, decode_out={}, params_out={})
    add("decode-prices", cmd_decode_prices,
        prices={"required": True}, params={"required": True}, out={})
    add("validate-params", cmd_validate_params, params={"required": True}, out={})
    add("solve-params", cmd_solve_params,
        eps_m={"required": True}, delta_c={"required": True},
        mode={"default": "pcp"}, out={})
    add("gc-to-pc", cmd_gc_to_pc,
        circuit={"required": True}, eps={"required": True},
        delta={"required": True}, out={}, map_out={"required": True})
    add("gcp-to-gc", cmd_gcp_to_gc,
        circuit={"required": True}, eps={"required": True},
        delta={"required": True}, out={}, map_out={"required": True})
    add("decode-unary", cmd_decode_unary,
        assignment={"required": True}, map={"required": True}, circuit={},
        eps={"default": "1"}, out={})
    add("encode-market", cmd_encode_market,
        market={"required": True}, eps_c={"required": True},
        delta_c={"required": True}, out={}, reduced_out={})
    add("repair", cmd_repair,
        market={"required": True}, solution={"required": True},
        eps_c={"required": True}, delta_c={"required": True},
        trace={}, out={})
    add("fisher-to-exchange", cmd_fisher_to_exchange,
        market={"required": True}, out={})
    add("search", cmd_search,
        market={"required": True}, eps={"required": True},
        delta={"required": True}, config={}, out={})
    add("bfsolve", cmd_bfsolve, circuit={"required": True}, out={})
    add("audit-gates", cmd_audit_gates,
        market={"required": True}, decode_map={"required": True},
        prices={"required": True}, alloc={"required": True},
        params={"required": True}, out={})
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        print(json.dumps(ser.SCHEMAS, indent=2, sort_keys=True))
        return 0
    if not getattr(args, "fn", None):
        parser.print_help()
        return 2
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (HardnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
