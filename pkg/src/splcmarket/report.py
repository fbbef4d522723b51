"""Trace output for the repair pipeline: JSON snapshots, a CSV table, and
rendered figures of how prices, clearing gaps, and optimality evolve."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .market import eval_utility, optimal_utility  # noqa: E402
from .repair import demands  # noqa: E402
from .serialize import dump, snapshot_to_json  # noqa: E402


def write_trace(market, result, out_dir: str) -> list[str]:
    """Emit <out_dir>/step-*.json, trace.csv, and PNG figures.

    Returns the list of file paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    for idx, snap in enumerate(result.trace):
        path = os.path.join(out_dir, f"step-{idx:02d}.json")
        dump(snapshot_to_json(snap), path)
        written.append(path)

    rows = []
    for idx, snap in enumerate(result.trace):
        demand = demands(market, snap.alloc)
        for g in market.goods:
            rows.append({
                "step": idx, "stage": snap.stage, "kind": "good", "id": g,
                "price": float(snap.prices[g]), "demand": float(demand[g]),
                "value": float(abs(demand[g] - 1)),
            })
        for i, buyer in enumerate(market.buyers):
            row = snap.alloc.get(i, {})
            spend = sum(float(snap.prices[g]) * float(q) for g, q in row.items())
            rows.append({
                "step": idx, "stage": snap.stage, "kind": "buyer", "id": str(i),
                "price": "", "demand": spend,
                "value": float(snap.burn.get(i, 0)),
            })
    csv_path = os.path.join(out_dir, "trace.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "stage", "kind", "id",
                                                "price", "demand", "value"])
        writer.writeheader()
        writer.writerows(rows)
    written.append(csv_path)

    written.extend(_figures(market, result, out_dir))
    return written


def _figures(market, result, out_dir: str) -> list[str]:
    steps = list(range(len(result.trace)))
    labels = [snap.stage for snap in result.trace]
    out = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for g in market.goods:
        ax.plot(steps, [float(snap.prices[g]) for snap in result.trace],
                marker="o", label=g)
    ax.set_xticks(steps)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("price")
    ax.set_title("prices per repair stage")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, "prices.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for g in market.goods:
        gaps = [abs(float(demands(market, snap.alloc)[g]) - 1.0)
                for snap in result.trace]
        ax.plot(steps, gaps, marker="o", label=g)
    ax.set_xticks(steps)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("|demand - 1|")
    ax.set_yscale("symlog", linthresh=1e-12)
    ax.set_title("clearing gap per repair stage")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, "clearing.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    final = result.trace[-1]
    ratios = []
    for i, buyer in enumerate(market.buyers):
        row = final.alloc.get(i, {})
        achieved = sum(
            (eval_utility(buyer.utilities[g], q) for g, q in row.items()
             if g in buyer.utilities), 0)
        opt = optimal_utility(buyer, final.prices, buyer.budget)
        ratios.append(1.0 if not opt else float(achieved) / float(opt))
    ax.bar(range(len(ratios)), ratios)
    ax.axhline(float(result.ledger.g_second), color="red", linestyle="--",
               label="certified bound")
    ax.set_xlabel("buyer")
    ax.set_ylabel("achieved / optimal utility")
    ax.set_ylim(0, 1.05)
    ax.set_title("final bundle optimality")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, "optimality.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    out.append(path)
    return out
