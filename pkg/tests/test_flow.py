"""Exact max flow and the residual-reachability helper."""

import itertools
from fractions import Fraction as F

from splcmarket.flow import FlowNetwork, max_flow, unsaturated_forward_reachable

S, T = ("s",), ("t",)


def test_single_path_bottleneck():
    net = FlowNetwork()
    net.add_edge(S, ("g",), F(3))
    net.add_edge(("g",), ("b",), F(2))
    net.add_edge(("b",), T, F(5))
    assert max_flow(net, S, T) == 2


def test_empty_network():
    net = FlowNetwork()
    net.add_node(S)
    net.add_node(T)
    assert max_flow(net, S, T) == 0


def _enumerate_paths_value(edges, source, sink):
    """Independent oracle: maximize flow over all simple-path combinations by
    brute force over path orderings with greedy saturation."""
    paths = []

    def walk(node, seen, path):
        if node == sink:
            paths.append(tuple(path))
            return
        for idx, (src, dst, cap) in enumerate(edges):
            if src == node and dst not in seen:
                walk(dst, seen | {dst}, path + [idx])

    walk(source, {source}, [])
    best = F(0)
    for order in itertools.permutations(range(len(paths))):
        residual = [cap for _, _, cap in edges]
        total = F(0)
        for pi in order:
            push = min(residual[i] for i in paths[pi])
            for i in paths[pi]:
                residual[i] -= push
            total += push
        best = max(best, total)
    return best


def test_figure_network_against_path_oracle():
    # the two-good, two-buyer scenario: g1 over-clears by 1/5 money; buyers
    # may burn 1/10 each
    edges = [
        (S, "g1", F(1, 5)),
        ("g1", "b1", F(3, 5)),
        ("b1", "g1", F(2, 5)),
        ("b1", "g2", F(1, 5)),
        ("g2", "b1", F(1, 5)),
        ("b2", "g2", F(9, 10)),
        ("g2", "b2", F(1, 10)),
        ("b1", T, F(1, 10)),
        ("b2", T, F(1, 10)),
    ]
    net = FlowNetwork()
    for src, dst, cap in edges:
        net.add_edge(src, dst, cap)
    got = max_flow(net, S, T)
    want = _enumerate_paths_value(edges, S, T)
    assert got == want == F(1, 5)


def test_flow_conservation_and_capacity():
    net = FlowNetwork()
    net.add_edge(S, "a", F(2))
    net.add_edge(S, "b", F(1))
    net.add_edge("a", "c", F(3, 2))
    net.add_edge("b", "c", F(1))
    net.add_edge("a", T, F(1, 2))
    net.add_edge("c", T, F(2))
    value = max_flow(net, S, T)
    assert value == F(5, 2)
    for edge in net.edges:
        assert 0 <= edge.flow <= edge.cap
    for node in net.nodes:
        if node in (S, T):
            continue
        inflow = sum(e.flow for e in net.edges if e.dst == node)
        outflow = sum(e.flow for e in net.edges if e.src == node)
        assert inflow == outflow


def test_unsaturated_reachability():
    net = FlowNetwork()
    e1 = net.add_edge(S, "a", F(1))
    e2 = net.add_edge("a", "b", F(1))
    net.add_edge("b", T, F(1))
    max_flow(net, S, T)  # saturates everything
    assert unsaturated_forward_reachable(net, {S}) == {S}
    e1.cap = F(2)  # now the source edge has slack again
    assert unsaturated_forward_reachable(net, {S}) == {S, "a"}
