"""Exact max flow on capacitated multigraphs.

Capacities and flows are Fractions and the solver is plain augmenting-path
(BFS, shortest augmenting path).  Networks at desk scale are tiny, so the
asymptotics are irrelevant; exactness is the point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

Node = tuple


@dataclass
class Edge:
    src: Node
    dst: Node
    cap: Fraction
    flow: Fraction = Fraction(0)
    tag: tuple = ()

    @property
    def residual(self) -> Fraction:
        return self.cap - self.flow


@dataclass
class FlowNetwork:
    nodes: set = field(default_factory=set)
    edges: list[Edge] = field(default_factory=list)
    # node -> list of (edge index, is_forward)
    adj: dict = field(default_factory=dict)

    def add_node(self, node: Node):
        self.nodes.add(node)
        self.adj.setdefault(node, [])

    def add_edge(self, src: Node, dst: Node, cap: Fraction, tag: tuple = ()) -> Edge:
        if cap < 0:
            raise ValueError("negative capacity")
        self.add_node(src)
        self.add_node(dst)
        edge = Edge(src, dst, cap, Fraction(0), tag)
        idx = len(self.edges)
        self.edges.append(edge)
        self.adj[src].append((idx, True))
        self.adj[dst].append((idx, False))
        return edge


def max_flow(net: FlowNetwork, source: Node, sink: Node) -> Fraction:
    """Edmonds-Karp; leaves per-edge flows on the network and returns the value."""
    if source not in net.nodes or sink not in net.nodes:
        return Fraction(0)
    total = Fraction(0)
    while True:
        parent: dict[Node, tuple[int, bool]] = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            node = queue.popleft()
            for idx, forward in net.adj[node]:
                edge = net.edges[idx]
                room = edge.residual if forward else edge.flow
                nxt = edge.dst if forward else edge.src
                if room > 0 and nxt not in parent:
                    parent[nxt] = (idx, forward)
                    queue.append(nxt)
        if sink not in parent:
            return total
        # bottleneck along the path
        push = None
        node = sink
        while node != source:
            idx, forward = parent[node]
            edge = net.edges[idx]
            room = edge.residual if forward else edge.flow
            push = room if push is None else min(push, room)
            node = edge.src if forward else edge.dst
        node = sink
        while node != source:
            idx, forward = parent[node]
            edge = net.edges[idx]
            if forward:
                edge.flow += push
            else:
                edge.flow -= push
            node = edge.src if forward else edge.dst
        total += push


def unsaturated_forward_reachable(net: FlowNetwork, seeds: set) -> set:
    """Nodes reachable from the seeds along forward edges with flow < cap."""
    seen = set(s for s in seeds if s in net.nodes)
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for idx, forward in net.adj[node]:
            if not forward:
                continue
            edge = net.edges[idx]
            if edge.flow < edge.cap and edge.dst not in seen:
                seen.add(edge.dst)
                queue.append(edge.dst)
    return seen
