"""Tiered causal DAG over meta-prompt (M), linguistic (L), and metric (C)
variables.

The tier order is part of the type's contract: meta-prompt nodes are
exogenous (nothing points into them) and metric nodes are terminal (nothing
points from C back into M or L).  All query helpers are pure; the graph is
immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from promptcausal.errors import OverlappingSets, UnknownNode

TIER_ORDER = {"M": 0, "L": 1, "C": 2}

__all__ = ["Edge", "CausalGraph", "d_separated", "TIER_ORDER"]


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    weight: float = 1.0


@dataclass(frozen=True)
class CausalGraph:
    """Immutable weighted DAG with a tier tag per node.

    Construction validates everything the rest of the system relies on:
    unique known nodes, edges between known nodes, no duplicate or
    self-loop edges, tier legality (no edge into M, none from C back into
    M or L), and acyclicity.
    """

    nodes: Tuple[str, ...]
    tiers: Mapping[str, str]
    edges: Tuple[Edge, ...]

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        for node in self.nodes:
            if self.tiers.get(node) not in TIER_ORDER:
                raise ValueError(f"node {node!r} has invalid tier {self.tiers.get(node)!r}")
        seen: Set[Tuple[str, str]] = set()
        for edge in self.edges:
            if edge.src not in self.tiers or edge.dst not in self.tiers:
                raise UnknownNode(edge.src if edge.src not in self.tiers else edge.dst)
            if edge.src == edge.dst:
                raise ValueError(f"self-loop on {edge.src!r}")
            if (edge.src, edge.dst) in seen:
                raise ValueError(f"duplicate edge {edge.src!r} -> {edge.dst!r}")
            seen.add((edge.src, edge.dst))
            if self.tiers[edge.dst] == "M":
                raise ValueError(
                    f"edge into exogenous node {edge.dst!r} (from {edge.src!r})"
                )
            if self.tiers[edge.src] == "C" and self.tiers[edge.dst] != "C":
                raise ValueError(
                    f"backward-tier edge {edge.src!r} (C) -> {edge.dst!r}"
                )
        self.topological_order()  # raises on cycles

    # -- basic queries -------------------------------------------------

    def _require(self, node: str) -> None:
        if node not in self.tiers:
            raise UnknownNode(node)

    def tier(self, node: str) -> str:
        self._require(node)
        return self.tiers[node]

    def parents(self, node: str) -> Tuple[str, ...]:
        self._require(node)
        return tuple(e.src for e in self.edges if e.dst == node)

    def children(self, node: str) -> Tuple[str, ...]:
        self._require(node)
        return tuple(e.dst for e in self.edges if e.src == node)

    def has_edge(self, src: str, dst: str) -> bool:
        return any(e.src == src and e.dst == dst for e in self.edges)

    def edge_weight(self, src: str, dst: str) -> float:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e.weight
        raise KeyError(f"no edge {src!r} -> {dst!r}")

    def nodes_in_tier(self, tier: str) -> Tuple[str, ...]:
        return tuple(n for n in self.nodes if self.tiers[n] == tier)

    # -- reachability ----------------------------------------------------

    def ancestors(self, node: str, tier: Optional[str] = None) -> FrozenSet[str]:
        """Transitive closure of parents, optionally restricted to a tier."""
        self._require(node)
        found: Set[str] = set()
        stack = [node]
        while stack:
            current = stack.pop()
            for parent in self.parents(current):
                if parent not in found:
                    found.add(parent)
                    stack.append(parent)
        if tier is not None:
            found = {n for n in found if self.tiers[n] == tier}
        return frozenset(found)

    def descendants(self, node: str, tier: Optional[str] = None) -> FrozenSet[str]:
        self._require(node)
        found: Set[str] = set()
        stack = [node]
        while stack:
            current = stack.pop()
            for child in self.children(current):
                if child not in found:
                    found.add(child)
                    stack.append(child)
        if tier is not None:
            found = {n for n in found if self.tiers[n] == tier}
        return frozenset(found)

    def topological_order(self) -> Tuple[str, ...]:
        """Kahn's algorithm; deterministic (input node order breaks ties)."""
        order_index = {n: i for i, n in enumerate(self.nodes)}
        indegree = {n: 0 for n in self.nodes}
        for e in self.edges:
            indegree[e.dst] += 1
        ready = sorted((n for n in self.nodes if indegree[n] == 0), key=order_index.get)
        out: List[str] = []
        while ready:
            node = ready.pop(0)
            out.append(node)
            changed = False
            for child in self.children(node):
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
                    changed = True
            if changed:
                ready.sort(key=order_index.get)
        if len(out) != len(self.nodes):
            cyclic = [n for n in self.nodes if indegree[n] > 0]
            raise ValueError(f"graph has a cycle among {cyclic}")
        return tuple(out)

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> Dict[str, object]:
        return {
            "nodes": [{"name": n, "tier": self.tiers[n]} for n in self.nodes],
            "edges": [
                {"src": e.src, "dst": e.dst, "weight": e.weight} for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, object]) -> "CausalGraph":
        nodes = tuple(item["name"] for item in obj["nodes"])  # type: ignore[index]
        tiers = {item["name"]: item["tier"] for item in obj["nodes"]}  # type: ignore[index]
        edges = tuple(
            Edge(item["src"], item["dst"], float(item.get("weight", 1.0)))  # type: ignore[union-attr]
            for item in obj["edges"]  # type: ignore[index]
        )
        return cls(nodes=nodes, tiers=tiers, edges=edges)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load_json(cls, path: str | Path) -> "CausalGraph":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dot(self) -> str:
        shade = {"M": "lightblue", "L": "lightyellow", "C": "lightpink"}
        lines = ["digraph causal {", "  rankdir=LR;"]
        for n in self.nodes:
            lines.append(
                f'  "{n}" [style=filled, fillcolor={shade[self.tiers[n]]}, '
                f'label="{n}\\n({self.tiers[n]})"];'
            )
        for e in self.edges:
            lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.weight:.2f}"];')
        lines.append("}")
        return "\n".join(lines)


def d_separated(
    graph: CausalGraph,
    x: Iterable[str],
    y: Iterable[str],
    z: Iterable[str] = (),
) -> bool:
    """Exact d-separation of node sets X and Y given Z.

    Implemented as directed reachability with the standard two-direction
    ("ball") traversal: a trail is active through a chain or fork node only
    when it is unconditioned, and through a collider only when the collider
    or one of its descendants is conditioned on.  Sets must be disjoint and
    all nodes known.
    """
    xs, ys, zs = frozenset(x), frozenset(y), frozenset(z)
    if not xs or not ys:
        raise ValueError("X and Y must be non-empty")
    if xs & ys or xs & zs or ys & zs:
        raise OverlappingSets(f"overlap among X={sorted(xs)}, Y={sorted(ys)}, Z={sorted(zs)}")
    for node in xs | ys | zs:
        if node not in graph.tiers:
            raise UnknownNode(node)

    conditioned_ancestry: Set[str] = set(zs)
    for node in zs:
        conditioned_ancestry |= graph.ancestors(node)

    # (node, direction): "up" means the trail arrived from a child (or is a
    # source), "down" means it arrived from a parent.
    visited: Set[Tuple[str, str]] = set()
    frontier: List[Tuple[str, str]] = [(node, "up") for node in xs]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in ys and node not in zs:
            return False
        if direction == "up" and node not in zs:
            for parent in graph.parents(node):
                frontier.append((parent, "up"))
            for child in graph.children(node):
                frontier.append((child, "down"))
        elif direction == "down":
            if node not in zs:
                for child in graph.children(node):
                    frontier.append((child, "down"))
            if node in conditioned_ancestry:
                for parent in graph.parents(node):
                    frontier.append((parent, "up"))
    return True
