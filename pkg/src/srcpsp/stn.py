"""Simple temporal network machinery shared by the solver and the STNU layer.

A :class:`DistanceGraph` collects difference constraints in lower-bound
convention: an edge ``(i, j, w)`` states ``t_j - t_i >= w``.  Consistency and
earliest times are computed with Bellman-Ford style longest-path relaxation
from a virtual origin, so every time point also satisfies ``t >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence


@dataclass(frozen=True)
class DistanceGraph:
    """Difference-constraint graph over integer time points.

    Edges are ``(from_node, to_node, weight)`` with the meaning
    ``t_to - t_from >= weight``.  Parallel edges are allowed; the tightest
    (largest) lower bound dominates.
    """

    node_count: int
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        for i, j, _ in self.edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.node_count} nodes")


@dataclass(frozen=True)
class Consistent:
    """Result of a successful propagation: minimal nonnegative solution."""

    potentials: tuple[int, ...]


@dataclass(frozen=True)
class NegativeCycle:
    """Witness of an infeasible constraint system.

    ``nodes`` lists the cycle in traversal order (first node not repeated).
    ``total`` is the sum of the tightest lower bounds along the cycle; the
    system is infeasible because this sum is positive, i.e. the cycle forces
    each of its nodes strictly after itself.
    """

    nodes: tuple[int, ...]
    total: int


PropagationResult = Consistent | NegativeCycle


def _tightest_edges(g: DistanceGraph) -> dict[tuple[int, int], int]:
    best: dict[tuple[int, int], int] = {}
    for i, j, w in g.edges:
        key = (i, j)
        if key not in best or w > best[key]:
            best[key] = w
    return best


def _relax(
    node_count: int,
    edges: Sequence[tuple[int, int, int]],
    origin: int,
) -> tuple[list[int] | None, list[int] | None]:
    """Longest paths from ``origin``; returns (distances, None) or (None, cycle)."""
    neg_inf = float("-inf")
    dist: list[float] = [neg_inf] * node_count
    dist[origin] = 0
    pred: list[int | None] = [None] * node_count
    last_changed = origin
    for _ in range(node_count):
        changed = False
        for i, j, w in edges:
            if dist[i] != neg_inf and dist[i] + w > dist[j]:
                dist[j] = dist[i] + w
                pred[j] = i
                last_changed = j
                changed = True
        if not changed:
            return [int(d) for d in dist], None
    # Still relaxing after node_count rounds: walk predecessors into the cycle.
    node = last_changed
    for _ in range(node_count):
        node = pred[node]  # type: ignore[assignment]
    cycle = [node]
    walk = pred[node]
    while walk != node:
        cycle.append(walk)  # type: ignore[arg-type]
        walk = pred[walk]  # type: ignore[index]
    cycle.reverse()
    return None, cycle


def propagate(g: DistanceGraph) -> PropagationResult:
    """Check consistency and compute the earliest-time potential of ``g``.

    The returned potential is the least solution of the system
    ``{t_j - t_i >= w} + {t >= 0}``; the potential of a node is the longest
    constraint path that reaches it.  An inconsistent system yields a
    :class:`NegativeCycle` whose lower bounds sum to a positive value.
    """
    n = g.node_count
    tight = _tightest_edges(g)
    origin = n
    edges = [(origin, v, 0) for v in range(n)]
    edges.extend((i, j, w) for (i, j), w in tight.items())
    dist, cycle = _relax(n + 1, edges, origin)
    if cycle is not None:
        total = sum(tight[(cycle[k], cycle[(k + 1) % len(cycle)])] for k in range(len(cycle)))
        return NegativeCycle(nodes=tuple(cycle), total=total)
    assert dist is not None
    return Consistent(potentials=tuple(dist[:n]))


def earliest_schedule(
    g: DistanceGraph,
    fixed: Mapping[int, int] | None = None,
) -> list[int] | None:
    """Minimal nonnegative completion of ``g`` honoring exact ``fixed`` times.

    Returns the earliest start vector, or None when the fixed assignments
    contradict the graph (or each other).
    """
    n = g.node_count
    fixed = fixed or {}
    for v, t in fixed.items():
        if not 0 <= v < n:
            raise ValueError(f"fixed node {v} out of range")
        if t < 0:
            return None  # all time points live on the nonnegative axis
    origin = n
    edges: list[tuple[int, int, int]] = [(origin, v, 0) for v in range(n)]
    for (i, j), w in _tightest_edges(g).items():
        edges.append((i, j, w))
    for v, t in fixed.items():
        edges.append((origin, v, t))   # t_v >= t
        edges.append((v, origin, -t))  # t_v <= t
    dist, cycle = _relax(n + 1, edges, origin)
    if cycle is not None:
        return None
    assert dist is not None
    return dist[:n]
