"""Temporal networks with uncertainty: construction, DC checking, execution.

Timepoints come in pairs: activity j owns start node 2j and end node 2j+1.
Ordinary edges use upper-bound convention, (u, v, w) meaning t_v - t_u <= w.
A contingent link (A, C, low, high) hands C's time to nature: C fires at
t_A + d for some d in [low, high] chosen outside the agent's control.

Dynamic controllability is decided by edge propagation in the style of the
Morris-Muscettola labeled-distance-graph rules: ordinary composition,
upper-case composition, lower-case and cross-case reductions guarded by
strictly negative second legs, and label removal once a wait is covered by
the link's lower bound.  Propagation to quiescence either derives a negative
ordinary self-loop / an inconsistent all-max projection (not DC, witness
extracted from edge provenance) or yields the closed edge set an executor
can dispatch greedily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .chaining import PartialOrderSchedule
from .instances import DurationSample, StochasticInstance
from .stn import Consistent, DistanceGraph, propagate


class RteError(RuntimeError):
    """Execution was handed a network that is not dispatchable (not a DC closure)."""


@dataclass(frozen=True)
class Stnu:
    """Timepoint graph: 2 nodes per activity, ordinary edges, contingent links."""

    n_activities: int
    ordinary_edges: tuple[tuple[int, int, int], ...]
    contingent_links: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self) -> None:
        n = self.n_timepoints
        for u, v, _ in self.ordinary_edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"ordinary edge ({u}, {v}) out of range")
        seen: set[int] = set()
        for a, c, low, high in self.contingent_links:
            if not (0 <= a < n and 0 <= c < n) or a == c:
                raise ValueError(f"bad contingent link ({a}, {c})")
            if not 1 <= low <= high:
                raise ValueError(f"contingent bounds [{low}, {high}] invalid")
            if c in seen:
                raise ValueError(f"timepoint {c} has two incoming contingent links")
            seen.add(c)

    @property
    def n_timepoints(self) -> int:
        return 2 * self.n_activities

    @staticmethod
    def start(j: int) -> int:
        return 2 * j

    @staticmethod
    def end(j: int) -> int:
        return 2 * j + 1

    def label(self, tp: int) -> str:
        return f"{'s' if tp % 2 == 0 else 'f'}{tp // 2}"


@dataclass(frozen=True)
class Estnu:
    """DC closure ready for execution: tightened ordinary edges plus waits.

    A wait edge (x, a, w, c) with w < 0 reads: while contingent c is
    unobserved, x may not execute before t_a - w; observing c releases it.
    """

    base: Stnu
    wait_edges: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self) -> None:
        contingent = {c for _, c, _, _ in self.base.contingent_links}
        for _, _, _, c in self.wait_edges:
            if c not in contingent:
                raise ValueError(f"wait edge labeled by non-contingent timepoint {c}")


@dataclass(frozen=True)
class Controllable:
    estnu: Estnu


@dataclass(frozen=True)
class NotDc:
    """Witness: closed walk (nodes in traversal order) with negative total length."""

    nodes: tuple[int, ...]
    total: int


@dataclass(frozen=True)
class ExecutionTrace:
    times: tuple[int, ...]
    feasible: bool
    makespan: int
    decisions: tuple[tuple[int, tuple[int, ...]], ...]


def build_stnu(pos: PartialOrderSchedule, stoch: StochasticInstance) -> Stnu:
    """Encode instance lags, duration bounds and chain edges as an STNU.

    Fixed durations (lb = ub) become rigid ordinary pairs; uncertain ones
    become contingent links.  An instance lag (i, j, w) yields the edge
    (start_j, start_i, -w); a chain edge (A, B) yields (start_B, end_A, 0),
    i.e. A must end before B starts.
    """
    if pos.base != stoch.base:
        raise ValueError("partial order schedule and stochastic instance disagree")
    inst = stoch.base
    start, end = Stnu.start, Stnu.end
    edges: list[tuple[int, int, int]] = []
    links: list[tuple[int, int, int, int]] = []
    for j, (lb, ub) in enumerate(stoch.bounds):
        if lb == ub:
            edges.append((start(j), end(j), lb))
            edges.append((end(j), start(j), -lb))
        else:
            links.append((start(j), end(j), lb, ub))
    for i, j, w in inst.temporal_constraints:
        edges.append((start(j), start(i), -w))
    for a, b in pos.chain_edges:
        edges.append((start(b), end(a), 0))
    return Stnu(
        n_activities=inst.n_activities,
        ordinary_edges=tuple(edges),
        contingent_links=tuple(links),
    )


_ORD = "ord"
_UC = "uc"
_LC = "lc"

# a provenance walk is a tuple of original steps (kind, from, to, weight)
_Step = tuple[str, int, int, int]


class _Propagator:
    """Edge-propagation state; derives the DC closure or a negative witness."""

    def __init__(self, stnu: Stnu) -> None:
        self.stnu = stnu
        self.low = {c: low for _, c, low, _ in stnu.contingent_links}
        self.activation = {c: a for a, c, _, _ in stnu.contingent_links}
        self.ord: dict[tuple[int, int], int] = {}
        self.ord_walk: dict[tuple[int, int], tuple[_Step, ...]] = {}
        self.uc: dict[tuple[int, int], int] = {}  # (source, contingent label) -> weight
        self.uc_walk: dict[tuple[int, int], tuple[_Step, ...]] = {}
        self.ord_out: dict[int, set[int]] = {}
        self.ord_in: dict[int, set[int]] = {}
        self.uc_out: dict[int, set[int]] = {}
        self.witness: NotDc | None = None
        weights = [abs(w) for _, _, w in stnu.ordinary_edges]
        weights += [abs(low) + abs(high) for _, _, low, high in stnu.contingent_links]
        self.horizon = 1 + sum(weights)
        self.queue: list[tuple[str, int, int, int]] = []

    # -- storage with minimum-keeping and immediate inconsistency checks --

    def put_ord(self, u: int, v: int, w: int, walk: tuple[_Step, ...]) -> None:
        if self.witness is not None:
            return
        if u == v and w >= 0:
            return  # vacuous self-loop
        key = (u, v)
        if key in self.ord:
            if self.ord[key] <= w:
                return
        else:
            self.ord_out.setdefault(u, set()).add(v)
            self.ord_in.setdefault(v, set()).add(u)
        self.ord[key] = w
        self.ord_walk[key] = walk
        if (u == v and w < 0) or w < -self.horizon:
            self.witness = _witness_from_walk(walk)
            return
        self.queue.append((_ORD, u, v, w))

    def put_uc(self, u: int, c: int, w: int, walk: tuple[_Step, ...]) -> None:
        if self.witness is not None:
            return
        key = (u, c)
        if key in self.uc:
            if self.uc[key] <= w:
                return
        else:
            self.uc_out.setdefault(u, set()).add(c)
        self.uc[key] = w
        self.uc_walk[key] = walk
        if w < -self.horizon:
            self.witness = _witness_from_walk(walk)
            return
        if w < 0 and u == self.activation[c]:
            # activation waiting on its own link: released strictly after itself
            self.witness = _witness_from_walk(walk)
            return
        self.queue.append((_UC, u, c, w))
        if w >= -self.low[c]:
            # wait expires no later than the link can fire: unconditional bound
            self.put_ord(u, self.activation[c], w, walk)

    # -- rule application --

    def run(self) -> None:
        for u, v, w in self.stnu.ordinary_edges:
            self.put_ord(u, v, w, ((_ORD, u, v, w),))
        for a, c, low, high in self.stnu.contingent_links:
            self.put_ord(a, c, high, ((_ORD, a, c, high),))
            self.put_ord(c, a, -low, ((_ORD, c, a, -low),))
            self.put_uc(c, c, -high, ((_UC, c, a, -high),))
        while self.queue and self.witness is None:
            kind, x, y, w = self.queue.pop()
            if kind == _ORD:
                if self.ord.get((x, y)) == w:
                    self._from_ord(x, y, w)
            elif self.uc.get((x, y)) == w:
                self._from_uc(x, y, w)

    def _from_ord(self, u: int, v: int, w: int) -> None:
        walk = self.ord_walk[(u, v)]
        for y in list(self.ord_out.get(v, ())):  # (u -> v) + (v -> y)
            self.put_ord(u, y, w + self.ord[(v, y)], walk + self.ord_walk[(v, y)])
            if self.witness is not None:
                return
        for x in list(self.ord_in.get(u, ())):  # (x -> u) + (u -> v)
            self.put_ord(x, v, self.ord[(x, u)] + w, self.ord_walk[(x, u)] + walk)
            if self.witness is not None:
                return
        for c in list(self.uc_out.get(v, ())):  # upper-case rule: ordinary prefix
            self.put_uc(u, c, w + self.uc[(v, c)], walk + self.uc_walk[(v, c)])
            if self.witness is not None:
                return
        if w < 0 and u in self.low and v != u:
            # lower-case rule: the link into u may fire at its minimum
            a, low = self.activation[u], self.low[u]
            self.put_ord(a, v, low + w, ((_LC, a, u, low),) + walk)

    def _from_uc(self, u: int, c: int, w: int) -> None:
        walk = self.uc_walk[(u, c)]
        for x in list(self.ord_in.get(u, ())):
            self.put_uc(x, c, self.ord[(x, u)] + w, self.ord_walk[(x, u)] + walk)
            if self.witness is not None:
                return
        if w < 0 and u in self.low and u != c:
            # cross-case rule: another link's minimum firing precedes this wait
            a, low = self.activation[u], self.low[u]
            self.put_uc(a, c, low + w, ((_LC, a, u, low),) + walk)


def _witness_from_walk(walk: tuple[_Step, ...]) -> NotDc:
    """Closed negative sub-walk of a derivation's original-edge expansion."""
    nodes = [walk[0][1]]
    for _, _, to, _ in walk:
        nodes.append(to)
    prefix = [0]
    for _, _, _, w in walk:
        prefix.append(prefix[-1] + w)
    best: tuple[int, int, int] | None = None
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if nodes[i] == nodes[j] and prefix[j] - prefix[i] < 0:
                length = prefix[j] - prefix[i]
                if best is None or length < best[2]:
                    best = (i, j, length)
    if best is None:
        # open walk below the horizon bound; report it as-is
        return NotDc(nodes=tuple(nodes), total=prefix[-1])
    i, j, length = best
    return NotDc(nodes=tuple(nodes[i:j]), total=length)


def _allmax_witness(prop: _Propagator) -> NotDc | None:
    """Negative cycle in the all-max projection (waits read as hard bounds)."""
    n = prop.stnu.n_timepoints
    tight: dict[tuple[int, int], tuple[int, tuple[_Step, ...]]] = {}
    for (u, v), w in prop.ord.items():
        if u == v:
            continue
        if (u, v) not in tight or w < tight[(u, v)][0]:
            tight[(u, v)] = (w, prop.ord_walk[(u, v)])
    for (u, c), w in prop.uc.items():
        v = prop.activation[c]
        if u == v:
            continue
        if (u, v) not in tight or w < tight[(u, v)][0]:
            tight[(u, v)] = (w, prop.uc_walk[(u, c)])
    # upper-bound edge (u, v, w) is the lower-bound edge (v, u, -w)
    g = DistanceGraph(
        node_count=n,
        edges=tuple((v, u, -w) for (u, v), (w, _) in tight.items()),
    )
    res = propagate(g)
    if isinstance(res, Consistent):
        return None
    cycle = tuple(reversed(res.nodes))
    walk: list[_Step] = []
    for k in range(len(cycle)):
        u, v = cycle[k], cycle[(k + 1) % len(cycle)]
        walk.extend(tight[(u, v)][1])
    return _witness_from_walk(tuple(walk))


def dc_check(stnu: Stnu) -> Controllable | NotDc:
    """Decide dynamic controllability; emit the executable closure on success."""
    prop = _Propagator(stnu)
    prop.run()
    if prop.witness is not None:
        return prop.witness
    cycle = _allmax_witness(prop)
    if cycle is not None:
        return cycle
    ordinary = tuple(
        sorted((u, v, w) for (u, v), w in prop.ord.items() if u != v)
    )
    waits = tuple(
        sorted(
            (u, prop.activation[c], w, c)
            for (u, c), w in prop.uc.items()
            if w < -prop.low[c] and u != c and u != prop.activation[c]
        )
    )
    base = Stnu(
        n_activities=stnu.n_activities,
        ordinary_edges=ordinary,
        contingent_links=stnu.contingent_links,
    )
    return Controllable(estnu=Estnu(base=base, wait_edges=waits))


class _Groups:
    """Union-find over controllable timepoints rigidly tied by mutual 0-edges."""

    def __init__(self, n: int, ord_pairs: dict[tuple[int, int], int], contingent: set[int]):
        self.parent = list(range(n))
        for (u, v), w in ord_pairs.items():
            if w == 0 and ord_pairs.get((v, u)) == 0:
                if u not in contingent and v not in contingent:
                    self.union(u, v)

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def rte_execute(estnu: Estnu, sample: DurationSample) -> ExecutionTrace:
    """Dispatch the closure online, always executing the earliest-ready timepoints.

    Contingent timepoints fire at activation + realized duration and are
    observed before any controllable executes at the same instant.  A
    controllable is enabled once every nonpositive outgoing ordinary edge
    points at an executed timepoint (mutually rigid groups move together)
    and no wait is still undetermined; it then executes at the maximum of
    its released bounds.  On a genuine DC closure this never violates an
    edge; violations or deadlocks mean the input was not such a closure.
    """
    stnu = estnu.base
    n = stnu.n_timepoints
    realized: dict[int, int] = {}
    for a, c, low, high in stnu.contingent_links:
        d = sample.durations[c // 2]
        if not low <= d <= high:
            raise ValueError(
                f"realized duration {d} outside [{low}, {high}] for {stnu.label(c)}"
            )
        realized[c] = d
    contingent = set(realized)

    out_edges: dict[int, list[tuple[int, int]]] = {u: [] for u in range(n)}
    pair: dict[tuple[int, int], int] = {}
    for u, v, w in stnu.ordinary_edges:
        key = (u, v)
        if key not in pair or w < pair[key]:
            pair[key] = w
    for (u, v), w in pair.items():
        out_edges[u].append((v, w))
    waits_by_source: dict[int, list[tuple[int, int, int]]] = {u: [] for u in range(n)}
    for x, a, w, c in estnu.wait_edges:
        waits_by_source[x].append((a, w, c))

    groups = _Groups(n, pair, contingent)
    members: dict[int, list[int]] = {}
    for tp in range(n):
        if tp not in contingent:
            members.setdefault(groups.find(tp), []).append(tp)

    times: dict[int, int] = {}
    decisions: list[tuple[int, tuple[int, ...]]] = []
    now = 0

    def member_bound(tp: int, group: list[int]) -> int | None:
        """Earliest allowed time, or None while some requirement is undetermined."""
        bound = 0
        for v, w in out_edges[tp]:
            if v in times:
                bound = max(bound, times[v] - w)
            elif w <= 0 and v not in group:
                return None
        for a, w, c in waits_by_source[tp]:
            if c in times:
                release = times[c]
                if a in times:
                    release = min(release, times[a] - w)
                bound = max(bound, release)
            elif a in times:
                bound = max(bound, times[a] - w)
            else:
                return None
        return bound

    while len(times) < n:
        firings: dict[int, int] = {}
        for a, c, _, _ in stnu.contingent_links:
            if a in times and c not in times:
                firings[c] = times[a] + realized[c]
        ready: list[tuple[int, int]] = []  # (time, group root)
        for root, group in members.items():
            if any(tp in times for tp in group):
                continue
            bounds = [member_bound(tp, group) for tp in group]
            if any(b is None for b in bounds):
                continue
            ready.append((max(now, max(bounds)), root))
        if not firings and not ready:
            raise RteError("execution deadlocked; input is not a dispatchable DC closure")
        t_fire = min(firings.values()) if firings else math.inf
        t_exec = min(t for t, _ in ready) if ready else math.inf
        if t_fire <= t_exec:
            batch = sorted(c for c, t in firings.items() if t == t_fire)
            for c in batch:
                times[c] = t_fire
            decisions.append((t_fire, tuple(batch)))
            now = t_fire
        else:
            batch = sorted(
                tp for t, root in ready if t == t_exec for tp in members[root]
            )
            for tp in batch:
                times[tp] = t_exec
            decisions.append((t_exec, tuple(batch)))
            now = t_exec

    for (u, v), w in pair.items():
        if times[v] - times[u] > w:
            raise RteError(
                f"edge {stnu.label(u)} -> {stnu.label(v)} <= {w} violated; "
                "input is not a dispatchable DC closure"
            )
    ordered = tuple(times[tp] for tp in range(n))
    return ExecutionTrace(
        times=ordered,
        feasible=True,
        makespan=max(ordered),
        decisions=tuple(decisions),
    )


def to_dot(obj: Stnu | Estnu) -> str:
    """Debug rendering: ordinary edges solid, contingent links dashed, waits dotted."""
    stnu = obj.base if isinstance(obj, Estnu) else obj
    waits: Iterable[tuple[int, int, int, int]] = (
        obj.wait_edges if isinstance(obj, Estnu) else ()
    )
    lines = ["digraph stnu {", "  rankdir=LR;", "  node [shape=circle];"]
    for tp in range(stnu.n_timepoints):
        lines.append(f'  {tp} [label="{stnu.label(tp)}"];')
    for u, v, w in stnu.ordinary_edges:
        lines.append(f'  {u} -> {v} [label="{w}"];')
    for a, c, low, high in stnu.contingent_links:
        lines.append(f'  {a} -> {c} [label="[{low},{high}]", style=dashed];')
    for x, a, w, c in waits:
        lines.append(
            f'  {x} -> {a} [label="wait {stnu.label(c)}: {w}", style=dotted];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
