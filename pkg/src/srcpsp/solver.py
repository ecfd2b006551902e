"""Deterministic RCPSP/max solving and schedule feasibility checking.

The solver is a branch-and-bound over the temporal distance graph: the root
relaxation is the earliest schedule ignoring resources; a resource conflict
is resolved by branching on ordering edges ``s_b >= s_a + d_a`` between
members of a minimal conflict set.  Any pairwise-overlapping set of intervals
shares a common time point, so every resource-feasible schedule separates at
least one ordered pair of each conflict set; the branching is complete.

A variant with shared starts across several duration scenarios backs the
sample-average method: the same branching scheme, with conflicts detected
scenario by scenario and the mean scenario makespan as objective.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .instances import ProjectInstance
from .stn import DistanceGraph, earliest_schedule


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


class InfeasibleGraphError(ValueError):
    """The temporal constraints alone are contradictory (positive cycle)."""


@dataclass(frozen=True)
class Schedule:
    """Start-time vector with its makespan under a specific duration vector."""

    starts: tuple[int, ...]
    makespan: int

    @classmethod
    def from_starts(cls, starts: Sequence[int], durations: Sequence[int]) -> "Schedule":
        if len(starts) != len(durations):
            raise ValueError("starts and durations must have equal length")
        return cls(
            starts=tuple(starts),
            makespan=max(s + d for s, d in zip(starts, durations)),
        )


@dataclass(frozen=True)
class FeasibilityReport:
    """Constraint-by-constraint verdict on one schedule.

    ``precedence_violations`` holds (constraint, slack) with slack < 0;
    ``resource_violations`` holds (resource, time, usage, capacity).
    """

    precedence_violations: tuple[tuple[tuple[int, int, int], int], ...]
    resource_violations: tuple[tuple[int, int, int, int], ...]

    @property
    def feasible(self) -> bool:
        return not self.precedence_violations and not self.resource_violations


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    schedule: Schedule | None
    nodes_explored: int
    wall_time: float


@dataclass(frozen=True)
class SaaOutcome:
    """Shared-start solve over several duration scenarios; objective = mean makespan."""

    status: SolveStatus
    starts: tuple[int, ...] | None
    objective: float | None
    nodes_explored: int
    wall_time: float


def check_schedule(
    inst: ProjectInstance,
    durations: Sequence[int],
    sched: Schedule,
) -> FeasibilityReport:
    """Check every temporal constraint and the resource profile of ``sched``.

    Precedence is duration-independent (lags are start-to-start); resources
    are swept over activity intervals [s_j, s_j + d_j), evaluating usage at
    each start event, where any piecewise-constant profile attains its max.
    """
    total = inst.n_activities
    if len(durations) != total:
        raise ValueError(f"expected {total} durations, got {len(durations)}")
    if len(sched.starts) != total:
        raise ValueError(f"expected {total} starts, got {len(sched.starts)}")
    starts = sched.starts

    precedence = tuple(
        ((i, j, w), starts[j] - starts[i] - w)
        for i, j, w in inst.temporal_constraints
        if starts[j] - starts[i] < w
    )

    resource: list[tuple[int, int, int, int]] = []
    events = sorted({starts[j] for j in range(total) if durations[j] > 0})
    for r in range(inst.n_resources):
        cap = inst.capacities[r]
        for t in events:
            usage = sum(
                inst.demands[r][j]
                for j in range(total)
                if starts[j] <= t < starts[j] + durations[j]
            )
            if usage > cap:
                resource.append((r, t, usage, cap))
    return FeasibilityReport(
        precedence_violations=precedence,
        resource_violations=tuple(resource),
    )


def _first_conflict(
    inst: ProjectInstance,
    durations: Sequence[int],
    starts: Sequence[int],
) -> tuple[int, int, list[int]] | None:
    """Earliest (time, resource, active activities) where usage exceeds capacity."""
    total = inst.n_activities
    events = sorted({starts[j] for j in range(total) if durations[j] > 0})
    for t in events:
        for r in range(inst.n_resources):
            active = [
                j
                for j in range(total)
                if inst.demands[r][j] > 0 and starts[j] <= t < starts[j] + durations[j]
            ]
            if sum(inst.demands[r][j] for j in active) > inst.capacities[r]:
                return t, r, active
    return None


def _minimal_conflict_set(
    inst: ProjectInstance,
    resource: int,
    active: list[int],
) -> tuple[int, ...]:
    """Smallest (then lexicographically first) subset whose demand sum exceeds capacity."""
    cap = inst.capacities[resource]
    demands = inst.demands[resource]
    active = sorted(active)
    top = sorted((demands[j] for j in active), reverse=True)
    for k in range(2, len(active) + 1):
        if sum(top[:k]) <= cap:
            continue  # even the k largest demands fit
        for combo in itertools.combinations(active, k):
            if sum(demands[j] for j in combo) > cap:
                return combo
    raise AssertionError("no conflicting subset in a conflicting active set")


def _branch_edges(
    conflict: tuple[int, ...],
    durations: Sequence[int],
) -> list[tuple[int, int, int]]:
    return [
        (a, b, durations[a])
        for a, b in itertools.permutations(conflict, 2)
    ]


def _base_graph(inst: ProjectInstance) -> DistanceGraph:
    return DistanceGraph(node_count=inst.n_activities, edges=inst.temporal_constraints)


def critical_path_bound(inst: ProjectInstance, durations: Sequence[int]) -> int:
    """Longest source-to-sink path with duration edges added; <= optimal makespan."""
    total = inst.n_activities
    if len(durations) != total:
        raise ValueError(f"expected {total} durations, got {len(durations)}")
    sink = total - 1
    edges = list(inst.temporal_constraints)
    edges.extend((j, sink, durations[j]) for j in range(total) if j != sink)
    sched = earliest_schedule(DistanceGraph(node_count=total, edges=tuple(edges)))
    if sched is None:
        raise InfeasibleGraphError("temporal constraints contain a positive cycle")
    return sched[sink]


def _validated_warm_start(
    inst: ProjectInstance,
    durations: Sequence[int],
    warm_start: Schedule | None,
    fixed: Mapping[int, int],
) -> Schedule | None:
    if warm_start is None or len(warm_start.starts) != inst.n_activities:
        return None
    if any(s < 0 for s in warm_start.starts):
        return None
    if any(warm_start.starts[v] != t for v, t in fixed.items()):
        return None
    if not check_schedule(inst, durations, warm_start).feasible:
        return None
    return Schedule.from_starts(warm_start.starts, durations)


def solve(
    inst: ProjectInstance,
    durations: Sequence[int],
    time_limit: float = 60.0,
    fixed: Mapping[int, int] | None = None,
    warm_start: Schedule | None = None,
    node_limit: int = 10_000_000,
) -> SolveOutcome:
    """Minimize makespan by conflict-resolution branch-and-bound.

    ``fixed`` pins exact start times (the reactive method's frozen prefix);
    ``warm_start`` seeds the incumbent when it checks out feasible.  Statuses:
    Optimal when the search exhausts with an incumbent, Infeasible when it
    exhausts without one (or the root graph is contradictory), Feasible or
    Unknown when a limit stops the search with or without an incumbent.
    """
    total = inst.n_activities
    if len(durations) != total:
        raise ValueError(f"expected {total} durations, got {len(durations)}")
    if any(d < 0 for d in durations):
        raise ValueError("durations must be nonnegative")
    t0 = time.monotonic()
    fixed = dict(fixed or {})
    graph = _base_graph(inst)

    incumbent = _validated_warm_start(inst, durations, warm_start, fixed)
    best = incumbent.makespan if incumbent else None

    stack: list[tuple[tuple[int, int, int], ...]] = [()]
    nodes = 0
    exhausted = True
    while stack:
        if nodes >= node_limit or time.monotonic() - t0 > time_limit:
            exhausted = False
            break
        added = stack.pop()
        nodes += 1
        starts = earliest_schedule(
            DistanceGraph(node_count=total, edges=graph.edges + added), fixed
        )
        if starts is None:
            continue
        bound = max(s + d for s, d in zip(starts, durations))
        if best is not None and bound >= best:
            continue
        conflict = _first_conflict(inst, durations, starts)
        if conflict is None:
            incumbent = Schedule.from_starts(starts, durations)
            best = incumbent.makespan
            continue
        t, r, active = conflict
        subset = _minimal_conflict_set(inst, r, active)
        for edge in reversed(_branch_edges(subset, durations)):
            stack.append(added + (edge,))

    wall = time.monotonic() - t0
    if incumbent is not None:
        assert check_schedule(inst, durations, incumbent).feasible
        status = SolveStatus.OPTIMAL if exhausted else SolveStatus.FEASIBLE
        return SolveOutcome(status, incumbent, nodes, wall)
    status = SolveStatus.INFEASIBLE if exhausted else SolveStatus.UNKNOWN
    return SolveOutcome(status, None, nodes, wall)


def solve_saa(
    inst: ProjectInstance,
    scenarios: Sequence[Sequence[int]],
    time_limit: float = 300.0,
    node_limit: int = 10_000_000,
) -> SaaOutcome:
    """One start vector feasible for every duration scenario, minimizing mean makespan.

    Precedence constraints are duration-independent, so scenarios differ only
    in their resource profiles and makespans.  Conflicts are hunted scenario
    by scenario; branching uses the conflicting scenario's durations, which
    separates that scenario's overlap and keeps the search complete.
    """
    if not scenarios:
        raise ValueError("at least one scenario required")
    total = inst.n_activities
    for d in scenarios:
        if len(d) != total:
            raise ValueError(f"every scenario needs {total} durations")
    t0 = time.monotonic()
    graph = _base_graph(inst)

    best_starts: tuple[int, ...] | None = None
    best_obj: float | None = None

    stack: list[tuple[tuple[int, int, int], ...]] = [()]
    nodes = 0
    exhausted = True
    while stack:
        if nodes >= node_limit or time.monotonic() - t0 > time_limit:
            exhausted = False
            break
        added = stack.pop()
        nodes += 1
        starts = earliest_schedule(
            DistanceGraph(node_count=total, edges=graph.edges + added)
        )
        if starts is None:
            continue
        bound = sum(
            max(s + d for s, d in zip(starts, scen)) for scen in scenarios
        ) / len(scenarios)
        if best_obj is not None and bound >= best_obj:
            continue
        conflict = None
        for scen in scenarios:
            conflict = _first_conflict(inst, scen, starts)
            if conflict is not None:
                branch_durations = scen
                break
        if conflict is None:
            best_starts = tuple(starts)
            best_obj = bound
            continue
        t, r, active = conflict
        subset = _minimal_conflict_set(inst, r, active)
        for edge in reversed(_branch_edges(subset, branch_durations)):
            stack.append(added + (edge,))

    wall = time.monotonic() - t0
    if best_starts is not None:
        for scen in scenarios:
            assert check_schedule(inst, scen, Schedule.from_starts(best_starts, scen)).feasible
        status = SolveStatus.OPTIMAL if exhausted else SolveStatus.FEASIBLE
        return SaaOutcome(status, best_starts, best_obj, nodes, wall)
    status = SolveStatus.INFEASIBLE if exhausted else SolveStatus.UNKNOWN
    return SaaOutcome(status, None, None, nodes, wall)
