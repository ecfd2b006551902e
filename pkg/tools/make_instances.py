#!/usr/bin/env python3
"""Generate small project-scheduling instances for the bundled benchmark sets.

Each instance has ten real activities, five renewable resources, a random
precedence skeleton with finish-to-start lags, and a couple of maximal
lags (negative reverse arcs) that put time windows on chain segments.
Candidates are health-checked before they are written: the deterministic
problem and the worst-case problems at noise levels 1 and 2 must all solve
to optimality quickly, so every bundled instance is usable by every
scheduling method out of the box.

Usage: python3 tools/make_instances.py --out data/j10 --count 12 --seed 7
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from srcpsp.instances import (
    ProjectInstance,
    make_stochastic,
    parse_psplib,
    quantile_durations,
    serialize_psplib,
)
from srcpsp.solver import SolveStatus, solve

REAL_ACTIVITIES = 10
RESOURCES = 5
HEALTH_TIME_LIMIT = 10.0


def _candidate(rng: random.Random) -> ProjectInstance:
    n = REAL_ACTIVITIES
    total = n + 2
    durations = [0] + [rng.randint(1, 10) for _ in range(n)] + [0]

    demands = []
    for _ in range(RESOURCES):
        row = [0] * total
        for j in range(1, n + 1):
            if rng.random() < 0.5:
                row[j] = rng.randint(1, 4)
        demands.append(row)
    capacities = []
    for row in demands:
        peak = max(row)
        if peak == 0:
            # quiet resource: give it a token user so the row is meaningful
            j = rng.randint(1, n)
            row[j] = 1
            peak = 1
        capacities.append(peak + rng.randint(0, 2))

    arcs: dict[tuple[int, int], int] = {}

    def add(i: int, j: int, w: int) -> None:
        key = (i, j)
        if key not in arcs or arcs[key] < w:
            arcs[key] = w

    # precedence skeleton over the index order, then source/sink closure
    for j in range(2, n + 1):
        for i in rng.sample(range(1, j), k=min(j - 1, rng.randint(1, 2))):
            add(i, j, durations[i])
    for j in range(1, n + 1):
        add(0, j, 0)
        add(j, total - 1, durations[j])

    # a few maximal lags: s_j - s_i <= d_i + slack over existing chain arcs
    chain_arcs = [
        (i, j) for (i, j) in arcs if 1 <= i <= n and 1 <= j <= n
    ]
    rng.shuffle(chain_arcs)
    for i, j in chain_arcs[:2]:
        slack = rng.randint(3, 8)
        add(j, i, -(durations[i] + slack))

    return ProjectInstance(
        activity_count=n,
        durations=tuple(durations),
        demands=tuple(tuple(row) for row in demands),
        capacities=tuple(capacities),
        temporal_constraints=tuple(
            (i, j, w) for (i, j), w in sorted(arcs.items())
        ),
    )


def _healthy(inst: ProjectInstance) -> bool:
    """Keep only instances every method can use at the bundled noise levels."""
    if parse_psplib(serialize_psplib(inst)) != inst:
        return False
    if not any(w < 0 for _, _, w in inst.temporal_constraints):
        return False
    base = solve(inst, inst.durations, time_limit=HEALTH_TIME_LIMIT)
    if base.status is not SolveStatus.OPTIMAL:
        return False
    # a trivially short project would make the methods indistinguishable
    if base.schedule.makespan < 15:
        return False
    for epsilon in (1.0, 2.0):
        worst = quantile_durations(make_stochastic(inst, epsilon), 1)
        out = solve(inst, worst.durations, time_limit=HEALTH_TIME_LIMIT)
        if out.status is not SolveStatus.OPTIMAL:
            return False
    return True


def generate(count: int, seed: int) -> list[ProjectInstance]:
    instances = []
    attempt = 0
    while len(instances) < count:
        attempt += 1
        if attempt > 200 * count:
            raise RuntimeError("generator failed to find enough healthy instances")
        rng = random.Random(f"{seed}:{attempt}")
        inst = _candidate(rng)
        if _healthy(inst):
            instances.append(inst)
    return instances


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/j10", help="output directory")
    parser.add_argument("--count", type=int, default=12)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, inst in enumerate(generate(args.count, args.seed), start=1):
        path = out_dir / f"j10_{k:02d}.sch"
        path.write_text(serialize_psplib(inst), encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
