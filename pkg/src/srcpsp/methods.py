"""Scheduling strategies under duration uncertainty.

Each method runs an offline phase (plan construction) and a simulated online
phase against one realized duration sample, and reports a MethodRun record
with feasibility, makespan and the offline/online computation walls.  The
online clock is logical: simulated event times are integers, while the
reported time_online measures only the online computation.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass
from fractions import Fraction

from .chaining import chain
from .instances import DurationSample, StochasticInstance, quantile_durations
from .solver import Schedule, SolveStatus, check_schedule, solve, solve_saa
from .stnu import Controllable, Stnu, build_stnu, dc_check, rte_execute

logger = logging.getLogger(__name__)

PROACTIVE_Q = "proactive_q"
PROACTIVE_SAA = "proactive_saa"
REACTIVE = "reactive"
STNU = "stnu"

FAIL_SOLVER_INFEASIBLE = "solver_infeasible"
FAIL_SOLVER_TIMEOUT = "solver_timeout"
FAIL_NOT_DC = "not_dc"
FAIL_EXECUTION = "execution_violation"


@dataclass(frozen=True)
class MethodConfig:
    """Tuning knobs shared by the methods.

    gamma drives the duration estimate of the single-scenario methods; the
    usual settings are 0.9 for proactive_q and reactive and 1 for stnu.
    """

    gamma: float | Fraction = 0.9
    saa_gammas: tuple[float | Fraction, ...] = (0.25, 0.5, 0.75, 0.9)
    time_limit_offline: float = 60.0
    time_limit_reschedule: float = 2.0

    def __post_init__(self) -> None:
        for g in (self.gamma, *self.saa_gammas):
            if not 0 <= g <= 1:
                raise ValueError(f"quantile level {g} outside [0, 1]")
        if self.time_limit_offline <= 0 or self.time_limit_reschedule <= 0:
            raise ValueError("time limits must be positive")


@dataclass(frozen=True)
class MethodRun:
    method: str
    instance: str
    seed: int | None
    feasible: bool
    makespan: int | None
    time_offline: float
    time_online: float
    failure_reason: str | None
    starts: tuple[int, ...] | None

    def __post_init__(self) -> None:
        if self.feasible and self.makespan is None:
            raise ValueError("feasible run must report a makespan")
        if self.time_offline < 0 or self.time_online < 0:
            raise ValueError("time components must be nonnegative")


def _failure(
    method: str,
    seed: int | None,
    reason: str,
    offline: float,
    online: float = 0.0,
) -> MethodRun:
    return MethodRun(
        method=method,
        instance="",
        seed=seed,
        feasible=False,
        makespan=None,
        time_offline=offline,
        time_online=online,
        failure_reason=reason,
        starts=None,
    )


def _offline_tag(status: SolveStatus) -> str | None:
    if status is SolveStatus.INFEASIBLE:
        return FAIL_SOLVER_INFEASIBLE
    if status is SolveStatus.UNKNOWN:
        return FAIL_SOLVER_TIMEOUT
    return None


def _proactive_online(
    method: str,
    stoch: StochasticInstance,
    starts: tuple[int, ...],
    sample: DurationSample,
    offline: float,
) -> MethodRun:
    """Online phase of the fixed-start methods: a feasibility sweep, no recourse."""
    t0 = time.perf_counter()
    realized = sample.durations
    report = check_schedule(
        stoch.base, realized, Schedule.from_starts(starts, realized)
    )
    makespan = max(s + d for s, d in zip(starts, realized))
    online = time.perf_counter() - t0
    if not report.feasible:
        return dataclasses.replace(
            _failure(method, sample.seed, FAIL_EXECUTION, offline, online),
            starts=starts,
        )
    return MethodRun(
        method=method,
        instance="",
        seed=sample.seed,
        feasible=True,
        makespan=makespan,
        time_offline=offline,
        time_online=online,
        failure_reason=None,
        starts=starts,
    )


def run_proactive_quantile(
    stoch: StochasticInstance, cfg: MethodConfig, sample: DurationSample
) -> MethodRun:
    """Solve once against the gamma-quantile durations, then never adapt."""
    t0 = time.perf_counter()
    estimate = quantile_durations(stoch, cfg.gamma)
    out = solve(stoch.base, estimate.durations, time_limit=cfg.time_limit_offline)
    offline = time.perf_counter() - t0
    tag = _offline_tag(out.status)
    if tag is not None:
        return _failure(PROACTIVE_Q, sample.seed, tag, offline)
    assert out.schedule is not None
    return _proactive_online(PROACTIVE_Q, stoch, out.schedule.starts, sample, offline)


def run_proactive_saa(
    stoch: StochasticInstance, cfg: MethodConfig, sample: DurationSample
) -> MethodRun:
    """One start vector feasible for every quantile scenario, minimizing the mean makespan."""
    if not cfg.saa_gammas:
        raise ValueError("saa_gammas must be nonempty")
    t0 = time.perf_counter()
    scenarios = [quantile_durations(stoch, g).durations for g in cfg.saa_gammas]
    out = solve_saa(stoch.base, scenarios, time_limit=cfg.time_limit_offline)
    offline = time.perf_counter() - t0
    tag = _offline_tag(out.status)
    if tag is not None:
        return _failure(PROACTIVE_SAA, sample.seed, tag, offline)
    assert out.starts is not None
    return _proactive_online(PROACTIVE_SAA, stoch, out.starts, sample, offline)


def run_reactive(
    stoch: StochasticInstance, cfg: MethodConfig, sample: DurationSample
) -> MethodRun:
    """Start from a quantile-estimate plan and re-solve at deviating finishes.

    Simulation walks actual finish events in time order.  When a finish
    deviates from the current estimate, the deterministic problem is
    re-solved with started activities pinned to their starts, realized
    durations for finished activities, a still-running lower bound for
    unfinished started ones, and every unstarted activity pushed to the
    current instant or later, warm-started from the previous plan.
    """
    inst = stoch.base
    realized = sample.durations
    n = inst.n_activities
    t0 = time.perf_counter()
    estimate = quantile_durations(stoch, cfg.gamma)
    out = solve(inst, estimate.durations, time_limit=cfg.time_limit_offline)
    offline = time.perf_counter() - t0
    tag = _offline_tag(out.status)
    if tag is not None:
        return _failure(REACTIVE, sample.seed, tag, offline)
    assert out.schedule is not None
    plan = list(out.schedule.starts)
    current = list(estimate.durations)
    done: set[int] = set()
    online = 0.0
    while len(done) < n:
        next_t = min(plan[j] + realized[j] for j in range(n) if j not in done)
        batch = [
            j for j in range(n) if j not in done and plan[j] + realized[j] == next_t
        ]
        deviated = any(realized[j] != current[j] for j in batch)
        for j in batch:
            done.add(j)
            current[j] = realized[j]
        if not deviated:
            continue
        for j in range(n):
            if j not in done and plan[j] < next_t:
                # still running: its duration is at least elapsed plus one tick
                current[j] = max(current[j], next_t - plan[j] + 1)
        fixed = {j: plan[j] for j in range(n) if plan[j] < next_t}
        floor = tuple((0, j, next_t) for j in range(n) if j not in fixed)
        shifted = dataclasses.replace(
            inst, temporal_constraints=inst.temporal_constraints + floor
        )
        t1 = time.perf_counter()
        res = solve(
            shifted,
            tuple(current),
            time_limit=cfg.time_limit_reschedule,
            fixed=fixed,
            warm_start=Schedule.from_starts(tuple(plan), tuple(current)),
        )
        online += time.perf_counter() - t1
        if res.status is SolveStatus.INFEASIBLE:
            return _failure(REACTIVE, sample.seed, FAIL_EXECUTION, offline, online)
        if res.status is SolveStatus.UNKNOWN:
            return _failure(REACTIVE, sample.seed, FAIL_SOLVER_TIMEOUT, offline, online)
        assert res.schedule is not None
        plan = list(res.schedule.starts)
    starts = tuple(plan)
    report = check_schedule(inst, realized, Schedule.from_starts(starts, realized))
    assert report.feasible, "reactive simulation produced an infeasible trace"
    return MethodRun(
        method=REACTIVE,
        instance="",
        seed=sample.seed,
        feasible=True,
        makespan=max(s + d for s, d in zip(starts, realized)),
        time_offline=offline,
        time_online=online,
        failure_reason=None,
        starts=starts,
    )


def run_stnu(
    stoch: StochasticInstance, cfg: MethodConfig, sample: DurationSample
) -> MethodRun:
    """Chain a quantile-estimate schedule, check controllability, execute online."""
    inst = stoch.base
    t0 = time.perf_counter()
    estimate = quantile_durations(stoch, cfg.gamma)
    out = solve(inst, estimate.durations, time_limit=cfg.time_limit_offline)
    tag = _offline_tag(out.status)
    if tag is not None:
        return _failure(STNU, sample.seed, tag, time.perf_counter() - t0)
    assert out.schedule is not None
    pos = chain(inst, estimate.durations, out.schedule)
    verdict = dc_check(build_stnu(pos, stoch))
    offline = time.perf_counter() - t0
    if not isinstance(verdict, Controllable):
        return _failure(STNU, sample.seed, FAIL_NOT_DC, offline)
    t1 = time.perf_counter()
    trace = rte_execute(verdict.estnu, sample)
    online = time.perf_counter() - t1
    starts = tuple(trace.times[Stnu.start(j)] for j in range(inst.n_activities))
    return MethodRun(
        method=STNU,
        instance="",
        seed=sample.seed,
        feasible=True,
        makespan=trace.makespan,
        time_offline=offline,
        time_online=online,
        failure_reason=None,
        starts=starts,
    )


def perfect_information_feasible(
    stoch: StochasticInstance, sample: DurationSample, time_limit: float
) -> bool:
    """Whether a clairvoyant scheduler could satisfy this realization at all."""
    out = solve(stoch.base, sample.durations, time_limit=time_limit)
    if out.status is SolveStatus.UNKNOWN:
        logger.warning(
            "perfect-information solve undecided within %.1fs; keeping the sample",
            time_limit,
        )
        return True
    return out.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)
