"""Network construction, DC checking and execution against hand-worked cases."""

from __future__ import annotations

import dataclasses
import random

import pytest

from game_oracle import game_controllable, random_stnu
from srcpsp.chaining import chain
from srcpsp.instances import DurationSample, StochasticInstance
from srcpsp.solver import Schedule
from srcpsp.stnu import (
    Controllable,
    Estnu,
    NotDc,
    RteError,
    Stnu,
    build_stnu,
    dc_check,
    rte_execute,
    to_dot,
)

# five-activity example: a..e = 1..5, d's duration uncertain in [1, 2]
EST_DURATIONS = (0, 2, 5, 3, 2, 2, 0)
DET_DURATIONS = (0, 2, 5, 3, 1, 2, 0)
UNCERTAIN_BOUNDS = ((0, 0), (2, 2), (5, 5), (3, 3), (1, 2), (2, 2), (0, 0))

S0, E0 = 0, 1
SA, FA = 2, 3
SB, FB = 4, 5
SC, FC = 6, 7
SD, FD = 8, 9
SE, FE = 10, 11
S6, E6 = 12, 13


@pytest.fixture()
def uncertain(example_instance):
    return StochasticInstance(
        base=example_instance, bounds=UNCERTAIN_BOUNDS, epsilon=0.5
    )


@pytest.fixture()
def dc_pos(example_instance):
    sched = Schedule.from_starts((0, 0, 2, 6, 4, 7, 9), EST_DURATIONS)
    return chain(example_instance, EST_DURATIONS, sched)


@pytest.fixture()
def ndc_pos(example_instance):
    sched = Schedule.from_starts((0, 1, 3, 5, 0, 3, 7), DET_DURATIONS)
    return chain(example_instance, DET_DURATIONS, sched)


def test_build_stnu_edge_set(dc_pos, uncertain):
    stnu = build_stnu(dc_pos, uncertain)
    assert stnu.n_activities == 7
    assert stnu.contingent_links == ((SD, FD, 1, 2),)
    expected = {
        # fixed durations as rigid pairs
        (S0, E0, 0), (E0, S0, 0),
        (SA, FA, 2), (FA, SA, -2),
        (SB, FB, 5), (FB, SB, -5),
        (SC, FC, 3), (FC, SC, -3),
        (SE, FE, 2), (FE, SE, -2),
        (S6, E6, 0), (E6, S6, 0),
        # start-to-start lags
        (SA, S0, 0), (SD, S0, 0),
        (SB, SA, -2), (SC, SB, -1), (SA, SC, 6),
        (SE, SD, -3), (SD, SE, 3),
        (S6, SC, -2), (S6, SE, -2),
        # chain edges: predecessor must end before successor starts
        (SD, FA, 0), (SC, FD, 0), (SE, FB, 0), (SB, FA, 0),
    }
    assert set(stnu.ordinary_edges) == expected
    assert len(stnu.ordinary_edges) == len(expected)


def test_build_stnu_requires_matching_instances(dc_pos, example_instance):
    other = dataclasses.replace(example_instance, capacities=(5,))
    stoch = StochasticInstance(base=other, bounds=UNCERTAIN_BOUNDS, epsilon=0.5)
    with pytest.raises(ValueError, match="disagree"):
        build_stnu(dc_pos, stoch)


def test_stnu_validation():
    with pytest.raises(ValueError, match="out of range"):
        Stnu(n_activities=1, ordinary_edges=((0, 2, 1),), contingent_links=())
    with pytest.raises(ValueError, match="bounds"):
        Stnu(n_activities=1, ordinary_edges=(), contingent_links=((0, 1, 0, 2),))
    with pytest.raises(ValueError, match="two incoming"):
        Stnu(
            n_activities=2,
            ordinary_edges=(),
            contingent_links=((0, 1, 1, 2), (2, 1, 1, 2)),
        )
    base = Stnu(n_activities=1, ordinary_edges=(), contingent_links=())
    with pytest.raises(ValueError, match="non-contingent"):
        Estnu(base=base, wait_edges=((0, 1, -2, 1),))


def test_dc_check_controllable_on_safe_chains(dc_pos, uncertain):
    res = dc_check(build_stnu(dc_pos, uncertain))
    assert isinstance(res, Controllable)
    # c may not start until d has fired or two ticks past d's start
    assert (SC, SD, -2, FD) in res.estnu.wait_edges
    closure = {(u, v): w for u, v, w in res.estnu.base.ordinary_edges}
    # d cannot start before b is two ticks old: via d->e->b's chain and b's length
    assert closure[(SD, SB)] == -2


def test_dc_check_not_controllable_on_reversed_chains(ndc_pos, uncertain):
    res = dc_check(build_stnu(ndc_pos, uncertain))
    assert isinstance(res, NotDc)
    assert res.total == -1
    assert len(res.nodes) >= 2
    assert all(0 <= tp < 14 for tp in res.nodes)


def test_dc_check_without_links_is_stn_consistency():
    ok = Stnu(
        n_activities=1, ordinary_edges=((0, 1, 3), (1, 0, -1)), contingent_links=()
    )
    res = dc_check(ok)
    assert isinstance(res, Controllable)
    assert res.estnu.wait_edges == ()

    bad = Stnu(
        n_activities=1, ordinary_edges=((0, 1, -1), (1, 0, 0)), contingent_links=()
    )
    res = dc_check(bad)
    assert isinstance(res, NotDc)
    assert res.total < 0


def test_dc_check_lone_link_controllable():
    stnu = Stnu(n_activities=1, ordinary_edges=(), contingent_links=((0, 1, 2, 4),))
    res = dc_check(stnu)
    assert isinstance(res, Controllable)
    assert res.estnu.wait_edges == ()


def test_wait_drives_execution():
    # activity 0 contingent in [1, 3]; timepoint 2 must satisfy t_C - t_X <= 1
    stnu = Stnu(
        n_activities=2,
        ordinary_edges=((2, 1, 1),),
        contingent_links=((0, 1, 1, 3),),
    )
    res = dc_check(stnu)
    assert isinstance(res, Controllable)
    assert (2, 0, -2, 1) in res.estnu.wait_edges
    late = rte_execute(res.estnu, DurationSample((3, 0)))
    assert late.times[2] == 2  # wait expires one tick before the latest firing
    early = rte_execute(res.estnu, DurationSample((1, 0)))
    assert early.times[2] == 1  # observation releases the wait immediately


def test_rte_golden_traces(dc_pos, uncertain):
    res = dc_check(build_stnu(dc_pos, uncertain))
    assert isinstance(res, Controllable)

    short = rte_execute(res.estnu, DurationSample((0, 2, 5, 3, 1, 2, 0)))
    starts = [short.times[Stnu.start(j)] for j in range(1, 6)]
    assert starts == [0, 2, 5, 4, 7]
    assert short.times[FD] == 5
    assert short.feasible

    long = rte_execute(res.estnu, DurationSample((0, 2, 5, 3, 2, 2, 0)))
    starts = [long.times[Stnu.start(j)] for j in range(1, 6)]
    assert starts == [0, 2, 6, 4, 7]
    assert long.times[FD] == 6
    assert long.feasible


def test_rte_rejects_duration_outside_link(dc_pos, uncertain):
    res = dc_check(build_stnu(dc_pos, uncertain))
    with pytest.raises(ValueError, match="outside"):
        rte_execute(res.estnu, DurationSample((0, 2, 5, 3, 3, 2, 0)))


def test_rte_single_fixed_activity():
    stnu = Stnu(
        n_activities=1, ordinary_edges=((0, 1, 2), (1, 0, -2)), contingent_links=()
    )
    res = dc_check(stnu)
    trace = rte_execute(res.estnu, DurationSample((2,)))
    assert trace.times == (0, 2)
    assert trace.makespan == 2
    assert trace.decisions == ((0, (0,)), (2, (1,)))


def test_rte_rigid_pair_moves_together():
    stnu = Stnu(
        n_activities=2,
        ordinary_edges=((0, 1, 0), (1, 0, 0), (1, 2, -2)),
        contingent_links=(),
    )
    res = dc_check(stnu)
    trace = rte_execute(res.estnu, DurationSample((0, 0)))
    assert trace.times[0] == trace.times[1] == 2
    assert trace.times[2] == 0


def test_rte_deadlock_is_reported():
    estnu = Estnu(
        base=Stnu(
            n_activities=2,
            ordinary_edges=((2, 3, -1), (3, 2, 0)),
            contingent_links=(),
        ),
        wait_edges=(),
    )
    with pytest.raises(RteError, match="deadlock"):
        rte_execute(estnu, DurationSample((0, 0)))


def test_rte_unclosed_network_is_reported():
    estnu = Estnu(
        base=Stnu(
            n_activities=2,
            ordinary_edges=((0, 1, 3), (1, 2, -5)),
            contingent_links=(),
        ),
        wait_edges=(),
    )
    with pytest.raises(RteError, match="violated"):
        rte_execute(estnu, DurationSample((0, 0)))


def test_verdict_ignores_edge_order():
    rng = random.Random(0xED6E)
    for _ in range(40):
        stnu = random_stnu(rng)
        shuffled = list(stnu.ordinary_edges)
        rng.shuffle(shuffled)
        a = dc_check(stnu)
        b = dc_check(dataclasses.replace(stnu, ordinary_edges=tuple(shuffled)))
        assert isinstance(a, Controllable) == isinstance(b, Controllable)
        if isinstance(a, Controllable) and isinstance(b, Controllable):
            assert a.estnu == b.estnu


def test_degenerate_link_equals_fixed_duration():
    rng = random.Random(0xF1D0)
    checked = 0
    while checked < 30:
        stnu = random_stnu(rng)
        if not stnu.contingent_links:
            continue
        checked += 1
        pinned = dataclasses.replace(
            stnu,
            contingent_links=tuple(
                (a, c, low, low) for a, c, low, _ in stnu.contingent_links
            ),
        )
        as_edges = dataclasses.replace(
            stnu,
            ordinary_edges=stnu.ordinary_edges
            + tuple(
                e
                for a, c, low, _ in stnu.contingent_links
                for e in ((a, c, low), (c, a, -low))
            ),
            contingent_links=(),
        )
        assert isinstance(dc_check(pinned), Controllable) == isinstance(
            dc_check(as_edges), Controllable
        )


def test_rte_honours_every_edge_on_random_networks():
    rng = random.Random(0x5EED)
    controllable_seen = 0
    for _ in range(120):
        stnu = random_stnu(rng)
        res = dc_check(stnu)
        if not isinstance(res, Controllable):
            continue
        controllable_seen += 1
        for _ in range(3):
            durations = [0] * stnu.n_activities
            for a, c, low, high in stnu.contingent_links:
                durations[c // 2] = rng.randint(low, high)
            trace = rte_execute(res.estnu, DurationSample(tuple(durations)))
            assert trace.feasible
            for u, v, w in stnu.ordinary_edges:
                assert trace.times[v] - trace.times[u] <= w
            for a, c, low, high in stnu.contingent_links:
                assert trace.times[c] - trace.times[a] == durations[c // 2]
    assert controllable_seen >= 20


def test_dc_check_agrees_with_game_oracle():
    rng = random.Random(0x0AC1E)
    verdicts = {True: 0, False: 0}
    for _ in range(100):
        stnu = random_stnu(rng)
        expected = game_controllable(stnu, horizon=12)
        actual = isinstance(dc_check(stnu), Controllable)
        assert actual == expected
        verdicts[expected] += 1
    assert verdicts[True] >= 10
    assert verdicts[False] >= 10


def test_to_dot_renders_all_edge_kinds(dc_pos, uncertain):
    res = dc_check(build_stnu(dc_pos, uncertain))
    text = to_dot(res.estnu)
    assert "style=dashed" in text
    assert "style=dotted" in text
    assert '"s4"' in text and '"f4"' in text
    plain = to_dot(build_stnu(dc_pos, uncertain))
    assert "style=dotted" not in plain
