import itertools
import random

import pytest

from transitdelay.journeys import Candidate, enumerate_candidates, oracle_origin_delay_interval
from transitdelay.shortcuts import (
    Shortcut,
    ShortcutOptions,
    ShortcutSet,
    Trace,
    compute_shortcuts,
    trip_indices_from_labels,
)
from transitdelay.timetable import Network, TripRecord
from transitdelay.transfers import all_pairs

from instances import (
    INDEX_EXAMPLE_ARRIVALS,
    INDEX_EXAMPLE_DEPARTURES,
    INDEX_EXAMPLE_ONE_TRIP_WITNESS,
    INDEX_EXAMPLE_TWO_TRIP_WITNESS,
    SPLIT_EXAMPLE_MAX_DELAY,
    split_example_network,
    seconds_network,
    tiny_network,
)


def test_single_route_needs_no_shortcuts():
    trips = [TripRecord(f"T{k}", (0, 1, 2, 3), (10 * k, 10 * k + 5, 10 * k + 9, 10 * k + 14),
                        (10 * k, 10 * k + 6, 10 * k + 9, 10 * k + 15)) for k in range(3)]
    net = Network(["a", "b", "c", "d"], trips, [(1, 2, 2), (2, 1, 2)])
    assert len(compute_shortcuts(net, 5)) == 0


def test_empty_network_gives_empty_set():
    net = Network([], [], [])
    assert len(compute_shortcuts(net, 60)) == 0


def test_negative_delay_limit_is_rejected():
    with pytest.raises(ValueError):
        compute_shortcuts(tiny_network(0), -1)


def test_split_example_pair_is_dominated():
    net = split_example_network()
    trace = Trace()
    shortcuts = compute_shortcuts(net, SPLIT_EXAMPLE_MAX_DELAY, trace=trace)
    origin = net.trip_first[net.trip_by_name("T1")] + 1
    destination = net.trip_first[net.trip_by_name("T2")]
    assert shortcuts.get(origin, destination) is None
    values = trace.destinations[(origin, destination)]
    assert values.candidate_arrival == 21
    assert values.join_limit == 2
    assert values.feasibility_limit == 3
    assert values.max_origin_delay == 2
    oracle = oracle_origin_delay_interval(net, _split_example_candidate(net), SPLIT_EXAMPLE_MAX_DELAY)
    assert values.min_origin_delay == oracle.low
    assert values.min_origin_delay > values.max_origin_delay


def _split_example_candidate(net):
    t1, t2 = net.trip_first[net.trip_by_name("T1")], net.trip_first[net.trip_by_name("T2")]
    return Candidate(t1, t1 + 1, t2, t2 + 1)


def test_index_example_trip_indices():
    indices = trip_indices_from_labels(INDEX_EXAMPLE_ARRIVALS, INDEX_EXAMPLE_DEPARTURES, INDEX_EXAMPLE_ONE_TRIP_WITNESS, INDEX_EXAMPLE_TWO_TRIP_WITNESS)
    assert (indices.entry, indices.exit, indices.witness) == (2, 4, 2)


def test_trip_indices_without_exit_candidates():
    indices = trip_indices_from_labels([0, 5], [1, 6], [9, 9], [-1, -1])
    assert indices.exit == 2 and indices.entry == 2


def oracle_violations(net, delta, options):
    """Candidates whose oracle interval is not covered, or whose lower bound is too high."""
    dist = all_pairs(net.graph)
    shortcuts = compute_shortcuts(net, delta, options)
    problems = []
    for cand in enumerate_candidates(net, dist):
        respecting = oracle_origin_delay_interval(net, cand, delta, respect_time_travel=True, dist=dist)
        if not respecting.members:
            continue
        found = shortcuts.get(cand.origin, cand.destination)
        if found is None or not all(found.covers(x) for x in respecting.members):
            problems.append(("uncovered", cand, respecting, found))
            continue
        plain = oracle_origin_delay_interval(net, cand, delta, respect_time_travel=False, dist=dist)
        if plain.members and found.min_origin_delay > min(plain.members):
            problems.append(("lower bound", cand, plain, found))
    return problems


@pytest.mark.parametrize("pruning", [True, False])
def test_shortcuts_cover_every_necessary_candidate(pruning):
    for seed in range(12):
        net = tiny_network(seed)
        for delta in (0, 2, 5):
            assert oracle_violations(net, delta, ShortcutOptions(time_travel_pruning=pruning)) == [], (seed, delta)


def test_time_travel_pruning_only_drops_unneeded_shortcuts():
    for seed in range(20):
        net = tiny_network(seed, trips_per_line=3)
        pruned = compute_shortcuts(net, 4, ShortcutOptions(time_travel_pruning=True))
        plain = compute_shortcuts(net, 4, ShortcutOptions(time_travel_pruning=False))
        assert pruned.keys() <= plain.keys(), seed
        assert oracle_violations(net, 4, ShortcutOptions(time_travel_pruning=True)) == [], seed


def test_zero_delay_limit_keeps_only_punctual_intervals():
    for seed in range(10):
        for shortcut in compute_shortcuts(seconds_network(seed), 0):
            assert (shortcut.min_origin_delay, shortcut.max_origin_delay) == (0, 0)


def test_shortcuts_have_valid_intervals_and_transfers():
    net = seconds_network(4)
    dist = all_pairs(net.graph)
    shortcuts = compute_shortcuts(net, 300)
    assert len(shortcuts) > 0
    for s in shortcuts:
        assert s.kept and 0 <= s.min_origin_delay <= s.max_origin_delay <= 300
        assert s.transfer_time == dist[net.event_stop[s.origin]][net.event_stop[s.destination]]
        assert net.event_trip[s.origin] != net.event_trip[s.destination]


def test_resuming_witness_search_does_not_change_the_result():
    for seed in range(6):
        net = seconds_network(seed)
        on = compute_shortcuts(net, 120, ShortcutOptions(resume_witness_search=True))
        off = compute_shortcuts(net, 120, ShortcutOptions(resume_witness_search=False))
        assert on == off, seed


def test_parallel_workers_give_the_same_set():
    net = seconds_network(2)
    assert compute_shortcuts(net, 60, ShortcutOptions(workers=2)) == compute_shortcuts(net, 60)


def test_per_source_sets_merge_to_the_full_set():
    net = seconds_network(5)
    full = compute_shortcuts(net, 60)
    parts = [compute_shortcuts(net, 60, sources=[s]) for s in range(net.stop_count)]
    merged = ShortcutSet(60, net.content_hash())
    for part in parts:
        merged = merged.merge(part)
    assert merged == full


def test_merge_keeps_the_enclosing_interval():
    empty = ShortcutSet(5)
    one = ShortcutSet(5, shortcuts=[Shortcut(1, 2, 3, 3, 2)])
    assert one.merge(empty) == one and empty.merge(one) == one
    merged = one.merge(ShortcutSet(5, shortcuts=[Shortcut(1, 2, 3, 0, 4)]))
    assert merged.get(1, 2) == Shortcut(1, 2, 3, 0, 4)


def test_merge_is_order_independent():
    rng = random.Random(1)
    sets = [ShortcutSet(9, shortcuts=[Shortcut(rng.randrange(3), rng.randrange(3), 4, rng.randint(0, 9),
                                               rng.randint(0, 9)) for _ in range(6)]) for _ in range(4)]
    results = []
    for order in itertools.permutations(sets):
        merged = ShortcutSet(9)
        for part in order:
            merged = merged.merge(part)
        results.append(merged)
    assert all(r == results[0] for r in results)


def test_file_round_trip(tmp_path):
    net = seconds_network(7)
    shortcuts = compute_shortcuts(net, 60)
    path = tmp_path / "shortcuts.bin"
    shortcuts.save(path)
    loaded = ShortcutSet.load(path, net)
    assert loaded == shortcuts and loaded.max_delay == 60 and loaded.network_hash == shortcuts.network_hash
    assert ShortcutSet.from_bytes(shortcuts.to_bytes()).to_text() == shortcuts.to_text()
    with pytest.raises(ValueError):
        ShortcutSet.load(path, seconds_network(8))
    with pytest.raises(ValueError):
        ShortcutSet.from_bytes(shortcuts.to_bytes()[:-1])
    with pytest.raises(ValueError):
        ShortcutSet.from_bytes(b"XXXX" + shortcuts.to_bytes()[4:])
