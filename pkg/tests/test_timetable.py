import pytest

from transitdelay.timetable import (
    Network,
    NetworkIntegrityError,
    NetworkOrderingError,
    NetworkParseError,
    TripRecord,
    load_network,
    save_network,
)

from instances import seconds_network, tiny_network


def overtaking_network() -> Network:
    trips = [
        TripRecord("slow", (0, 1, 2), (0, 30, 60), (0, 30, 60)),
        TripRecord("fast", (0, 1, 2), (10, 20, 30), (10, 20, 30)),
        TripRecord("late", (0, 1, 2), (40, 70, 100), (40, 70, 100)),
    ]
    return Network(["a", "b", "c"], trips, [(0, 1, 5)])


def test_events_of_a_trip_are_consecutive():
    net = tiny_network(3)
    for trip in range(net.trip_count):
        events = net.trip_events(trip)
        assert [net.event_trip[e] for e in events] == [trip] * net.trip_len[trip]
        assert [net.event_index[e] for e in events] == list(range(net.trip_len[trip]))
        assert tuple(net.event_stop[e] for e in events) == net.trip_stops[trip]


def test_overtaking_trips_split_into_separate_routes():
    net = overtaking_network()
    routes = net.routes
    assert routes.route_count == 2
    slow, fast, late = (net.trip_by_name(n) for n in ("slow", "fast", "late"))
    assert routes.trip_route[slow] != routes.trip_route[fast]
    assert routes.is_fifo(net.event_arr, net.event_dep, net)
    for r, trips in enumerate(routes.route_trips):
        departures = routes.route_departures[r]
        for row in departures:
            assert row == sorted(row)
    assert late in routes.route_trips[routes.trip_route[slow]] or late in routes.route_trips[routes.trip_route[fast]]


def test_route_trips_are_fifo_on_random_networks():
    for seed in range(30):
        net = seconds_network(seed)
        assert net.routes.is_fifo(net.event_arr, net.event_dep, net)
        assert sorted(t for g in net.routes.route_trips for t in g) == list(range(net.trip_count))


def test_repartition_restores_fifo_under_delays():
    net = overtaking_network()
    arrival = list(net.event_arr)
    departure = list(net.event_dep)
    slow = net.trip_first[net.trip_by_name("slow")]
    for e in range(slow, slow + 3):
        arrival[e] += 50
        departure[e] += 50
    routes = net.repartition(arrival, departure)
    assert routes.is_fifo(arrival, departure, net)


def test_trip_segment_bounds():
    net = tiny_network(1)
    assert list(net.trip_segment(0, 0, 1)) == [net.trip_first[0], net.trip_first[0] + 1]
    with pytest.raises(IndexError):
        net.trip_segment(0, 1, 0)
    with pytest.raises(IndexError):
        net.trip_segment(net.trip_count, 0, 0)


@pytest.mark.parametrize("record, error", [
    (TripRecord("short", (0,), (0,), (0,)), NetworkIntegrityError),
    (TripRecord("ghost", (0, 9), (0, 5), (0, 5)), NetworkIntegrityError),
    (TripRecord("backwards", (0, 1), (10, 5), (10, 5)), NetworkOrderingError),
    (TripRecord("dwell", (0, 1), (0, 5), (3, 2)), NetworkOrderingError),
])
def test_invalid_trips_are_rejected(record, error):
    with pytest.raises(error):
        Network(["a", "b"], [record], [])


def test_transfer_graph_validation():
    with pytest.raises(NetworkIntegrityError):
        Network(["a", "b"], [], [(0, 1, 0)])
    with pytest.raises(NetworkIntegrityError):
        Network(["a", "b"], [], [(0, 5, 1)])
    net = Network(["a", "b"], [], [(0, 1, 7), (0, 1, 3), (1, 1, 2)])
    assert net.graph.edges() == [(0, 1, 3)]


def test_save_and_load_round_trip(tmp_path):
    net = tiny_network(7, extra_vertices=2)
    save_network(net, tmp_path)
    loaded = load_network(tmp_path)
    assert loaded.content_hash() == net.content_hash()
    assert loaded.trip_records() == net.trip_records()
    assert loaded.vertex_count == net.vertex_count


def test_buffer_time_never_departs_before_arrival(tmp_path):
    net = tiny_network(2)
    save_network(net, tmp_path)
    loaded = load_network(tmp_path, buffer_time=100)
    assert all(a == d for a, d in zip(loaded.event_arr, loaded.event_dep))


def test_loader_reports_malformed_input(tmp_path):
    with pytest.raises(NetworkParseError):
        load_network(tmp_path / "missing")
    tmp_path.joinpath("stops.csv").write_text("stop_id,vertex_id,name\nA,0,a\n")
    with pytest.raises(NetworkParseError):
        load_network(tmp_path)
    tmp_path.joinpath("trips.csv").write_text("trip_id,seq,stop_id,arr_seconds,dep_seconds\nT,0,A,x,1\n")
    tmp_path.joinpath("transfers.csv").write_text("from_vertex,to_vertex,travel_seconds\n")
    with pytest.raises(NetworkParseError):
        load_network(tmp_path)
    tmp_path.joinpath("trips.csv").write_text("trip_id,seq,stop_id,arr_seconds,dep_seconds\nT,0,Z,0,1\nT,1,A,3,3\n")
    with pytest.raises(NetworkIntegrityError):
        load_network(tmp_path)


def test_content_hash_tracks_times():
    a = tiny_network(4)
    records = a.trip_records()
    shifted = [TripRecord(r.name, r.stops, tuple(x + 1 for x in r.arrivals), tuple(x + 1 for x in r.departures))
               for r in records]
    b = Network(a.stop_names, shifted, a.graph.edges(), a.vertex_count)
    assert a.content_hash() != b.content_hash()
    assert tiny_network(4).content_hash() == a.content_hash()
