import random

import numpy as np
import pytest

from qmap.benchmarks import gen_bv, load_benchmark
from qmap.calibration import edge_fidelities
from qmap.circuit import Circuit, GateKind, barrier, count_2q, cx, h, measure, rz, swap
from qmap.mapping import Mapping
from qmap.routing import (LinkCosts, RoutingError, _loop_erase, dijkstra_plan, floyd_warshall,
                          replay_equivalent,
                          meeting_plan, route_dijkstra, route_fw_meeting, route_sabre,
                          verify_routed)
from qmap.topology import CouplingGraph, heavy_hex_topology, hop_distance, perth_topology

from conftest import (plan_reliability, random_connected_graph, random_snapshot, simple_paths,
                      uniform_snapshot)

ROUTERS = {
    "dijkstra": lambda c, m, g, s: route_dijkstra(c, m, g, s),
    "fw": lambda c, m, g, s: route_fw_meeting(c, m, g, s),
    "sabre": lambda c, m, g, s: route_sabre(c, m, g),
}


def test_loop_erase():
    assert _loop_erase([0, 1, 2, 1, 3]) == [0, 1, 3]
    assert _loop_erase([0, 1, 2, 3, 1, 0, 4]) == [0, 4]
    assert _loop_erase([5, 6, 7]) == [5, 6, 7]


def test_floyd_warshall_matches_dijkstra_hops():
    g = heavy_hex_topology(27)
    dist, nxt = floyd_warshall(g.num_qubits, {e: 1.0 for e in g.edges})
    assert np.array_equal(dist, hop_distance(g).astype(float))
    assert nxt[0, 0] == 0


def test_plans_are_valid_paths():
    rng = random.Random(3)
    for _ in range(30):
        g = random_connected_graph(rng, rng.randint(3, 8), extra=0.2)
        snap = random_snapshot(g, rng)
        costs = LinkCosts(snap, g)
        f = edge_fidelities(snap, g)
        a, b = rng.sample(range(g.num_qubits), 2)
        if g.has_edge(a, b):
            continue
        for plan in (dijkstra_plan(a, b, costs), meeting_plan(a, b, costs)):
            p = plan.path
            assert p[0] == a and p[-1] == b and len(set(p)) == len(p)
            assert all(g.has_edge(p[i], p[i + 1]) for i in range(len(p) - 1))
            assert plan.reliability == pytest.approx(plan_reliability(f, p, plan.meet), rel=1e-12)


def test_meeting_plan_is_globally_optimal():
    """Brute force over every simple path and every meeting link."""
    rng = random.Random(17)
    for _ in range(60):
        g = random_connected_graph(rng, rng.randint(3, 7), extra=0.25)
        snap = random_snapshot(g, rng, two_q=(0.001, 0.2))
        f = edge_fidelities(snap, g)
        costs = LinkCosts(snap, g)
        for a in range(g.num_qubits):
            for b in range(a + 1, g.num_qubits):
                if g.has_edge(a, b):
                    continue
                best = max(plan_reliability(f, p, j)
                           for p in simple_paths(g, a, b) for j in range(len(p) - 1))
                assert meeting_plan(a, b, costs).reliability == pytest.approx(best, rel=1e-12)


def test_dijkstra_plan_is_best_single_ended():
    rng = random.Random(23)
    for _ in range(40):
        g = random_connected_graph(rng, rng.randint(3, 7), extra=0.25)
        snap = random_snapshot(g, rng, two_q=(0.001, 0.2))
        f = edge_fidelities(snap, g)
        costs = LinkCosts(snap, g)
        a, b = rng.sample(range(g.num_qubits), 2)
        if g.has_edge(a, b):
            continue
        best = max(plan_reliability(f, p, j)
                   for p in simple_paths(g, a, b) for j in (0, len(p) - 2))
        assert dijkstra_plan(a, b, costs).reliability == pytest.approx(best, rel=1e-12)


def test_meeting_in_the_middle_beats_one_sided():
    # 0 - 1 - 2 - 3 with a weak middle link: move both ends toward it
    g = CouplingGraph(4, frozenset({(0, 1), (1, 2), (2, 3)}))
    snap = uniform_snapshot(g, two_q=0.01)
    snap.edges[(1, 2)] = snap.edges[(1, 2)].__class__(0.2, snap.edges[(1, 2)].last_calibrated)
    costs = LinkCosts(snap, g)
    m = meeting_plan(0, 3, costs)
    d = dijkstra_plan(0, 3, costs)
    assert m.meet == 1
    assert m.reliability == pytest.approx(0.99 ** 6 * 0.8)
    assert d.reliability == pytest.approx(0.99 ** 3 * 0.8 ** 3 * 0.99)
    assert m.reliability > d.reliability


def test_routed_gates_on_edges_and_swap_count():
    g = perth_topology()
    snap = random_snapshot(g, random.Random(0))
    c = load_benchmark("qft5")
    m = Mapping((0, 2, 4, 6, 3), 7)
    for name, route in ROUTERS.items():
        r = route(c, m, g, snap)
        assert all(g.has_edge(*gt.qubits) for gt in r.circuit.gates if gt.is_two_qubit), name
        inserted = sum(1 for gt in r.circuit.gates if gt.kind is GateKind.SWAP) - \
            sum(1 for gt in c.gates if gt.kind is GateKind.SWAP)
        assert inserted == r.swaps_added
        assert r.two_q_added == 3 * r.swaps_added
        assert r.circuit.frame == "physical"
        assert verify_routed(c, r), name


def test_no_swaps_when_already_adjacent():
    g = perth_topology()
    c = gen_bv(4)
    m = Mapping((0, 2, 3, 1), 7)
    for route in ROUTERS.values():
        r = route(c, m, g, uniform_snapshot(g))
        assert r.swaps_added == 0 and r.final == r.initial


def test_measurements_follow_final_layout():
    g = CouplingGraph(3, frozenset({(0, 1), (1, 2)}))
    c = Circuit(3, 3, (h(0), measure(1, 1), cx(0, 2), measure(0, 0), measure(2, 2)))
    r = route_dijkstra(c, Mapping((0, 1, 2), 3), g, uniform_snapshot(g))
    meas = {gt.clbit: gt.qubits[0] for gt in r.circuit.gates if gt.kind is GateKind.MEASURE}
    assert meas == {k: r.final[v] for k, v in c.measured().items()}
    assert all(gt.kind is GateKind.MEASURE for gt in r.circuit.gates[-3:])
    assert verify_routed(c, r)


def test_barriers_are_mapped():
    g = CouplingGraph(3, frozenset({(0, 1), (1, 2)}))
    c = Circuit(3, 0, (h(0), barrier(0, 2), cx(0, 2)))
    r = route_sabre(c, Mapping((2, 1, 0), 3), g)
    assert barrier(0, 2) in r.circuit.gates


def test_program_swaps_are_kept():
    g = CouplingGraph(3, frozenset({(0, 1), (1, 2)}))
    c = Circuit(3, 3, (h(0), swap(0, 2)) + tuple(measure(q, q) for q in range(3)))
    for route in ROUTERS.values():
        r = route(c, Mapping((0, 1, 2), 3), g, uniform_snapshot(g))
        assert verify_routed(c, r)


def test_verify_detects_corruption():
    g = perth_topology()
    rng = random.Random(6)
    gates = [h(q) for q in range(5)]
    for _ in range(12):
        a, b = rng.sample(range(5), 2)
        gates += [cx(a, b), rz(rng.uniform(0.3, 2.5), b), h(a)]
    c = Circuit(5, 5, tuple(gates) + tuple(measure(q, q) for q in range(5)))
    r = route_fw_meeting(c, Mapping((0, 2, 4, 6, 5), 7), g, uniform_snapshot(g))
    assert verify_routed(c, r) and r.swaps_added > 0
    body = list(r.circuit.gates)

    def variant(gs, final=r.final):
        return type(r)(r.circuit.replace(gs), r.initial, final, r.swaps_added, r.trace, r.coupling)

    last_swap = max(i for i, gt in enumerate(body) if gt.kind is GateKind.SWAP)
    last_cx = max(i for i, gt in enumerate(body) if gt.kind is GateKind.CX)
    last_rz = max(i for i, gt in enumerate(body) if gt.kind is GateKind.RZ)
    for k in (last_swap, last_cx, last_rz):
        assert not verify_routed(c, variant(body[:k] + body[k + 1:])), body[k]
    assert not verify_routed(c, variant(body + [cx(0, 6)]))
    assert not verify_routed(c, variant(body, Mapping(tuple(reversed(r.final.assignment)), 7)))
    # the structural check agrees on every case
    assert replay_equivalent(c, r)
    for k in (last_swap, last_cx, last_rz):
        assert not replay_equivalent(c, variant(body[:k] + body[k + 1:]))
    assert not replay_equivalent(c, variant(body + [cx(0, 6)]))
    assert not replay_equivalent(c, variant(body, Mapping(tuple(reversed(r.final.assignment)), 7)))


def test_wide_routing_is_verified_structurally():
    g = heavy_hex_topology(127)
    c = gen_bv(12)
    rng = random.Random(3)
    r = route_sabre(c, Mapping(tuple(rng.sample(range(127), 12)), 127), g)
    assert len(r.circuit.active_qubits()) > 20
    assert verify_routed(c, r)
    body = list(r.circuit.gates)
    k = max(i for i, gt in enumerate(body) if gt.kind is GateKind.SWAP)
    broken = type(r)(r.circuit.replace(body[:k] + body[k + 1:]), r.initial, r.final,
                     r.swaps_added, r.trace, r.coupling)
    assert not verify_routed(c, broken)


def test_fw_trace_records_dominance():
    rng = random.Random(4)
    g = perth_topology()
    for _ in range(10):
        snap = random_snapshot(g, rng)
        r = route_fw_meeting(load_benchmark("qft5"), Mapping(tuple(rng.sample(range(7), 5)), 7),
                             g, snap)
        for d in r.trace:
            assert d.plan.reliability >= d.baseline_reliability * (1 - 1e-12)


def test_sidecar():
    g = perth_topology()
    r = route_sabre(gen_bv(5), Mapping((0, 1, 2, 3, 4), 7), g)
    doc = r.sidecar()
    assert set(doc) == {"initial", "final", "swaps_added"}
    assert doc["initial"] == [0, 1, 2, 3, 4]


def test_routing_input_errors():
    g = CouplingGraph(4, frozenset({(0, 1), (2, 3)}))
    snap = uniform_snapshot(g)
    c = Circuit(2, 0, (cx(0, 1),))
    for route in (route_dijkstra, route_fw_meeting):
        with pytest.raises(RoutingError, match="disconnected"):
            route(c, Mapping((0, 2), 4), g, snap)
    with pytest.raises(RoutingError):
        route_dijkstra(c, Mapping((0,), 4), g, snap)
    with pytest.raises(RoutingError):
        route_dijkstra(c, Mapping((0, 1), 5), g, snap)
    mid = Circuit(2, 1, (measure(0, 0), cx(0, 1)))
    for route in (route_dijkstra, route_fw_meeting):
        with pytest.raises(RoutingError, match="after its measurement"):
            route(mid, Mapping((0, 1), 4), g, snap)
    with pytest.raises(RoutingError, match="after its measurement"):
        route_sabre(mid, Mapping((0, 1), 4), g)


def test_sabre_heavy_hex_large_circuit():
    g = heavy_hex_topology(65)
    rng = random.Random(2)
    gates = []
    for _ in range(60):
        a, b = rng.sample(range(10), 2)
        gates.append(cx(a, b))
    c = Circuit(10, 0, tuple(gates))
    r = route_sabre(c, Mapping(tuple(rng.sample(range(65), 10)), 65), g)
    assert all(g.has_edge(*gt.qubits) for gt in r.circuit.gates if gt.is_two_qubit)
    assert count_2q(r.circuit) == 60 + r.swaps_added
    # replaying the inserted SWAPs from the initial layout must land on the final one
    p2l = {p: v for v, p in enumerate(r.initial.assignment)}
    for gt in r.circuit.gates:
        if gt.kind is GateKind.SWAP:
            a, b = gt.qubits
            p2l[a], p2l[b] = p2l.get(b), p2l.get(a)
    assert {v: p for p, v in p2l.items() if v is not None} == dict(enumerate(r.final.assignment))
