"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``. Time limits count as part of a check.
"""

import itertools
import math
import os
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import brute_reliability, random_connected_graph, random_snapshot  # noqa: E402

from qmap import cli  # noqa: E402
from qmap.benchmarks import gen_bv, list_benchmarks, load_benchmark  # noqa: E402
from qmap.calibration import edge_fidelities, reliability_matrix  # noqa: E402
from qmap.circuit import Circuit, count_2q, count_gates, cx, depth, measure, x  # noqa: E402
from qmap.harness import SweepConfig, Technique, compile_circuit, drift_experiment, run_sweep  # noqa: E402
from qmap.mapping import Mapping  # noqa: E402
from qmap.metrics import correlation, fidelity_ratio, fidelity_tvd  # noqa: E402
from qmap.placement import InteractionGraph, objective, place_reliability  # noqa: E402
from qmap.routing import route_dijkstra, route_fw_meeting, verify_routed  # noqa: E402
from qmap.simulator import NoiseModel, simulate_ideal, simulate_noisy  # noqa: E402
from qmap.topology import perth_topology  # noqa: E402

# Every drift knob turned up from its default: walk x3, spikes x2,
# recalibration /5, and two weeks of history before the first evaluated day.
DRIFT_HEAVY = {"sigma_walk": 0.3, "jump_prob": 0.2, "recal_prob": 0.05}
DRIFT_HEAVY_WARMUP = 14


def c1_bv_counts():
    bad = []
    for n in range(2, 13):
        c = gen_bv(n, "1" * (n - 1))
        got = (count_gates(c), count_2q(c), depth(c))
        if got != (3 * n, n - 1, n + 3):
            bad.append((n, got))
    return not bad, "n=2..12 all match" if not bad else f"mismatches {bad}"


def c2_routing_correctness():
    g = perth_topology()
    rng = random.Random(2024)
    snaps = [random_snapshot(g, rng) for _ in range(10)]
    names = [b for b in list_benchmarks() if load_benchmark(b).num_qubits <= 5]
    placements = ("reliability", "noise-adaptive", "sabre", "trivial")
    routers = ("dijkstra", "fw", "sabre")
    runs, bad = 0, []
    for name in names:
        c = load_benchmark(name)
        for pl, rt in itertools.product(placements, routers):
            tech = Technique.parse({"placement": pl, "routing": rt})
            for k, snap in enumerate(snaps):
                r = compile_circuit(c, g, tech, snap, seed=k)
                runs += 1
                if not verify_routed(c, r, tol=1e-9):
                    bad.append((name, pl, rt, k))
    return not bad, f"{runs} routings over {len(names)} benchmarks, {len(bad)} failures {bad[:3]}"


def c3_reliability_oracle():
    rng = random.Random(7)
    worst = 0.0
    for _ in range(50):
        g = random_connected_graph(rng, rng.randint(2, 7), extra=rng.uniform(0.1, 0.6))
        snap = random_snapshot(g, rng, two_q=(0.001, 0.4))
        R = reliability_matrix(snap, g)
        one_way = brute_reliability(g, edge_fidelities(snap, g))
        want = np.maximum(one_way, one_way.T)
        worst = max(worst, float(np.max(np.abs(R - want) / want)))
    return worst <= 1e-12, f"max relative error {worst:.3e} over 50 graphs"


def c4_placement_optimality():
    g = perth_topology()
    rng = random.Random(11)
    worst_gap = -math.inf
    for _ in range(100):
        n = rng.choice((4, 5))
        weights = {}
        for a, b in itertools.combinations(range(n), 2):
            if rng.random() < 0.5:
                weights[(a, b)] = rng.randint(1, 5)
        if not weights:
            weights[(0, 1)] = 1
        ig = InteractionGraph(n, weights, frozenset(q for q in range(n) if rng.random() < 0.7))
        snap = random_snapshot(g, rng)
        R = reliability_matrix(snap, g)
        exact = objective(place_reliability(ig, R, snap, g, method="exhaustive"), ig, R, snap)
        heur = objective(place_reliability(ig, R, snap, g, method="heuristic", seed=rng.randrange(1 << 30)),
                         ig, R, snap)
        worst_gap = max(worst_gap, exact - heur)
    return worst_gap <= math.log(1.02), \
        f"worst J gap {worst_gap:.3e} (limit ln 1.02 = {math.log(1.02):.4f})"


def _chosen_reliability(r, f):
    """Reliability of the routed operations, read off the emitted gates."""
    out = 1.0
    for gt in r.circuit.gates:
        if gt.is_two_qubit:
            e = tuple(sorted(gt.qubits))
            out *= f[e] ** (3 if gt.kind.value == "swap" else 1)
    return out


def c5_meeting_dominance():
    rng = random.Random(5)
    worst, cases = math.inf, 0
    while cases < 1000:
        n = rng.randint(3, 9)
        g = random_connected_graph(rng, n, extra=rng.uniform(0.0, 0.4))
        pairs = [(a, b) for a, b in itertools.permutations(range(n), 2) if not g.has_edge(a, b)]
        if not pairs:
            continue
        snap = random_snapshot(g, rng, two_q=(0.001, 0.3))
        f = edge_fidelities(snap, g)
        a, b = rng.choice(pairs)
        rest = [p for p in range(n) if p not in (a, b)]
        rng.shuffle(rest)
        m = Mapping((a, b, *rest[:rng.randint(0, len(rest))]), n)
        c = Circuit(m.num_virtual, 0, (cx(0, 1),))
        fw, dj = route_fw_meeting(c, m, g, snap), route_dijkstra(c, m, g, snap)
        ratio = _chosen_reliability(fw, f) / _chosen_reliability(dj, f)
        worst = min(worst, ratio)
        cases += 1
    return worst >= 1 - 1e-12, f"{cases} instances, min fw/dijkstra reliability ratio {worst:.12f}"


def c6_metric_fixtures():
    checks = [
        abs(fidelity_tvd({"00": 0.5, "11": 0.5}, {"00": 1.0}) - 0.5) <= 1e-12,
        abs(correlation({"00": 0.5, "11": 0.5}, {"00": 1.0}) - 0.5) <= 1e-12,
        abs(fidelity_tvd({"01": 1.0}, {"10": 1.0})) <= 1e-12,
        abs(correlation({"01": 1.0}, {"10": 1.0})) <= 1e-12,
    ]
    same = {"101": 1.0}
    checks += [fidelity_tvd(same, same) == 1.0, correlation(same, same) == 1.0,
               fidelity_ratio(same, same) == 1.0]
    mixed = {"00": 0.3, "01": 0.2, "11": 0.5}
    checks += [fidelity_tvd(mixed, mixed) == 1.0, correlation(mixed, mixed) == 1.0]
    return all(checks), f"{sum(checks)}/{len(checks)} fixtures hold"


def c7_simulator_statistics():
    c = Circuit(1, 1, (x(0), measure(0, 0)))
    nm = NoiseModel({}, {}, {0: 0.1})
    freq = simulate_noisy(c, nm, 100_000, seed=1).frequencies().get("1", 0.0)
    ok_ro = abs(freq - 0.9) <= 0.005
    bv = gen_bv(8, "1011010")
    counts = simulate_noisy(bv, NoiseModel.noiseless(), 8192, seed=1)
    ideal = simulate_ideal(bv)
    ok_bv = counts.counts == {"1011010": 8192} and set(ideal) == {"1011010"} \
        and abs(ideal["1011010"] - 1.0) <= 1e-12
    return ok_ro and ok_bv, f"P(1)={freq:.5f} (0.9 +- 0.005); noiseless BV exact: {ok_bv}"


def _drift_cfg(delay, methods):
    return SweepConfig(device="perth", benchmarks=["adder", "bv5"], techniques=["triq"],
                       calib_methods=methods, shots=8192, replicas=4, exec_delay_days=delay,
                       days=14, warmup_days=7, seeds=list(range(30)))


def c8_historical_stability():
    s = drift_experiment(_drift_cfg(1, ["lcd", "w-7"]))
    lcd, w7 = s.per_method["lcd"], s.per_method["w-7"]
    ok_std = lcd.std >= w7.std
    ok_mean = w7.mean >= lcd.mean - 0.01
    pair = s.paired[0]
    return ok_std and ok_mean, (
        f"std lcd {lcd.std:.6f} vs w-7 {w7.std:.6f} ({'ok' if ok_std else 'violated'}); "
        f"mean lcd {lcd.mean:.6f} vs w-7 {w7.mean:.6f} ({'ok' if ok_mean else 'violated'}); "
        f"day-to-day std lcd {lcd.day_std:.6f} w-7 {w7.day_std:.6f}; "
        f"paired w-7 - lcd {pair.mean_diff:+.6f}, n={lcd.n}")


HISTORICAL = ["w-7", "avg", "mix", "lcd-adj", "w-7-adj", "avg-adj", "mix-adj"]


def c9_realtime_latest_wins():
    s = drift_experiment(_drift_cfg(0, ["lcd"] + HISTORICAL))
    lcd = s.per_method["lcd"].mean
    best = max(HISTORICAL, key=lambda m: s.per_method[m].mean)
    ok = all(lcd >= s.per_method[m].mean - 0.01 for m in HISTORICAL)
    means = ", ".join(f"{m} {s.per_method[m].mean:.4f}" for m in ["lcd"] + HISTORICAL)
    return ok, f"best historical {best}; means: {means}"


def c10_determinism(tmp):
    import json
    cfg = tmp / "sweep.json"
    cfg.write_text(json.dumps({
        "device": "perth", "series": {"sigma_walk": 0.2, "jump_prob": 0.1},
        "benchmarks": ["adder", "bv4", "qft5"], "techniques": ["q3", "q-na", "triq", "triq+"],
        "calib_methods": ["lcd", "w-3-adj", "avg", "mix"], "shots": 1024, "replicas": 2,
        "days": 3, "warmup_days": 2, "seed": 9}))
    outs = []
    env = os.environ.pop("QMAP_SEED", None)
    try:
        for k in range(2):
            out = tmp / f"run{k}.csv"
            if cli.main(["sweep", str(cfg), "-o", str(out)]) != 0:
                return False, "sweep exited with an error"
            outs.append(out.read_bytes())
    finally:
        if env is not None:
            os.environ["QMAP_SEED"] = env
    rows = outs[0].count(b"\n") - 1
    return outs[0] == outs[1], f"{rows} rows, byte-identical: {outs[0] == outs[1]}"


def c11_scale_smoke():
    fid = {"q3": [], "q-na": []}
    errors = 0
    for seed in range(10):
        cfg = SweepConfig(device="heavy_hex_127", series=DRIFT_HEAVY, benchmarks=["bv12"],
                          techniques=["q3", "q-na"], calib_methods=["lcd"], shots=8192,
                          replicas=2, days=3, warmup_days=DRIFT_HEAVY_WARMUP, seed=seed)
        for r in run_sweep(cfg):
            if r.error:
                errors += 1
            else:
                fid[r.technique].append(r.fidelity_tvd)
    q3, qna = np.mean(fid["q3"]), np.mean(fid["q-na"])
    return errors == 0 and qna >= q3, \
        f"mean fidelity q-na {qna:.4f} vs q3 {q3:.4f}; {errors} error rows"


CRITERIA = {
    1: ("BV structural counts", c1_bv_counts, 1),
    2: ("routing correctness", c2_routing_correctness, 120),
    3: ("reliability-matrix oracle", c3_reliability_oracle, 30),
    4: ("placement optimality", c4_placement_optimality, 60),
    5: ("meeting-point dominance", c5_meeting_dominance, 30),
    6: ("metric fixtures", c6_metric_fixtures, None),
    7: ("noisy-simulator statistics", c7_simulator_statistics, None),
    8: ("historical data stabilises delayed execution", c8_historical_stability, 600),
    9: ("latest data wins in real time", c9_realtime_latest_wins, 600),
    10: ("determinism", c10_determinism, None),
    11: ("scale smoke test", c11_scale_smoke, 300),
}


def run_criterion(n, tmp=None):
    name, fn, limit = CRITERIA[n]
    t0 = time.perf_counter()
    ok, detail = fn(tmp) if n == 10 else fn()
    dt = time.perf_counter() - t0
    in_time = limit is None or dt < limit
    budget = f"{dt:.1f}s" + (f" of {limit}s" if limit else "")
    if not in_time:
        detail += " (over time limit)"
    line = f"{'PASS' if ok and in_time else 'FAIL'} criterion {n:2d} {name}: {detail} [{budget}]"
    return ok and in_time, line


@pytest.mark.parametrize("n", sorted(CRITERIA), ids=lambda n: f"criterion{n:02d}")
def test_criterion(n, tmp_path, capsys):
    ok, line = run_criterion(n, tmp_path)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    import tempfile
    results = []
    with tempfile.TemporaryDirectory() as d:
        for n in sorted(CRITERIA):
            ok, line = run_criterion(n, Path(d))
            print(line, flush=True)
            results.append(ok)
    sys.exit(0 if all(results) else 1)
