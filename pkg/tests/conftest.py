import itertools
import random

import numpy as np
import pytest
from hypothesis import strategies as st

from qmap.calibration import CalibrationSnapshot, EdgeCalib, QubitCalib, parse_time
from qmap.circuit import Circuit, cx, ecr, h, rz, swap, sx, x
from qmap.topology import CouplingGraph

T0 = parse_time("2024-01-01T00:00:00Z")


def random_snapshot(g: CouplingGraph, rng: random.Random, two_q=(0.005, 0.08),
                    one_q=(2e-4, 2e-3), readout=(0.01, 0.08), stamp=T0) -> CalibrationSnapshot:
    qubits = [QubitCalib(rng.uniform(*readout), rng.uniform(*one_q), stamp)
              for _ in range(g.num_qubits)]
    edges = {e: EdgeCalib(rng.uniform(*two_q), stamp) for e in g.sorted_edges}
    return CalibrationSnapshot(stamp, qubits, edges)


def uniform_snapshot(g: CouplingGraph, two_q=0.01, one_q=0.001, readout=0.02, stamp=T0):
    qubits = [QubitCalib(readout, one_q, stamp) for _ in range(g.num_qubits)]
    return CalibrationSnapshot(stamp, qubits, {e: EdgeCalib(two_q, stamp) for e in g.sorted_edges})


def random_connected_graph(rng: random.Random, n: int, extra: float = 0.3) -> CouplingGraph:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    nodes = list(range(n))
    rng.shuffle(nodes)
    edges = {tuple(sorted((nodes[i], nodes[rng.randrange(i)]))) for i in range(1, n)}
    for a, b in itertools.combinations(range(n), 2):
        if (a, b) not in edges and rng.random() < extra:
            edges.add((a, b))
    return CouplingGraph(n, frozenset(edges), f"random{n}")


def states_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol=1e-9) -> bool:
    a, b = a.reshape(-1), b.reshape(-1)
    return abs(abs(np.vdot(a, b)) - 1.0) < tol


@pytest.fixture
def rng():
    return random.Random(1234)


def unitary(c) -> np.ndarray:
    """Dense unitary of the circuit's gates (qubit 0 is the most significant index)."""
    from qmap.circuit import GateKind
    from qmap.simulator import apply_matrix, gate_matrix

    n = c.num_qubits
    d = 2 ** n
    state = np.eye(d, dtype=complex).reshape((2,) * n + (d,))
    for g in c.gates:
        if g.kind in (GateKind.MEASURE, GateKind.BARRIER):
            continue
        state = apply_matrix(state, gate_matrix(g), g.qubits)
    return state.reshape(d, d)


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol=1e-9) -> bool:
    k = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[k]) < tol:
        return np.allclose(u, v, atol=tol)
    phase = u[k] / v[k]
    return abs(abs(phase) - 1) < tol and np.allclose(u, phase * v, atol=tol)


@st.composite
def circuits(draw, max_qubits=4, max_gates=12):
    n = draw(st.integers(2, max_qubits))
    gates = []
    for _ in range(draw(st.integers(0, max_gates))):
        kind = draw(st.sampled_from(["h", "x", "sx", "rz", "cx", "ecr", "swap"]))
        if kind in ("cx", "ecr", "swap"):
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            gates.append({"cx": cx, "ecr": ecr, "swap": swap}[kind](a, b))
        elif kind == "rz":
            gates.append(rz(draw(st.floats(-7, 7, allow_nan=False)), draw(st.integers(0, n - 1))))
        else:
            gates.append({"h": h, "x": x, "sx": sx}[kind](draw(st.integers(0, n - 1))))
    return Circuit(n, 0, tuple(gates))


def simple_paths(g: CouplingGraph, a: int, b: int):
    """Every simple path from ``a`` to ``b`` by exhaustive DFS."""
    out, stack = [], [(a, [a])]
    while stack:
        u, path = stack.pop()
        if u == b:
            out.append(path)
            continue
        for v in g.adjacency[u]:
            if v not in path:
                stack.append((v, path + [v]))
    return out


def plan_reliability(f: dict, path, meet: int) -> float:
    """CX on link ``meet`` of ``path``; every other link carries one SWAP (three CX)."""
    r = 1.0
    for i in range(len(path) - 1):
        e = tuple(sorted((path[i], path[i + 1])))
        r *= f[e] if i == meet else f[e] ** 3
    return r


def brute_reliability(g: CouplingGraph, f: dict, both_ends_move: bool = False) -> np.ndarray:
    """Best plan per pair over all simple paths; by default only one endpoint moves."""
    n = g.num_qubits
    R = np.eye(n)
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            best = 0.0
            for p in simple_paths(g, a, b):
                meets = range(len(p) - 1) if both_ends_move else (0, len(p) - 2)
                best = max(best, max(plan_reliability(f, p, j) for j in meets))
            R[a, b] = best
    return R
