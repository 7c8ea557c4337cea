"""SWAP-insertion routers.

All three routers walk the circuit in order and keep a live virtual->physical
mapping that every inserted SWAP permanently permutes. Measurements are
assumed terminal and are emitted at the end on the final positions.

A routing *plan* for a non-adjacent pair ``(a, b)`` is a simple path
``a = v0, ..., vk = b`` plus a meeting link ``j``: ``a`` is swapped forward to
``v_j``, ``b`` backward to ``v_{j+1}``, and the gate runs on that link. Its
reliability is ``f_j * prod_{i != j} f_i**3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationSnapshot, dijkstra, edge_fidelities
from .circuit import Circuit, Gate, GateKind, TWO_QUBIT, barrier, measure, swap
from .mapping import Mapping
from .topology import CouplingGraph, hop_distance

TIE_TOL = 1e-12


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Plan:
    path: tuple[int, ...]
    meet: int
    cost: float  # -ln(reliability)

    @property
    def reliability(self) -> float:
        return math.exp(-self.cost)

    @property
    def num_swaps(self) -> int:
        return len(self.path) - 2


@dataclass(frozen=True)
class Decision:
    gate_index: int
    pair: tuple[int, int]
    plan: Plan
    baseline_reliability: float | None = None  # single-ended choice on the same state


@dataclass(frozen=True)
class RoutedCircuit:
    circuit: Circuit
    initial: Mapping
    final: Mapping
    swaps_added: int
    trace: tuple[Decision, ...] = ()
    coupling: CouplingGraph | None = field(default=None, compare=False)

    @property
    def two_q_added(self) -> int:
        return 3 * self.swaps_added

    def sidecar(self) -> dict:
        return {"initial": self.initial.to_json(), "final": self.final.to_json(),
                "swaps_added": self.swaps_added}


# ------------------------------------------------------------------- weights

class LinkCosts:
    """-ln f per link for one snapshot, plus the Floyd-Warshall SWAP-chain table."""

    def __init__(self, snap: CalibrationSnapshot, g: CouplingGraph):
        self.g = g
        self.f = edge_fidelities(snap, g)
        self.lf = {e: -math.log(v) for e, v in self.f.items()}
        self._fw = None

    def link(self, u: int, v: int) -> float:
        return self.lf[(u, v) if u < v else (v, u)]

    def swap_weight(self, u: int, v: int) -> float:
        return 3.0 * self.link(u, v)

    def path_cost(self, path, meet: int) -> float:
        links = [self.link(path[i], path[i + 1]) for i in range(len(path) - 1)]
        return 3.0 * sum(links) - 2.0 * links[meet]

    @property
    def floyd_warshall(self) -> tuple[np.ndarray, np.ndarray]:
        if self._fw is None:
            self._fw = floyd_warshall(self.g.num_qubits,
                                      {e: 3.0 * w for e, w in self.lf.items()})
        return self._fw


def floyd_warshall(n: int, weights: dict[tuple[int, int], float]) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest paths on an undirected graph; returns ``(dist, next_hop)``."""
    dist = np.full((n, n), math.inf)
    nxt = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0.0)
    nxt[np.arange(n), np.arange(n)] = np.arange(n)
    for (a, b), w in weights.items():
        dist[a, b] = dist[b, a] = w
        nxt[a, b], nxt[b, a] = b, a
    for k in range(n):
        via = dist[:, k, None] + dist[None, k, :]
        better = via < dist
        if better.any():
            dist = np.where(better, via, dist)
            nxt = np.where(better, nxt[:, k, None], nxt)
    return dist, nxt


def _fw_path(nxt: np.ndarray, a: int, b: int) -> list[int]:
    if nxt[a, b] < 0:
        raise RoutingError(f"no path between physical qubits {a} and {b}")
    path = [a]
    while a != b:
        a = int(nxt[a, b])
        path.append(a)
    return path


def _walk_back(prev: list[int], x: int) -> list[int]:
    out = [x]
    while prev[out[-1]] != -1:
        out.append(prev[out[-1]])
    return out[::-1]


# --------------------------------------------------------------------- plans

def dijkstra_plan(a: int, b: int, costs: LinkCosts) -> Plan:
    """Move one operand next to the other along its most reliable SWAP chain.

    Both directions are evaluated and the cheaper kept; ties move ``a``.
    """
    adj = costs.g.adjacency
    best: Plan | None = None
    for src, dst in ((a, b), (b, a)):
        dist, prev = dijkstra(adj, costs.swap_weight, src, banned=dst)
        cands = [(dist[x] + costs.link(x, dst), x) for x in adj[dst] if math.isfinite(dist[x])]
        if not cands:
            continue
        cost, x = min(cands)
        path = _walk_back(prev, x) + [dst]
        if src == a:
            plan = Plan(tuple(path), len(path) - 2, cost)
        else:
            plan = Plan(tuple(reversed(path)), 0, cost)
        if best is None or plan.cost < best.cost - TIE_TOL:
            best = plan
    if best is None:
        raise RoutingError(f"physical qubits {a} and {b} are disconnected")
    return best


def _loop_erase(walk: list[int]) -> list[int]:
    out: list[int] = []
    pos: dict[int, int] = {}
    for v in walk:
        if v in pos:
            for u in out[pos[v] + 1:]:
                del pos[u]
            del out[pos[v] + 1:]
        else:
            pos[v] = len(out)
            out.append(v)
    return out


def meeting_plan(a: int, b: int, costs: LinkCosts) -> Plan:
    """Move both operands toward a meeting link chosen over every edge.

    The link ``(u, v)`` minimises ``S[a,u] + S[b,v] - ln f(u,v)`` with ``S`` the
    Floyd-Warshall SWAP-chain table; exact ties go to the smallest ``(u, v)``.
    """
    dist, nxt = costs.floyd_warshall
    best = None
    for (p, q) in costs.g.sorted_edges:
        w = costs.link(p, q)
        for u, v in ((p, q), (q, p)):
            c = dist[a, u] + dist[b, v] + w
            key = (u, v)
            if not math.isfinite(c):
                continue
            if best is None or c < best[0] - TIE_TOL or (abs(c - best[0]) <= TIE_TOL and key < best[1]):
                best = (c, key)
    if best is None or not math.isfinite(best[0]):
        raise RoutingError(f"physical qubits {a} and {b} are disconnected")
    u, v = best[1]
    walk = _fw_path(nxt, a, u) + _fw_path(nxt, b, v)[::-1]
    path = _loop_erase(walk)
    if len(path) == len(walk):
        meet = len(_fw_path(nxt, a, u)) - 1
    else:
        links = [costs.link(path[i], path[i + 1]) for i in range(len(path) - 1)]
        meet = max(range(len(links)), key=lambda i: (links[i], -i))
    return Plan(tuple(path), meet, costs.path_cost(path, meet))


# -------------------------------------------------------------- live mapping

class _Live:
    def __init__(self, m: Mapping, g: CouplingGraph):
        self.l2p = list(m.assignment)
        self.p2l = [-1] * g.num_qubits
        for v, p in enumerate(self.l2p):
            self.p2l[p] = v
        self.g = g
        self.out: list[Gate] = []
        self.swaps = 0

    def swap(self, p: int, q: int):
        if not self.g.has_edge(p, q):
            raise RoutingError(f"SWAP on non-edge ({p},{q})")
        vp, vq = self.p2l[p], self.p2l[q]
        self.p2l[p], self.p2l[q] = vq, vp
        if vp >= 0:
            self.l2p[vp] = q
        if vq >= 0:
            self.l2p[vq] = p
        self.out.append(swap(p, q))
        self.swaps += 1

    def execute(self, plan: Plan):
        path, j = plan.path, plan.meet
        for i in range(j):
            self.swap(path[i], path[i + 1])
        for i in range(len(path) - 1, j + 1, -1):
            self.swap(path[i], path[i - 1])

    def emit(self, g: Gate):
        if g.kind is GateKind.BARRIER:
            self.out.append(barrier(*[self.l2p[q] for q in g.qubits]))
        else:
            self.out.append(g.remap(self.l2p))

    def finish(self, c: Circuit, initial: Mapping, measures: list[Gate], trace) -> RoutedCircuit:
        for mg in measures:
            self.out.append(measure(self.l2p[mg.qubits[0]], mg.clbit))
        phys = Circuit(self.g.num_qubits, c.num_clbits, tuple(self.out), "physical")
        final = Mapping(tuple(self.l2p), self.g.num_qubits)
        return RoutedCircuit(phys, initial, final, self.swaps, tuple(trace), self.g)


def _check_inputs(c: Circuit, m: Mapping, g: CouplingGraph):
    if m.num_virtual < c.num_qubits:
        raise RoutingError(f"mapping covers {m.num_virtual} of {c.num_qubits} virtual qubits")
    if m.num_physical != g.num_qubits:
        raise RoutingError(f"mapping targets {m.num_physical} qubits, device has {g.num_qubits}")
    # measurements are emitted last, which needs them to be terminal
    done = set()
    for gt in c.gates:
        if gt.kind is GateKind.BARRIER:
            continue
        if done.intersection(gt.qubits):
            raise RoutingError(f"qubit {sorted(done.intersection(gt.qubits))[0]} is used after "
                               "its measurement; mid-circuit measurement is not supported")
        if gt.kind is GateKind.MEASURE:
            done.add(gt.qubits[0])


def _route_planned(c, m, g, snap, planner, with_baseline=False) -> RoutedCircuit:
    _check_inputs(c, m, g)
    costs = LinkCosts(snap, g)
    live = _Live(m, g)
    measures, trace = [], []
    for idx, gate in enumerate(c.gates):
        if gate.kind is GateKind.MEASURE:
            measures.append(gate)
            continue
        if gate.kind in TWO_QUBIT:
            a, b = live.l2p[gate.qubits[0]], live.l2p[gate.qubits[1]]
            if not g.has_edge(a, b):
                plan = planner(a, b, costs)
                base = dijkstra_plan(a, b, costs).reliability if with_baseline else None
                trace.append(Decision(idx, (a, b), plan, base))
                live.execute(plan)
        live.emit(gate)
    return live.finish(c, m, measures, trace)


def route_dijkstra(c: Circuit, m: Mapping, g: CouplingGraph, snap: CalibrationSnapshot) -> RoutedCircuit:
    return _route_planned(c, m, g, snap, dijkstra_plan)


def route_fw_meeting(c: Circuit, m: Mapping, g: CouplingGraph, snap: CalibrationSnapshot) -> RoutedCircuit:
    return _route_planned(c, m, g, snap, meeting_plan, with_baseline=True)


# --------------------------------------------------------------------- SABRE

@dataclass(frozen=True)
class SabreParams:
    ext_window: int = 20
    ext_weight: float = 0.5
    decay: float = 0.001


def route_sabre(c: Circuit, m: Mapping, g: CouplingGraph, params: SabreParams | None = None,
                hops: np.ndarray | None = None) -> RoutedCircuit:
    """Noise-agnostic look-ahead routing on hop distance.

    Candidate SWAPs touch a physical qubit of the blocked front layer and are
    scored by ``max(decay) * sum_F d + w / |E| * sum_E d``; the lowest score
    wins, ties by smallest edge. A stalled search falls back to walking the
    closest front gate along a shortest path.
    """
    params = params or SabreParams()
    _check_inputs(c, m, g)
    d = hop_distance(g) if hops is None else hops
    live = _Live(m, g)

    body = [(i, gt) for i, gt in enumerate(c.gates) if gt.kind is not GateKind.MEASURE]
    measures = [gt for gt in c.gates if gt.kind is GateKind.MEASURE]
    n = len(body)
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    last: dict[int, int] = {}
    for k, (_, gt) in enumerate(body):
        for q in set(gt.qubits):
            if q in last:
                succ[last[q]].append(k)
                indeg[k] += 1
            last[q] = k

    decay = [1.0] * g.num_qubits
    front = sorted(k for k in range(n) if indeg[k] == 0)
    stall = 0
    stall_limit = 10 * max(int(d.max()), 1) + 10

    def is_blocked(k):
        gt = body[k][1]
        return gt.kind in TWO_QUBIT and not g.has_edge(live.l2p[gt.qubits[0]], live.l2p[gt.qubits[1]])

    while front:
        progressed = True
        while progressed:
            progressed = False
            nxt_front = []
            for k in front:
                if is_blocked(k):
                    nxt_front.append(k)
                    continue
                live.emit(body[k][1])
                progressed = True
                if body[k][1].kind in TWO_QUBIT:
                    decay = [1.0] * g.num_qubits
                    stall = 0
                for s in succ[k]:
                    indeg[s] -= 1
                    if indeg[s] == 0:
                        nxt_front.append(s)
            front = sorted(nxt_front)
        if not front:
            break

        if stall >= stall_limit:
            k = min(front, key=lambda k: (d[live.l2p[body[k][1].qubits[0]],
                                              live.l2p[body[k][1].qubits[1]]], k))
            a, b = (live.l2p[q] for q in body[k][1].qubits)
            path = _bfs_path(g, a, b)
            live.execute(Plan(tuple(path), len(path) - 2, 0.0))
            stall = 0
            continue

        # extended set: upcoming two-qubit gates in dependency order
        ext: list[int] = []
        seen = set(front)
        queue = list(front)
        while queue and len(ext) < params.ext_window:
            k = queue.pop(0)
            for s in succ[k]:
                if s in seen:
                    continue
                seen.add(s)
                queue.append(s)
                if body[s][1].kind in TWO_QUBIT:
                    ext.append(s)
                    if len(ext) >= params.ext_window:
                        break
        front_pairs = [body[k][1].qubits for k in front]
        ext_pairs = [body[k][1].qubits for k in ext]

        cands = set()
        for qa, qb in front_pairs:
            for p in (live.l2p[qa], live.l2p[qb]):
                for nb in g.adjacency[p]:
                    cands.add((min(p, nb), max(p, nb)))
        best = None
        for p, q in sorted(cands):
            vp, vq = live.p2l[p], live.p2l[q]

            def pos(v):
                return q if v == vp else p if v == vq else live.l2p[v]

            hf = sum(d[pos(x), pos(y)] for x, y in front_pairs)
            he = sum(d[pos(x), pos(y)] for x, y in ext_pairs) / len(ext_pairs) if ext_pairs else 0.0
            score = max(decay[p], decay[q]) * hf + params.ext_weight * he
            if best is None or score < best[0] - TIE_TOL:
                best = (score, (p, q))
        p, q = best[1]
        live.swap(p, q)
        decay[p] += params.decay
        decay[q] += params.decay
        stall += 1
    return live.finish(c, m, measures, ())


def _bfs_path(g: CouplingGraph, a: int, b: int) -> list[int]:
    prev = {a: -1}
    queue = [a]
    for u in queue:
        if u == b:
            break
        for v in g.adjacency[u]:
            if v not in prev:
                prev[v] = u
                queue.append(v)
    if b not in prev:
        raise RoutingError(f"physical qubits {a} and {b} are disconnected")
    path = [b]
    while prev[path[-1]] != -1:
        path.append(prev[path[-1]])
    return path[::-1]


# ------------------------------------------------------------- verification

def _virtual_state(c: Circuit, n_virtual: int, placement: Mapping | None = None
                   ) -> tuple[np.ndarray, float]:
    """Final state as a vector indexed by virtual-qubit bitmask, plus stray weight.

    For a physical circuit ``placement`` maps virtual -> physical; amplitude on
    any basis state with an unplaced physical qubit set counts as stray weight.
    """
    from .simulator import statevector

    psi, qubits = statevector(c.unitary_part())
    amp = psi.reshape(-1)
    k = len(qubits)
    idx = np.arange(amp.size, dtype=np.int64)
    key = np.zeros_like(idx)
    junk = np.zeros(idx.shape, dtype=bool)
    inv = placement.inverse() if placement is not None else {q: q for q in qubits}
    for axis, q in enumerate(qubits):
        bit = (idx >> (k - 1 - axis)) & 1
        v = inv.get(q)
        if v is None:
            junk |= bit.astype(bool)
        else:
            key |= bit << v
    vec = np.zeros(2 ** n_virtual, dtype=complex)
    vec[key[~junk]] = amp[~junk]
    return vec, float(np.sum(np.abs(amp[junk]) ** 2))


def verify_routed(original: Circuit, r: RoutedCircuit, tol: float = 1e-9) -> bool:
    """Check a routed circuit against its source.

    Every two-qubit gate must sit on a coupling edge. Read back through
    ``r.final``, the routed state must match the original one: its basis-state
    distribution within ``tol`` total variation and its amplitudes up to a
    global phase. Measured-bit distributions must agree as well.

    Circuits too wide for a state vector get an exact structural check
    instead, see :func:`replay_equivalent`.
    """
    from .simulator import SimulationError, simulate_ideal

    if r.coupling is not None:
        for gt in r.circuit.gates:
            if gt.kind in TWO_QUBIT and not r.coupling.has_edge(*gt.qubits):
                return False
    n = original.num_qubits
    try:
        want, _ = _virtual_state(original, n)
        got, stray = _virtual_state(r.circuit, n,
                                    Mapping(r.final.assignment[:n], r.final.num_physical))
    except SimulationError:
        return replay_equivalent(original, r)
    tvd = 0.5 * (float(np.sum(np.abs(np.abs(want) ** 2 - np.abs(got) ** 2))) + stray)
    if tvd > tol or abs(np.vdot(want, got)) < 1.0 - tol:
        return False
    if any(g.kind is GateKind.MEASURE for g in original.gates):
        p, q = simulate_ideal(original), simulate_ideal(r.circuit)
        if 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in p.keys() | q.keys()) > tol:
            return False
    return True


def _token_history(c: Circuit, start: dict[int, object]):
    """Per-token gate lists, treating every SWAP as a relabelling of wires."""
    at = dict(start)
    hist: dict[object, list] = {}
    for gt in c.gates:
        if gt.kind is GateKind.BARRIER:
            continue
        if gt.kind is GateKind.SWAP:
            a, b = gt.qubits
            at[a], at[b] = at.get(b, ("idle", b)), at.get(a, ("idle", a))
            continue
        toks = tuple(at.get(q, ("idle", q)) for q in gt.qubits)
        for t in toks:
            hist.setdefault(t, []).append((gt.kind, gt.theta, gt.clbit, toks))
    return hist, at


def replay_equivalent(original: Circuit, r: RoutedCircuit) -> bool:
    """Structural equivalence that does not simulate.

    Each wire carries a token (its starting virtual qubit); SWAPs in either
    circuit only move tokens. The routed circuit is equivalent when every
    token sees the same gates, on the same tokens, in the same order, and ends
    where ``r.final`` says. Sound for any width; it rejects valid rewrites that
    reorder gates.
    """
    if r.coupling is not None:
        for gt in r.circuit.gates:
            if gt.kind in TWO_QUBIT and not r.coupling.has_edge(*gt.qubits):
                return False
    n = original.num_qubits
    want, _ = _token_history(original, {v: v for v in range(n)})
    got, at = _token_history(r.circuit, {r.initial[v]: v for v in range(n)})
    if {k: v for k, v in got.items() if v} != {k: v for k, v in want.items() if v}:
        return False
    where = {t: p for p, t in at.items()}
    return all(where.get(v) == r.final[v] for v in range(n))
