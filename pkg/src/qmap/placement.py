"""Initial virtual -> physical placement."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .calibration import CalibrationSnapshot
from .circuit import Circuit, GateKind, TWO_QUBIT, reverse
from .mapping import Mapping
from .routing import SabreParams, route_sabre
from .topology import CouplingGraph, hop_distance

EXHAUSTIVE_LIMIT = 8
J_TOL = 1e-12


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class InteractionGraph:
    num_virtual: int
    weights: dict  # (i, j) with i < j -> number of two-qubit gates
    measured: frozenset

    @property
    def relevant(self) -> list[int]:
        qs = {q for e in self.weights for q in e} | set(self.measured)
        return sorted(qs)

    def partners(self, v: int) -> list[int]:
        return sorted({j if i == v else i for i, j in self.weights if v in (i, j)})


def interaction_graph(c: Circuit) -> InteractionGraph:
    w: dict[tuple[int, int], int] = {}
    for g in c.gates:
        if g.kind in TWO_QUBIT:
            a, b = sorted(g.qubits)
            w[(a, b)] = w.get((a, b), 0) + 1
    meas = frozenset(g.qubits[0] for g in c.gates if g.kind is GateKind.MEASURE)
    return InteractionGraph(c.num_qubits, w, meas)


def _log_tables(R: np.ndarray, snap: CalibrationSnapshot):
    with np.errstate(divide="ignore"):
        lnR = np.log(np.asarray(R, dtype=float))
    lnRO = np.array([math.log1p(-snap.readout_error(q)) for q in range(len(snap.qubits))])
    return lnR, lnRO


def objective(m: Mapping, ig: InteractionGraph, R: np.ndarray, snap: CalibrationSnapshot) -> float:
    """``sum_w w * ln R[pi i, pi j] + sum_measured ln(1 - readout)``."""
    lnR, lnRO = _log_tables(R, snap)
    j = sum(w * lnR[m[a], m[b]] for (a, b), w in ig.weights.items())
    return float(j + sum(lnRO[m[q]] for q in ig.measured))


def _complete(partial: dict[int, int], num_virtual: int, num_physical: int) -> Mapping:
    """Fill unplaced virtual qubits with the smallest free physical indices."""
    if num_virtual > num_physical:
        raise PlacementError(f"{num_virtual} virtual qubits do not fit on {num_physical}")
    used = set(partial.values())
    free = iter(p for p in range(num_physical) if p not in used)
    return Mapping(tuple(partial[v] if v in partial else next(free) for v in range(num_virtual)),
                   num_physical)


def _exhaustive(ig, lnR, lnRO, n_phys, rel) -> dict[int, int]:
    col = {v: k for k, v in enumerate(rel)}
    perms = np.array(list(permutations(range(n_phys), len(rel))), dtype=np.int64)
    score = np.zeros(len(perms))
    for (a, b), w in ig.weights.items():
        score += w * lnR[perms[:, col[a]], perms[:, col[b]]]
    for q in ig.measured:
        score += lnRO[perms[:, col[q]]]
    best = int(np.flatnonzero(score >= score.max() - J_TOL)[0])
    return {v: int(p) for v, p in zip(rel, perms[best])}


class _Annealer:
    def __init__(self, ig, lnR, lnRO, n_phys, rel):
        self.lnR, self.lnRO, self.n = lnR, lnRO, n_phys
        self.rel = rel
        self.nbrs: dict[int, list[tuple[int, int]]] = {v: [] for v in rel}
        for (a, b), w in ig.weights.items():
            self.nbrs[a].append((b, w))
            self.nbrs[b].append((a, w))
        self.meas = set(ig.measured)

    def local(self, v: int, p: int, pos: dict[int, int], skip: int | None = None) -> float:
        s = self.lnRO[p] if v in self.meas else 0.0
        for u, w in self.nbrs[v]:
            if u in pos and u != skip:
                s += w * self.lnR[p, pos[u]]
        return s

    def total(self, pos) -> float:
        s = sum(self.lnRO[pos[v]] for v in self.meas)
        for v in self.rel:
            for u, w in self.nbrs[v]:
                if u > v:
                    s += w * self.lnR[pos[v], pos[u]]
        return s

    def greedy(self, ig) -> dict[int, int]:
        pos: dict[int, int] = {}
        free = set(range(self.n))
        order = sorted(ig.weights.items(), key=lambda kv: (-kv[1], kv[0]))
        if order:
            (a, b), _ = order[0]
            best = max(((self.local(a, p, {}) + self.local(b, q, {a: p}), -p, -q)
                        for p in range(self.n) for q in range(self.n) if p != q))
            pos[a], pos[b] = -best[1], -best[2]
            free -= {pos[a], pos[b]}
        while len(pos) < len(self.rel):
            def pull(v):
                return (sum(w for u, w in self.nbrs[v] if u in pos), -v)
            v = max((v for v in self.rel if v not in pos), key=pull)
            p = max(sorted(free), key=lambda p: self.local(v, p, pos))
            pos[v] = p
            free.discard(p)
        return pos

    def anneal(self, pos: dict[int, int], iters: int, seed: int) -> dict[int, int]:
        rng = random.Random(seed)
        occ = {p: v for v, p in pos.items()}
        cur = self.total(pos)
        best, best_pos = cur, dict(pos)
        t0, t1 = 0.5, 1e-4
        for step in range(iters):
            temp = t0 * (t1 / t0) ** (step / max(iters - 1, 1))
            v = self.rel[rng.randrange(len(self.rel))]
            t = rng.randrange(self.n)
            p = pos[v]
            if t == p:
                continue
            u = occ.get(t)
            if u is None:
                delta = self.local(v, t, pos) - self.local(v, p, pos)
            else:
                before = self.local(v, p, pos, skip=u) + self.local(u, t, pos, skip=v)
                after = self.local(v, t, pos, skip=u) + self.local(u, p, pos, skip=v)
                delta = after - before
            if delta >= 0 or rng.random() < math.exp(delta / temp):
                pos[v] = t
                occ[t] = v
                if u is None:
                    del occ[p]
                else:
                    pos[u] = p
                    occ[p] = u
                cur += delta
                if cur > best + J_TOL:
                    best, best_pos = cur, dict(pos)
        return best_pos


def place_reliability(ig: InteractionGraph, R: np.ndarray, snap: CalibrationSnapshot,
                      g: CouplingGraph, method: str = "auto", iters: int = 20000,
                      seed: int = 0) -> Mapping:
    """Maximise summed log reliability plus measured-qubit readout fidelity.

    ``auto`` enumerates every injective assignment on devices with at most
    eight qubits (exact ties go to the lexicographically smallest assignment of
    the relevant qubits) and otherwise runs a greedy seed refined by simulated
    annealing.
    """
    n_phys = g.num_qubits
    if ig.num_virtual > n_phys:
        raise PlacementError(f"{ig.num_virtual} virtual qubits do not fit on {n_phys}")
    lnR, lnRO = _log_tables(R, snap)
    rel = ig.relevant
    if not rel:
        return _complete({}, ig.num_virtual, n_phys)
    if method == "auto":
        method = "exhaustive" if n_phys <= EXHAUSTIVE_LIMIT else "heuristic"
    if method == "exhaustive":
        partial = _exhaustive(ig, lnR, lnRO, n_phys, rel)
    elif method == "heuristic":
        sa = _Annealer(ig, lnR, lnRO, n_phys, rel)
        partial = sa.anneal(sa.greedy(ig), iters, seed)
    else:
        raise PlacementError(f"unknown placement method {method!r}")
    return _complete(partial, ig.num_virtual, n_phys)


def place_noise_adaptive(c: Circuit, snap: CalibrationSnapshot, g: CouplingGraph) -> Mapping:
    """Greedy per-edge placement on the calibrated two-qubit and readout errors.

    Pairs are visited heaviest first. A fresh pair takes the free edge with the
    lowest two-qubit error whose endpoints can host each operand's number of
    partners; a half-placed pair extends to the best free neighbour. Measured
    leftovers go to the lowest-readout free qubit next to the placed set.
    """
    ig = interaction_graph(c)
    if ig.num_virtual > g.num_qubits:
        raise PlacementError(f"{ig.num_virtual} virtual qubits do not fit on {g.num_qubits}")
    ro = [snap.readout_error(q) for q in range(g.num_qubits)]
    hops = None
    pos: dict[int, int] = {}
    free = set(range(g.num_qubits))
    need = {v: len(ig.partners(v)) for v in range(ig.num_virtual)}

    def put(v, p):
        pos[v] = p
        free.discard(p)

    for (i, j), _ in sorted(ig.weights.items(), key=lambda kv: (-kv[1], kv[0])):
        if i in pos and j in pos:
            continue
        if i not in pos and j not in pos:
            options = []
            for u, v in g.sorted_edges:
                if u not in free or v not in free:
                    continue
                for pi, pj in ((u, v), (v, u)):
                    fits = g.degree(pi) >= need[i] and g.degree(pj) >= need[j]
                    meas_fit = (ro[pi] if i in ig.measured else 0.0) + (ro[pj] if j in ig.measured else 0.0)
                    options.append((not fits, snap.two_qubit_error(u, v), ro[u] + ro[v],
                                    meas_fit, pi, pj))
            if options:
                *_, pi, pj = min(options)
                put(i, pi)
                put(j, pj)
                continue
        anchor, other = (i, j) if i in pos else (j, i)
        if anchor not in pos:
            # no free edge remains; seat the first operand on the best free qubit
            put(anchor, min(free, key=lambda q: (ro[q], q)))
        p = pos[anchor]
        near = [v for v in g.adjacency[p] if v in free]
        if near:
            put(other, min(near, key=lambda v: (snap.two_qubit_error(p, v), ro[v], v)))
        else:
            if hops is None:
                hops = hop_distance(g)
            put(other, min(free, key=lambda v: (hops[p, v], ro[v], v)))

    for v in sorted(ig.measured):
        if v in pos:
            continue
        border = {n for p in pos.values() for n in g.adjacency[p] if n in free}
        put(v, min(border or free, key=lambda q: (ro[q], q)))
    return _complete(pos, ig.num_virtual, g.num_qubits)


def _skeleton(c: Circuit) -> Circuit:
    return c.replace(gt for gt in c.gates if gt.kind in TWO_QUBIT)


def find_perfect_layout(ig: InteractionGraph, g: CouplingGraph, budget: int = 100_000
                        ) -> dict[int, int] | None:
    """Embed the interaction graph so every interacting pair sits on an edge.

    Depth-first search over candidate physical qubits in index order, pruned
    by degree; gives up (returns None) after ``budget`` candidate checks.
    """
    if not ig.weights:
        return {}
    nbrs = {v: ig.partners(v) for v in ig.relevant}
    verts = [v for v in ig.relevant if nbrs[v]]
    order: list[int] = []
    for root in sorted(verts, key=lambda v: (-len(nbrs[v]), v)):
        if root in order:
            continue
        queue = [root]
        order.append(root)
        for u in queue:
            for w in sorted(nbrs[u], key=lambda w: (-len(nbrs[w]), w)):
                if w not in order:
                    order.append(w)
                    queue.append(w)
    pos: dict[int, int] = {}
    used: set[int] = set()
    steps = 0

    def extend(k: int) -> bool:
        nonlocal steps
        if k == len(order):
            return True
        v = order[k]
        placed = [pos[u] for u in nbrs[v] if u in pos]
        cands = g.adjacency[placed[0]] if placed else range(g.num_qubits)
        for p in cands:
            steps += 1
            if steps > budget:
                return False
            if p in used or g.degree(p) < len(nbrs[v]):
                continue
            if any(not g.has_edge(p, q) for q in placed):
                continue
            pos[v] = p
            used.add(p)
            if extend(k + 1):
                return True
            del pos[v]
            used.discard(p)
        return False

    return dict(pos) if extend(0) else None


def place_sabre_reverse(c: Circuit, g: CouplingGraph, seed: int = 0, iters: int = 3,
                        trials: int = 1, params: SabreParams | None = None) -> Mapping:
    """Noise-agnostic layout: an exact embedding if one exists, else SABRE passes.

    Each trial starts from a seeded random layout and runs ``iters`` rounds of
    forward routing followed by routing the reversed circuit from the final
    layout. With several trials the layout whose forward pass needs the fewest
    SWAPs wins (first on ties).
    """
    if c.num_qubits > g.num_qubits:
        raise PlacementError(f"{c.num_qubits} virtual qubits do not fit on {g.num_qubits}")
    if trials < 1 or iters < 1:
        raise PlacementError("trials and iters must be at least 1")
    perfect = find_perfect_layout(interaction_graph(c), g)
    if perfect is not None:
        return _complete(perfect, c.num_qubits, g.num_qubits)
    hops = hop_distance(g)
    fwd, bwd = _skeleton(c), reverse(_skeleton(c))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(trials):
        m = Mapping(tuple(int(p) for p in rng.permutation(g.num_qubits)[:c.num_qubits]), g.num_qubits)
        for _ in range(iters):
            m = route_sabre(bwd, route_sabre(fwd, m, g, params, hops).final, g, params, hops).final
        if trials == 1:
            return m
        cost = route_sabre(fwd, m, g, params, hops).swaps_added
        if best is None or cost < best[0]:
            best = (cost, m)
    return best[1]
