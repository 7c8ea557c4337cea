"""Device coupling graphs and hop distances."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class TopologyError(ValueError):
    pass


def _norm(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CouplingGraph:
    num_qubits: int
    edges: frozenset[tuple[int, int]]
    name: str = "custom"

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise TopologyError(f"edge ({a},{b}) outside {self.num_qubits} qubits")
            norm.add(_norm(a, b))
        object.__setattr__(self, "edges", frozenset(norm))

    @cached_property
    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    @cached_property
    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.num_qubits)]
        for a, b in self.sorted_edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(n) for n in adj]

    def neighbors(self, q: int) -> list[int]:
        return self.adjacency[q]

    def has_edge(self, a: int, b: int) -> bool:
        return _norm(a, b) in self.edges

    def degree(self, q: int) -> int:
        return len(self.adjacency[q])

    def is_connected(self) -> bool:
        if self.num_qubits == 0:
            return True
        return len(_bfs(self.adjacency, 0)[0]) == self.num_qubits

    def to_json(self) -> dict:
        return {"name": self.name, "num_qubits": self.num_qubits,
                "edges": [list(e) for e in self.sorted_edges]}

    @classmethod
    def from_json(cls, doc: dict) -> "CouplingGraph":
        try:
            return cls(int(doc["num_qubits"]), frozenset(tuple(e) for e in doc["edges"]),
                       str(doc.get("name", "custom")))
        except (KeyError, TypeError, ValueError) as e:
            raise TopologyError(f"malformed topology document: {e}") from None


def _bfs(adj, src):
    dist = {src: 0}
    dq = deque([src])
    while dq:
        u = dq.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                dq.append(v)
    return dist, None


def hop_distance(g: CouplingGraph) -> np.ndarray:
    """All-pairs hop counts by one BFS per source."""
    n = g.num_qubits
    d = np.zeros((n, n), dtype=np.int64)
    for s in range(n):
        dist, _ = _bfs(g.adjacency, s)
        if len(dist) != n:
            raise TopologyError(f"{g.name} is disconnected (qubit {s} reaches {len(dist)} of {n})")
        for t, k in dist.items():
            d[s, t] = k
    return d


def perth_topology() -> CouplingGraph:
    # Pairs (0,1), (1,3), (4,5), (5,6) are named in the calibration discussion;
    # (1,2) and (3,5) complete the vendor's published 7-qubit Falcon "H" layout.
    edges = {(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)}
    return CouplingGraph(7, frozenset(edges), "perth")


# Published 27-qubit Falcon coupling map (heavy-hex, degree <= 3).
_FALCON_27 = [(0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10), (8, 9),
              (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16), (15, 18),
              (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23), (22, 25), (23, 24),
              (24, 25), (25, 26)]


def _heavy_hex_rows(rows: int, width: int) -> CouplingGraph:
    """Row-and-bridge heavy-hex layout used by the 65- and 127-qubit processors.

    Every row spans columns ``0..width-1`` except the first (drops the last
    column) and the last (drops the first column). Bridge qubits link rows
    ``r`` and ``r+1`` at columns ``0, 4, 8, ...`` for even ``r`` and
    ``2, 6, 10, ...`` for odd ``r``.
    """
    col_ranges = [(0, width - 1) if r == 0 else (1, width) if r == rows - 1 else (0, width)
                  for r in range(rows)]
    index: dict[tuple[int, int], int] = {}
    edges: list[tuple[int, int]] = []
    nxt = 0
    for r in range(rows):
        lo, hi = col_ranges[r]
        for c in range(lo, hi):
            index[(r, c)] = nxt
            if c > lo:
                edges.append((nxt - 1, nxt))
            nxt += 1
        if r == rows - 1:
            break
        start = 0 if r % 2 == 0 else 2
        nlo, nhi = col_ranges[r + 1]
        for c in range(start, width, 4):
            if lo <= c < hi and nlo <= c < nhi:
                index[("bridge", r, c)] = nxt
                nxt += 1
    for key, q in list(index.items()):
        if key[0] == "bridge":
            _, r, c = key
            edges.append((index[(r, c)], q))
            edges.append((q, index[(r + 1, c)]))
    return CouplingGraph(nxt, frozenset(edges))


def heavy_hex_topology(target_qubits: int) -> CouplingGraph:
    if target_qubits == 27:
        g = CouplingGraph(27, frozenset(_FALCON_27))
    elif target_qubits == 65:
        g = _heavy_hex_rows(5, 11)
    elif target_qubits == 127:
        g = _heavy_hex_rows(7, 15)
    else:
        raise TopologyError(f"unsupported heavy-hex size {target_qubits}; choose 27, 65 or 127")
    assert g.num_qubits == target_qubits
    return CouplingGraph(g.num_qubits, g.edges, f"heavy_hex_{target_qubits}")


def load_topology(spec: str | dict) -> CouplingGraph:
    """Resolve ``perth``, ``heavy_hex_<n>``, a JSON path, or an inline document."""
    if isinstance(spec, dict):
        return CouplingGraph.from_json(spec)
    if spec == "perth":
        return perth_topology()
    if spec.startswith("heavy_hex_"):
        return heavy_hex_topology(int(spec.rsplit("_", 1)[1]))
    p = Path(spec)
    if p.exists():
        return CouplingGraph.from_json(json.loads(p.read_text(encoding="utf-8")))
    raise TopologyError(f"unknown device {spec!r}")


def save_topology(g: CouplingGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_json(), indent=2) + "\n", encoding="utf-8")
