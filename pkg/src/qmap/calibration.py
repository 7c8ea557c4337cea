"""Calibration snapshots, history-processing methods and the reliability matrix.

Processing methods (all operate on error rates; averaging errors is the same
as averaging fidelities):

``lcd``
    latest snapshot at or before ``as_of``.
``avg``
    mean over every snapshot from the start of the series up to ``as_of``.
``w-N``
    mean over snapshots in the half-open window ``(as_of - N days, as_of]``.
``mix``
    per parameter, the latest value if its record was calibrated on the same
    UTC calendar day as ``as_of``, otherwise the ``avg`` value.

Appending ``-adj`` adds ``lam * std`` (population std) to every error. For
``avg`` and ``w-N`` the std is taken over the same snapshots that were
averaged; ``lcd`` and ``mix`` aggregate a single point, so they use the std
of the full history up to ``as_of``.
"""

from __future__ import annotations

import heapq
import json
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .topology import CouplingGraph, TopologyError, load_topology

MAX_ERROR = 1.0 - 1e-9


class CalibrationError(ValueError):
    pass


def parse_time(value) -> datetime:
    """RFC3339 string / date / datetime -> timezone-aware UTC datetime."""
    if isinstance(value, datetime):
        dt = value
    else:
        s = str(value).strip()
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(s)
        except ValueError:
            raise CalibrationError(f"bad timestamp {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_time(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _check_prob(name, v):
    if not (0.0 <= v < 1.0) or math.isnan(v):
        raise CalibrationError(f"{name}={v} outside [0, 1)")


@dataclass(frozen=True)
class QubitCalib:
    readout_error: float
    single_qubit_error: float
    last_calibrated: datetime
    t1_us: float | None = None
    t2_us: float | None = None

    def __post_init__(self):
        _check_prob("readout_error", self.readout_error)
        _check_prob("single_qubit_error", self.single_qubit_error)
        if self.t1_us is not None and self.t2_us is not None and self.t2_us > 2 * self.t1_us:
            raise CalibrationError(f"t2={self.t2_us} exceeds 2*t1={2 * self.t1_us}")


@dataclass(frozen=True)
class EdgeCalib:
    two_qubit_error: float
    last_calibrated: datetime
    gate_name: str = "cx"

    def __post_init__(self):
        _check_prob("two_qubit_error", self.two_qubit_error)
        if self.gate_name not in ("cx", "ecr"):
            raise CalibrationError(f"unknown gate_name {self.gate_name!r}")


def _pair(a, b) -> tuple[int, int]:
    a, b = int(a), int(b)
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CalibrationSnapshot:
    timestamp: datetime
    qubits: tuple[QubitCalib, ...]
    edges: Mapping[tuple[int, int], EdgeCalib]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "edges", {_pair(*k): v for k, v in sorted(self.edges.items())})

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def readout_error(self, q: int) -> float:
        return self.qubits[q].readout_error

    def single_qubit_error(self, q: int) -> float:
        return self.qubits[q].single_qubit_error

    def two_qubit_error(self, a: int, b: int) -> float:
        try:
            return self.edges[_pair(a, b)].two_qubit_error
        except KeyError:
            raise CalibrationError(f"no calibration for edge {_pair(a, b)}") from None

    def check_covers(self, g: CouplingGraph) -> None:
        if self.num_qubits < g.num_qubits:
            raise CalibrationError(
                f"snapshot {format_time(self.timestamp)} covers {self.num_qubits} qubits, "
                f"device has {g.num_qubits}")
        for e in g.sorted_edges:
            if e not in self.edges:
                raise CalibrationError(
                    f"snapshot {format_time(self.timestamp)} has no record for edge {e}")

    def to_json(self) -> dict:
        qubits = []
        for qc in self.qubits:
            d = {"readout_error": qc.readout_error, "single_qubit_error": qc.single_qubit_error}
            if qc.t1_us is not None:
                d["t1_us"] = qc.t1_us
            if qc.t2_us is not None:
                d["t2_us"] = qc.t2_us
            d["last_calibrated"] = format_time(qc.last_calibrated)
            qubits.append(d)
        edges = [{"pair": list(p), "two_qubit_error": e.two_qubit_error, "gate_name": e.gate_name,
                  "last_calibrated": format_time(e.last_calibrated)} for p, e in self.edges.items()]
        return {"timestamp": format_time(self.timestamp), "qubits": qubits, "edges": edges}

    @classmethod
    def from_json(cls, doc: dict) -> "CalibrationSnapshot":
        try:
            qubits = tuple(
                QubitCalib(float(q["readout_error"]), float(q["single_qubit_error"]),
                           parse_time(q["last_calibrated"]),
                           None if q.get("t1_us") is None else float(q["t1_us"]),
                           None if q.get("t2_us") is None else float(q["t2_us"]))
                for q in doc["qubits"])
            edges = {}
            for e in doc["edges"]:
                p = _pair(*e["pair"])
                if p in edges:
                    raise CalibrationError(f"duplicate edge record {p}")
                edges[p] = EdgeCalib(float(e["two_qubit_error"]), parse_time(e["last_calibrated"]),
                                     str(e.get("gate_name", "cx")).lower())
            return cls(parse_time(doc["timestamp"]), qubits, edges)
        except (KeyError, TypeError) as e:
            raise CalibrationError(f"malformed snapshot: missing or bad field {e}") from None


@dataclass(frozen=True)
class EffectiveSnapshot(CalibrationSnapshot):
    method: str = "lcd"
    as_of: datetime | None = None

    def to_json(self) -> dict:
        doc = super().to_json()
        doc["method"] = self.method
        doc["as_of"] = format_time(self.as_of or self.timestamp)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "EffectiveSnapshot":
        base = CalibrationSnapshot.from_json(doc)
        return cls(base.timestamp, base.qubits, base.edges, str(doc.get("method", "lcd")),
                   parse_time(doc.get("as_of", doc["timestamp"])))

    @classmethod
    def wrap(cls, snap: CalibrationSnapshot, method: str = "lcd") -> "EffectiveSnapshot":
        if isinstance(snap, EffectiveSnapshot):
            return snap
        return cls(snap.timestamp, snap.qubits, snap.edges, method, snap.timestamp)


@dataclass(frozen=True)
class CalibrationSeries:
    device: str
    snapshots: tuple[CalibrationSnapshot, ...]

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if not snaps:
            raise CalibrationError("calibration series has no snapshots")
        ref = snaps[0]
        for prev, s in zip(snaps, snaps[1:]):
            if s.timestamp <= prev.timestamp:
                raise CalibrationError(
                    f"timestamps not strictly increasing at {format_time(s.timestamp)}")
        for s in snaps[1:]:
            if s.num_qubits != ref.num_qubits:
                raise CalibrationError(
                    f"snapshot {format_time(s.timestamp)} covers {s.num_qubits} qubits, "
                    f"expected {ref.num_qubits}")
            missing = set(ref.edges) ^ set(s.edges)
            if missing:
                raise CalibrationError(
                    f"snapshot {format_time(s.timestamp)} edge coverage differs at {min(missing)}")

    def __len__(self):
        return len(self.snapshots)

    @property
    def timestamps(self) -> list[datetime]:
        return [s.timestamp for s in self.snapshots]

    def check_covers(self, g: CouplingGraph) -> None:
        self.snapshots[0].check_covers(g)

    def upto(self, as_of=None) -> list[CalibrationSnapshot]:
        if as_of is None:
            return list(self.snapshots)
        t = parse_time(as_of)
        return [s for s in self.snapshots if s.timestamp <= t]

    def to_json(self) -> dict:
        return {"device": self.device, "snapshots": [s.to_json() for s in self.snapshots]}

    @classmethod
    def from_json(cls, doc: dict) -> "CalibrationSeries":
        if not isinstance(doc, dict) or "snapshots" not in doc:
            raise CalibrationError("malformed series document: no 'snapshots'")
        return cls(str(doc.get("device", "unknown")),
                   tuple(CalibrationSnapshot.from_json(s) for s in doc["snapshots"]))


def load_series(path, topology: CouplingGraph | None = None) -> CalibrationSeries:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CalibrationError(f"malformed series document: {e}") from None
    series = CalibrationSeries.from_json(doc)
    if topology is None:
        try:
            topology = load_topology(series.device)
        except (TopologyError, ValueError):
            topology = None
    if topology is not None:
        series.check_covers(topology)
    return series


def save_series(series: CalibrationSeries, path) -> None:
    Path(path).write_text(json.dumps(series.to_json(), indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- processing

@dataclass(frozen=True)
class Method:
    kind: str  # lcd | avg | mix | window
    window: int | None = None
    adj: bool = False

    @property
    def label(self) -> str:
        base = f"w-{self.window}" if self.kind == "window" else self.kind
        return base + ("-adj" if self.adj else "")


_METHOD_RE = re.compile(r"^(lcd|avg|mix|w-(\d+))(-adj)?$")


def parse_method(label: str) -> Method:
    m = _METHOD_RE.match(label.strip().lower())
    if not m:
        raise CalibrationError(f"unknown calibration method {label!r}")
    if m.group(2):
        n = int(m.group(2))
        if n < 1:
            raise CalibrationError("window size must be >= 1 day")
        return Method("window", n, bool(m.group(3)))
    return Method(m.group(1), None, bool(m.group(3)))


def _mean(a):
    # centring on the first row keeps constant parameters bit-exact
    return a[0] + (a - a[0]).mean(axis=0)


def _std(a):
    return (a - a[0]).std(axis=0)


def _stack(snaps):
    ro = np.array([[q.readout_error for q in s.qubits] for s in snaps])
    sq = np.array([[q.single_qubit_error for q in s.qubits] for s in snaps])
    e2 = np.array([[e.two_qubit_error for e in s.edges.values()] for s in snaps])
    return ro, sq, e2.reshape(len(snaps), -1)


def series_std(series: CalibrationSeries, as_of=None) -> dict:
    """Population std of every parameter over the snapshots at or before ``as_of``."""
    snaps = series.upto(as_of)
    if not snaps:
        raise CalibrationError(f"as_of {as_of} precedes every snapshot")
    ro, sq, e2 = _stack(snaps)
    ro_s, sq_s, e2_s = (_std(a) for a in (ro, sq, e2))
    return {"qubits": [{"readout_error": float(a), "single_qubit_error": float(b)}
                       for a, b in zip(ro_s, sq_s)],
            "edges": {p: float(v) for p, v in zip(snaps[-1].edges, e2_s)}}


def process(series: CalibrationSeries, method, adj: bool | None = None, as_of=None,
            lam: float = 1.0) -> EffectiveSnapshot:
    """Collapse a history into one error map with a named processing method.

    ``method`` is a label such as ``"w-7-adj"`` or a :class:`Method`; an explicit
    ``adj`` overrides the label's suffix. ``as_of`` defaults to the last snapshot.
    """
    m = parse_method(method) if isinstance(method, str) else method
    if adj is not None:
        m = replace(m, adj=adj)
    t = parse_time(as_of) if as_of is not None else series.snapshots[-1].timestamp
    hist = series.upto(t)
    if not hist:
        raise CalibrationError(f"as_of {format_time(t)} precedes every snapshot")
    latest = hist[-1]
    ro, sq, e2 = _stack(hist)

    if m.kind == "window":
        lo = t - timedelta(days=m.window)
        sel = np.array([s.timestamp > lo for s in hist])
        if not sel.any():
            raise CalibrationError(f"window w-{m.window} before {format_time(t)} holds no snapshots")
        agg = [a[sel] for a in (ro, sq, e2)]
    elif m.kind == "avg":
        agg = [ro, sq, e2]
    else:
        agg = None

    if agg is not None:
        vals = [_mean(a) for a in agg]
        stds = [_std(a) for a in agg]
    else:
        vals = [ro[-1].copy(), sq[-1].copy(), e2[-1].copy()]
        stds = [_std(a) for a in (ro, sq, e2)]
        if m.kind == "mix":
            today = t.date()
            q_fresh = np.array([q.last_calibrated.date() == today for q in latest.qubits])
            e_fresh = np.array([e.last_calibrated.date() == today for e in latest.edges.values()],
                               dtype=bool)
            means = [_mean(a) for a in (ro, sq, e2)]
            vals[0] = np.where(q_fresh, vals[0], means[0])
            vals[1] = np.where(q_fresh, vals[1], means[1])
            vals[2] = np.where(e_fresh, vals[2], means[2]) if e2.shape[1] else vals[2]
        elif m.kind != "lcd":
            raise CalibrationError(f"unknown method kind {m.kind!r}")

    if m.adj:
        vals = [v + lam * s for v, s in zip(vals, stds)]
    vals = [np.clip(v, 0.0, MAX_ERROR) for v in vals]

    qubits = tuple(replace(q, readout_error=float(r), single_qubit_error=float(s))
                   for q, r, s in zip(latest.qubits, vals[0], vals[1]))
    edges = {p: replace(e, two_qubit_error=float(v))
             for (p, e), v in zip(latest.edges.items(), vals[2])}
    return EffectiveSnapshot(latest.timestamp, qubits, edges, m.label, t)


# ---------------------------------------------------------- reliability matrix

def edge_fidelities(snap: CalibrationSnapshot, g: CouplingGraph) -> dict[tuple[int, int], float]:
    f = {}
    for e in g.sorted_edges:
        v = 1.0 - snap.two_qubit_error(*e)
        if v <= 0.0:
            raise CalibrationError(f"edge {e} has non-positive fidelity {v}")
        f[e] = v
    return f


def dijkstra(adj: list[list[int]], weight, src: int, banned: int | None = None):
    """Single-source shortest paths with non-negative ``weight(u, v)``.

    Returns ``(dist, prev)``; ties keep the first-found predecessor, and the
    heap orders equal distances by node index, so results are deterministic.
    """
    n = len(adj)
    dist = [math.inf] * n
    prev = [-1] * n
    dist[src] = 0.0
    heap = [(0.0, src)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in adj[u]:
            if v == banned or done[v]:
                continue
            nd = d + weight(u, v)
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, prev


def reliability_matrix(snap: CalibrationSnapshot, g: CouplingGraph) -> np.ndarray:
    """Best SWAP-chain-then-CX success probability for every physical pair.

    A chain moves one operand along a path with SWAPs (each costs ``f**3``)
    and finishes with one CX on the last link (``f``). Either operand may be
    the one that moves, so the matrix is symmetric.
    """
    f = edge_fidelities(snap, g)
    logf = {e: -math.log(v) for e, v in f.items()}

    def w(u, v):
        return 3.0 * logf[_pair(u, v)]

    n = g.num_qubits
    chain = np.full((n, n), math.inf)
    for a in range(n):
        chain[a] = dijkstra(g.adjacency, w, a)[0]
    # directed[a, b]: a moves next to b
    directed = np.full((n, n), math.inf)
    for b in range(n):
        for x in g.adjacency[b]:
            cost = chain[:, x] + logf[_pair(x, b)]
            directed[:, b] = np.minimum(directed[:, b], cost)
    best = np.minimum(directed, directed.T)
    np.fill_diagonal(best, 0.0)
    return np.exp(-best)
