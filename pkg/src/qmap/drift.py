"""Synthetic daily calibration histories with drift, spikes and recalibrations.

Each error follows ``baseline * exp(w_t)`` where ``w`` is a Gaussian random
walk in log space. A recalibration sets ``w`` back to zero and stamps the
record's ``last_calibrated``. Spikes multiply a single day's reported value by
``jump_factor`` without entering the walk, so they are transient.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import timedelta

import numpy as np

from .calibration import (CalibrationSeries, CalibrationSnapshot, EdgeCalib, QubitCalib,
                          parse_time)
from .topology import CouplingGraph

FLOOR, CEIL = 1e-6, 0.5


class DriftError(ValueError):
    pass


@dataclass(frozen=True)
class DriftParams:
    days: int = 28
    sigma_walk: float = 0.1
    jump_prob: float = 0.1
    jump_factor: float = 3.0
    recal_prob: float = 0.25
    two_q_range: tuple[float, float] = (0.005, 0.03)
    one_q_range: tuple[float, float] = (0.0002, 0.002)
    readout_range: tuple[float, float] = (0.01, 0.05)
    seed: int = 0
    start: str = "2024-01-01T00:00:00Z"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for k in ("two_q_range", "one_q_range", "readout_range"):
            object.__setattr__(self, k, tuple(float(v) for v in getattr(self, k)))
        if self.days < 1:
            raise DriftError("days must be at least 1")
        for k in ("jump_prob", "recal_prob"):
            if not 0.0 <= getattr(self, k) <= 1.0:
                raise DriftError(f"{k}={getattr(self, k)} outside [0, 1]")
        if self.jump_factor <= 0 or self.sigma_walk < 0:
            raise DriftError("jump_factor must be positive and sigma_walk non-negative")
        for k in ("two_q_range", "one_q_range", "readout_range"):
            lo, hi = getattr(self, k)
            if not 0.0 < lo <= hi < 1.0:
                raise DriftError(f"{k}={getattr(self, k)} is not a range inside (0, 1)")

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("name")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_json(cls, doc: dict) -> "DriftParams":
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise DriftError(f"unknown drift parameters: {sorted(extra)}")
        return cls(**doc)


@dataclass(frozen=True)
class DriftTrace:
    values: np.ndarray   # (days, params) reported errors
    spikes: np.ndarray   # (days, params) bool
    resets: np.ndarray   # (days, groups) bool, one group per calibration record


def simulate_drift(baselines: np.ndarray, groups: np.ndarray, p: DriftParams,
                   rng: np.random.Generator) -> DriftTrace:
    """Evolve every parameter; ``groups[i]`` names the record parameter ``i`` belongs to."""
    days, n = p.days, len(baselines)
    n_groups = int(groups.max()) + 1 if n else 0
    steps = rng.normal(0.0, 1.0, size=(days, n)) * p.sigma_walk
    resets = rng.random((days, n_groups)) < p.recal_prob
    spikes = rng.random((days, n)) < p.jump_prob
    resets[0] = False
    walk = np.zeros((days, n))
    for t in range(1, days):
        walk[t] = np.where(resets[t, groups], 0.0, walk[t - 1] + steps[t])
    values = baselines * np.exp(walk) * np.where(spikes, p.jump_factor, 1.0)
    return DriftTrace(np.clip(values, FLOOR, CEIL), spikes, resets)


def gen_series(g: CouplingGraph, p: DriftParams | None = None) -> CalibrationSeries:
    """One snapshot per day at the same UTC time, deterministic in ``p.seed``."""
    p = p or DriftParams()
    rng = np.random.default_rng(p.seed)
    nq, edges = g.num_qubits, g.sorted_edges
    base = np.concatenate([
        rng.uniform(*p.readout_range, nq),
        rng.uniform(*p.one_q_range, nq),
        rng.uniform(*p.two_q_range, len(edges)),
    ])
    groups = np.concatenate([np.arange(nq), np.arange(nq), nq + np.arange(len(edges))])
    tr = simulate_drift(base, groups, p, rng)

    start = parse_time(p.start)
    last = np.zeros(nq + len(edges), dtype=np.int64)
    snaps = []
    for t in range(p.days):
        last = np.where(tr.resets[t], t, last)
        stamp = start + timedelta(days=t)
        v = tr.values[t]
        qubits = [QubitCalib(float(v[q]), float(v[nq + q]), start + timedelta(days=int(last[q])))
                  for q in range(nq)]
        ecal = {e: EdgeCalib(float(v[2 * nq + k]), start + timedelta(days=int(last[nq + k])))
                for k, e in enumerate(edges)}
        snaps.append(CalibrationSnapshot(stamp, qubits, ecal))
    return CalibrationSeries(p.name or g.name, snaps)


def constant_series(g: CouplingGraph, days: int, two_q: float = 0.0, one_q: float = 0.0,
                    readout: float = 0.0, start: str = "2024-01-01T00:00:00Z") -> CalibrationSeries:
    """Drift-free history with uniform error rates (zeros give a noiseless device)."""
    t0 = parse_time(start)
    snaps = []
    for t in range(days):
        qubits = [QubitCalib(readout, one_q, t0) for _ in range(g.num_qubits)]
        snaps.append(CalibrationSnapshot(t0 + timedelta(days=t), qubits,
                                         {e: EdgeCalib(two_q, t0) for e in g.sorted_edges}))
    return CalibrationSeries(g.name, snaps)
