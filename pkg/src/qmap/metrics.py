"""Output-distribution fidelity measures and compilation overheads.

Distributions are ``{bitstring: probability}`` dicts; a ``Counts`` is turned
into empirical frequencies. Sums run over the union of the two supports,
which equals the sum over all ``2**n`` outcomes without enumerating them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping as TMapping, Union

from .circuit import Circuit, count_2q, decompose_swap, depth
from .simulator import Counts

DETERMINISTIC = 1.0 - 1e-9

Dist = Union[Counts, TMapping[str, float]]


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    fidelity_tvd: float
    correlation: float
    fidelity_ratio: float | None = None
    esp: float | None = None
    two_q_overhead: int | None = None
    depth_overhead: int | None = None

    def __post_init__(self):
        for name in ("fidelity_tvd", "correlation", "esp"):
            v = getattr(self, name)
            if v is not None and not -1e-12 <= v <= 1 + 1e-12:
                raise MetricError(f"{name}={v} outside [0, 1]")
        if self.fidelity_ratio is not None and self.fidelity_ratio < 0:
            raise MetricError(f"fidelity_ratio={self.fidelity_ratio} is negative")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _probs(d: Dist) -> dict[str, float]:
    return d.frequencies() if isinstance(d, Counts) else dict(d)


def _aligned(noisy: Dist, ideal: Dist) -> tuple[dict, dict]:
    p, q = _probs(noisy), _probs(ideal)
    widths = {len(k) for k in p} | {len(k) for k in q}
    if len(widths) > 1:
        raise MetricError(f"bitstring widths differ: {sorted(widths)}")
    return p, q


def fidelity_tvd(noisy: Dist, ideal: Dist) -> float:
    """One minus the total-variation distance."""
    p, q = _aligned(noisy, ideal)
    return 1.0 - 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in p.keys() | q.keys())


def correlation(noisy: Dist, ideal: Dist) -> float:
    """One minus the Euclidean distance, scaled so disjoint point masses give 0."""
    p, q = _aligned(noisy, ideal)
    sq = math.fsum((p.get(k, 0.0) - q.get(k, 0.0)) ** 2 for k in p.keys() | q.keys())
    return 1.0 - math.sqrt(sq) / math.sqrt(2.0)


def dominant_outcome(ideal: Dist) -> str:
    q = _probs(ideal)
    key = max(q, key=lambda k: (q[k], k)) if q else None
    if key is None or q[key] < DETERMINISTIC:
        raise MetricError("fidelity ratio needs a deterministic ideal distribution")
    return key


def fidelity_ratio(noisy: Dist, ideal: Dist) -> float:
    p, q = _aligned(noisy, ideal)
    key = dominant_outcome(q)
    return p.get(key, 0.0) / q[key]


def overheads(original: Circuit, routed) -> dict:
    """Two-qubit and depth growth from routing, with SWAPs counted as three CX."""
    phys = getattr(routed, "circuit", routed)
    base2q = count_2q(decompose_swap(original))
    two_q = count_2q(decompose_swap(phys)) - base2q
    d = depth(decompose_swap(phys)) - depth(decompose_swap(original))
    return {
        "two_q_overhead": two_q,
        "depth_overhead": d,
        "percent_2q": two_q / base2q * 100.0 if base2q else None,
    }


def evaluate(noisy: Dist, ideal: Dist, original: Circuit | None = None, routed=None,
             esp: float | None = None) -> MetricReport:
    """All metrics at once; the ratio is left empty for non-deterministic circuits."""
    try:
        ratio = fidelity_ratio(noisy, ideal)
    except MetricError:
        ratio = None
    ov = overheads(original, routed) if original is not None and routed is not None else {}
    return MetricReport(fidelity_tvd(noisy, ideal), correlation(noisy, ideal), ratio, esp,
                        ov.get("two_q_overhead"), ov.get("depth_overhead"))
