from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class Mapping:
    """Injective virtual -> physical assignment; ``assignment[v]`` is v's physical qubit."""

    assignment: tuple[int, ...]
    num_physical: int

    def __post_init__(self):
        a = tuple(int(p) for p in self.assignment)
        object.__setattr__(self, "assignment", a)
        if len(set(a)) != len(a):
            raise ValueError(f"mapping is not injective: {list(a)}")
        if any(not 0 <= p < self.num_physical for p in a):
            raise ValueError(f"mapping {list(a)} exceeds {self.num_physical} physical qubits")

    @property
    def num_virtual(self) -> int:
        return len(self.assignment)

    def __getitem__(self, v: int) -> int:
        return self.assignment[v]

    def inverse(self) -> dict[int, int]:
        return {p: v for v, p in enumerate(self.assignment)}

    def to_json(self) -> list[int]:
        return list(self.assignment)

    @classmethod
    def from_json(cls, doc, num_physical: int) -> "Mapping":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(tuple(doc), num_physical)

    @classmethod
    def trivial(cls, n: int, num_physical: int) -> "Mapping":
        return cls(tuple(range(n)), num_physical)
