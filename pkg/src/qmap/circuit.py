"""Circuit intermediate representation, SWAP/ECR rewriting and structural counts.

Counting convention (fixed so that the Bernstein-Vazirani family reproduces
the published benchmark table exactly):

* ``count_gates`` counts unitary operations only. MEASURE and BARRIER are
  not gates.
* ``depth`` is the number of ASAP layers. MEASURE occupies its qubit for one
  layer and therefore contributes to depth; BARRIER never does, it only
  aligns the qubits it spans.
* ``count_2q`` counts CX, ECR and SWAP, each as one operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class GateKind(str, Enum):
    H = "h"
    X = "x"
    SX = "sx"
    RZ = "rz"
    CX = "cx"
    ECR = "ecr"
    SWAP = "swap"
    MEASURE = "measure"
    BARRIER = "barrier"


ONE_QUBIT = frozenset({GateKind.H, GateKind.X, GateKind.SX, GateKind.RZ})
TWO_QUBIT = frozenset({GateKind.CX, GateKind.ECR, GateKind.SWAP})


class CircuitError(ValueError):
    """Raised for structurally invalid gates or circuits."""


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    clbit: int | None = None
    theta: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        qs = self.qubits
        if any(q < 0 for q in qs):
            raise CircuitError(f"negative qubit index in {kind.value}")
        if kind in TWO_QUBIT:
            if len(qs) != 2:
                raise CircuitError(f"{kind.value} needs exactly 2 qubits, got {len(qs)}")
            if qs[0] == qs[1]:
                raise CircuitError(f"duplicate qubit operand in {kind.value} q[{qs[0]}]")
        elif kind is GateKind.BARRIER:
            if not qs or len(set(qs)) != len(qs):
                raise CircuitError("barrier needs distinct qubits")
            object.__setattr__(self, "qubits", tuple(sorted(qs)))
        elif len(qs) != 1:
            raise CircuitError(f"{kind.value} needs exactly 1 qubit, got {len(qs)}")
        if kind is GateKind.MEASURE:
            if self.clbit is None or self.clbit < 0:
                raise CircuitError("measure needs a classical bit")
        elif self.clbit is not None:
            raise CircuitError(f"{kind.value} cannot carry a classical bit")
        if kind is GateKind.RZ:
            if self.theta is None or not math.isfinite(self.theta):
                raise CircuitError("rz needs a finite angle")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise CircuitError(f"{kind.value} takes no angle")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in TWO_QUBIT

    def remap(self, table: Sequence[int]) -> "Gate":
        return Gate(self.kind, tuple(table[q] for q in self.qubits), self.clbit, self.theta)


# Convenience constructors; they read better in generators and tests.
def h(q): return Gate(GateKind.H, (q,))
def x(q): return Gate(GateKind.X, (q,))
def sx(q): return Gate(GateKind.SX, (q,))
def rz(theta, q): return Gate(GateKind.RZ, (q,), theta=theta)
def cx(c, t): return Gate(GateKind.CX, (c, t))
def ecr(a, b): return Gate(GateKind.ECR, (a, b))
def swap(a, b): return Gate(GateKind.SWAP, (a, b))
def measure(q, c): return Gate(GateKind.MEASURE, (q,), clbit=c)
def barrier(*qs): return Gate(GateKind.BARRIER, tuple(qs))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    num_clbits: int = 0
    gates: tuple[Gate, ...] = field(default_factory=tuple)
    frame: str = "virtual"

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.frame not in ("virtual", "physical"):
            raise CircuitError(f"unknown frame {self.frame!r}")
        if self.num_qubits < 0 or self.num_clbits < 0:
            raise CircuitError("register sizes must be non-negative")
        for g in self.gates:
            for q in g.qubits:
                if q >= self.num_qubits:
                    raise CircuitError(f"qubit index {q} out of range for {self.num_qubits} qubits")
            if g.clbit is not None and g.clbit >= self.num_clbits:
                raise CircuitError(f"clbit index {g.clbit} out of range for {self.num_clbits} clbits")

    def __len__(self):
        return len(self.gates)

    def replace(self, gates: Iterable[Gate], **kw) -> "Circuit":
        return Circuit(kw.get("num_qubits", self.num_qubits), kw.get("num_clbits", self.num_clbits),
                       tuple(gates), kw.get("frame", self.frame))

    def active_qubits(self) -> list[int]:
        return sorted({q for g in self.gates for q in g.qubits if g.kind is not GateKind.BARRIER})

    def measured(self) -> dict[int, int]:
        """clbit -> qubit for every MEASURE (last write wins)."""
        return {g.clbit: g.qubits[0] for g in self.gates if g.kind is GateKind.MEASURE}

    def unitary_part(self) -> "Circuit":
        return self.replace(g for g in self.gates if g.kind not in (GateKind.MEASURE, GateKind.BARRIER))


def count_gates(c: Circuit) -> int:
    return sum(1 for g in c.gates if g.kind not in (GateKind.MEASURE, GateKind.BARRIER))


def count_2q(c: Circuit) -> int:
    return sum(1 for g in c.gates if g.kind in TWO_QUBIT)


def depth(c: Circuit) -> int:
    level = [0] * c.num_qubits
    for g in c.gates:
        if g.kind is GateKind.BARRIER:
            top = max(level[q] for q in g.qubits)
            for q in g.qubits:
                level[q] = top
            continue
        top = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = top
    return max(level, default=0)


def decompose_swap(c: Circuit) -> Circuit:
    out = []
    for g in c.gates:
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            out += [cx(a, b), cx(b, a), cx(a, b)]
        else:
            out.append(g)
    return c.replace(out)


def _cx_as_ecr(c: int, t: int) -> list[Gate]:
    # CX(c,t) == [RZ(pi/2)_c SX_t] ECR(c,t) X_c up to global phase.
    return [x(c), ecr(c, t), rz(math.pi / 2, c), sx(t)]


def nativize(c: Circuit, basis: str = "cx") -> Circuit:
    """Rewrite into the device's native two-qubit basis ("cx" or "ecr")."""
    basis = basis.lower()
    if basis not in ("cx", "ecr"):
        raise ValueError(f"unsupported basis {basis!r}")
    flat = decompose_swap(c)
    if basis == "cx":
        return flat
    out = []
    for g in flat.gates:
        out.extend(_cx_as_ecr(*g.qubits) if g.kind is GateKind.CX else [g])
    return flat.replace(out)


def reverse(c: Circuit) -> Circuit:
    """Reverse gate order of the unitary part (used by reverse-traversal placement)."""
    return c.replace(reversed(c.unitary_part().gates))
