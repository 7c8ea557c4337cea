"""Benchmark circuits: generated Bernstein-Vazirani / QFT families and QASM assets."""

from __future__ import annotations

import math
import re
from importlib import resources
from pathlib import Path

from .circuit import Circuit, CircuitError, Gate, cx, h, measure, rz, swap, x
from .qasm import emit_qasm, load_qasm, parse_qasm

ASSET_NAMES = ("adder", "and", "or", "fredkin", "toffoli", "hs4", "qft5")


def gen_bv(n: int, hidden: str | None = None) -> Circuit:
    """Bernstein-Vazirani over ``n`` qubits: ``n-1`` data qubits plus the ancilla ``n-1``.

    ``hidden`` is written most-significant bit first, so it reads exactly like
    the measured outcome string: character ``k`` drives data qubit ``n-2-k``.
    The ancilla is prepared with X then H and gets a closing H, giving
    3n gates, n-1 CX and depth n+3 for the all-ones string.
    """
    if n < 2:
        raise CircuitError(f"BV needs at least 2 qubits, got {n}")
    m = n - 1
    hidden = "1" * m if hidden is None else hidden
    if len(hidden) != m or set(hidden) - {"0", "1"}:
        raise CircuitError(f"hidden string must be {m} bits, got {hidden!r}")
    anc = m
    gates: list[Gate] = [x(anc)] + [h(q) for q in range(n)]
    gates += [cx(q, anc) for q in range(m) if hidden[m - 1 - q] == "1"]
    gates += [h(q) for q in range(n)]
    gates += [measure(q, q) for q in range(m)]
    return Circuit(n, m, tuple(gates))


def cphase(lam: float, c: int, t: int) -> list[Gate]:
    return [rz(lam / 2, c), cx(c, t), rz(-lam / 2, t), cx(c, t), rz(lam / 2, t)]


def gen_qft(n: int, measure_all: bool = False) -> Circuit:
    if n < 1:
        raise CircuitError("QFT needs at least one qubit")
    gates: list[Gate] = []
    for j in range(n):
        gates.append(h(j))
        for k in range(j + 1, n):
            gates += cphase(math.pi / 2 ** (k - j), k, j)
    gates += [swap(i, n - 1 - i) for i in range(n // 2)]
    if measure_all:
        gates += [measure(q, q) for q in range(n)]
    return Circuit(n, n if measure_all else 0, tuple(gates))


def toffoli(a: int, b: int, t: int) -> list[Gate]:
    """Six-CX Toffoli with T gates expressed as RZ(+-pi/4)."""
    T, Td = math.pi / 4, -math.pi / 4
    return [h(t), cx(b, t), rz(Td, t), cx(a, t), rz(T, t), cx(b, t), rz(Td, t), cx(a, t),
            rz(T, b), rz(T, t), h(t), cx(a, b), rz(T, a), rz(Td, b), cx(a, b)]


def cz(a: int, b: int) -> list[Gate]:
    return [h(b), cx(a, b), h(b)]


def _measured(n: int, gates: list[Gate]) -> Circuit:
    return Circuit(n, n, tuple(gates + [measure(q, q) for q in range(n)]))


def build_textbook(name: str) -> Circuit:
    """Reference constructions the shipped QASM assets were generated from."""
    if name == "toffoli":
        return _measured(3, [x(0), x(1)] + toffoli(0, 1, 2))
    if name == "fredkin":
        # control 0 set, swaps |1> on qubit 1 into qubit 2
        return _measured(3, [x(0), x(1), cx(2, 1)] + toffoli(0, 1, 2) + [cx(2, 1)])
    if name == "adder":
        # 1-bit full adder: a=0, b=1, cin=2 (sum out), cout=3; inputs a=1, b=0, cin=1
        g = [x(0), x(2)] + toffoli(0, 1, 3) + [cx(0, 1)] + toffoli(1, 2, 3) + [cx(1, 2)]
        return _measured(4, g)
    if name == "and":
        # out(4) = q0 & q1 & q2 with work qubit 3 uncomputed
        g = [x(0), x(1), x(2)] + toffoli(0, 1, 3) + toffoli(2, 3, 4) + toffoli(0, 1, 3)
        return _measured(5, g)
    if name == "or":
        neg = [x(0), x(1), x(2)]
        g = [x(0)] + neg + toffoli(0, 1, 3) + toffoli(2, 3, 4) + toffoli(0, 1, 3) + neg + [x(4)]
        return _measured(5, g)
    if name == "hs4":
        # hidden shift for f(x) = x0 x1 + x2 x3 with shift 0110
        shift = [x(1), x(2)]
        oracle = cz(0, 1) + cz(2, 3)
        layer = [h(q) for q in range(4)]
        return _measured(4, layer + shift + oracle + shift + layer + oracle + layer)
    if name == "qft5":
        return gen_qft(5, measure_all=True)
    raise CircuitError(f"unknown textbook circuit {name!r}")


def asset_dir() -> Path:
    return Path(str(resources.files("qmap") / "assets" / "benchmarks"))


def write_assets(directory: Path | None = None) -> list[Path]:
    directory = Path(directory or asset_dir())
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ASSET_NAMES:
        p = directory / f"{name}.qasm"
        p.write_text(emit_qasm(build_textbook(name)), encoding="utf-8")
        paths.append(p)
    return paths


def list_benchmarks() -> list[str]:
    return [f"bv{n}" for n in range(2, 13)] + list(ASSET_NAMES)


def load_benchmark(spec: str) -> Circuit:
    """Resolve ``bvN``, ``qftN``, an asset name, or a path to a ``.qasm`` file."""
    m = re.fullmatch(r"bv(\d+)", spec)
    if m:
        return gen_bv(int(m.group(1)))
    if spec in ASSET_NAMES:
        return load_qasm(asset_dir() / f"{spec}.qasm")
    m = re.fullmatch(r"qft(\d+)", spec)
    if m:
        return gen_qft(int(m.group(1)), measure_all=True)
    p = Path(spec)
    if p.suffix == ".qasm" and p.exists():
        return parse_qasm(p.read_text(encoding="utf-8"))
    raise CircuitError(f"unknown benchmark {spec!r}")
