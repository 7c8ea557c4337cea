"""OpenQASM 2.0 subset reader and writer.

Only a single ``qreg`` and at most one ``creg`` are accepted. Besides the IR
kinds, ``u1``/``u2``/``u3`` and the diagonal phase gates ``z``, ``s``,
``sdg``, ``t``, ``tdg`` are lowered to RZ/SX sequences (equal up to global
phase) so the gate alphabet stays minimal.
"""

from __future__ import annotations

import ast
import math
import operator
import re

from .circuit import Circuit, CircuitError, Gate, GateKind, h, measure, rz, sx, x

__all__ = ["QasmError", "parse_qasm", "emit_qasm", "load_qasm", "format_angle"]


class QasmError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_angle(expr: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(expr)
    return ev(ast.parse(expr.strip(), mode="eval"))


def _u3(theta, phi, lam, q):
    # U3(theta, phi, lam) == RZ(phi + pi) SX RZ(theta + pi) SX RZ(lam), up to phase.
    return [rz(lam, q), sx(q), rz(theta + math.pi, q), sx(q), rz(phi + math.pi, q)]


_PHASE_ALIASES = {"z": math.pi, "s": math.pi / 2, "sdg": -math.pi / 2,
                  "t": math.pi / 4, "tdg": -math.pi / 4}
_NPARAMS = {"h": 0, "x": 0, "sx": 0, "rz": 1, "u1": 1, "u2": 2, "u3": 3, "cx": 0,
            "ecr": 0, "swap": 0, **{k: 0 for k in _PHASE_ALIASES}}
_ARITY = {"cx": 2, "ecr": 2, "swap": 2}

_STMT = re.compile(r"^([a-z][a-z0-9_]*)\s*(?:\((.*)\))?\s*(.*)$", re.S)
_ARG = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[\s*(\d+)\s*\])?$")


def parse_qasm(text: str) -> Circuit:
    """Parse an OpenQASM 2.0 program into a virtual-frame :class:`Circuit`."""
    qreg: tuple[str, int] | None = None
    creg: tuple[str, int] | None = None
    gates: list[Gate] = []

    # Split into statements while tracking the line each one starts on.
    stmts: list[tuple[int, str]] = []
    buf, start = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0]
        for ch_part in re.split(r"(;)", line):
            if ch_part == ";":
                stmts.append((start, "".join(buf).strip()))
                buf, start = [], None
            elif ch_part.strip():
                if start is None:
                    start = lineno
                buf.append(ch_part + " ")
    if "".join(buf).strip():
        raise QasmError("missing ';' at end of statement", start)

    def operands(arg_text, lineno, reg):
        out = []
        for tok in [a.strip() for a in arg_text.split(",")] if arg_text.strip() else []:
            m = _ARG.match(tok)
            if not m:
                raise QasmError(f"malformed operand {tok!r}", lineno)
            if reg is None or m.group(1) != reg[0]:
                raise QasmError(f"unknown register {m.group(1)!r}", lineno)
            if m.group(2) is None:
                out.append(list(range(reg[1])))
            else:
                idx = int(m.group(2))
                if idx >= reg[1]:
                    raise QasmError(f"index {idx} out of range for {reg[0]}[{reg[1]}]", lineno)
                out.append([idx])
        return out

    for lineno, stmt in stmts:
        if not stmt:
            continue
        if stmt.startswith("OPENQASM"):
            if stmt.split()[1:] != ["2.0"]:
                raise QasmError(f"unsupported version in {stmt!r}", lineno)
            continue
        if stmt.startswith("include"):
            continue
        m = re.match(r"^(qreg|creg)\s+([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*\]$", stmt)
        if m:
            decl = (m.group(2), int(m.group(3)))
            if m.group(1) == "qreg":
                if qreg is not None:
                    raise QasmError("only a single qreg is supported", lineno)
                qreg = decl
            else:
                if creg is not None:
                    raise QasmError("only a single creg is supported", lineno)
                creg = decl
            continue
        if stmt.startswith("measure"):
            m = re.match(r"^measure\s+(.+?)\s*->\s*(.+)$", stmt)
            if not m:
                raise QasmError(f"malformed measure {stmt!r}", lineno)
            (qs,) = operands(m.group(1), lineno, qreg)
            (cs,) = operands(m.group(2), lineno, creg)
            if len(qs) != len(cs):
                raise QasmError("measure register sizes differ", lineno)
            gates += [measure(q, c) for q, c in zip(qs, cs)]
            continue
        m = _STMT.match(stmt)
        if not m:
            raise QasmError(f"syntax error in {stmt!r}", lineno)
        name, params, args = m.group(1), m.group(2), m.group(3)
        if name == "barrier":
            qs = sorted({q for grp in operands(args, lineno, qreg) for q in grp})
            gates.append(Gate(GateKind.BARRIER, tuple(qs)))
            continue
        if name not in _NPARAMS:
            raise QasmError(f"unsupported statement {name!r}", lineno)
        try:
            angles = [_eval_angle(p) for p in params.split(",")] if params else []
        except (ValueError, SyntaxError, ZeroDivisionError):
            raise QasmError(f"bad parameter expression in {stmt!r}", lineno) from None
        if len(angles) != _NPARAMS[name]:
            raise QasmError(f"{name} takes {_NPARAMS[name]} parameters", lineno)
        ops = operands(args, lineno, qreg)
        if len(ops) != _ARITY.get(name, 1):
            raise QasmError(f"{name} takes {_ARITY.get(name, 1)} operands", lineno)
        # register broadcast: every operand group has length 1 or the register size
        width = max(len(o) for o in ops)
        if any(len(o) not in (1, width) for o in ops):
            raise QasmError("mismatched register broadcast", lineno)
        for i in range(width):
            qs = [o[0] if len(o) == 1 else o[i] for o in ops]
            try:
                gates += _lower(name, angles, qs)
            except CircuitError as e:
                raise QasmError(str(e), lineno) from None

    if qreg is None:
        raise QasmError("no qreg declared")
    return Circuit(qreg[1], creg[1] if creg else 0, tuple(gates), "virtual")


def _lower(name, angles, qs):
    q = qs[0]
    if name in ("cx", "ecr", "swap"):
        return [Gate(GateKind(name), tuple(qs))]
    if name == "h":
        return [h(q)]
    if name == "x":
        return [x(q)]
    if name == "sx":
        return [sx(q)]
    if name in ("rz", "u1"):
        return [rz(angles[0], q)]
    if name in _PHASE_ALIASES:
        return [rz(_PHASE_ALIASES[name], q)]
    if name == "u2":
        return _u3(math.pi / 2, angles[0], angles[1], q)
    return _u3(*angles, q)


def load_qasm(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_qasm(fh.read())


def format_angle(theta: float) -> str:
    # repr round-trips a float exactly, which keeps parse(emit(c)) == c.
    return repr(float(theta))


def emit_qasm(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.num_qubits}];"]
    if c.num_clbits:
        lines.append(f"creg c[{c.num_clbits}];")
    for g in c.gates:
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.kind is GateKind.MEASURE:
            lines.append(f"measure q[{g.qubits[0]}] -> c[{g.clbit}];")
        elif g.kind is GateKind.RZ:
            lines.append(f"rz({format_angle(g.theta)}) {args};")
        else:
            lines.append(f"{g.kind.value} {args};")
    return "\n".join(lines) + "\n"
