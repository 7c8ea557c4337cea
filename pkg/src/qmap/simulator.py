"""Ideal statevector and calibration-driven stochastic-Pauli simulation.

Bitstrings are indexed by classical bit: character ``k`` (from the left) is
clbit ``num_clbits - 1 - k``, so the highest clbit is the most significant.
Circuits without measurements report every qubit, qubit ``i`` as bit ``i``.

Noisy runs are shot-by-shot Monte Carlo. Shot ``i`` consumes row ``i`` of one
uniform matrix drawn from ``seed``: one number per noisy gate (error or not,
and which Pauli), one to sample the ideal outcome, one per measured bit for
the readout flip. Two engines evaluate the same trajectories:

* Clifford circuits propagate each shot's Pauli frame to the end; the X part
  flips the ideal sample. Exact, and independent of the qubit count.
* Other circuits simulate one statevector per distinct error pattern.
  Patterns share the error-free prefix up to their first error.

:func:`noisy_distribution` evolves the density matrix exactly and is kept as
an independent reference for the sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .calibration import MAX_ERROR, CalibrationSnapshot
from .circuit import Circuit, Gate, GateKind, decompose_swap

MAX_QUBITS = 20

_S2 = 1 / math.sqrt(2)
I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, PX, PY, PZ)
H_M = np.array([[1, 1], [1, -1]], dtype=complex) * _S2
SX_M = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
CX_M = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
ECR_M = (np.kron(PX, I2) - np.kron(PY, PX)) * _S2
SWAP_M = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
# two-qubit Pauli k (1..15) acts as PAULIS[k // 4] on the first operand, PAULIS[k % 4] on the second
PAULIS_2Q = tuple(np.kron(PAULIS[k // 4], PAULIS[k % 4]) for k in range(16))


class SimulationError(ValueError):
    pass


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def gate_matrix(g: Gate) -> np.ndarray:
    k = g.kind
    if k is GateKind.H:
        return H_M
    if k is GateKind.X:
        return PX
    if k is GateKind.SX:
        return SX_M
    if k is GateKind.RZ:
        return rz_matrix(g.theta)
    if k is GateKind.CX:
        return CX_M
    if k is GateKind.ECR:
        return ECR_M
    if k is GateKind.SWAP:
        return SWAP_M
    raise SimulationError(f"{k.value} has no matrix")


def apply_matrix(state: np.ndarray, u: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Apply a 1- or 2-qubit matrix to tensor ``state`` along ``axes`` (first operand first)."""
    if len(axes) == 1:
        out = np.tensordot(u, state, axes=([1], [axes[0]]))
        return np.moveaxis(out, 0, axes[0])
    out = np.tensordot(u.reshape(2, 2, 2, 2), state, axes=([2, 3], list(axes)))
    return np.moveaxis(out, [0, 1], list(axes))


# ------------------------------------------------------------------ data types

@dataclass
class Counts:
    counts: dict[str, int]
    shots: int = 0

    def __post_init__(self):
        total = sum(self.counts.values())
        if not self.shots:
            self.shots = total
        if total != self.shots:
            raise SimulationError(f"counts sum to {total}, expected {self.shots}")

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}

    def to_json(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))

    @classmethod
    def from_json(cls, doc: dict) -> "Counts":
        return cls({str(k): int(v) for k, v in doc.items()})


@dataclass(frozen=True)
class NoiseModel:
    p1q: dict[int, float] = field(default_factory=dict)
    p2q: dict[tuple[int, int], float] = field(default_factory=dict)
    p_readout: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p1q", "p2q", "p_readout"):
            for k, v in getattr(self, name).items():
                if not 0.0 <= v < 1.0:
                    raise SimulationError(f"{name}[{k}]={v} outside [0, 1)")

    def two_qubit(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        try:
            return self.p2q[key]
        except KeyError:
            raise SimulationError(f"noise model has no entry for edge {key}") from None

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()


def noise_model_from(snap: CalibrationSnapshot) -> NoiseModel:
    """Reported errors are used directly as depolarizing / flip probabilities."""
    def clamp(v):
        return min(max(float(v), 0.0), MAX_ERROR)
    return NoiseModel(
        {q: clamp(c.single_qubit_error) for q, c in enumerate(snap.qubits)},
        {p: clamp(e.two_qubit_error) for p, e in snap.edges.items()},
        {q: clamp(c.readout_error) for q, c in enumerate(snap.qubits)},
    )


# ----------------------------------------------------------------- ideal path

@dataclass
class _Prepared:
    qubits: list[int]            # active physical/virtual qubits, ascending
    ops: list[Gate]              # unitary gates, remapped to compact indices
    meas: list[tuple[int, int]]  # (clbit, compact qubit), ascending clbit
    num_clbits: int


def _prepare(c: Circuit, limit: bool = True) -> _Prepared:
    flat = decompose_swap(c)
    qubits = flat.active_qubits()
    if limit and len(qubits) > MAX_QUBITS:
        raise SimulationError(f"{len(qubits)} active qubits exceed the budget of {MAX_QUBITS}")
    local = {q: i for i, q in enumerate(qubits)}
    measured: dict[int, int] = {}
    ops, meas = [], []
    for g in flat.gates:
        if g.kind is GateKind.BARRIER:
            continue
        for q in g.qubits:
            if q in measured:
                raise SimulationError(f"operation on qubit {q} after its measurement")
        if g.kind is GateKind.MEASURE:
            measured[g.qubits[0]] = g.clbit
            meas.append((g.clbit, local[g.qubits[0]]))
            continue
        ops.append(Gate(g.kind, tuple(local[q] for q in g.qubits), None, g.theta))
    if len({cb for cb, _ in meas}) != len(meas):
        raise SimulationError("a classical bit is written twice")
    return _Prepared(qubits, ops, sorted(meas), flat.num_clbits)


def _zero_state(n: int, batch: int | None = None) -> np.ndarray:
    shape = (2,) * n if batch is None else (batch,) + (2,) * n
    st = np.zeros(shape, dtype=complex)
    st[(0,) * len(shape)] = 1.0
    return st


def _run(state: np.ndarray, ops: list[Gate], offset: int = 0) -> np.ndarray:
    for g in ops:
        state = apply_matrix(state, gate_matrix(g), tuple(q + offset for q in g.qubits))
    return state


def statevector(c: Circuit) -> tuple[np.ndarray, list[int]]:
    """State over the active qubits as a ``(2,)*k`` tensor (axis ``i`` is ``qubits[i]``)."""
    prep = _prepare(c)
    return _run(_zero_state(len(prep.qubits)), prep.ops), prep.qubits


def _outcome_probs(probs: np.ndarray, meas_axes: list[int], batch: bool) -> np.ndarray:
    """Marginal over ``meas_axes``; flattened index bit ``i`` belongs to ``meas_axes[i]``."""
    off = 1 if batch else 0
    n = probs.ndim - off
    keep = [a + off for a in meas_axes]
    drop = tuple(a + off for a in range(n) if a not in meas_axes)
    marg = probs.sum(axis=drop) if drop else probs
    # after summation the kept axes appear in ascending order
    kept_sorted = sorted(keep)
    order = [kept_sorted.index(a) + off for a in reversed(keep)]
    marg = np.transpose(marg, ([0] if batch else []) + order)
    return marg.reshape((marg.shape[0], -1) if batch else (-1,))


def _bitstring(idx: int, meas: list[tuple[int, int]], num_clbits: int) -> str:
    bits = ["0"] * num_clbits
    for i, (cb, _) in enumerate(meas):
        if idx >> i & 1:
            bits[num_clbits - 1 - cb] = "1"
    return "".join(bits)


def simulate_ideal(c: Circuit, tol: float = 1e-15) -> dict[str, float]:
    """Exact output distribution of ``c``.

    With no MEASURE the distribution covers every qubit of the circuit.
    """
    prep = _prepare(c)
    psi = _run(_zero_state(len(prep.qubits)), prep.ops)
    probs = np.abs(psi) ** 2
    if prep.meas:
        meas, width = prep.meas, prep.num_clbits
    else:
        meas = [(q, i) for i, q in enumerate(prep.qubits)]
        width = c.num_qubits
    p = _outcome_probs(probs, [ax for _, ax in meas], batch=False) if meas else np.ones(1)
    return {_bitstring(int(i), meas, width): float(p[i]) for i in np.flatnonzero(p > tol)}


# ------------------------------------------------------------- Pauli frames

@lru_cache(maxsize=4096)
def _symplectic(kind: GateKind, theta: float | None, arity: int) -> np.ndarray | None:
    """GF(2) action of a Clifford gate on (x0, z0[, x1, z1]); None if not Clifford."""
    u = gate_matrix(Gate(kind, (0, 1)[:arity], None, theta))
    gens = []
    for q in range(arity):
        for p in (PX, PZ):
            ops = [I2] * arity
            ops[q] = p
            gens.append(ops[0] if arity == 1 else np.kron(ops[0], ops[1]))
    cols = []
    for gmat in gens:
        img = u @ gmat @ u.conj().T
        found = None
        for k in range(4 ** arity):
            pm = PAULIS[k] if arity == 1 else PAULIS_2Q[k]
            overlap = np.trace(pm.conj().T @ img) / (2 ** arity)
            if abs(abs(overlap) - 1) < 1e-9:
                found = k
                break
        if found is None:
            return None
        digits = [found] if arity == 1 else [found // 4, found % 4]
        col = []
        for d in digits:  # Pauli index -> (x, z): I=00, X=10, Y=11, Z=01
            col += [d in (1, 2), d in (2, 3)]
        cols.append(col)
    return np.array(cols, dtype=np.uint8).T


def _gate_symplectic(g: Gate):
    theta = None if g.theta is None else round(g.theta, 12)
    return _symplectic(g.kind, theta, len(g.qubits))


def is_clifford(c: Circuit) -> bool:
    return all(_gate_symplectic(g) is not None for g in decompose_swap(c).gates
               if g.kind not in (GateKind.MEASURE, GateKind.BARRIER))


_XBIT = np.array([0, 1, 1, 0], dtype=bool)  # Pauli index -> has X component
_ZBIT = np.array([0, 0, 1, 1], dtype=bool)


def _frame_flips(prep: _Prepared, codes: np.ndarray) -> np.ndarray:
    """Propagate per-shot Pauli errors to the end; return X flips on measured qubits."""
    shots = codes.shape[0]
    n = len(prep.qubits)
    hit = np.flatnonzero(codes.any(axis=1))
    flips = np.zeros((shots, len(prep.meas)), dtype=bool)
    if hit.size == 0:
        return flips
    sub = codes[hit]
    fx = np.zeros((hit.size, n), dtype=np.uint8)
    fz = np.zeros((hit.size, n), dtype=np.uint8)
    for k, g in enumerate(prep.ops):
        m = _gate_symplectic(g)
        qs = g.qubits
        if len(qs) == 1:
            v = np.stack([fx[:, qs[0]], fz[:, qs[0]]], axis=1)
        else:
            v = np.stack([fx[:, qs[0]], fz[:, qs[0]], fx[:, qs[1]], fz[:, qs[1]]], axis=1)
        w = (v @ m.T) & 1
        fx[:, qs[0]], fz[:, qs[0]] = w[:, 0], w[:, 1]
        if len(qs) == 2:
            fx[:, qs[1]], fz[:, qs[1]] = w[:, 2], w[:, 3]
        col = sub[:, k]
        if not col.any():
            continue
        if len(qs) == 1:
            fx[:, qs[0]] ^= _XBIT[col]
            fz[:, qs[0]] ^= _ZBIT[col]
        else:
            fx[:, qs[0]] ^= _XBIT[col // 4]
            fz[:, qs[0]] ^= _ZBIT[col // 4]
            fx[:, qs[1]] ^= _XBIT[col % 4]
            fz[:, qs[1]] ^= _ZBIT[col % 4]
    flips[hit] = fx[:, [ax for _, ax in prep.meas]].astype(bool)
    return flips


# --------------------------------------------------------- trajectory batches

def _pattern_probs(prep: _Prepared, patterns: np.ndarray, chunk_elems: int = 1 << 22) -> np.ndarray:
    """Outcome distribution for each distinct error pattern (rows of ``patterns``)."""
    n = len(prep.qubits)
    meas_axes = [ax for _, ax in prep.meas]
    nslot = patterns.shape[1]
    first = np.where(patterns.any(axis=1), np.argmax(patterns != 0, axis=1), nslot)
    order = np.argsort(first, kind="stable")
    out = np.empty((patterns.shape[0], 2 ** len(meas_axes)))
    step = max(1, chunk_elems >> n)
    for lo in range(0, len(order), step):
        rows = order[lo:lo + step]
        pat, fst = patterns[rows], first[rows]
        clean = _zero_state(n)
        batch = np.empty((len(rows),) + (2,) * n, dtype=complex)
        active = 0
        for k, g in enumerate(prep.ops):
            u = gate_matrix(g)
            clean = apply_matrix(clean, u, g.qubits)
            if active:
                batch[:active] = apply_matrix(batch[:active], u, tuple(q + 1 for q in g.qubits))
            new = active + int(np.searchsorted(fst[active:], k, side="right"))
            if new > active:
                batch[active:new] = clean
                active = new
            col = pat[:active, k]
            hit = np.flatnonzero(col)
            if hit.size == 0:
                continue
            for code in set(col[hit].tolist()):
                sel = hit[col[hit] == code]
                pm = PAULIS[code] if len(g.qubits) == 1 else PAULIS_2Q[code]
                batch[sel] = apply_matrix(batch[sel], pm, tuple(q + 1 for q in g.qubits))
        # patterns whose only "errors" were beyond the last op never activated
        if active < len(rows):
            batch[active:] = clean
        probs = np.abs(batch) ** 2
        out[rows] = _outcome_probs(probs, meas_axes, batch=True) if meas_axes else 1.0
    return out


# ---------------------------------------------------------------- noisy entry

def _slot_probs(prep: _Prepared, nm: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    p, k = [], []
    for g in prep.ops:
        phys = [prep.qubits[q] for q in g.qubits]
        if len(phys) == 1:
            p.append(nm.p1q.get(phys[0], 0.0))
            k.append(3)
        else:
            # an empty edge table means a noiseless model, not a missing entry
            p.append(nm.two_qubit(*phys) if nm.p2q else 0.0)
            k.append(15)
    return np.array(p, dtype=float), np.array(k, dtype=np.int64)


def _distinct_rows(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique error patterns (row 0 is error-free) and each shot's pattern id."""
    inverse = np.zeros(codes.shape[0], dtype=np.int64)
    noisy = np.flatnonzero(codes.any(axis=1))
    if noisy.size == 0:
        return np.zeros((1, codes.shape[1]), dtype=codes.dtype), inverse
    rows = np.ascontiguousarray(codes[noisy].astype(np.uint8))
    keys = rows.view(np.dtype((np.void, rows.shape[1]))).reshape(-1)
    _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    inverse[noisy] = 1 + np.asarray(inv).reshape(-1)
    patterns = np.vstack([np.zeros((1, codes.shape[1]), dtype=codes.dtype), codes[noisy[first]]])
    return patterns, inverse


def _sample_rows(cdf: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sample from ``cdf[rows[i]]`` for every shot at once."""
    width = cdf.shape[1]
    stacked = (cdf / cdf[:, -1:] + np.arange(cdf.shape[0])[:, None]).reshape(-1)
    idx = np.searchsorted(stacked, rows + u, side="right") - rows * width
    return np.clip(idx, 0, width - 1)


def _sample_index(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, cdf.size - 1)


def _ideal_support(ideal: dict[str, float], prep: _Prepared) -> tuple[np.ndarray, np.ndarray]:
    """Outcome indices (bit ``i`` = ``prep.meas[i]``) and probabilities of a clbit distribution."""
    width = prep.num_clbits
    idx, prob = [], []
    for key in sorted(ideal):
        if len(key) != width:
            raise SimulationError(f"ideal outcome {key!r} is not {width} bits wide")
        idx.append(sum(1 << i for i, (cb, _) in enumerate(prep.meas) if key[width - 1 - cb] == "1"))
        prob.append(float(ideal[key]))
    order = np.argsort(idx, kind="stable")
    return np.array(idx, dtype=np.int64)[order], np.array(prob)[order]


def simulate_noisy(c: Circuit, nm: NoiseModel, shots: int, seed: int = 0,
                   engine: str = "auto", ideal: dict[str, float] | None = None) -> Counts:
    """Monte-Carlo execution under per-gate depolarizing and readout-flip noise.

    After every 1Q (2Q) gate a uniformly random non-identity Pauli on the
    gate's support is applied with probability ``p1q`` (``p2q``); each
    measured bit then flips with ``p_readout``. ``engine`` forces ``"frame"``
    or ``"statevector"``; ``"auto"`` uses frames for Clifford circuits.

    ``ideal`` is the circuit's noise-free clbit distribution when it is
    already known (for instance from the unrouted source of a verified
    routing). The frame engine then skips its own state vector, which lifts
    the qubit budget for Clifford circuits.
    """
    if shots <= 0:
        raise SimulationError("shots must be positive")
    prep = _prepare(c, limit=ideal is None)
    p, kinds = _slot_probs(prep, nm)
    m = len(prep.meas)
    rng = np.random.default_rng(seed)
    u = rng.random((shots, len(p) + 1 + m))
    u_err, u_ideal, u_ro = u[:, :len(p)], u[:, len(p)], u[:, len(p) + 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        codes = np.where(u_err < p, 1 + np.floor(u_err / np.where(p > 0, p, 1) * kinds), 0)
    codes = np.minimum(codes, kinds).astype(np.int64)

    if engine == "auto":
        engine = "frame" if all(_gate_symplectic(g) is not None for g in prep.ops) else "statevector"
    if engine != "frame" and len(prep.qubits) > MAX_QUBITS:
        raise SimulationError(f"{len(prep.qubits)} active qubits exceed the budget of {MAX_QUBITS}")
    if engine == "frame":
        if ideal is not None and m:
            support, prob = _ideal_support(ideal, prep)
            outcome = support[_sample_index(np.cumsum(prob), u_ideal)]
        elif m:
            psi = _run(_zero_state(len(prep.qubits)), prep.ops)
            probs = _outcome_probs(np.abs(psi) ** 2, [ax for _, ax in prep.meas], batch=False)
            outcome = _sample_index(np.cumsum(probs), u_ideal)
        else:
            outcome = np.zeros(shots, dtype=np.int64)
        flips = _frame_flips(prep, codes)
        weights = (1 << np.arange(m, dtype=np.int64))
        outcome = outcome ^ (flips.astype(np.int64) @ weights if m else 0)
    elif engine == "statevector":
        patterns, inverse = _distinct_rows(codes)
        probs = _pattern_probs(prep, patterns)
        outcome = _sample_rows(np.cumsum(probs, axis=1), inverse, u_ideal)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    if m:
        pro = np.array([nm.p_readout.get(prep.qubits[ax], 0.0) for _, ax in prep.meas])
        flip = (u_ro < pro).astype(np.int64) @ (1 << np.arange(m, dtype=np.int64))
        outcome = outcome ^ flip
    values, cnt = np.unique(outcome, return_counts=True)
    width = prep.num_clbits if m else 0
    return Counts({_bitstring(int(v), prep.meas, width): int(k) for v, k in zip(values, cnt)},
                  shots)


# ------------------------------------------------------- exact density matrix

def noisy_distribution(c: Circuit, nm: NoiseModel, max_qubits: int = 8) -> dict[str, float]:
    """Exact expected outcome distribution of :func:`simulate_noisy` (density matrix)."""
    prep = _prepare(c)
    n = len(prep.qubits)
    if n > max_qubits:
        raise SimulationError(f"density matrix limited to {max_qubits} qubits")
    p, _ = _slot_probs(prep, nm)
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0

    def conj(r, mat, qs):
        r = apply_matrix(r, mat, qs)
        return apply_matrix(r, mat.conj(), tuple(q + n for q in qs))

    for g, pk in zip(prep.ops, p):
        rho = conj(rho, gate_matrix(g), g.qubits)
        if pk > 0:
            paulis = PAULIS[1:] if len(g.qubits) == 1 else PAULIS_2Q[1:]
            mixed = sum(conj(rho, pm, g.qubits) for pm in paulis)
            rho = (1 - pk) * rho + pk / len(paulis) * mixed
    diag = np.real(np.einsum(rho.reshape(2 ** n, 2 ** n), [0, 0], [0])).reshape((2,) * n)
    m = len(prep.meas)
    dist = _outcome_probs(diag, [ax for _, ax in prep.meas], batch=False) if m else np.ones(1)
    for i, (_, ax) in enumerate(prep.meas):
        pr = nm.p_readout.get(prep.qubits[ax], 0.0)
        idx = np.arange(dist.size)
        dist = (1 - pr) * dist + pr * dist[idx ^ (1 << i)]
    return {_bitstring(int(i), prep.meas, prep.num_clbits): float(dist[i])
            for i in np.flatnonzero(dist > 1e-15)}


# ------------------------------------------------------------------------ ESP

def esp(c: Circuit, snap: CalibrationSnapshot, mapping=None) -> float:
    """Estimated success probability: product of per-operation success rates.

    ``mapping`` translates a virtual-frame circuit onto physical qubits.
    """
    table = None
    if mapping is not None and c.frame == "virtual":
        table = list(getattr(mapping, "assignment", mapping))
    prob = 1.0
    for g in c.gates:
        qs = [table[q] for q in g.qubits] if table else list(g.qubits)
        if g.kind is GateKind.BARRIER:
            continue
        if g.kind is GateKind.MEASURE:
            prob *= 1.0 - snap.readout_error(qs[0])
        elif g.kind is GateKind.SWAP:
            prob *= (1.0 - snap.two_qubit_error(*qs)) ** 3
        elif g.is_two_qubit:
            prob *= 1.0 - snap.two_qubit_error(*qs)
        else:
            prob *= 1.0 - snap.single_qubit_error(qs[0])
    return prob
