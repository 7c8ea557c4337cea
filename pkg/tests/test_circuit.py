import math

import numpy as np
import pytest
from hypothesis import given, settings

from qmap.benchmarks import build_textbook, gen_bv, gen_qft, load_benchmark, ASSET_NAMES
from qmap.circuit import (Circuit, CircuitError, Gate, GateKind, barrier, count_2q, count_gates,
                          cx, decompose_swap, depth, ecr, h, measure, nativize, reverse, rz, swap,
                          sx, x)
from qmap.qasm import parse_qasm
from qmap.simulator import simulate_ideal

from conftest import circuits, equal_up_to_phase, unitary


@pytest.mark.parametrize("n", range(2, 13))
def test_bv_structural_counts(n):
    c = gen_bv(n)
    assert (count_gates(c), count_2q(c), depth(c)) == (3 * n, n - 1, n + 3)


def test_bv_recovers_hidden_string():
    for hidden in ("1", "0", "1011", "0110", "11111"):
        c = gen_bv(len(hidden) + 1, hidden)
        assert simulate_ideal(c) == pytest.approx({hidden: 1.0})


def test_bv_rejects_bad_hidden():
    with pytest.raises(CircuitError):
        gen_bv(4, "10")
    with pytest.raises(CircuitError):
        gen_bv(3, "1a")
    with pytest.raises(CircuitError):
        gen_bv(1)


def test_counting_convention_details():
    c = Circuit(2, 2, (h(0), barrier(0, 1), cx(0, 1), measure(0, 0), measure(1, 1)))
    assert count_gates(c) == 2
    # H | barrier aligns | CX | measure
    assert depth(c) == 3
    assert depth(Circuit(3, 0, (h(0), barrier(0, 2), h(2)))) == 2


def test_gate_validation():
    with pytest.raises(CircuitError, match="duplicate"):
        cx(1, 1)
    with pytest.raises(CircuitError):
        Gate(GateKind.MEASURE, (0,))
    with pytest.raises(CircuitError):
        rz(float("nan"), 0)
    with pytest.raises(CircuitError, match="out of range"):
        Circuit(2, 0, (cx(0, 2),))
    with pytest.raises(CircuitError, match="clbit"):
        Circuit(2, 1, (measure(0, 1),))


def test_remap_and_active():
    c = Circuit(3, 1, (h(0), cx(0, 2), measure(2, 0)))
    assert c.active_qubits() == [0, 2]
    assert c.measured() == {0: 2}
    assert cx(0, 2).remap([5, 6, 7]) == cx(5, 7)


def test_swap_decomposition_is_exact():
    c = Circuit(2, 0, (swap(0, 1),))
    d = decompose_swap(c)
    assert count_2q(d) == 3
    assert np.allclose(unitary(c), unitary(d))


def test_ecr_nativization_equivalent():
    c = Circuit(3, 0, (h(0), cx(0, 1), rz(0.3, 1), cx(2, 1), swap(0, 2), sx(2)))
    e = nativize(c, "ecr")
    assert all(g.kind is not GateKind.CX and g.kind is not GateKind.SWAP for g in e.gates)
    assert equal_up_to_phase(unitary(e), unitary(c))
    assert nativize(c, "cx") == decompose_swap(c)
    with pytest.raises(ValueError):
        nativize(c, "cz")


def test_cx_as_ecr_single():
    for a, b in ((0, 1), (1, 0)):
        c = Circuit(2, 0, (cx(a, b),))
        assert equal_up_to_phase(unitary(nativize(c, "ecr")), unitary(c))


def test_reverse_inverts_clifford_skeleton():
    c = Circuit(3, 2, (cx(0, 1), cx(1, 2), swap(0, 2), measure(0, 0)))
    r = reverse(c)
    # CX and SWAP are self-inverse, so reversed order is the inverse
    assert np.allclose(unitary(r) @ unitary(c), np.eye(8))
    assert all(g.kind is not GateKind.MEASURE for g in r.gates)


def test_textbook_assets_match_constructions():
    for name in ASSET_NAMES:
        assert load_benchmark(name) == build_textbook(name)


@pytest.mark.parametrize("name,outcome", [("adder", "1011"), ("and", "10111"), ("or", "10001"),
                                          ("fredkin", "101"), ("toffoli", "111"), ("hs4", "0110")])
def test_textbook_outcomes(name, outcome):
    assert simulate_ideal(load_benchmark(name)) == pytest.approx({outcome: 1.0})


def test_qft_uniform_on_zero_input():
    probs = simulate_ideal(gen_qft(3, measure_all=True))
    assert len(probs) == 8
    assert all(v == pytest.approx(0.125) for v in probs.values())


def _qft_matrix(n):
    d = 2 ** n
    w = np.exp(2j * math.pi / d)
    return np.array([[w ** (j * k) for k in range(d)] for j in range(d)]) / math.sqrt(d)


def test_qft_unitary():
    for n in (2, 3):
        assert equal_up_to_phase(unitary(gen_qft(n)), _qft_matrix(n))


@settings(max_examples=60, deadline=None)
@given(circuits())
def test_nativize_preserves_unitary(c):
    assert equal_up_to_phase(unitary(nativize(c, "ecr")), unitary(c))
    assert np.allclose(unitary(decompose_swap(c)), unitary(c))


def test_u3_lowering_matches_definition():
    theta, phi, lam = 0.7, -1.2, 2.1
    c = parse_qasm(f"qreg q[1]; u3({theta},{phi},{lam}) q[0];")
    u3 = np.array([[math.cos(theta / 2), -np.exp(1j * lam) * math.sin(theta / 2)],
                   [np.exp(1j * phi) * math.sin(theta / 2),
                    np.exp(1j * (phi + lam)) * math.cos(theta / 2)]])
    assert equal_up_to_phase(unitary(c), u3)
