import numpy as np
import pytest

from uhlmann_lab.errors import DimensionMismatch
from uhlmann_lab.qcore import GATES, GateCircuit, apply_circuit, random_circuit
from uhlmann_lab.rng import generator

from conftest import kron_oracle_unitary


def test_all_gate_matrices_exactly_unitary():
    for name, m in GATES.items():
        err = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), ord=np.inf)
        assert err < 1e-15, name


def test_h_on_zero():
    circ = GateCircuit(1, (("H", (0,)),))
    out = apply_circuit(circ)
    assert np.allclose(out.amplitudes, np.array([1, 1]) / np.sqrt(2), atol=1e-12)


def test_empty_circuit_is_identity():
    psi = generator(3).standard_normal(8) + 1j * generator(4).standard_normal(8)
    psi = psi / np.linalg.norm(psi)
    out = apply_circuit(GateCircuit(3, ()), psi, split=(2, 4))
    assert np.allclose(out.amplitudes, psi, atol=1e-14)


def test_random_circuit_matches_kron_oracle():
    rng = generator(7)
    for trial in range(5):
        circ = random_circuit(4, 10, rng)
        oracle = kron_oracle_unitary(circ)
        assert np.linalg.norm(circ.unitary() - oracle, ord=np.inf) < 1e-12
        # Application on |0000> commutes with dense materialization.
        direct = circ.state()
        assert np.linalg.norm(direct - oracle[:, 0]) < 1e-12


def test_circuit_unitarity_invariant():
    rng = generator(11)
    for trial in range(5):
        circ = random_circuit(3, 20, rng)
        u = circ.unitary()
        assert np.linalg.norm(u.conj().T @ u - np.eye(8), ord=np.inf) < 1e-10


def test_inverse_circuit():
    rng = generator(13)
    circ = random_circuit(3, 15, rng)
    u = circ.then(circ.inverse()).unitary()
    assert np.linalg.norm(u - np.eye(8), ord=np.inf) < 1e-10


def test_circuit_validation_errors():
    with pytest.raises(DimensionMismatch):
        GateCircuit(2, (("H", (5,)),))
    with pytest.raises(ValueError):
        GateCircuit(2, (("CNOT", (0, 0)),))
    with pytest.raises(ValueError):
        GateCircuit(2, (("NOPE", (0,)),))
    with pytest.raises(DimensionMismatch):
        apply_circuit(GateCircuit(2, ()), np.ones(3) / np.sqrt(3))


def test_circuit_json_roundtrip():
    circ = GateCircuit(3, (("H", (0,)), ("CNOT", (0, 2)), ("Tdg", (1,))))
    again = GateCircuit.from_json(circ.to_json())
    assert again == circ
    data = circ.to_json_dict()
    assert data["gates"][1] == {"g": "CNOT", "q": [0, 2]}
