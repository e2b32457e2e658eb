"""Qubit gate circuits over a fixed gate set.

The gate set extends the universal {H, CNOT, T} with S, Sdg, Tdg, X, Y, Z,
CZ and SWAP as simulation conveniences; the semantic contract is the induced
unitary. Qubit 0 is the most significant bit of the state index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
import numpy as np

from ..errors import DimensionMismatch, check_pure_cap
from . import linalg

_SQ2 = 1.0 / np.sqrt(2.0)

GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "Tdg": np.array([[1, 0], [0, np.exp(-1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}

TWO_QUBIT = {"CNOT", "CZ", "SWAP"}


@dataclass(frozen=True)
class GateCircuit:
    """Ordered gate list acting on ``n_qubits`` qubits."""

    n_qubits: int
    gates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        object.__setattr__(self, "gates", tuple((str(g), tuple(int(q) for q in qs))
                                                for g, qs in self.gates))
        for g, qs in self.gates:
            if g not in GATES:
                raise ValueError(f"unknown gate {g!r}")
            want = 2 if g in TWO_QUBIT else 1
            if len(qs) != want:
                raise ValueError(f"gate {g} takes {want} target(s), got {qs}")
            if any(q < 0 or q >= self.n_qubits for q in qs):
                raise DimensionMismatch(f"gate {g} targets {qs} outside 0..{self.n_qubits - 1}")
            if len(set(qs)) != len(qs):
                raise ValueError(f"gate {g} has repeated targets {qs}")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def then(self, other: "GateCircuit") -> "GateCircuit":
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatch("circuit arities differ")
        return GateCircuit(self.n_qubits, self.gates + other.gates)

    def inverse(self) -> "GateCircuit":
        inv = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T"}
        rev = tuple((inv.get(g, g), qs) for g, qs in reversed(self.gates))
        return GateCircuit(self.n_qubits, rev)

    def shifted(self, offset: int, n_total: int) -> "GateCircuit":
        """The same gates acting on qubits offset..offset+n-1 of a larger register."""
        gates = tuple((g, tuple(q + offset for q in qs)) for g, qs in self.gates)
        return GateCircuit(n_total, gates)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Apply the circuit to a state vector of matching dimension."""
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise DimensionMismatch(
                f"state dimension {vec.shape} does not match {self.n_qubits} qubits")
        check_pure_cap(self.dim)
        out = vec.astype(complex)
        dims = [2] * self.n_qubits
        for g, qs in self.gates:
            out = linalg.apply_matrix_to_registers(out, dims, GATES[g], list(qs))
        return out

    def state(self) -> np.ndarray:
        """The state prepared from |0...0>."""
        return self.apply(linalg.basis_vector(self.dim, 0))

    def unitary(self) -> np.ndarray:
        """Materialize the full 2^n x 2^n unitary."""
        check_pure_cap(self.dim * self.dim, "materialized circuit unitary")
        out = np.eye(self.dim, dtype=complex)
        dims = [2] * self.n_qubits + [self.dim]
        flat = out.reshape(-1)
        for g, qs in self.gates:
            flat = linalg.apply_matrix_to_registers(flat, dims, GATES[g], list(qs))
        return flat.reshape(self.dim, self.dim)

    def to_json_dict(self) -> dict:
        return {"n_qubits": self.n_qubits,
                "gates": [{"g": g, "q": list(qs)} for g, qs in self.gates]}

    @staticmethod
    def from_json_dict(data: dict) -> "GateCircuit":
        gates = tuple((entry["g"], tuple(entry["q"])) for entry in data.get("gates", []))
        return GateCircuit(int(data["n_qubits"]), gates)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(text: str) -> "GateCircuit":
        return GateCircuit.from_json_dict(json.loads(text))


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator) -> GateCircuit:
    """Uniformly random gate sequence from the supported set."""
    names = sorted(GATES)
    gates = []
    for _ in range(n_gates):
        g = names[rng.integers(len(names))]
        if g in TWO_QUBIT:
            if n_qubits < 2:
                g = "H"
                gates.append((g, (int(rng.integers(n_qubits)),)))
                continue
            q = rng.choice(n_qubits, size=2, replace=False)
            gates.append((g, (int(q[0]), int(q[1]))))
        else:
            gates.append((g, (int(rng.integers(n_qubits)),)))
    return GateCircuit(n_qubits, tuple(gates))
