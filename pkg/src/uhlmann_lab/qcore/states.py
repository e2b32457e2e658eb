"""Pure bipartite states and density operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, NotPositive, check_density_cap, check_pure_cap
from . import linalg
from .gates import GateCircuit

_VALIDATE_ATOL = 1e-8


@dataclass(frozen=True)
class BipartiteState:
    """Normalized complex amplitude vector with an (dA, dB) register split."""

    amplitudes: np.ndarray
    split: tuple

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "split", (int(self.split[0]), int(self.split[1])))
        dA, dB = self.split
        if dA < 1 or dB < 1 or dA * dB != amps.shape[0]:
            raise DimensionMismatch(
                f"split {self.split} does not factor vector of length {amps.shape[0]}")
        check_pure_cap(amps.shape[0])
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > _VALIDATE_ATOL:
            raise ValueError(f"state not normalized: |norm - 1| = {abs(nrm - 1.0):.3g}")

    @property
    def dA(self) -> int:
        return self.split[0]

    @property
    def dB(self) -> int:
        return self.split[1]

    def as_matrix(self) -> np.ndarray:
        """Coefficient matrix M with psi = sum_ab M[a,b] |a>|b>."""
        return self.amplitudes.reshape(self.split)

    def density(self) -> "DensityOp":
        v = self.amplitudes
        return DensityOp(np.outer(v, v.conj()), self.split)

    def reduced_a(self) -> "DensityOp":
        m = self.as_matrix()
        return DensityOp(m @ m.conj().T, (self.dA,))

    def reduced_b(self) -> "DensityOp":
        m = self.as_matrix()
        return DensityOp(m.T @ m.conj(), (self.dB,))

    def overlap(self, other: "BipartiteState") -> complex:
        if other.amplitudes.shape != self.amplitudes.shape:
            raise DimensionMismatch("states live in different dimensions")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def resplit(self, split) -> "BipartiteState":
        return BipartiteState(self.amplitudes, tuple(split))


@dataclass(frozen=True)
class DensityOp:
    """Hermitian PSD trace-1 operator over a list of register dimensions."""

    matrix: np.ndarray
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in (self.dims if not np.isscalar(self.dims) else (self.dims,)))
        d = int(np.prod(dims, dtype=np.int64))
        check_density_cap(d)
        m = np.asarray(self.matrix, dtype=complex).copy()
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} vs register dims {dims}")
        if np.linalg.norm(m - m.conj().T, ord=np.inf) > _VALIDATE_ATOL:
            raise NotPositive("matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > _VALIDATE_ATOL:
            raise ValueError(f"trace is {np.trace(m).real}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def check_psd(self, atol: float = 1e-7) -> None:
        if self.eigenvalues().min() < -atol:
            raise NotPositive(f"minimum eigenvalue {self.eigenvalues().min():.3g}")

    def purify(self) -> BipartiteState:
        """Canonical purification |rho> = sum_i sqrt(l_i) |e_i>|i> with split (d, d)."""
        vals, vecs = np.linalg.eigh(linalg.hermitize(self.matrix))
        vals = np.clip(vals, 0.0, None)
        vals = vals / vals.sum()
        m = vecs * np.sqrt(vals)  # column i is sqrt(l_i) e_i; M[a, i]
        return BipartiteState(m.reshape(-1), (self.dim, self.dim))


def maximally_mixed(dims) -> DensityOp:
    dims = tuple(int(d) for d in (dims if not np.isscalar(dims) else (dims,)))
    d = int(np.prod(dims, dtype=np.int64))
    check_density_cap(d)
    return DensityOp(np.eye(d) / d, dims)


def maximally_entangled(d: int) -> BipartiteState:
    """|Phi> = d^{-1/2} sum_i |i>|i> with split (d, d)."""
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return BipartiteState(v, (d, d))


def partial_trace(op: DensityOp, keep: Sequence[int]) -> DensityOp:
    """Trace out all registers of ``op`` except those in ``keep``."""
    keep = sorted(int(k) for k in keep)
    if any(k < 0 or k >= len(op.dims) for k in keep):
        raise DimensionMismatch(f"keep {keep} invalid for dims {op.dims}")
    out = linalg.partial_trace_matrix(op.matrix, op.dims, keep)
    return DensityOp(out, tuple(op.dims[k] for k in keep))


def apply_circuit(circuit: GateCircuit, state=None, split=None) -> BipartiteState:
    """Run a circuit on a BipartiteState, a raw vector, or a basis label.

    ``state`` may be a BipartiteState, a complex vector, an int basis index,
    or None (the all-zeros state). The output split defaults to the input's
    (or to an even qubit split).
    """
    dim = circuit.dim
    if state is None:
        vec = linalg.basis_vector(dim, 0)
    elif isinstance(state, BipartiteState):
        vec = state.amplitudes
        split = split or state.split
    elif np.isscalar(state) and not isinstance(state, complex):
        vec = linalg.basis_vector(dim, int(state))
    else:
        vec = np.asarray(state, dtype=complex).reshape(-1)
    if vec.shape[0] != dim:
        raise DimensionMismatch(f"state dim {vec.shape[0]} vs circuit dim {dim}")
    if split is None:
        half = circuit.n_qubits // 2
        split = (2 ** half, 2 ** (circuit.n_qubits - half))
    return BipartiteState(circuit.apply(vec), split)
