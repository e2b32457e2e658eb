"""Quantum channels in Stinespring form.

A channel is a unitary dilation acting on (input ⊗ ancilla), with the
ancilla initialized to a fixed basis state; the dilation output factors as
(out ⊗ env) and the environment is traced. The complementary channel swaps
the roles of out and env.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, check_density_cap
from . import linalg
from .gates import GateCircuit
from .states import BipartiteState, DensityOp


@dataclass(frozen=True)
class ChannelDesc:
    dilation: np.ndarray
    d_in: int
    d_anc: int
    out_split: tuple  # (d_out, d_env)
    anc_state: int = 0

    def __post_init__(self):
        u = np.asarray(self.dilation, dtype=complex).copy()
        u.setflags(write=False)
        object.__setattr__(self, "dilation", u)
        object.__setattr__(self, "out_split", (int(self.out_split[0]), int(self.out_split[1])))
        d = self.d_in * self.d_anc
        if u.shape != (d, d):
            raise DimensionMismatch(f"dilation shape {u.shape}, expected {(d, d)}")
        if self.out_split[0] * self.out_split[1] != d:
            raise DimensionMismatch(f"out_split {self.out_split} does not factor {d}")
        if not (0 <= self.anc_state < self.d_anc):
            raise DimensionMismatch(f"ancilla basis state {self.anc_state} out of range")

    @property
    def d_out(self) -> int:
        return self.out_split[0]

    @property
    def d_env(self) -> int:
        return self.out_split[1]

    def check_unitary(self, atol: float = 1e-9) -> None:
        if not linalg.is_unitary(self.dilation, atol):
            raise ValueError("dilation is not unitary within tolerance")

    def isometry(self) -> np.ndarray:
        """The Stinespring isometry V: in -> out ⊗ env (d x d_in)."""
        d = self.d_in * self.d_anc
        cols = np.zeros((d, self.d_in), dtype=complex)
        for i in range(self.d_in):
            cols[:, i] = self.dilation[:, i * self.d_anc + self.anc_state]
        return cols

    def kraus_operators(self) -> list:
        """Kraus operators K_e = (id ⊗ <e|) V."""
        v = self.isometry().reshape(self.d_out, self.d_env, self.d_in)
        return [np.ascontiguousarray(v[:, e, :]) for e in range(self.d_env)]


def run_channel(ch: ChannelDesc, state) -> DensityOp:
    """Apply the channel: dilate, evolve, trace the environment."""
    return apply_to_first(ch, state, 1)


def complementary(ch: ChannelDesc) -> ChannelDesc:
    """Same dilation with the out/env roles swapped."""
    swap = linalg.swap_matrix(ch.d_out, ch.d_env)
    return ChannelDesc(swap @ ch.dilation, ch.d_in, ch.d_anc,
                       (ch.d_env, ch.d_out), ch.anc_state)


def apply_to_first(ch: ChannelDesc, state, d_rest: int = None) -> DensityOp:
    """Apply the channel to the first register of a joint state.

    ``state`` is a DensityOp or BipartiteState whose first register matches
    the channel input; remaining registers ride along untouched.
    """
    if isinstance(state, BipartiteState):
        state = state.density()
    if isinstance(state, DensityOp):
        mat, dims = state.matrix, state.dims
    else:
        mat = np.asarray(state, dtype=complex)
        dims = (mat.shape[0],) if d_rest in (None, 1) else (mat.shape[0] // d_rest, d_rest)
    d_first = dims[0]
    rest = int(np.prod(dims[1:], dtype=np.int64)) if len(dims) > 1 else 1
    if d_first != ch.d_in:
        raise DimensionMismatch(f"channel input dim {ch.d_in} vs register dim {d_first}")
    check_density_cap(ch.d_in * ch.d_anc * rest, "dilated state")
    # Embed ancilla: register order (in, anc, rest).
    anc = np.zeros((ch.d_anc, ch.d_anc))
    anc[ch.anc_state, ch.anc_state] = 1.0
    # rho_in,rest -> rho_in,anc,rest
    m = mat.reshape(d_first, rest, d_first, rest)
    big = np.einsum("irjs,ab->iarjbs", m, anc).reshape(
        d_first * ch.d_anc * rest, d_first * ch.d_anc * rest)
    big = linalg.apply_matrix_to_registers_dm(
        big, [d_first * ch.d_anc, rest], ch.dilation, [0])
    out = linalg.partial_trace_matrix(
        big, [ch.d_out, ch.d_env, rest], [0, 2])
    new_dims = (ch.d_out,) + tuple(dims[1:])
    return DensityOp(out, new_dims)


def compose(second: ChannelDesc, first: ChannelDesc) -> ChannelDesc:
    """The channel second ∘ first as a single Stinespring dilation."""
    if second.d_in != first.d_out:
        raise DimensionMismatch(
            f"cannot compose: {second.d_in} != {first.d_out}")
    d_in, a1, a2 = first.d_in, first.d_anc, second.d_anc
    o1, e1 = first.out_split
    o2, e2 = second.out_split
    dims_total = d_in * a1 * a2
    # Register evolution on (in, anc1, anc2):
    #   U1 on (in, anc1)          -> (out1, env1, anc2)
    #   permute                   -> (out1, anc2, env1)
    #   U2 on (out1, anc2)        -> (out2, env2, env1)
    u = np.kron(first.dilation, np.eye(a2))
    perm = linalg.permutation_matrix([o1, e1, a2], [0, 2, 1])
    u = perm @ u
    u = np.kron(second.dilation, np.eye(e1)) @ u
    anc_state = first.anc_state * a2 + second.anc_state
    assert u.shape == (dims_total, dims_total)
    return ChannelDesc(u, d_in, a1 * a2, (o2, e2 * e1), anc_state)


def identity_channel(d: int) -> ChannelDesc:
    return ChannelDesc(np.eye(d, dtype=complex), d, 1, (d, 1))


def unitary_channel(u: np.ndarray) -> ChannelDesc:
    u = np.asarray(u, dtype=complex)
    return ChannelDesc(u, u.shape[0], 1, (u.shape[0], 1))


def trace_out_channel(d_keep: int, d_drop: int, keep_first: bool = True) -> ChannelDesc:
    """Channel on d_keep*d_drop that discards one factor."""
    d = d_keep * d_drop
    if keep_first:
        return ChannelDesc(np.eye(d, dtype=complex), d, 1, (d_keep, d_drop))
    perm = linalg.permutation_matrix([d_drop, d_keep], [1, 0])
    return ChannelDesc(perm, d, 1, (d_keep, d_drop))


def append_channel(d_in: int, appended: int, basis_state: int = 0) -> ChannelDesc:
    """Channel that appends a fresh register in a basis state (output = in ⊗ appended)."""
    d = d_in * appended
    u = np.eye(d, dtype=complex)
    return ChannelDesc(u, d_in, appended, (d, 1), basis_state)


def dilation_from_isometry(columns: np.ndarray, d_in: int, d_anc: int,
                           anc_state: int = 0) -> np.ndarray:
    """Unitary U with U|i>|anc_state> = columns[:, i], remaining columns
    completed orthonormally."""
    d = d_in * d_anc
    if columns.shape != (d, d_in):
        raise DimensionMismatch(f"columns shape {columns.shape}, expected {(d, d_in)}")
    full = linalg.gram_schmidt_complete(columns)
    u = np.zeros((d, d), dtype=complex)
    taken = [i * d_anc + anc_state for i in range(d_in)]
    for i in range(d_in):
        u[:, taken[i]] = full[:, i]
    rest = [c for c in range(d) if c not in taken]
    for j, c in enumerate(rest):
        u[:, c] = full[:, d_in + j]
    return u


def channel_from_circuit(circuit: GateCircuit, n_input: int,
                         env_qubits: Sequence[int]) -> ChannelDesc:
    """Dilation from a circuit: first ``n_input`` qubits are the input, the
    rest start in |0>, and ``env_qubits`` (output indices) are traced."""
    n = circuit.n_qubits
    env_qubits = sorted(int(q) for q in env_qubits)
    if not (0 < n_input <= n):
        raise DimensionMismatch(f"n_input {n_input} out of range for {n} qubits")
    if any(q < 0 or q >= n for q in env_qubits):
        raise DimensionMismatch(f"env qubits {env_qubits} out of range")
    u = circuit.unitary()
    out_qubits = [q for q in range(n) if q not in env_qubits]
    perm = linalg.permutation_matrix([2] * n, out_qubits + env_qubits)
    d_out = 2 ** len(out_qubits)
    d_env = 2 ** len(env_qubits)
    return ChannelDesc(perm @ u, 2 ** n_input, 2 ** (n - n_input), (d_out, d_env))


def encode_matrix(m: np.ndarray) -> list:
    """Row-major flattening with interleaved (re, im) doubles."""
    flat = np.asarray(m, dtype=complex).reshape(-1)
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return [float(v) for v in out]


def decode_matrix(values, d: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    flat = arr[0::2] + 1j * arr[1::2]
    return flat.reshape(d, d)


def channel_to_json_dict(ch: ChannelDesc) -> dict:
    return {"matrix": encode_matrix(ch.dilation), "d_in": ch.d_in,
            "d_anc": ch.d_anc, "out_split": list(ch.out_split),
            "anc_state": ch.anc_state}


def channel_from_json_dict(data: dict) -> ChannelDesc:
    if "matrix" in data:
        d_in, d_anc = int(data["d_in"]), int(data["d_anc"])
        dilation = decode_matrix(data["matrix"], d_in * d_anc)
        return ChannelDesc(dilation, d_in, d_anc, tuple(data["out_split"]),
                           int(data.get("anc_state", 0)))
    circ = GateCircuit.from_json_dict(data["dilation"])
    return channel_from_circuit(circ, int(data["n_input"]), data["env"])


def check_trace_preserving(ch: ChannelDesc, atol: float = 1e-9) -> float:
    """Max trace error of the channel over all basis inputs."""
    worst = 0.0
    for i in range(ch.d_in):
        rho = np.zeros((ch.d_in, ch.d_in), dtype=complex)
        rho[i, i] = 1.0
        out = run_channel(ch, DensityOp(rho, (ch.d_in,)))
        worst = max(worst, abs(np.trace(out.matrix).real - 1.0))
    if worst > atol:
        raise ValueError(f"channel trace error {worst:.3g}")
    return worst
