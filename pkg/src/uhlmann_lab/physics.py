"""Black-hole radiation decoding and interference detection.

Radiation decoding reduces a scrambling circuit to a single-input-qubit
channel and reuses the Uhlmann decoder; interference detection builds a
controlled swap between two orthogonal states from one Uhlmann solve and
runs the Hadamard test with it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, check_pure_cap
from .qcore import linalg
from .qcore.channels import ChannelDesc
from .qcore.gates import GateCircuit
from .qcore.states import BipartiteState, maximally_entangled
from .shannon import decoder_from_uhlmann, decoupling_fidelity
from .uhlmann import UhlmannInstance, canonical_uhlmann, unitary_completion


@dataclass(frozen=True)
class BlackHoleInstance:
    """Scrambler P on n qubits mapping A ⊗ G -> H ⊗ R; A is qubit 0 and R is
    the last r output qubits."""

    P: GateCircuit
    r: int

    def __post_init__(self):
        if not (1 <= self.r <= self.P.n_qubits - 0):
            raise DimensionMismatch(f"r = {self.r} out of range")
        if self.P.n_qubits < 2:
            raise DimensionMismatch("need at least 2 qubits")

    @property
    def n(self) -> int:
        return self.P.n_qubits

    def radiation_channel(self) -> ChannelDesc:
        """The channel that feeds one qubit into the scrambler and emits R."""
        n, r = self.n, self.r
        u = self.P.unitary()
        # Output registers (H = first n-r qubits, R = last r) -> (R, H).
        perm = linalg.permutation_matrix([2 ** (n - r), 2 ** r], [1, 0])
        return ChannelDesc(perm @ u, 2, 2 ** (n - 1), (2 ** r, 2 ** (n - r)))


def bh_decode(inst: BlackHoleInstance, min_decoupling: float = 0.0) -> dict:
    """Decode the infalling qubit from the radiation register.

    Prechecks the decoupling fidelity of the reduced channel; instances below
    ``min_decoupling`` are reported undecodable without building a decoder.
    """
    ch = inst.radiation_channel()
    dec_fid = decoupling_fidelity(ch)
    result = {"decoupling": float(dec_fid), "promise_met": dec_fid >= min_decoupling}
    if dec_fid < min_decoupling:
        result.update({"decoder": None, "epr_fidelity": None})
        return result
    decoded = decoder_from_uhlmann(ch)
    result.update({"decoder": decoded["decoder"],
                   "epr_fidelity": decoded["fidelity"]})
    return result


@dataclass(frozen=True)
class OrthPair:
    """Two n-qubit circuits (or raw vectors) with orthogonal output states."""

    C: Optional[GateCircuit] = None
    D: Optional[GateCircuit] = None
    raw: Optional[tuple] = None

    def __post_init__(self):
        a, b = self.vectors()
        if abs(np.vdot(a, b)) > 1e-9:
            raise DimensionMismatch(f"states are not orthogonal: |<C|D>| = "
                                    f"{abs(np.vdot(a, b)):.3g}")

    def vectors(self) -> tuple:
        if self.raw is not None:
            a = np.asarray(self.raw[0], dtype=complex).reshape(-1)
            b = np.asarray(self.raw[1], dtype=complex).reshape(-1)
        else:
            if self.C.n_qubits != self.D.n_qubits:
                raise DimensionMismatch("circuits act on different qubit counts")
            a, b = self.C.state(), self.D.state()
        if a.shape != b.shape:
            raise DimensionMismatch("states live in different dimensions")
        return a, b


@dataclass(frozen=True)
class HadamardTestCircuit:
    """H on the decision qubit (qubit 0), a controlled unitary, H, measure."""

    controlled: np.ndarray  # block unitary on (decision ⊗ target)

    @property
    def dim(self) -> int:
        return self.controlled.shape[0] // 2

    def unitary(self) -> np.ndarray:
        h = np.kron(np.array([[1, 1], [1, -1]]) / np.sqrt(2), np.eye(self.dim))
        return h @ self.controlled @ h

    def run(self, state: np.ndarray) -> dict:
        """Measure the decision qubit on |0> ⊗ state."""
        joint = np.zeros(2 * self.dim, dtype=complex)
        joint[:self.dim] = state
        out = self.unitary() @ joint
        branches = out.reshape(2, self.dim)
        p = np.linalg.norm(branches, axis=1) ** 2
        return {"p0": float(p[0]), "p1": float(p[1]),
                "post0": branches[0] / np.sqrt(p[0]) if p[0] > 1e-14 else None,
                "post1": branches[1] / np.sqrt(p[1]) if p[1] > 1e-14 else None}


def swap_to_distinguisher(u: np.ndarray, pair=None) -> HadamardTestCircuit:
    """Hadamard-test circuit whose decision qubit distinguishes ± superpositions.

    If ``pair`` = (psi, phi) is supplied, the swap contract U psi = phi,
    U phi = psi is checked first.
    """
    u = np.asarray(u, dtype=complex)
    if pair is not None:
        psi, phi = (np.asarray(v, dtype=complex).reshape(-1) for v in pair)
        err = max(np.linalg.norm(u @ psi - phi), np.linalg.norm(u @ phi - psi))
        if err > 1e-8:
            raise DimensionMismatch(f"U does not swap the pair: residual {err:.3g}")
    d = u.shape[0]
    controlled = np.zeros((2 * d, 2 * d), dtype=complex)
    controlled[:d, :d] = np.eye(d)
    controlled[d:, d:] = u
    return HadamardTestCircuit(controlled)


def distinguisher_to_swap(v: np.ndarray) -> np.ndarray:
    """V^dag (Z on the decision qubit) V, which swaps the two superpositions.

    The decision qubit is qubit 0 of the space V acts on.
    """
    v = np.asarray(v, dtype=complex)
    d = v.shape[0]
    z = np.kron(np.diag([1.0, -1.0]), np.eye(d // 2))
    return v.conj().T @ z @ v


def householder_swap(psi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Reflection about (psi - phi): swaps psi and phi when <psi|phi> is real."""
    diff = psi - phi
    nrm = np.linalg.norm(diff)
    if nrm < 1e-12:
        return np.eye(psi.shape[0], dtype=complex)
    diff = diff / nrm
    return np.eye(psi.shape[0], dtype=complex) - 2.0 * np.outer(diff, diff.conj())


def controlled_swap_from_uhlmann(pair: OrthPair) -> np.ndarray:
    """The controlled-swap unitary on (control ⊗ state) from one Uhlmann solve.

    Solves the Uhlmann problem between the two four-branch purifications from
    the interference reduction; the resulting unitary fixes |0>|C>, |0>|D>
    and exchanges |1>|C> <-> |1>|D>.
    """
    c_vec, d_vec = pair.vectors()
    d = c_vec.shape[0]
    check_pure_cap(16 * d * d, "interference instance")
    # C-tilde, D-tilde on (A, A', B', B) with split ((A, A') | (B', B)).
    epr = maximally_entangled(2).amplitudes.reshape(2, 2)
    c_t = np.zeros((2, 2, 2, d), dtype=complex)
    d_t = np.zeros((2, 2, 2, d), dtype=complex)
    for a, branch in ((0, c_vec), (1, d_vec)):
        for b in (0, 1):
            c_t[a, b, b, :] = epr[b, b] * branch / np.sqrt(2)
    # D-tilde: controlled on B' = 1, the (A-labelled) branch content is swapped.
    for b in (0, 1):
        d_t[0, b, b, :] = epr[b, b] * (c_vec if b == 0 else d_vec) / np.sqrt(2)
        d_t[1, b, b, :] = epr[b, b] * (d_vec if b == 0 else c_vec) / np.sqrt(2)
    split = (4, 2 * d)
    x = UhlmannInstance(raw_pair=(BipartiteState(c_t.reshape(-1), split),
                                  BipartiteState(d_t.reshape(-1), split)))
    return unitary_completion(canonical_uhlmann(x, 0.0)).unitary


def interference_detect(pair: OrthPair, state, tol: float = 1e-6) -> int:
    """0 for the + superposition, 1 for the -, via the Hadamard test with the
    Uhlmann-built controlled swap. Raises if the outcome distribution is not
    deterministic within tolerance (input outside the promise)."""
    if isinstance(state, BipartiteState):
        state = state.amplitudes
    state = np.asarray(state, dtype=complex).reshape(-1)
    ctrl = controlled_swap_from_uhlmann(pair)
    test = HadamardTestCircuit(ctrl)
    res = test.run(state)
    if min(res["p0"], res["p1"]) > tol:
        raise ValueError(
            f"input violates the ± promise: outcome probabilities "
            f"({res['p0']:.3g}, {res['p1']:.3g})")
    return int(res["p1"] > res["p0"])
