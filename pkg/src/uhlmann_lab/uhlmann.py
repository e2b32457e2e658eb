"""Canonical Uhlmann partial isometries, completions, instances, padding.

An instance is a pair of bipartite pure states (psi, phi) with a common
(dA, dB) split, given either as two circuits on 2n qubits (register A is the
first n qubits) or as raw state vectors. The canonical cutoff-eta isometry is

    W = sgn_eta(Tr_A |phi><psi|),

a dB x dB partial isometry acting on register B that maps psi toward phi.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidInstance
from .qcore import linalg
from .qcore.gates import GateCircuit
from .qcore.metrics import PartialIsometryOp, fidelity, sgn_eta
from .qcore.random_ops import haar_state_vector, haar_unitary
from .qcore.states import BipartiteState
from .rng import as_seed


@dataclass(frozen=True)
class UhlmannInstance:
    """Circuit pair on 2n qubits, or a raw state pair with a common split."""

    n: Optional[int] = None
    C: Optional[GateCircuit] = None
    D: Optional[GateCircuit] = None
    raw_pair: Optional[tuple] = None  # (psi, phi) BipartiteStates

    def __post_init__(self):
        if self.raw_pair is not None:
            psi, phi = self.raw_pair
            if not isinstance(psi, BipartiteState) or not isinstance(phi, BipartiteState):
                raise InvalidInstance("raw_pair must hold two BipartiteStates")
            if psi.split != phi.split:
                raise InvalidInstance(f"raw splits differ: {psi.split} vs {phi.split}")
            if self.n is not None or self.C is not None or self.D is not None:
                raise InvalidInstance("instance is either circuit-form or raw-form")
        else:
            if self.n is None or self.C is None or self.D is None:
                raise InvalidInstance("circuit instance needs n, C and D")
            if self.n < 1:
                raise InvalidInstance("n must be positive")
            for circ in (self.C, self.D):
                if circ.n_qubits != 2 * self.n:
                    raise InvalidInstance(
                        f"circuit acts on {circ.n_qubits} qubits, expected {2 * self.n}")

    @property
    def split(self) -> tuple:
        if self.raw_pair is not None:
            return self.raw_pair[0].split
        return (2 ** self.n, 2 ** self.n)

    @property
    def dA(self) -> int:
        return self.split[0]

    @property
    def dB(self) -> int:
        return self.split[1]

    def states(self) -> tuple:
        """(psi, phi) = (|C>, |D>) as BipartiteStates."""
        if self.raw_pair is not None:
            return self.raw_pair
        split = self.split
        psi = BipartiteState(self.C.state(), split)
        phi = BipartiteState(self.D.state(), split)
        return psi, phi

    def to_json_dict(self) -> dict:
        if self.raw_pair is not None:
            psi, phi = self.raw_pair
            enc = lambda v: [[float(c.real), float(c.imag)] for c in v]
            return {"raw": {"dA": self.dA, "dB": self.dB,
                            "psi": enc(psi.amplitudes), "phi": enc(phi.amplitudes)}}
        return {"n": self.n, "C": self.C.to_json_dict(), "D": self.D.to_json_dict()}

    @staticmethod
    def from_json_dict(data: dict) -> "UhlmannInstance":
        if "raw" in data:
            raw = data["raw"]
            dA, dB = int(raw["dA"]), int(raw["dB"])
            dec = lambda pairs: np.array([complex(re, im) for re, im in pairs])
            psi = BipartiteState(dec(raw["psi"]), (dA, dB))
            phi = BipartiteState(dec(raw["phi"]), (dA, dB))
            return UhlmannInstance(raw_pair=(psi, phi))
        return UhlmannInstance(n=int(data["n"]),
                               C=GateCircuit.from_json_dict(data["C"]),
                               D=GateCircuit.from_json_dict(data["D"]))

    @staticmethod
    def from_json(text: str) -> "UhlmannInstance":
        return UhlmannInstance.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class CompletionChannel:
    """Unitary channel completion of a partial isometry."""

    unitary: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.unitary, dtype=complex).copy()
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)

    def check_completes(self, w: PartialIsometryOp, atol: float = 1e-9) -> None:
        if not linalg.is_unitary(self.unitary, atol):
            raise ValueError("completion is not unitary")
        err = np.linalg.norm(self.unitary @ w.support_projector - w.matrix, ord=np.inf)
        if err > atol:
            raise ValueError(f"completion does not agree with W on its support: {err:.3g}")


def validate_instance(x: UhlmannInstance) -> dict:
    """Reduced-state fidelity and dimensions: {kappa, dA, dB}."""
    psi, phi = x.states()
    kappa = fidelity(psi.reduced_a(), phi.reduced_a())
    return {"kappa": kappa, "dA": x.dA, "dB": x.dB}


def cross_operator(x: UhlmannInstance) -> np.ndarray:
    """Tr_A |phi><psi|, the dB x dB operator the canonical isometry thresholds."""
    psi, phi = x.states()
    # [Tr_A |phi><psi|]_{b b'} = sum_a phi_{ab} conj(psi_{a b'})
    return phi.as_matrix().T @ psi.as_matrix().conj()


def canonical_uhlmann(x: UhlmannInstance, eta: float = 0.0) -> PartialIsometryOp:
    """The canonical cutoff-eta Uhlmann partial isometry for (|C>, |D>)."""
    return sgn_eta(cross_operator(x), eta)


def unitary_completion(w: PartialIsometryOp) -> CompletionChannel:
    """Polar completion: from a full SVD W = U S V^dag, the unitary U V^dag."""
    if w.polar is not None:
        return CompletionChannel(w.polar)
    if w.matrix.shape[0] != w.matrix.shape[1]:
        raise DimensionMismatch("only square partial isometries have unitary completions")
    u, _, vh = np.linalg.svd(w.matrix)
    return CompletionChannel(u @ vh)


def apply_uhlmann(x: UhlmannInstance, eta: float, target: BipartiteState) -> BipartiteState:
    """Coherently apply the unitary completion of W to the B payload of ``target``.

    ``target`` is any joint pure state whose second register has dimension dB;
    the first register rides along untouched.
    """
    if target.dB != x.dB:
        raise DimensionMismatch(f"target B dimension {target.dB}, instance needs {x.dB}")
    w = canonical_uhlmann(x, eta)
    u = unitary_completion(w).unitary
    out = (target.as_matrix() @ u.T).reshape(-1)
    return BipartiteState(out, target.split)


def pad_instance(x: UhlmannInstance, alpha: float) -> UhlmannInstance:
    """Mix each state with a flag-orthogonal branch to raise the fidelity.

    Returns the raw instance with states
        |E> = sqrt(alpha)|0>|C>|0> + sqrt(1-alpha)|1>|1...1>|1>
    (and likewise |F>), split ((2 dA, 2 dB)). The reduced states are
    block-diagonal along the flag, so the padded fidelity is exactly
        (alpha*sqrt(kappa) + 1 - alpha)^2
    in the squared convention; to reach a target kappa_2 choose
    alpha <= (1 - sqrt(kappa_2)) / (1 - sqrt(kappa_1)).
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    psi, phi = x.states()
    dA, dB = x.split

    def padded(state: BipartiteState) -> BipartiteState:
        # Register order (a, A, B, b) regrouped as A' = (a, A), B' = (B, b).
        amp = np.zeros((2, dA, dB, 2), dtype=complex)
        amp[0, :, :, 0] = np.sqrt(alpha) * state.as_matrix()
        amp[1, dA - 1, dB - 1, 1] = np.sqrt(1.0 - alpha)
        return BipartiteState(amp.reshape(-1), (2 * dA, 2 * dB))

    return UhlmannInstance(raw_pair=(padded(psi), padded(phi)))


# ---------------------------------------------------------------------------
# Instance generators used by tests, experiments and the CLI.

def random_raw_instance(dA: int, dB: int, seed) -> UhlmannInstance:
    """Independent Haar pair with the given split."""
    rng = as_seed(seed).child("raw-instance").generator()
    psi = BipartiteState(haar_state_vector(dA * dB, rng), (dA, dB))
    phi = BipartiteState(haar_state_vector(dA * dB, rng), (dA, dB))
    return UhlmannInstance(raw_pair=(psi, phi))


def instance_with_fidelity(kappa: float, dA: int, dB: int, seed) -> UhlmannInstance:
    """Instance with reduced-state fidelity exactly kappa, rotated by random locals.

    Base pair: psi = |00>, phi = sqrt(kappa)|00> + sqrt(1-kappa)|11>, then a
    common local unitary U_A ⊗ U_B (which leaves kappa invariant).
    """
    if not (0.0 <= kappa <= 1.0):
        raise ValueError("kappa must lie in [0, 1]")
    if min(dA, dB) < 2 and kappa < 1.0:
        raise DimensionMismatch("need dA, dB >= 2 for kappa < 1")
    rng = as_seed(seed).child("fid-instance").generator()
    psi = np.zeros((dA, dB), dtype=complex)
    phi = np.zeros((dA, dB), dtype=complex)
    psi[0, 0] = 1.0
    phi[0, 0] = np.sqrt(kappa)
    if kappa < 1.0:
        phi[1, 1] = np.sqrt(1.0 - kappa)
    ua = haar_unitary(dA, rng)
    ub = haar_unitary(dB, rng)
    psi = ua @ psi @ ub.T
    phi = ua @ phi @ ub.T
    return UhlmannInstance(raw_pair=(BipartiteState(psi.reshape(-1), (dA, dB)),
                                     BipartiteState(phi.reshape(-1), (dA, dB))))


def overlap_instance(kappa: float, overlap: float, seed) -> UhlmannInstance:
    """Qubit-qubit instance with reduced fidelity kappa and |<D|C>|^2 = overlap.

    psi = |00>, phi = a|00> + b|01> + c|11| with a^2 = overlap,
    a^2 + b^2 = kappa. Requires overlap <= kappa.
    """
    if not (0.0 <= overlap <= kappa <= 1.0):
        raise ValueError("need 0 <= overlap <= kappa <= 1")
    rng = as_seed(seed).child("overlap-instance").generator()
    a = np.sqrt(overlap)
    b = np.sqrt(kappa - overlap)
    c = np.sqrt(1.0 - kappa)
    psi = np.zeros((2, 2), dtype=complex)
    phi = np.zeros((2, 2), dtype=complex)
    psi[0, 0] = 1.0
    phi[0, 0] = a
    phi[0, 1] = b
    phi[1, 1] = c
    ua = haar_unitary(2, rng)
    psi = ua @ psi
    phi = ua @ phi
    return UhlmannInstance(raw_pair=(BipartiteState(psi.reshape(-1), (2, 2)),
                                     BipartiteState(phi.reshape(-1), (2, 2))))


def qutrit_example(eps: float = 0.01) -> tuple:
    """The two-qutrit cutoff-instability pair: (psi, psi_tilde, phi = psi)."""
    psi = np.zeros((3, 3), dtype=complex)
    psi[0, 0] = np.sqrt(1 - eps)
    psi[1, 1] = np.sqrt(eps / 2)
    psi[2, 2] = np.sqrt(eps / 2)
    tilde = np.zeros((3, 3), dtype=complex)
    tilde[0, 0] = np.sqrt(1 - eps)
    tilde[1, 2] = np.sqrt(eps / 2)
    tilde[2, 1] = np.sqrt(eps / 2)
    mk = lambda m: BipartiteState(m.reshape(-1), (3, 3))
    return mk(psi), mk(tilde), mk(psi.copy())
