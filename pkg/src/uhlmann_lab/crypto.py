"""Canonical quantum bit commitments: security metrics, transformations, and
Uhlmann-derived attacks.

A scheme is a pair of circuits (or raw states) producing |psi_b> on a fixed
qubit set, with a designated commit register C sent to the receiver; the
reveal register R is the complement. Statistical security is what the
simulator certifies: hiding is the Helstrom trace distance and binding the
Uhlmann fidelity of the commit-register reduced states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, check_pure_cap
from .qcore import linalg
from .qcore.channels import ChannelDesc, apply_to_first
from .qcore.gates import GateCircuit, random_circuit
from .qcore.metrics import fidelity, trace_distance
from .qcore.states import BipartiteState, DensityOp
from .rng import as_seed
from .uhlmann import UhlmannInstance, canonical_uhlmann, unitary_completion


@dataclass(frozen=True)
class CommitmentScheme:
    """Commitment circuits C0, C1 with a commit-register qubit set.

    Either circuit-form (C0, C1 on n_qubits) or raw-form (state vectors with
    an explicit (d_commit, d_reveal) factorization, commit register first).
    """

    C0: Optional[GateCircuit] = None
    C1: Optional[GateCircuit] = None
    commit_registers: Optional[tuple] = None
    raw_states: Optional[tuple] = None   # (psi0, psi1) with split (dC, dR)

    def __post_init__(self):
        if self.raw_states is not None:
            s0, s1 = self.raw_states
            if s0.split != s1.split:
                raise DimensionMismatch("raw commitment states must share a split")
        else:
            if self.C0 is None or self.C1 is None or self.commit_registers is None:
                raise ValueError("circuit scheme needs C0, C1 and commit_registers")
            if self.C0.n_qubits != self.C1.n_qubits:
                raise DimensionMismatch("C0 and C1 act on different qubit counts")
            commit = tuple(sorted(int(q) for q in self.commit_registers))
            object.__setattr__(self, "commit_registers", commit)
            n = self.C0.n_qubits
            if any(q < 0 or q >= n for q in commit) or len(set(commit)) != len(commit):
                raise DimensionMismatch(f"bad commit registers {commit}")
            if len(commit) in (0, n):
                raise DimensionMismatch("commit/reveal registers must partition the qubits")

    @property
    def split(self) -> tuple:
        """(d_commit, d_reveal)."""
        if self.raw_states is not None:
            return self.raw_states[0].split
        n = self.C0.n_qubits
        k = len(self.commit_registers)
        return (2 ** k, 2 ** (n - k))

    def states(self) -> tuple:
        """(psi_0, psi_1) ordered (commit, reveal)."""
        if self.raw_states is not None:
            return self.raw_states
        n = self.C0.n_qubits
        commit = list(self.commit_registers)
        reveal = [q for q in range(n) if q not in commit]
        perm = commit + reveal
        out = []
        for circ in (self.C0, self.C1):
            vec = linalg.permute_registers_vec(circ.state(), [2] * n, perm)
            out.append(BipartiteState(vec, self.split))
        return tuple(out)

    def to_json_dict(self) -> dict:
        if self.raw_states is not None:
            enc = lambda v: [[float(c.real), float(c.imag)] for c in v]
            s0, s1 = self.raw_states
            return {"raw": {"dC": s0.dA, "dR": s0.dB,
                            "psi0": enc(s0.amplitudes), "psi1": enc(s1.amplitudes)}}
        return {"C0": self.C0.to_json_dict(), "C1": self.C1.to_json_dict(),
                "commit": list(self.commit_registers)}

    @staticmethod
    def from_json_dict(data: dict) -> "CommitmentScheme":
        if "raw" in data:
            raw = data["raw"]
            dec = lambda pairs: np.array([complex(re, im) for re, im in pairs])
            split = (int(raw["dC"]), int(raw["dR"]))
            return CommitmentScheme(raw_states=(
                BipartiteState(dec(raw["psi0"]), split),
                BipartiteState(dec(raw["psi1"]), split)))
        return CommitmentScheme(C0=GateCircuit.from_json_dict(data["C0"]),
                                C1=GateCircuit.from_json_dict(data["C1"]),
                                commit_registers=tuple(data["commit"]))


@dataclass(frozen=True)
class SecurityReport:
    hiding_stat: float
    binding_opt: float
    binding_attack: Optional[float] = None


def evaluate(scheme: CommitmentScheme, attack=None) -> SecurityReport:
    """Hiding (trace distance) and binding (fidelity) of the commit-register
    reduced states, plus the fidelity achieved by a supplied reveal-register
    attack channel or unitary."""
    s0, s1 = scheme.states()
    rho0, rho1 = s0.reduced_a(), s1.reduced_a()
    hiding = trace_distance(rho0, rho1)
    binding = fidelity(rho0, rho1)
    attack_fid = None
    if attack is not None:
        attack_fid = binding_attack_fidelity(scheme, attack)
    return SecurityReport(hiding, binding, attack_fid)


def binding_attack_fidelity(scheme: CommitmentScheme, attack) -> float:
    """F((A ⊗ id_C)(psi_0), psi_1) for an attack on the reveal register."""
    s0, s1 = scheme.states()
    dC, dR = s0.split
    if isinstance(attack, np.ndarray):
        if attack.shape != (dR, dR):
            raise DimensionMismatch(f"attack shape {attack.shape}, reveal dim {dR}")
        out = BipartiteState((s0.as_matrix() @ attack.T).reshape(-1), s0.split)
        return fidelity(out.density(), s1.density())
    if isinstance(attack, ChannelDesc):
        if attack.d_in != dR or attack.d_out != dR:
            raise DimensionMismatch(
                f"attack maps {attack.d_in}->{attack.d_out}, reveal dim {dR}")
        # Channel acts on the reveal register: flip to (R, C), apply, flip back.
        flipped = DensityOp(
            linalg.permute_registers_dm(s0.density().matrix, s0.split, [1, 0]),
            (dR, dC))
        out = apply_to_first(attack, flipped)
        back = linalg.permute_registers_dm(out.matrix, out.dims, [1, 0])
        return fidelity(DensityOp(back, s0.split), s1.density())
    raise DimensionMismatch("attack must be a unitary matrix or ChannelDesc")


def optimal_binding_attack(scheme: CommitmentScheme) -> np.ndarray:
    """The canonical Uhlmann completion on the reveal register (optimal attack)."""
    s0, s1 = scheme.states()
    # Uhlmann instance with untouched register C first, acted register R second.
    x = UhlmannInstance(raw_pair=(s0, s1))
    return unitary_completion(canonical_uhlmann(x, 0.0)).unitary


def flavor_switch(scheme: CommitmentScheme) -> CommitmentScheme:
    """Exchange which security property is statistical: the switched scheme
    commits to b via |psi'_b> = (|0>|psi_0> + (-1)^b |1>|psi_1>)/sqrt(2) with
    commit register C' = R ∪ {flag} and reveal register R' = C.

    Returned in raw-state form ordered (C', R') = ((flag, R), C); the exact
    superposition amplitudes are not expressible in the discrete gate set.
    """
    s0, s1 = scheme.states()
    dC, dR = s0.split
    out_states = []
    for b in (0, 1):
        amp = np.zeros((2, dC, dR), dtype=complex)
        amp[0] = s0.as_matrix() / np.sqrt(2)
        amp[1] = ((-1) ** b) * s1.as_matrix() / np.sqrt(2)
        # (flag, C, R) -> (flag, R, C); C' = (flag, R), R' = C.
        vec = linalg.permute_registers_vec(amp.reshape(-1), [2, dC, dR], [0, 2, 1])
        out_states.append(BipartiteState(vec, (2 * dR, dC)))
    return CommitmentScheme(raw_states=tuple(out_states))


def tensor_amplify(scheme: CommitmentScheme, k: int) -> CommitmentScheme:
    """k-fold tensor scheme; binding fidelity is raised to the k-th power."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return scheme
    if scheme.raw_states is None:
        n = scheme.C0.n_qubits
        gates0, gates1 = [], []
        commit = []
        for copy in range(k):
            gates0 += [(g, tuple(q + copy * n for q in qs)) for g, qs in scheme.C0.gates]
            gates1 += [(g, tuple(q + copy * n for q in qs)) for g, qs in scheme.C1.gates]
            commit += [q + copy * n for q in scheme.commit_registers]
        check_pure_cap(2 ** (n * k), "amplified commitment")
        return CommitmentScheme(C0=GateCircuit(n * k, tuple(gates0)),
                                C1=GateCircuit(n * k, tuple(gates1)),
                                commit_registers=tuple(commit))
    s0, s1 = scheme.raw_states
    dC, dR = s0.split
    check_pure_cap((dC * dR) ** k, "amplified commitment")

    def fold(state: BipartiteState) -> BipartiteState:
        vec = np.array([1.0 + 0j])
        for _ in range(k):
            vec = np.kron(vec, state.amplitudes)
        inter = [dC, dR] * k
        order = list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2))
        vec = linalg.permute_registers_vec(vec, inter, order)
        return BipartiteState(vec, (dC ** k, dR ** k))

    return CommitmentScheme(raw_states=(fold(s0), fold(s1)))


def commitment_from_instance(x: UhlmannInstance) -> CommitmentScheme:
    """C_b := the instance circuits with commit register = the first n qubits.

    Fidelity-kappa instances give hiding_stat <= sqrt(1 - kappa) and
    binding_opt = kappa.
    """
    if x.raw_pair is not None:
        return CommitmentScheme(raw_states=x.raw_pair)
    return CommitmentScheme(C0=x.C, C1=x.D,
                            commit_registers=tuple(range(x.n)))


def random_scheme(n_commit: int, n_reveal: int, n_gates: int, seed) -> CommitmentScheme:
    rng = as_seed(seed).child("scheme").generator()
    n = n_commit + n_reveal
    return CommitmentScheme(C0=random_circuit(n, n_gates, rng),
                            C1=random_circuit(n, n_gates, rng),
                            commit_registers=tuple(range(n_commit)))


# ---------------------------------------------------------------------------
# Cloning attacks on real-valued, clean-output keyed state families

def clone_attack_states(family: Sequence[np.ndarray], lam: int,
                        adversary: np.ndarray) -> dict:
    """Build the cloning Uhlmann instance for a keyed state family.

    ``family`` lists the 2^lam pure states |phi_k>; ``adversary`` is the
    row-stochastic matrix eps[k, k'] of inversion probabilities. Returns
    {"instance", "kappa_lower"} where
        kappa_lower = |2^-lam sum_{k,k'} eps[k,k'] <phi_k|phi_k'>^2|^2
    lower-bounds the instance fidelity. All pairwise inner products must be
    real (checked), the clean-output premise.
    """
    n_keys = 2 ** lam
    if len(family) != n_keys:
        raise DimensionMismatch(f"family has {len(family)} states, expected {n_keys}")
    states = [np.asarray(v, dtype=complex).reshape(-1) for v in family]
    d = states[0].shape[0]
    if any(s.shape[0] != d for s in states):
        raise DimensionMismatch("family states must share a dimension")
    gram = np.array([[np.vdot(a, b) for b in states] for a in states])
    if np.abs(gram.imag).max() > 1e-10:
        raise ValueError("family is not real-valued: complex pairwise inner products")
    eps = np.asarray(adversary, dtype=float)
    if eps.shape != (n_keys, n_keys):
        raise DimensionMismatch(f"adversary shape {eps.shape}, expected {(n_keys,) * 2}")
    if np.abs(eps.sum(axis=1) - 1.0).max() > 1e-9 or eps.min() < -1e-12:
        raise ValueError("adversary rows must be probability distributions")
    d_b = d * n_keys * d * d
    check_pure_cap(n_keys * d_b, "cloning instance")

    # Registers (K | S, K', T) with T = two clone slots.
    c_amp = np.zeros((n_keys, d, n_keys, d, d), dtype=complex)
    d_amp = np.zeros((n_keys, d, n_keys, d, d), dtype=complex)
    for k, phi in enumerate(states):
        c_amp[k, :, 0, 0, 0] = phi / np.sqrt(n_keys)
        d_amp[k, :, 0, :, :] += np.einsum("s,t,u->stu", phi, phi, phi) / np.sqrt(n_keys)
    psi = BipartiteState(c_amp.reshape(-1), (n_keys, d_b))
    phi_state = BipartiteState(d_amp.reshape(-1), (n_keys, d_b))
    instance = UhlmannInstance(raw_pair=(psi, phi_state))

    overlap = (eps * (gram.real ** 2)).sum() / n_keys
    return {"instance": instance, "kappa_lower": float(overlap ** 2)}


def clone_fidelity(result: dict) -> float:
    """Average 3-copy fidelity achieved by the canonical Uhlmann attack.

    Applies the unitary completion to |C>, measures the key register, and
    averages F(output_k, |phi_k>^{⊗3}) over outcomes.
    """
    from .uhlmann import apply_uhlmann
    x = result["instance"]
    psi, phi = x.states()
    out = apply_uhlmann(x, 0.0, psi)
    target = phi.as_matrix()
    got = out.as_matrix()
    total = 0.0
    for k in range(x.dA):
        p_k = float(np.real(got[k].conj() @ got[k]))
        if p_k < 1e-15:
            continue
        t = target[k] / np.linalg.norm(target[k])
        total += abs(np.vdot(t, got[k])) ** 2 / 1.0
    return float(total)
