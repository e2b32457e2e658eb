"""Channel decodability, decoupling, one-shot entropies, and compression.

The decoder and compression codecs are built from canonical Uhlmann
transformations between explicitly constructed purifications, exactly
mirroring the existence proofs they come from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, check_density_cap, check_pure_cap
from .qcore import linalg
from .qcore.channels import ChannelDesc, apply_to_first, complementary, run_channel
from .qcore.gates import GateCircuit
from .qcore.metrics import fidelity, trace_distance
from .qcore.random_ops import haar_state_vector, random_clifford
from .qcore.states import BipartiteState, DensityOp, maximally_entangled, partial_trace
from .rng import Seed, as_seed
from .uhlmann import UhlmannInstance, canonical_uhlmann, unitary_completion


# ---------------------------------------------------------------------------
# One-shot entropies

@dataclass(frozen=True)
class EntropyReport:
    h_min: float
    h_max: float
    h2_lower: float
    h_max_smoothed: float
    epsilon: float


def entropies(rho: DensityOp, epsilon: float = 0.0) -> EntropyReport:
    """Unconditional min/max entropies plus a particular-sigma Renyi-2 value.

    For two-register inputs the Renyi-2 entry conditions the first register
    on the second, evaluated at sigma = rho_B (a lower bound on H_2(A|B)).
    The smoothed max-entropy drops the smallest-eigenvalue tail of mass at
    most epsilon and renormalizes, which upper-bounds the true smoothed
    value.
    """
    if not (0.0 <= epsilon < 1.0):
        raise ValueError("epsilon must lie in [0, 1)")
    vals = np.clip(np.linalg.eigvalsh(linalg.hermitize(rho.matrix)), 0.0, None)
    h_min = -math.log2(vals.max())
    h_max = 2.0 * math.log2(np.sqrt(vals).sum())
    if len(rho.dims) >= 2:
        sigma = partial_trace(rho, list(range(1, len(rho.dims)))).matrix
        h2 = h2_conditional(rho.matrix, (rho.dims[0], rho.dim // rho.dims[0]), sigma)
    else:
        h2 = -math.log2(float(np.real(np.trace(rho.matrix @ rho.matrix))))
    h_max_smoothed = smoothed_h_max(vals, epsilon)
    return EntropyReport(float(h_min), float(h_max), float(h2),
                         float(h_max_smoothed), float(epsilon))


def smoothed_h_max(eigenvalues: np.ndarray, epsilon: float) -> float:
    """Max-entropy after truncating the smallest-eigenvalue tail of mass <= epsilon."""
    vals = np.sort(np.clip(eigenvalues, 0.0, None))
    cum = np.cumsum(vals)
    keep = vals[cum > epsilon] if epsilon > 0 else vals
    keep = keep / keep.sum()
    return 2.0 * math.log2(np.sqrt(keep).sum())


def h2_conditional(mat: np.ndarray, split, sigma: np.ndarray) -> float:
    """H_2(A|B) evaluated at a particular sigma: -log2 Tr[((id ⊗ sigma)^{-1/2} rho)^2].

    Support-restricted inverse; a lower bound on the optimized H_2.
    """
    dA, dB = split
    inv_root = linalg.psd_power(sigma, -0.5)
    big = np.kron(np.eye(dA), inv_root)
    x = big @ mat
    val = float(np.real(np.trace(x @ x)))
    return -math.log2(max(val, 1e-300))


# ---------------------------------------------------------------------------
# Decoupling and decoding

def decoupling_fidelity(ch: ChannelDesc) -> float:
    """F(N^c(Phi_AR), N^c(id/dA) ⊗ id/dR) via the complementary channel."""
    comp = complementary(ch)
    dA = ch.d_in
    phi = maximally_entangled(dA)
    joint = apply_to_first(comp, phi)  # registers (env, R)
    marg = run_channel(comp, DensityOp(np.eye(dA) / dA, (dA,)))
    product = np.kron(marg.matrix, np.eye(dA) / dA)
    return fidelity(joint.matrix, product)


def _decoder_instance(ch: ChannelDesc):
    """The purification pair (|E>, |F>) split as ((C, R) | (B, A', R'))."""
    dA, dB, dC = ch.d_in, ch.d_out, ch.d_env
    check_pure_cap(dC * dA * dB * dA * dA, "decoder instance")
    iso = ch.isometry()  # columns indexed by A: |a> -> (B, C)
    # |E> on (R, B, C, A', R'): V on the A half of Phi_RA, ancillas |0>.
    e = np.zeros((dA, dB * dC, dA, dA), dtype=complex)  # (R, BC, A', R')
    for r in range(dA):
        e[r, :, 0, 0] = iso[:, r] / np.sqrt(dA)
    e = linalg.permute_registers_vec(
        e.reshape(-1), [dA, dB, dC, dA, dA], [2, 0, 1, 3, 4])
    # |F> = Phi_{R A'} ⊗ V|Phi_{A R'}> on (R, A', B, C, R').
    f = np.zeros((dA, dA, dB * dC, dA), dtype=complex)  # (R, A', BC, R')
    for r in range(dA):
        for rp in range(dA):
            f[r, r, :, rp] = iso[:, rp] / dA
    f = linalg.permute_registers_vec(
        f.reshape(-1), [dA, dA, dB, dC, dA], [3, 0, 2, 1, 4])
    split = (dC * dA, dB * dA * dA)
    return (BipartiteState(e, split), BipartiteState(f, split))


def decoder_from_uhlmann(ch: ChannelDesc) -> dict:
    """Decoder channel for a decodable channel, via the canonical Uhlmann
    unitary between the two standard purifications; reports the achieved
    fidelity F((D ∘ N)(Phi_AR), Phi_A'R)."""
    dA, dB, dC = ch.d_in, ch.d_out, ch.d_env
    psi, phi = _decoder_instance(ch)
    x = UhlmannInstance(raw_pair=(psi, phi))
    u = unitary_completion(canonical_uhlmann(x, 0.0)).unitary
    # Decoder: input B; append |0>_{A'R'}; apply u on (B, A', R'); keep A'.
    perm = linalg.permutation_matrix([dB, dA, dA], [1, 0, 2])
    decoder = ChannelDesc(perm @ u, dB, dA * dA, (dA, dB * dA))
    sent = apply_to_first(ch, maximally_entangled(dA))
    out = apply_to_first(decoder, sent)
    fid = fidelity(out.matrix, maximally_entangled(dA).density().matrix)
    return {"decoder": decoder, "fidelity": float(fid)}


def commitment_channel(scheme) -> ChannelDesc:
    """The qubit channel |b> -> Tr_XB(|theta_b><theta_b|) whose decodability
    mirrors the commitment's binding.

    |theta_b> = 2^{-1/2} sum_a X^a|b> ⊗ |a> ⊗ |psi_a> with output registers
    (A, E = commit register) and environment (X, B = reveal register).
    """
    s0, s1 = scheme.states()
    dC, dR = s0.split
    d_total = 2 * 2 * dC * dR
    check_density_cap(d_total, "commitment channel dilation")
    x_gate = np.array([[0, 1], [1, 0]], dtype=complex)
    # Isometry |b>|0,0,0> -> (A, X, C, R) amplitudes.
    cols = np.zeros((d_total, 2), dtype=complex)
    for b in (0, 1):
        amp = np.zeros((2, 2, dC, dR), dtype=complex)
        for a, state in ((0, s0), (1, s1)):
            vb = np.zeros(2, dtype=complex)
            vb[b] = 1.0
            vb = np.linalg.matrix_power(x_gate, a) @ vb
            amp[:, a, :, :] += np.einsum("i,cr->icr", vb, state.as_matrix()) / np.sqrt(2)
        cols[:, b] = amp.reshape(-1)
    from .qcore.channels import dilation_from_isometry
    dilation = dilation_from_isometry(cols, 2, d_total // 2)
    # Output registers (A, X, C, R) -> out (A, C), env (X, R).
    perm = linalg.permutation_matrix([2, 2, dC, dR], [0, 2, 1, 3])
    return ChannelDesc(perm @ dilation, 2, d_total // 2, (2 * dC, 2 * dR))


def decoupling_experiment(rho: DensityOp, s: int, samples: int, seed) -> dict:
    """Sampled-Clifford decoupling: measure the first n-s qubits of A.

    lhs_mean is the sampled average of ||(T ∘ U)(rho_AB) - omega_E ⊗ rho_B||_1;
    rhs_bound is the relaxed particular-sigma Renyi-2 bound
    2^{-(s + h2(A|B))/2}.
    """
    dA = rho.dims[0]
    n = int(round(math.log2(dA)))
    if 2 ** n != dA:
        raise DimensionMismatch("register A must be a qubit register")
    if not (0 <= s <= n):
        raise ValueError(f"s must lie in 0..{n}")
    dB = rho.dim // dA
    rho_b = linalg.partial_trace_matrix(rho.matrix, [dA, dB], [1])
    h2_ab = h2_conditional(rho.matrix, (dA, dB), rho_b)
    rhs = 2.0 ** (-0.5 * s - 0.5 * h2_ab)
    d_e = 2 ** (n - s)
    target = np.kron(np.eye(d_e) / d_e, rho_b)
    seed = as_seed(seed)
    vals = []
    for trial in range(samples):
        u = random_clifford(n, seed.child("decouple", trial))
        conj = linalg.apply_matrix_to_registers_dm(rho.matrix, [dA, dB], u, [0])
        # T: measure first n-s qubits of A, trace the remaining s.
        blocks = conj.reshape(d_e, 2 ** s, dB, d_e, 2 ** s, dB)
        out = np.zeros((d_e, dB, d_e, dB), dtype=complex)
        for y in range(d_e):
            out[y, :, y, :] = np.trace(blocks[y, :, :, y, :, :], axis1=0, axis2=2)
        out = out.reshape(d_e * dB, d_e * dB)
        diff = np.linalg.eigvalsh(linalg.hermitize(out - target))
        vals.append(float(np.abs(diff).sum()))
    vals = np.array(vals)
    sem = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return {"lhs_mean": float(vals.mean()), "rhs_bound": float(rhs),
            "stderr": sem, "h2_ab": float(h2_ab), "samples": samples}


# ---------------------------------------------------------------------------
# One-shot compression

@dataclass(frozen=True)
class CompressionCodec:
    encoder: ChannelDesc
    decoder: ChannelDesc
    s: int
    n: int
    y_star: int
    clifford_seed: Seed

    def to_json_dict(self) -> dict:
        from .qcore.channels import channel_to_json_dict
        return {"encoder": channel_to_json_dict(self.encoder),
                "decoder": channel_to_json_dict(self.decoder),
                "s": self.s, "n": self.n, "y_star": self.y_star,
                "clifford_seed": self.clifford_seed.value}

    @staticmethod
    def from_json_dict(data: dict) -> "CompressionCodec":
        from .qcore.channels import channel_from_json_dict
        return CompressionCodec(channel_from_json_dict(data["encoder"]),
                                channel_from_json_dict(data["decoder"]),
                                int(data["s"]), int(data["n"]),
                                int(data["y_star"]), Seed(int(data["clifford_seed"])))


def _source_state(source, seed=None) -> DensityOp:
    if isinstance(source, DensityOp):
        return source
    if isinstance(source, GateCircuit):
        vec = source.state()
        return DensityOp(np.outer(vec, vec.conj()), (source.dim,))
    raise DimensionMismatch("source must be a DensityOp or GateCircuit")


def compress(source, delta: float, seed, s: Optional[int] = None) -> CompressionCodec:
    """Build the one-shot codec: a sampled Clifford, the best measurement
    branch y*, and encoder/decoder from the Uhlmann completions between the
    two purifications of the decoupling output.

    The default rate is s = ceil(h_max_smoothed + 8 log2(4/delta)) clamped to
    [0, n] (the smoothing is (delta/40)^4); pass ``s`` to override.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    rho = _source_state(source)
    n = int(round(math.log2(rho.dim)))
    if 2 ** n != rho.dim:
        raise DimensionMismatch("source must be a qubit state")
    seed = as_seed(seed)
    if s is None:
        eps = (delta / 40.0) ** 4
        rep = entropies(DensityOp(rho.matrix, (rho.dim,)), eps)
        s = int(np.clip(math.ceil(rep.h_max_smoothed + 8 * math.log2(4.0 / delta)),
                        0, n))
    if not (0 <= s <= n):
        raise ValueError(f"s must lie in 0..{n}")
    d, d_c, d_e = 2 ** n, 2 ** s, 2 ** (n - s)
    purif = rho.purify()           # (A, R) with dR = d
    d_r = purif.dB
    check_pure_cap(d_e * d_e * d * d_r, "compression instance")
    u = random_clifford(n, seed.child("compress-clifford")) if n > 0 else np.eye(1)

    # |F> = |Phi_{E E'}> ⊗ |rho_{A R}> on (E, E', A, R).
    phi_ee = maximally_entangled(d_e).amplitudes if d_e > 1 else np.array([1.0 + 0j])
    f_vec = np.kron(phi_ee, purif.amplitudes)
    # |G> = sum_y |y>_E (Pi_y U ⊗ id)|rho> ⊗ |0>_{F0} on (E, [E'=y, C], R, F0).
    rotated = (u @ purif.as_matrix()).reshape(d_e, d_c, d_r)
    g = np.zeros((d_e, d_e, d_c, d_r, d_e), dtype=complex)
    for y in range(d_e):
        g[y, y, :, :, 0] = rotated[y]
    g_vec = g.reshape(-1)
    # Bipartite split: untouched (E, R) first, acted (E', A≅(E'path)) second.
    # F on (E, E', A, R) -> (E, R | E', A); G on (E, E', C, R, F0) -> (E, R | E', C, F0).
    f_vec = linalg.permute_registers_vec(f_vec, [d_e, d_e, d, d_r], [0, 3, 1, 2])
    g_vec = linalg.permute_registers_vec(g_vec, [d_e, d_e, d_c, d_r, d_e], [0, 3, 1, 2, 4])
    split = (d_e * d_r, d_e * d)
    x = UhlmannInstance(raw_pair=(BipartiteState(f_vec, split),
                                  BipartiteState(g_vec, split)))
    xi = unitary_completion(canonical_uhlmann(x, 0.0)).unitary  # on (E', A) -> (E', C, F0)

    alphas = np.linalg.norm(rotated.reshape(d_e, -1), axis=1) ** 2
    y_star = int(np.argmax(alphas))

    # Encoder: channel input A with ancilla E' = |y*>, so the dilated state is
    # ordered (A, E'); xi expects (E', A) and outputs (E', C, F0), reordered
    # to put the s-qubit register first.
    enc_in = linalg.permutation_matrix([d, d_e], [1, 0])
    enc_out = linalg.permutation_matrix([d_e, d_c, d_e], [1, 0, 2])
    encoder = ChannelDesc(enc_out @ xi @ enc_in, d, d_e, (d_c, d_e * d_e),
                          anc_state=y_star)
    # Decoder: input C with ancilla (E' = |y*>, F0 = |0>); xi^dag maps
    # (E', C, F0) back to (E', A); output order (A | E').
    dec_in = linalg.permutation_matrix([d_c, d_e, d_e], [1, 0, 2])
    dec_out = linalg.permutation_matrix([d_e, d], [1, 0])
    decoder = ChannelDesc(dec_out @ xi.conj().T @ dec_in, d_c, d_e * d_e, (d, d_e),
                          anc_state=y_star * d_e)
    return CompressionCodec(encoder, decoder, s, n, y_star, seed)


def roundtrip_bound(source, s: int, delta: float) -> float:
    """The codec contract max(delta, 20 nu^{1/4}) with nu from the decoupling
    bound 2^{-(s - h_max_smoothed)/2} + 8 eps, capped at 1."""
    rho = _source_state(source)
    eps = (delta / 40.0) ** 4
    rep = entropies(DensityOp(rho.matrix, (rho.dim,)), eps)
    nu = 2.0 ** (-0.5 * (s - rep.h_max_smoothed)) + 8 * eps
    return float(min(1.0, max(delta, 20.0 * nu ** 0.25)))


def roundtrip(codec: CompressionCodec, purification: BipartiteState) -> float:
    """td((D ∘ E)(psi), psi) for a supplied purification of the source."""
    check_density_cap(purification.dA * purification.dB, "roundtrip state")
    mid = apply_to_first(codec.encoder, purification)
    out = apply_to_first(codec.decoder, mid)
    return trace_distance(out.matrix, purification.density().matrix)


def haar_overlap(encoder: ChannelDesc, decoder: ChannelDesc, samples: int, seed) -> dict:
    """Monte-Carlo E_theta Tr((D ∘ E)(theta) theta) over Haar input states."""
    d = encoder.d_in
    rng = as_seed(seed).child("haar-overlap").generator()
    vals = np.empty(samples)
    for i in range(samples):
        theta = haar_state_vector(d, rng)
        mid = run_channel(encoder, DensityOp(np.outer(theta, theta.conj()), (d,)))
        out = run_channel(decoder, mid)
        vals[i] = float(np.real(theta.conj() @ out.matrix @ theta))
    r_over_m = decoder.d_in / d
    sem = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return {"overlap_mean": float(vals.mean()), "bound": float(r_over_m),
            "stderr": sem, "samples": samples}


def truncation_codec(m: int, s: int) -> tuple:
    """Hand-built codec: keep the first s qubits, pad with |0> on decode."""
    if not (0 <= s <= m):
        raise ValueError("need 0 <= s <= m")
    d, dc = 2 ** m, 2 ** s
    enc = ChannelDesc(np.eye(d, dtype=complex), d, 1, (dc, d // dc))
    dec = ChannelDesc(np.eye(d, dtype=complex), dc, d // dc, (d, 1))
    return enc, dec
