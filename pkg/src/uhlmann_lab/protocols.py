"""Interactive-protocol simulations built on Uhlmann transformations.

Includes the permutation-test verifier with zero-knowledge simulator, the
alternating-measurement hardness amplifier, density matrix exponentiation,
the Hadamard-test approximate measurement, and the oracle-assisted verifier
variant that replaces state preparation and verification with those
primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, check_density_cap, check_pure_cap
from .qcore import linalg
from .qcore.channels import ChannelDesc, apply_to_first
from .qcore.metrics import trace_distance
from .qcore.states import BipartiteState, DensityOp
from .rng import Seed, as_seed
from .uhlmann import UhlmannInstance, apply_uhlmann, canonical_uhlmann, unitary_completion


# ---------------------------------------------------------------------------
# Prover strategies

@dataclass(frozen=True)
class ProverStrategy:
    """What the prover does to the B-register block it receives.

    Product provers act on each received register slot independently
    (entry None = identity, an ndarray = a dB x dB unitary, or a
    ChannelDesc). Joint provers apply one unitary to the whole block plus a
    private ancilla.
    """

    label: str
    factors: Optional[tuple] = None
    joint_unitary: Optional[np.ndarray] = None
    joint_anc_dim: int = 1

    @staticmethod
    def honest(x: UhlmannInstance, m: int) -> "ProverStrategy":
        u = unitary_completion(canonical_uhlmann(x, 0.0)).unitary
        return ProverStrategy("honest", factors=tuple([u] * (m + 1)))

    @staticmethod
    def identity(m: int) -> "ProverStrategy":
        return ProverStrategy("identity", factors=tuple([None] * (m + 1)))

    @staticmethod
    def partial_honest(x: UhlmannInstance, m: int, count: int) -> "ProverStrategy":
        """Applies the honest unitary on ``count`` slots, identity elsewhere."""
        u = unitary_completion(canonical_uhlmann(x, 0.0)).unitary
        facs = [u] * count + [None] * (m + 1 - count)
        return ProverStrategy("custom", factors=tuple(facs))

    @staticmethod
    def joint(u: np.ndarray, anc_dim: int = 1, label: str = "custom") -> "ProverStrategy":
        return ProverStrategy(label, joint_unitary=np.asarray(u, dtype=complex),
                              joint_anc_dim=anc_dim)

    def is_product(self) -> bool:
        return self.factors is not None


@dataclass
class ProtocolResult:
    accepted: bool
    accept_prob: float
    output_state: Optional[DensityOp]
    transcript: list = field(default_factory=list)


def _factor_action(factor, psi: BipartiteState) -> DensityOp:
    """(id ⊗ factor)(|psi><psi|) for one register slot."""
    if factor is None:
        return psi.density()
    if isinstance(factor, ChannelDesc):
        flipped = DensityOp(
            linalg.permute_registers_dm(psi.density().matrix, psi.split, [1, 0]),
            (psi.dB, psi.dA))
        out = apply_to_first(factor, flipped)
        back = linalg.permute_registers_dm(out.matrix, out.dims, [1, 0])
        return DensityOp(back, (psi.dA, factor.d_out))
    u = np.asarray(factor, dtype=complex)
    out = (psi.as_matrix() @ u.T).reshape(-1)
    return BipartiteState(out, psi.split).density()


def _slot_metrics(prover: ProverStrategy, psi: BipartiteState, phi: BipartiteState):
    """Per-slot accept probability <D|(id ⊗ Psi_j)(C)|D> and output states."""
    outs, probs = [], []
    target = phi.amplitudes
    for factor in prover.factors:
        out = _factor_action(factor, psi)
        outs.append(out)
        probs.append(float(np.real(target.conj() @ out.matrix @ target)))
    return probs, outs


# ---------------------------------------------------------------------------
# The permutation-test protocol

def szk_run(x: UhlmannInstance, m: int, prover: ProverStrategy, seed) -> ProtocolResult:
    """One seeded run of the permutation-test verifier.

    Prepares m test copies of |C> next to the input copy, block-permutes the
    B registers, hands them to the prover, un-permutes, and accepts iff every
    test copy passes the D-basis check. The surviving register-0 pair is the
    output.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    psi, phi = x.states()
    rng = as_seed(seed).child("szk").generator()
    perm = rng.permutation(m + 1)
    transcript = []
    if prover.is_product():
        if len(prover.factors) != m + 1:
            raise DimensionMismatch(f"prover has {len(prover.factors)} factors, needs {m + 1}")
        probs, outs = _slot_metrics(prover, psi, phi)
        # Register i travels to slot position perm^{-1}(i); slot j holds register perm[j].
        j0 = int(np.argwhere(perm == 0)[0][0])
        accept_prob = float(np.prod([probs[j] for j in range(m + 1) if j != j0]))
        accepted = bool(rng.random() < accept_prob)
        out = outs[j0] if accepted else None
        transcript.append({"round": 1, "slot_of_input": j0,
                           "accept_prob": accept_prob, "accepted": accepted,
                           "output_td_to_target":
                               trace_distance(out, phi.density()) if accepted else None})
        return ProtocolResult(accepted, accept_prob, out, transcript)
    vec, dims = _szk_joint_state(psi, perm, m, prover)
    accept_prob, out = _szk_measure(vec, dims, phi, prover)
    accepted = bool(rng.random() < accept_prob)
    transcript.append({"round": 1, "perm": [int(p) for p in perm],
                       "accept_prob": accept_prob, "accepted": accepted,
                       "output_td_to_target":
                           trace_distance(out, phi.density())
                           if accepted and out is not None else None})
    return ProtocolResult(accepted, accept_prob, out if accepted else None, transcript)


def _szk_joint_state(psi: BipartiteState, perm, m: int, prover: ProverStrategy):
    """Dense path: axes [A_0..A_m, B_0..B_m, (anc)], prover applied via ``perm``."""
    dA, dB = psi.split
    total = (dA * dB) ** (m + 1) * prover.joint_anc_dim
    check_pure_cap(total, "joint protocol state")
    vec = np.array([1.0 + 0j])
    for _ in range(m + 1):
        vec = np.kron(vec, psi.amplitudes)
    inter = [dA, dB] * (m + 1)
    order = list(range(0, 2 * (m + 1), 2)) + list(range(1, 2 * (m + 1), 2))
    vec = linalg.permute_registers_vec(vec, inter, order)
    dims = [dA] * (m + 1) + [dB] * (m + 1)
    if prover.joint_anc_dim > 1:
        anc = np.zeros(prover.joint_anc_dim, dtype=complex)
        anc[0] = 1.0
        vec = np.kron(vec, anc)
        dims = dims + [prover.joint_anc_dim]
    b_axes = list(range(m + 1, 2 * (m + 1)))
    # Permute B registers: slot j <- register perm[j].
    axis_perm = list(range(len(dims)))
    for j, src in enumerate(perm):
        axis_perm[m + 1 + j] = m + 1 + int(src)
    vec = linalg.permute_registers_vec(vec, dims, axis_perm)
    targets = b_axes + ([len(dims) - 1] if prover.joint_anc_dim > 1 else [])
    vec = linalg.apply_matrix_to_registers(vec, dims, prover.joint_unitary, targets)
    inv = np.argsort(axis_perm)
    vec = linalg.permute_registers_vec(vec, dims, inv)
    return vec, dims


def _szk_measure(vec, dims, phi: BipartiteState, prover: ProverStrategy):
    """Project test copies onto |D>; return accept prob and conditional output."""
    m = (len(dims) - (1 if prover.joint_anc_dim > 1 else 0)) // 2 - 1
    dA, dB = phi.split
    has_anc = prover.joint_anc_dim > 1
    n_regs = len(dims)
    test_axes = [i for i in range(1, m + 1)] + [m + 1 + i for i in range(1, m + 1)]
    keep_axes = [0, m + 1] + ([n_regs - 1] if has_anc else [])
    order = keep_axes + test_axes
    work = linalg.permute_registers_vec(vec, dims, order)
    d_keep = int(np.prod([dims[a] for a in keep_axes], dtype=np.int64))
    work = work.reshape(d_keep, -1)
    target = np.array([1.0 + 0j])
    for _ in range(m):
        target = np.kron(target, phi.amplitudes)
    inter = [dA, dB] * m
    t_order = list(range(0, 2 * m, 2)) + list(range(1, 2 * m, 2))
    target = linalg.permute_registers_vec(target, inter, t_order)
    amp = work @ target.conj()
    p = float(np.real(amp.conj() @ amp))
    if p <= 1e-300:
        return 0.0, None
    amp = amp / np.sqrt(p)
    if has_anc:
        rho = np.outer(amp, amp.conj())
        rho = linalg.partial_trace_matrix(rho, [dA, dB, prover.joint_anc_dim], [0, 1])
        out = DensityOp(rho, (dA, dB))
    else:
        out = BipartiteState(amp, (dA, dB)).density()
    return p, out


def szk_conditional_output(x: UhlmannInstance, m: int, prover: ProverStrategy,
                           seed=0, samples: int = 0):
    """Exact average over the verifier permutation: (accept prob, conditional output).

    Product provers are averaged in closed form over the slot that receives
    the input register; joint provers are averaged over sampled permutations.
    """
    psi, phi = x.states()
    if prover.is_product():
        probs, outs = _slot_metrics(prover, psi, phi)
        weights, acc = [], 0.0
        for j in range(m + 1):
            w = float(np.prod([probs[i] for i in range(m + 1) if i != j]))
            weights.append(w)
            acc += w / (m + 1)
        total = sum(weights)
        mat = sum(w * o.matrix for w, o in zip(weights, outs)) / total
        return acc, DensityOp(mat, (psi.dA, psi.dB))
    rng = as_seed(seed).child("szk-cond").generator()
    samples = samples or 200
    acc, mat, wsum = 0.0, 0.0, 0.0
    for _ in range(samples):
        perm = rng.permutation(m + 1)
        vec, dims = _szk_joint_state(psi, perm, m, prover)
        p, out = _szk_measure(vec, dims, phi, prover)
        acc += p / samples
        if out is not None:
            mat = mat + p * out.matrix
            wsum += p
    return acc, DensityOp(mat / wsum, (psi.dA, psi.dB))


def szk_simulate(x: UhlmannInstance, m: int) -> DensityOp:
    """The zero-knowledge simulator output |D><D|^{⊗(m+1)}."""
    _, phi = x.states()
    d = (phi.dA * phi.dB) ** (m + 1)
    check_density_cap(d, "simulator state")
    vec = np.array([1.0 + 0j])
    for _ in range(m + 1):
        vec = np.kron(vec, phi.amplitudes)
    return DensityOp(np.outer(vec, vec.conj()), tuple([phi.dA * phi.dB] * (m + 1)))


def szk_honest_post_state(x: UhlmannInstance, m: int) -> DensityOp:
    """The verifier's joint state after the honest (unitary) prover round."""
    psi, phi = x.states()
    out = apply_uhlmann(x, 0.0, psi)
    d = (psi.dA * psi.dB) ** (m + 1)
    check_density_cap(d, "honest post state")
    vec = np.array([1.0 + 0j])
    for _ in range(m + 1):
        vec = np.kron(vec, out.amplitudes)
    return DensityOp(np.outer(vec, vec.conj()), tuple([psi.dA * psi.dB] * (m + 1)))


def szk_simulator_distance(x: UhlmannInstance, m: int) -> float:
    """td between simulator output and the honest post-round verifier state.

    Both states are pure products, so the distance follows from the
    single-copy overlap without building the joint matrices.
    """
    psi, phi = x.states()
    out = apply_uhlmann(x, 0.0, psi)
    ov = abs(np.vdot(phi.amplitudes, out.amplitudes)) ** 2
    return float(np.sqrt(max(0.0, 1.0 - ov ** (m + 1))))


# ---------------------------------------------------------------------------
# Hardness amplification

@dataclass(frozen=True)
class AmplifierConfig:
    k: int
    T: int
    seed: Seed

    def __post_init__(self):
        object.__setattr__(self, "seed", as_seed(self.seed))
        if self.k < 1 or self.T < 1:
            raise ValueError("k and T must be >= 1")


@dataclass(frozen=True)
class FoldedSolver:
    """Unitary extension R~ of a k-fold solver, acting on B^{⊗k} ⊗ G."""

    unitary: np.ndarray
    g_dim: int = 1


def amplification_bound(nu: float, T: int, k: int) -> float:
    """1 - (2(1-nu)^T + 32 T / sqrt(k)), clamped to [0, 1]."""
    if not (0.0 <= nu <= 1.0):
        raise ValueError("nu must lie in [0, 1]")
    val = 1.0 - (2.0 * (1.0 - nu) ** T + 32.0 * T / math.sqrt(k))
    return float(np.clip(val, 0.0, 1.0))


def exact_solver(x: UhlmannInstance, k: int) -> FoldedSolver:
    """R~ = (unitary completion)^{⊗k}, the exact transporter."""
    u = unitary_completion(canonical_uhlmann(x, 0.0)).unitary
    return FoldedSolver(linalg.kron_all([u] * k), 1)


def engineered_solver(x: UhlmannInstance, k: int, nu: float, junk: np.ndarray = None):
    """Solver with folded fidelity nu: exact transport on a cos-weighted branch.

    A one-qubit ancilla G is rotated to cos(t)|0> + sin(t)|1| with
    cos^2(t) = nu; controlled on G = 1 a junk unitary spoils the B block, and
    the exact transporter runs afterwards. Returns (solver, nu_actual) where
    nu_actual is the exactly computed folded fidelity.
    """
    psi, phi = x.states()
    dB = x.dB
    u = unitary_completion(canonical_uhlmann(x, 0.0)).unitary
    uk = linalg.kron_all([u] * k)
    if junk is None:
        # X on the first qubit of the first B register.
        if dB % 2 != 0:
            raise DimensionMismatch("default junk needs qubit B registers")
        xg = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(dB // 2))
        junk = linalg.kron_all([xg] + [np.eye(dB, dtype=complex)] * (k - 1))
    theta = math.acos(math.sqrt(nu))
    ry = np.array([[math.cos(theta), -math.sin(theta)],
                   [math.sin(theta), math.cos(theta)]], dtype=complex)
    dbk = dB ** k
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    cj = np.kron(np.eye(dbk), p0) + np.kron(junk, p1)
    rt = np.kron(uk, np.eye(2)) @ cj @ np.kron(np.eye(dbk), ry)
    solver = FoldedSolver(rt, 2)
    return solver, folded_fidelity(x, solver, k)


def folded_fidelity(x: UhlmannInstance, solver: FoldedSolver, k: int) -> float:
    """nu = F((id ⊗ R)(|C><C|^{⊗k}), |D><D|^{⊗k}) computed exactly."""
    psi, phi = x.states()
    v = _amp_initial(psi, k, solver.g_dim)
    dims = _amp_dims(psi, k, solver.g_dim)
    v = _apply_solver(v, dims, solver, k)
    dvec = _block_vector(phi, k)
    amp = _contract_blocks(v, dims, dvec, list(range(k)), k)
    return float(np.real(amp.conj() @ amp))


def _amp_dims(psi, k, g_dim):
    return [psi.dA] * k + [psi.dB] * k + [g_dim]


def _amp_initial(psi, k, g_dim):
    vec = np.array([1.0 + 0j])
    for _ in range(k):
        vec = np.kron(vec, psi.amplitudes)
    inter = [psi.dA, psi.dB] * k
    order = list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2))
    vec = linalg.permute_registers_vec(vec, inter, order)
    g = np.zeros(g_dim, dtype=complex)
    g[0] = 1.0
    return np.kron(vec, g)


def _apply_solver(vec, dims, solver: FoldedSolver, k, dagger=False):
    u = solver.unitary.conj().T if dagger else solver.unitary
    targets = list(range(k, 2 * k)) + [2 * k]
    return linalg.apply_matrix_to_registers(vec, dims, u, targets)


def _block_vector(state: BipartiteState, count: int) -> np.ndarray:
    """|state>^{⊗count} arranged as (A-block, B-block)."""
    vec = np.array([1.0 + 0j])
    for _ in range(count):
        vec = np.kron(vec, state.amplitudes)
    if count == 0:
        return vec
    inter = [state.dA, state.dB] * count
    order = list(range(0, 2 * count, 2)) + list(range(1, 2 * count, 2))
    return linalg.permute_registers_vec(vec, inter, order)


def _contract_blocks(vec, dims, block_vec, block_ids, k):
    """Contract conj(block_vec) against registers (A_j, B_j), j in block_ids."""
    axes = [j for j in block_ids] + [k + j for j in block_ids]
    rest = [a for a in range(len(dims)) if a not in axes]
    work = linalg.permute_registers_vec(vec, dims, axes + rest)
    d_b = int(np.prod([dims[a] for a in axes], dtype=np.int64))
    work = work.reshape(d_b, -1)
    return block_vec.conj() @ work


def _expand_blocks(amp, dims, block_vec, block_ids, k):
    """Inverse of _contract_blocks: tensor block_vec back in at the block axes."""
    axes = [j for j in block_ids] + [k + j for j in block_ids]
    rest = [a for a in range(len(dims)) if a not in axes]
    out = np.kron(block_vec, amp)
    order = axes + rest
    inv = np.argsort(order)
    return linalg.permute_registers_vec(out, [dims[a] for a in order], inv)


class _AmpProjector:
    """Rank-structured projector: |block><block| on given registers ⊗ (G filter)."""

    def __init__(self, block_vec, block_ids, k, dims, g_zero: bool,
                 pre=None, post=None):
        self.block_vec = block_vec
        self.block_ids = block_ids
        self.k = k
        self.dims = dims
        self.g_zero = g_zero
        self.pre = pre      # optional (solver, dagger) conjugation
        self.post = post

    def apply(self, vec):
        if self.pre is not None:
            vec = _apply_solver(vec, self.dims, self.pre[0], self.k, dagger=self.pre[1])
        amp = _contract_blocks(vec, self.dims, self.block_vec, self.block_ids, self.k)
        if self.g_zero:
            g_dim = self.dims[-1]
            amp = amp.reshape(-1, g_dim)
            keep = amp[:, 0].copy()
            amp = np.zeros_like(amp)
            amp[:, 0] = keep
            amp = amp.reshape(-1)
        out = _expand_blocks(amp, self.dims, self.block_vec, self.block_ids, self.k)
        if self.post is not None:
            out = _apply_solver(out, self.dims, self.post[0], self.k, dagger=self.post[1])
        return out


def _amp_projectors(x: UhlmannInstance, solver: FoldedSolver, k: int, i: int = None):
    """(P, Q) projector pair; i = None gives the full (hatted) projectors."""
    psi, phi = x.states()
    dims = _amp_dims(psi, k, solver.g_dim)
    ids = [j for j in range(k) if j != i] if i is not None else list(range(k))
    cvec = _block_vector(psi, len(ids))
    dvec = _block_vector(phi, len(ids))
    p = _AmpProjector(cvec, ids, k, dims, g_zero=True)
    q = _AmpProjector(dvec, ids, k, dims, g_zero=False,
                      pre=(solver, False), post=(solver, True))
    return p, q


def _amp_final_states(x: UhlmannInstance, solver: FoldedSolver, k: int, T: int, i: int):
    """Coherent run for sampled index i: list of orthogonal-record branches."""
    psi, phi = x.states()
    dims = _amp_dims(psi, k, solver.g_dim)
    check_pure_cap(int(np.prod(dims, dtype=np.int64)) * 2 ** T, "amplifier state")
    p, q = _amp_projectors(x, solver, k, i)
    active = [_amp_initial(psi, k, solver.g_dim)]
    done = []
    for _ in range(T):
        nxt = []
        for branch in active:
            hit = p.apply(branch)
            for comp in (hit, branch - hit):
                if np.linalg.norm(comp) < 1e-14:
                    continue
                succ = q.apply(comp)
                if np.linalg.norm(succ) > 1e-14:
                    done.append(succ)
                rest = comp - succ
                if np.linalg.norm(rest) > 1e-14:
                    nxt.append(rest)
        active = nxt
    return [(_apply_solver(b, dims, solver, k), dims) for b in done + active]


def _amp_fidelity_for_index(x: UhlmannInstance, solver: FoldedSolver, k: int, T: int,
                            i: int) -> float:
    """F((id ⊗ M_i)(|C><C|), |D><D|) for the run that sampled index i."""
    psi, phi = x.states()
    total = 0.0
    for branch, dims in _amp_final_states(x, solver, k, T, i):
        amp = _contract_blocks(branch, dims, phi.amplitudes, [i], k)
        total += float(np.real(amp.conj() @ amp))
    return total


def amplify_run(x: UhlmannInstance, solver: FoldedSolver, cfg: AmplifierConfig,
                trials: int) -> dict:
    """Monte-Carlo the amplifier: sample i per trial, measure single-copy fidelity.

    The coherent evolution is deterministic given i, so the per-index
    fidelities are computed once and trials sample the index.
    """
    psi, _ = x.states()
    dbk = psi.dB ** cfg.k * solver.g_dim
    if solver.unitary.shape != (dbk, dbk):
        raise DimensionMismatch(
            f"solver acts on dim {solver.unitary.shape[0]}, expected {dbk}")
    per_index = [_amp_fidelity_for_index(x, solver, cfg.k, cfg.T, i)
                 for i in range(cfg.k)]
    rng = cfg.seed.child("amplify").generator()
    draws = rng.integers(0, cfg.k, size=trials)
    samples = np.array([per_index[i] for i in draws])
    nu = folded_fidelity(x, solver, cfg.k)
    bound = amplification_bound(nu, cfg.T, cfg.k)
    sem = float(samples.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return {
        "empirical_fidelity": float(samples.mean()),
        "exact_mean_fidelity": float(np.mean(per_index)),
        "per_index_fidelity": [float(f) for f in per_index],
        "nu": nu,
        "bound": bound,
        "stderr": sem,
        "trials": trials,
    }


def amplify_run_incoherent(x: UhlmannInstance, solver: FoldedSolver,
                           cfg: AmplifierConfig, trials: int) -> dict:
    """The sampled-measurement variant: outcomes are drawn and the state
    collapses each round, instead of recording outcomes coherently."""
    psi, phi = x.states()
    dims = _amp_dims(psi, cfg.k, solver.g_dim)
    rng = cfg.seed.child("amplify-incoherent").generator()
    samples = np.empty(trials)
    for trial in range(trials):
        i = int(rng.integers(cfg.k))
        p, q = _amp_projectors(x, solver, cfg.k, i)
        vec = _amp_initial(psi, cfg.k, solver.g_dim)
        for _ in range(cfg.T):
            hit = p.apply(vec)
            prob = float(np.real(hit.conj() @ hit))
            if rng.random() < prob:
                vec = hit / np.sqrt(prob)
            else:
                vec = (vec - hit) / np.sqrt(max(1e-300, 1.0 - prob))
            succ = q.apply(vec)
            prob = float(np.real(succ.conj() @ succ))
            if rng.random() < prob:
                vec = succ / np.sqrt(prob)
                break
            vec = (vec - succ) / np.sqrt(max(1e-300, 1.0 - prob))
        vec = _apply_solver(vec, dims, solver, cfg.k)
        amp = _contract_blocks(vec, dims, phi.amplitudes, [i], cfg.k)
        samples[trial] = float(np.real(amp.conj() @ amp))
    sem = float(samples.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    nu = folded_fidelity(x, solver, cfg.k)
    return {"empirical_fidelity": float(samples.mean()),
            "nu": nu, "bound": amplification_bound(nu, cfg.T, cfg.k),
            "stderr": sem, "trials": trials}


def amplify_jordan_residual(x: UhlmannInstance, solver: FoldedSolver, k: int,
                            T: int) -> float:
    """Max residual of intermediate branches outside span{v, w} for the hatted
    algorithm (full P/Q projectors)."""
    psi, phi = x.states()
    dims = _amp_dims(psi, k, solver.g_dim)
    p, q = _amp_projectors(x, solver, k, None)
    v = _amp_initial(psi, k, solver.g_dim)
    w = q.apply(v)
    nw = np.linalg.norm(w)
    basis = [v]
    if nw > 1e-12:
        w = w / nw
        w = w - v * (v.conj() @ w)
        if np.linalg.norm(w) > 1e-9:
            basis.append(w / np.linalg.norm(w))

    def residual(vec):
        nrm = np.linalg.norm(vec)
        if nrm < 1e-12:
            return 0.0
        rem = vec.copy()
        for b in basis:
            rem = rem - b * (b.conj() @ rem)
        return float(np.linalg.norm(rem) / nrm)

    worst = 0.0
    active = [v]
    for _ in range(T):
        nxt = []
        for branch in active:
            hit = p.apply(branch)
            for comp in (hit, branch - hit):
                if np.linalg.norm(comp) < 1e-12:
                    continue
                worst = max(worst, residual(comp))
                succ = q.apply(comp)
                worst = max(worst, residual(succ))
                rest = comp - succ
                if np.linalg.norm(rest) > 1e-12:
                    worst = max(worst, residual(rest))
                    nxt.append(rest)
        active = nxt
    return worst


# ---------------------------------------------------------------------------
# Density matrix exponentiation

def partial_swap(rho: DensityOp, sigma: DensityOp, dt: float) -> DensityOp:
    """Tr_P(e^{-i dt SWAP} (rho_P ⊗ sigma_Q) e^{+i dt SWAP}) by exact conjugation."""
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"dims {rho.dim} vs {sigma.dim}")
    d = rho.dim
    s = linalg.swap_matrix(d, d)
    e = math.cos(dt) * np.eye(d * d) - 1j * math.sin(dt) * s
    joint = np.kron(rho.matrix, sigma.matrix)
    out = e @ joint @ e.conj().T
    return DensityOp(linalg.partial_trace_matrix(out, [d, d], [1]), (d,))


def dme(target: DensityOp, program: DensityOp, t: float, k: int) -> DensityOp:
    """Approximate conjugation by e^{2 pi i t rho} via k partial swaps.

    ``target`` may carry spectator registers; the last register is acted on
    and must match the program dimension. Error is O(t^2 / k) in trace norm.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if target.dims[-1] != program.dim:
        raise DimensionMismatch(
            f"program dim {program.dim} vs acted register {target.dims[-1]}")
    dt = 2.0 * math.pi * t / k
    d = program.dim
    s = linalg.swap_matrix(d, d)
    # e^{+i dt S} on (acted, fresh program) gives e^{+2 pi i t rho} overall.
    e = math.cos(dt) * np.eye(d * d) + 1j * math.sin(dt) * s
    mat = target.matrix
    dims = list(target.dims)
    n = len(dims)
    for _ in range(k):
        joint = np.kron(mat, program.matrix)
        joint = linalg.apply_matrix_to_registers_dm(joint, dims + [d], e, [n - 1, n])
        mat = linalg.partial_trace_matrix(joint, dims + [d], list(range(n)))
    return DensityOp(mat, target.dims)


def dme_exact_unitary(program: DensityOp, t: float) -> np.ndarray:
    """e^{2 pi i t rho} for the program state."""
    vals, vecs = np.linalg.eigh(linalg.hermitize(program.matrix))
    return (vecs * np.exp(2j * math.pi * t * vals)) @ vecs.conj().T


@lru_cache(maxsize=None)
def dme_error_constant(d: int = 2) -> float:
    """Empirical constant C with td error <= C t^2 / k, fitted on a
    calibration instance at startup."""
    rng = as_seed(1).child("dme-cal").generator()
    from .qcore.random_ops import haar_state_vector, random_density
    vec = haar_state_vector(d, rng)
    target = DensityOp(np.outer(vec, vec.conj()), (d,))
    program = DensityOp(random_density(d, rng), (d,))
    t = 0.5
    w = dme_exact_unitary(program, t)
    exact = DensityOp(w @ target.matrix @ w.conj().T, (d,))
    worst = 0.0
    for k in (8, 16, 32):
        err = trace_distance(dme(target, program, t, k), exact)
        worst = max(worst, err * k / t ** 2)
    return worst


def default_dme_copies(error: float, t: float = 0.5, d: int = 2) -> int:
    """Copies needed for a target DME trace-distance error."""
    c = dme_error_constant(d)
    return max(4, int(math.ceil(c * t ** 2 / error)))


# ---------------------------------------------------------------------------
# Approximate measurement (Hadamard test against a pure program state)

@dataclass
class ApproxMeasureResult:
    accepted: bool
    bit: int
    p_one: float
    post_state: object      # state conditioned on the sampled bit
    post_one: object
    post_zero: object
    error_bound: float


def approx_measure(tau, psi, k_q: int = None, mode: str = "ideal_reflection",
                   seed=0, target_error: float = 0.05) -> ApproxMeasureResult:
    """Hadamard-test measurement of |psi><psi| on the last register of tau.

    An ancilla |+> controls e^{i pi |psi><psi|} (exact reflection in
    ``ideal_reflection`` mode, DME with k_q program copies in ``dme`` mode);
    measuring the ancilla in the ± basis yields bit b with
    Pr[b=1] ≈ Tr(|psi><psi| tau). When k_q is omitted it is sized for
    ``target_error`` from the calibrated DME constant.
    """
    if isinstance(psi, BipartiteState):
        psi = psi.amplitudes
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if k_q is None:
        k_q = default_dme_copies(target_error)
    if mode == "ideal_reflection":
        result = _approx_measure_pure(tau, psi)
        result.error_bound = 0.0
    elif mode == "dme":
        result = _approx_measure_dme(tau, psi, k_q)
        result.error_bound = dme_error_constant(psi.shape[0]) * 0.25 / k_q
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rng = as_seed(seed).child("approx-measure").generator()
    result.bit = int(rng.random() < result.p_one)
    result.post_state = result.post_one if result.bit else result.post_zero
    return result


def _approx_measure_pure(tau, psi):
    if isinstance(tau, DensityOp):
        return _approx_measure_dm_reflection(tau, psi)
    if not isinstance(tau, BipartiteState):
        raise DimensionMismatch("tau must be a BipartiteState or DensityOp")
    if tau.dB != psi.shape[0]:
        raise DimensionMismatch(f"program dim {psi.shape[0]} vs measured register {tau.dB}")
    # Ancilla |+>, controlled reflection, Hadamard, measure. The branch
    # algebra collapses to projections of the measured register.
    mat = tau.as_matrix()
    overlap = mat @ psi.conj()                     # coefficients on |psi>
    proj = np.outer(overlap, psi)
    p_one = float(np.real(np.vdot(proj, proj)))
    rest = mat - proj
    p_zero = float(np.real(np.vdot(rest, rest)))
    post_one = BipartiteState(proj.reshape(-1) / np.sqrt(p_one), tau.split) \
        if p_one > 1e-14 else None
    post_zero = BipartiteState(rest.reshape(-1) / np.sqrt(p_zero), tau.split) \
        if p_zero > 1e-14 else None
    return ApproxMeasureResult(True, 0, p_one, None, post_one, post_zero, 0.0)


def _approx_measure_dm_reflection(tau: DensityOp, psi):
    d_m = tau.dims[-1]
    if d_m != psi.shape[0]:
        raise DimensionMismatch(f"program dim {psi.shape[0]} vs measured register {d_m}")
    d_rest = tau.dim // d_m
    proj = np.kron(np.eye(d_rest), np.outer(psi, psi.conj()))
    hit = proj @ tau.matrix @ proj
    p_one = float(np.real(np.trace(hit)))
    rest = (np.eye(tau.dim) - proj) @ tau.matrix @ (np.eye(tau.dim) - proj)
    p_zero = float(np.real(np.trace(rest)))
    post_one = DensityOp(hit / p_one, tau.dims) if p_one > 1e-14 else None
    post_zero = DensityOp(rest / p_zero, tau.dims) if p_zero > 1e-14 else None
    return ApproxMeasureResult(True, 0, p_one, None, post_one, post_zero, 0.0)


def _approx_measure_dme(tau, psi, k_q: int):
    if isinstance(tau, BipartiteState):
        tau = DensityOp(tau.density().matrix, tau.split)
    d_m = tau.dims[-1]
    if d_m != psi.shape[0]:
        raise DimensionMismatch(f"program dim {psi.shape[0]} vs measured register {d_m}")
    program = DensityOp(np.outer(psi, psi.conj()), (d_m,))
    dims = (2,) + tuple(tau.dims)
    plus = 0.5 * np.ones((2, 2), dtype=complex)
    mat = np.kron(plus, tau.matrix)
    check_density_cap(mat.shape[0] * d_m, "controlled-DME state")
    n = len(dims)
    dt = 2.0 * math.pi * 0.5 / k_q
    s = linalg.swap_matrix(d_m, d_m)
    e = math.cos(dt) * np.eye(d_m * d_m) + 1j * math.sin(dt) * s
    ce = np.kron(np.diag([1.0, 0.0]), np.eye(d_m * d_m)) + \
        np.kron(np.diag([0.0, 1.0]), e)
    for _ in range(k_q):
        joint = np.kron(mat, program.matrix)
        joint = linalg.apply_matrix_to_registers_dm(joint, list(dims) + [d_m], ce,
                                                    [0, n - 1, n])
        mat = linalg.partial_trace_matrix(joint, list(dims) + [d_m], list(range(n)))
    # Measure the control in the ± basis: outcome '-' is bit 1.
    h = np.kron(np.array([[1, 1], [1, -1]]) / np.sqrt(2), np.eye(tau.dim))
    mat = h @ mat @ h.conj().T
    blocks = mat.reshape(2, tau.dim, 2, tau.dim)
    zero, one = blocks[0, :, 0, :], blocks[1, :, 1, :]
    p_one = float(np.real(np.trace(one)))
    p_zero = float(np.real(np.trace(zero)))
    post_one = DensityOp(linalg.hermitize(one) / p_one, tau.dims) if p_one > 1e-12 else None
    post_zero = DensityOp(linalg.hermitize(zero) / p_zero, tau.dims) if p_zero > 1e-12 else None
    return ApproxMeasureResult(True, 0, p_one, None, post_one, post_zero, 0.0)


# ---------------------------------------------------------------------------
# Verifier with an ideal state-synthesis oracle

@dataclass(frozen=True)
class OracleConfig:
    prep_error: float = 0.0
    mode: str = "ideal_reflection"
    k_q: Optional[int] = None


def qip_run(x: UhlmannInstance, m: int, prover: ProverStrategy,
            oracle: OracleConfig, seed) -> ProtocolResult:
    """The permutation-test verifier with oracle-prepared test copies and the
    approximate measurement replacing the D-basis check.

    The preparation oracle supplies the m test copies with trace-distance
    error ``prep_error`` (realized as a mix with an orthogonal junk state);
    verification projects the test block onto |D>^{⊗m} via the Hadamard-test
    measurement.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    psi, phi = x.states()
    dA, dB = psi.split
    rng = as_seed(seed).child("qip").generator()
    perm = rng.permutation(m + 1)
    check_pure_cap((dA * dB) ** (m + 1) * prover.joint_anc_dim, "qip joint state")

    branches = _qip_prepared_branches(psi, m, oracle.prep_error)
    dims = [dA] * (m + 1) + [dB] * (m + 1)
    if prover.joint_anc_dim > 1:
        dims = dims + [prover.joint_anc_dim]

    processed = []
    for weight, vec in branches:
        if prover.joint_anc_dim > 1:
            anc = np.zeros(prover.joint_anc_dim, dtype=complex)
            anc[0] = 1.0
            vec = np.kron(vec, anc)
        vec = _qip_prover_round(vec, dims, m, perm, prover, psi.split)
        processed.append((weight, vec))

    # Approximate measurement of |D>^{⊗m} on the test block.
    dvec = _block_vector(phi, m)
    p_one, out = 0.0, 0.0
    for weight, vec in processed:
        work = _qip_test_reorder(vec, dims, m)
        amp = work @ dvec.conj()
        p = float(np.real(amp.conj() @ amp))
        p_one += weight * p
        if p > 1e-300:
            keep_dims = [dA, dB] + ([prover.joint_anc_dim] if prover.joint_anc_dim > 1 else [])
            rho = np.outer(amp, amp.conj())
            rho = linalg.partial_trace_matrix(rho, keep_dims, [0, 1])
            out = out + weight * rho
    meas_error = 0.0
    if oracle.mode == "dme":
        k_q = oracle.k_q or default_dme_copies(0.05, d=(dA * dB) ** m)
        meas_error = dme_error_constant((dA * dB) ** m if (dA * dB) ** m <= 4 else 2) \
            * 0.25 / k_q
    accepted = bool(rng.random() < p_one)
    output = DensityOp(out / p_one, (dA, dB)) if p_one > 1e-12 else None
    transcript = [{
        "round": 1, "perm": [int(p) for p in perm],
        "p_accept_and_one": p_one, "prep_error": oracle.prep_error,
        "measurement_error_bound": meas_error, "accepted": accepted,
    }]
    return ProtocolResult(accepted, float(p_one), output if accepted else None, transcript)


def _qip_prepared_branches(psi: BipartiteState, m: int, prep_error: float):
    """Oracle output: (weight, joint pure vector) branches on [A-block, B-block].

    Only the m oracle-prepared test copies carry the preparation error; the
    verifier's input copy is exact.
    """
    tests = [_block_vector(psi, m)]
    weights = [1.0]
    if prep_error > 0.0:
        junk = np.zeros_like(tests[0])
        junk[-1] = 1.0
        junk = junk - tests[0] * np.vdot(tests[0], junk)
        junk = junk / np.linalg.norm(junk)
        tests = [tests[0], junk]
        weights = [1.0 - prep_error, prep_error]
    out = []
    dA, dB = psi.split
    for weight, test in zip(weights, tests):
        vec = np.kron(psi.amplitudes, test)
        # (A0, B0, A-tests, B-tests) -> (A0, A-tests, B0, B-tests)
        dims = [dA, dB, dA ** m, dB ** m]
        vec = linalg.permute_registers_vec(vec, dims, [0, 2, 1, 3])
        out.append((weight, vec))
    return out


def _qip_prover_round(vec, dims, m, perm, prover: ProverStrategy, split):
    axis_perm = list(range(len(dims)))
    for j, src in enumerate(perm):
        axis_perm[m + 1 + j] = m + 1 + int(src)
    vec = linalg.permute_registers_vec(vec, dims, axis_perm)
    if prover.is_product():
        for j, factor in enumerate(prover.factors):
            if factor is None:
                continue
            if isinstance(factor, ChannelDesc):
                raise DimensionMismatch("qip_run needs unitary product factors")
            vec = linalg.apply_matrix_to_registers(vec, dims, factor, [m + 1 + j])
    else:
        targets = list(range(m + 1, 2 * (m + 1)))
        if prover.joint_anc_dim > 1:
            targets = targets + [len(dims) - 1]
        vec = linalg.apply_matrix_to_registers(vec, dims, prover.joint_unitary, targets)
    inv = np.argsort(axis_perm)
    return linalg.permute_registers_vec(vec, dims, inv)


def _qip_test_reorder(vec, dims, m):
    n_regs = len(dims)
    has_anc = n_regs == 2 * (m + 1) + 1
    test_axes = list(range(1, m + 1)) + list(range(m + 2, 2 * (m + 1)))
    keep_axes = [0, m + 1] + ([n_regs - 1] if has_anc else [])
    work = linalg.permute_registers_vec(vec, dims, keep_axes + test_axes)
    d_keep = int(np.prod([dims[a] for a in keep_axes], dtype=np.int64))
    return work.reshape(d_keep, -1)
