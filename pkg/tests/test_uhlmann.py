import json

import numpy as np
import pytest

from uhlmann_lab.errors import DimensionMismatch, InvalidInstance
from uhlmann_lab.qcore import BipartiteState, GateCircuit, fidelity, trace_distance
from uhlmann_lab.qcore.random_ops import haar_state_vector, haar_unitary
from uhlmann_lab.rng import child_seed, generator
from uhlmann_lab.uhlmann import (UhlmannInstance, apply_uhlmann, canonical_uhlmann,
                                 cross_operator, instance_with_fidelity, pad_instance,
                                 qutrit_example, random_raw_instance, unitary_completion,
                                 validate_instance)

from conftest import fidelity_eig_oracle


def overlap_after(w_matrix, psi: BipartiteState, phi: BipartiteState) -> float:
    out = (psi.as_matrix() @ w_matrix.T).reshape(-1)
    return abs(np.vdot(phi.amplitudes, out)) ** 2


# ---------------------------------------------------------------------------
# Validation

def test_validate_equal_circuits():
    circ = GateCircuit(2, (("H", (0,)), ("CNOT", (0, 1))))
    info = validate_instance(UhlmannInstance(n=1, C=circ, D=circ))
    assert abs(info["kappa"] - 1.0) < 1e-10
    assert info["dA"] == info["dB"] == 2


def test_validate_orthogonal_raw_pair():
    psi = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
    phi = BipartiteState(np.array([0, 0, 0, 1.0]), (2, 2))
    info = validate_instance(UhlmannInstance(raw_pair=(psi, phi)))
    assert info["kappa"] < 1e-12


def test_validate_matches_fidelity_oracle():
    for seed in range(10):
        x = random_raw_instance(4, 4, seed)
        psi, phi = x.states()
        want = fidelity_eig_oracle(psi.reduced_a().matrix, phi.reduced_a().matrix)
        assert abs(validate_instance(x)["kappa"] - want) < 1e-10


def test_invalid_instances_raise():
    with pytest.raises(InvalidInstance):
        UhlmannInstance(n=1, C=GateCircuit(2, ()), D=GateCircuit(3, ()))
    with pytest.raises(InvalidInstance):
        UhlmannInstance(n=2, C=GateCircuit(2, ()), D=GateCircuit(2, ()))
    with pytest.raises(InvalidInstance):
        psi = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
        phi = BipartiteState(np.array([1, 0, 0, 0.0]), (4, 1))
        UhlmannInstance(raw_pair=(psi, phi))
    with pytest.raises(InvalidInstance):
        UhlmannInstance()


# ---------------------------------------------------------------------------
# Canonical isometry: the two-qutrit instability pair, exactly

def test_qutrit_identity_case():
    psi, _, phi = qutrit_example(0.01)
    w = canonical_uhlmann(UhlmannInstance(raw_pair=(psi, phi)), 0.0)
    assert np.linalg.norm(w.matrix - np.eye(3), ord=np.inf) < 1e-9


def test_qutrit_swapped_case():
    _, tilde, phi = qutrit_example(0.01)
    w = canonical_uhlmann(UhlmannInstance(raw_pair=(tilde, phi)), 0.0)
    want = np.zeros((3, 3))
    want[0, 0] = want[1, 2] = want[2, 1] = 1.0
    assert np.linalg.norm(w.matrix - want, ord=np.inf) < 1e-9


def test_qutrit_cutoff_instability():
    psi, tilde, phi = qutrit_example(0.01)
    w = canonical_uhlmann(UhlmannInstance(raw_pair=(psi, phi)), 0.0)
    wt = canonical_uhlmann(UhlmannInstance(raw_pair=(tilde, phi)), 0.0)
    assert np.linalg.norm(w.matrix - wt.matrix, ord=2) >= 2.0 - 1e-9
    assert np.linalg.norm(psi.amplitudes - tilde.amplitudes) <= np.sqrt(2 * 0.01) + 1e-12
    # A cutoff above the small singular values restores stability.
    w_eta = canonical_uhlmann(UhlmannInstance(raw_pair=(psi, phi)), 0.1)
    wt_eta = canonical_uhlmann(UhlmannInstance(raw_pair=(tilde, phi)), 0.1)
    assert np.linalg.norm(w_eta.matrix - wt_eta.matrix, ord=2) < 1e-9


def test_equal_states_give_support_projector():
    x = random_raw_instance(3, 4, 17)
    psi, _ = x.states()
    same = UhlmannInstance(raw_pair=(psi, psi))
    w = canonical_uhlmann(same, 0.0)
    rho_b = psi.reduced_b().matrix
    vals, vecs = np.linalg.eigh(rho_b)
    proj = (vecs[:, vals > 1e-12]) @ (vecs[:, vals > 1e-12]).conj().T
    assert np.linalg.norm(w.matrix - proj, ord=np.inf) < 1e-9


def test_uhlmann_equality_random_instances():
    for seed in range(50):
        rng = generator(child_seed(3, "dims", seed))
        dA, dB = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        x = random_raw_instance(dA, dB, child_seed(4, "inst", seed))
        psi, phi = x.states()
        w = canonical_uhlmann(x, 0.0)
        lhs = overlap_after(w.matrix, psi, phi)
        rhs = fidelity(psi.reduced_a(), phi.reduced_a())
        assert abs(lhs - rhs) < 1e-8


def test_eta_monotonicity():
    x = random_raw_instance(3, 5, 23)
    prev = canonical_uhlmann(x, 0.0).support_projector
    for eta in (0.05, 0.2, 0.5, 0.9):
        cur = canonical_uhlmann(x, eta).support_projector
        vals = np.linalg.eigvalsh(prev - cur)
        assert vals.min() > -1e-9  # PSD order: support shrinks as eta grows
        prev = cur


def test_eta_guarantee():
    x = random_raw_instance(4, 4, 31)
    psi, phi = x.states()
    kappa = validate_instance(x)["kappa"]
    for eta in (0.0, 0.1, 0.3):
        w = canonical_uhlmann(x, eta)
        assert overlap_after(w.matrix, psi, phi) >= kappa - 2 * eta * x.dB - 1e-9


# ---------------------------------------------------------------------------
# Completion

def test_completion_of_unitary_is_itself():
    u = haar_unitary(4, generator(41))
    from uhlmann_lab.qcore import sgn_eta
    w = sgn_eta(u, 0.0)
    comp = unitary_completion(w)
    assert np.linalg.norm(comp.unitary - u, ord=np.inf) < 1e-10


def test_completion_of_diagonal_projection():
    from uhlmann_lab.qcore import sgn_eta
    w = sgn_eta(np.diag([1.0, 0.0]), 0.0)
    comp = unitary_completion(w)
    assert np.linalg.norm(comp.unitary - np.eye(2), ord=np.inf) < 1e-10


def test_completion_agrees_on_support():
    for seed in range(5):
        x = random_raw_instance(2, 6, 100 + seed)
        w = canonical_uhlmann(x, 0.0)
        comp = unitary_completion(w)
        comp.check_completes(w, atol=1e-10)


# ---------------------------------------------------------------------------
# apply_uhlmann

def test_transport_exact_at_fidelity_one():
    x = instance_with_fidelity(1.0, 4, 4, 7)
    psi, phi = x.states()
    out = apply_uhlmann(x, 0.0, psi)
    assert trace_distance(out.density(), phi.density()) < 1e-9


def test_transport_achieves_reduced_fidelity_qutrit():
    _, tilde, phi = qutrit_example(0.01)
    x = UhlmannInstance(raw_pair=(tilde, phi))
    out = apply_uhlmann(x, 0.0, tilde)
    achieved = abs(np.vdot(phi.amplitudes, out.amplitudes)) ** 2
    want = fidelity(tilde.reduced_a(), phi.reduced_a())
    assert abs(achieved - want) < 1e-9


def test_transport_preserves_norm_off_support():
    x = instance_with_fidelity(0.7, 2, 4, 9)
    w = canonical_uhlmann(x, 0.5)   # aggressive cutoff: small support
    target = BipartiteState(haar_state_vector(8, generator(5)), (2, 4))
    out = apply_uhlmann(x, 0.5, target)
    assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


def test_completion_consistency_on_support():
    # For inputs supported on Pi, the completion acts as W itself.
    x = random_raw_instance(3, 3, 55)
    w = canonical_uhlmann(x, 0.0)
    u = unitary_completion(w).unitary
    pi = w.support_projector
    rng = generator(66)
    for _ in range(5):
        v = pi @ haar_state_vector(3, rng)
        v = v / np.linalg.norm(v)
        assert np.linalg.norm(u @ v - w.matrix @ v) < 1e-10


def test_apply_uhlmann_dimension_check():
    x = random_raw_instance(2, 3, 1)
    with pytest.raises(DimensionMismatch):
        apply_uhlmann(x, 0.0, BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2)))


# ---------------------------------------------------------------------------
# Padding

def test_padding_alpha_one_preserves_instance():
    x = random_raw_instance(4, 4, 12)
    kappa = validate_instance(x)["kappa"]
    padded = pad_instance(x, 1.0)
    assert abs(validate_instance(padded)["kappa"] - kappa) < 1e-9
    v = canonical_uhlmann(padded, 0.0).matrix
    u = canonical_uhlmann(x, 0.0).matrix
    assert np.linalg.norm(v[0::2, 0::2] - u, ord=np.inf) < 1e-9


def test_padding_exact_fidelity_law():
    # Squared convention: padded kappa = (alpha sqrt(kappa) + 1 - alpha)^2.
    for kappa, alpha in ((0.0, 0.5), (0.25, 0.5), (0.7, 0.3), (0.9, 1.0)):
        x = instance_with_fidelity(kappa, 2, 2, 77)
        padded = pad_instance(x, alpha)
        want = (alpha * np.sqrt(kappa) + 1 - alpha) ** 2
        assert abs(validate_instance(padded)["kappa"] - want) < 1e-9
    # The kappa = 0, alpha = 1/2 case lands at 1/4 exactly.
    x = instance_with_fidelity(0.0, 2, 2, 78)
    assert abs(validate_instance(pad_instance(x, 0.5))["kappa"] - 0.25) < 1e-9


def test_padding_block_structure():
    # V = U ⊗ |0><0| + |1..1><1..1| ⊗ |1><1| (the proof-level identity).
    for seed in range(5):
        x = random_raw_instance(4, 4, 200 + seed)
        u = canonical_uhlmann(x, 0.0).matrix
        v = canonical_uhlmann(pad_instance(x, 0.5), 0.0).matrix
        dB = 4
        want = np.zeros((2 * dB, 2 * dB), dtype=complex)
        want[0::2, 0::2] = u                    # flag-0 sector, B x B block
        want[2 * dB - 1, 2 * dB - 1] = 1.0      # |1...1>|1> ray
        assert np.linalg.norm(v - want, ord=np.inf) < 1e-9


def test_padding_alpha_out_of_range():
    x = random_raw_instance(2, 2, 5)
    for alpha in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            pad_instance(x, alpha)


# ---------------------------------------------------------------------------
# Serialization

def test_instance_json_roundtrip_circuit():
    circ = GateCircuit(2, (("H", (0,)), ("CNOT", (0, 1))))
    other = GateCircuit(2, (("X", (1,)),))
    x = UhlmannInstance(n=1, C=circ, D=other)
    again = UhlmannInstance.from_json(json.dumps(x.to_json_dict()))
    assert again.C == circ and again.D == other and again.n == 1


def test_instance_json_roundtrip_raw():
    x = random_raw_instance(2, 3, 9)
    again = UhlmannInstance.from_json(json.dumps(x.to_json_dict()))
    psi0, phi0 = x.states()
    psi1, phi1 = again.states()
    assert np.allclose(psi0.amplitudes, psi1.amplitudes)
    assert np.allclose(phi0.amplitudes, phi1.amplitudes)
    assert again.split == (2, 3)


def test_cross_operator_orientation():
    # Tr_A |phi><psi| must produce the operator mapping psi toward phi.
    psi, _, phi = qutrit_example(0.04)
    m = cross_operator(UhlmannInstance(raw_pair=(psi, phi)))
    assert np.allclose(m, np.diag([0.96, 0.02, 0.02]), atol=1e-12)
