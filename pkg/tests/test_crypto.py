import json
import math

import numpy as np
import pytest

from uhlmann_lab.crypto import (CommitmentScheme, clone_attack_states, clone_fidelity,
                                commitment_from_instance, evaluate, flavor_switch,
                                optimal_binding_attack, random_scheme, tensor_amplify)
from uhlmann_lab.qcore import BipartiteState, fidelity
from uhlmann_lab.qcore.channels import ChannelDesc
from uhlmann_lab.qcore.random_ops import haar_unitary
from uhlmann_lab.rng import child_seed, generator
from uhlmann_lab.uhlmann import instance_with_fidelity, validate_instance


def _raw_scheme(seed, dC=2, dR=2):
    from uhlmann_lab.qcore.random_ops import haar_state_vector
    rng = generator(seed)
    return CommitmentScheme(raw_states=(
        BipartiteState(haar_state_vector(dC * dR, rng), (dC, dR)),
        BipartiteState(haar_state_vector(dC * dR, rng), (dC, dR))))


def test_equal_states_perfectly_hiding():
    s = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
    rep = evaluate(CommitmentScheme(raw_states=(s, s)))
    assert rep.hiding_stat < 1e-12
    assert abs(rep.binding_opt - 1.0) < 1e-12


def test_revealing_scheme_perfectly_binding():
    s0 = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
    s1 = BipartiteState(np.array([0, 0, 0, 1.0]), (2, 2))
    rep = evaluate(CommitmentScheme(raw_states=(s0, s1)))
    assert abs(rep.hiding_stat - 1.0) < 1e-12
    assert rep.binding_opt < 1e-12


def test_optimal_attack_achieves_binding_fidelity():
    for seed in range(10):
        scheme = _raw_scheme(seed)
        rep = evaluate(scheme, attack=optimal_binding_attack(scheme))
        assert abs(rep.binding_attack - rep.binding_opt) < 1e-8


def test_no_sampled_attack_beats_binding_opt():
    rng = generator(5)
    for seed in (99, 100, 101):
        scheme = _raw_scheme(seed)
        base = evaluate(scheme).binding_opt
        for _ in range(100):
            rep = evaluate(scheme, attack=haar_unitary(2, rng))
            assert rep.binding_attack <= base + 1e-8


def test_attack_channel_interface():
    scheme = _raw_scheme(7)
    u = optimal_binding_attack(scheme)
    as_channel = ChannelDesc(u, 2, 1, (2, 1))
    rep = evaluate(scheme, attack=as_channel)
    assert abs(rep.binding_attack - rep.binding_opt) < 1e-8


def test_attack_dimension_mismatch():
    from uhlmann_lab.errors import DimensionMismatch
    scheme = _raw_scheme(7)
    with pytest.raises(DimensionMismatch):
        evaluate(scheme, attack=np.eye(3))
    with pytest.raises(DimensionMismatch):
        evaluate(scheme, attack=ChannelDesc(np.eye(4), 4, 1, (4, 1)))


def test_mayers_lo_chau_tradeoff():
    for seed in range(200):
        scheme = random_scheme(2, 2, 20, child_seed(1, "mlc", seed))
        rep = evaluate(scheme)
        assert rep.hiding_stat >= 1 - math.sqrt(rep.binding_opt) - 1e-9


def test_flavor_switch_law():
    worst = -1.0
    for seed in range(100):
        scheme = random_scheme(2, 2, 18, child_seed(2, "fl", seed))
        rep = evaluate(scheme)
        switched = evaluate(flavor_switch(scheme))
        worst = max(worst, switched.hiding_stat - math.sqrt(rep.binding_opt))
    assert worst <= 1e-8


def test_flavor_switch_degenerate_cases():
    # Perfectly binding, hiding-broken input: switched scheme perfectly hiding.
    s0 = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
    s1 = BipartiteState(np.array([0, 0, 0, 1.0]), (2, 2))
    switched = evaluate(flavor_switch(CommitmentScheme(raw_states=(s0, s1))))
    assert switched.hiding_stat < 1e-9
    # psi_0 = psi_1: switched binding reflects original hiding (= 0 -> 1).
    same = CommitmentScheme(raw_states=(s0, s0))
    switched = evaluate(flavor_switch(same))
    assert switched.hiding_stat <= 1.0 + 1e-12


def test_tensor_amplify():
    scheme = _raw_scheme(3)
    rep = evaluate(scheme)
    assert tensor_amplify(scheme, 1) is scheme
    rep4 = evaluate(tensor_amplify(scheme, 4))
    assert abs(rep4.binding_opt - rep.binding_opt ** 4) < 1e-9
    assert rep4.hiding_stat <= 4 * rep.hiding_stat + 1e-9
    # Circuit form stays circuit form.
    circ_scheme = random_scheme(1, 1, 10, 8)
    doubled = tensor_amplify(circ_scheme, 2)
    assert doubled.C0 is not None
    repc = evaluate(circ_scheme)
    repd = evaluate(doubled)
    assert abs(repd.binding_opt - repc.binding_opt ** 2) < 1e-9


def test_tensor_amplify_frozen_exponent():
    # binding_opt = 0.9 by construction; fourth power is 0.6561 exactly.
    s0 = BipartiteState(np.array([1.0, 0, 0, 0]), (2, 2))
    s1 = BipartiteState(np.array([math.sqrt(0.9), 0, math.sqrt(0.1), 0]), (2, 2))
    scheme = CommitmentScheme(raw_states=(s0, s1))
    assert abs(evaluate(scheme).binding_opt - 0.9) < 1e-12
    assert abs(evaluate(tensor_amplify(scheme, 4)).binding_opt - 0.6561) < 1e-9


def test_tensor_amplify_keeps_perfect_hiding():
    s = BipartiteState(np.array([1, 0, 0, 0.0]), (2, 2))
    scheme = CommitmentScheme(raw_states=(s, s))
    for k in (2, 3):
        assert evaluate(tensor_amplify(scheme, k)).hiding_stat < 1e-10


def test_commitment_from_instance():
    x = instance_with_fidelity(1.0, 2, 2, 4)
    rep = evaluate(commitment_from_instance(x))
    assert rep.hiding_stat < 1e-8
    x = instance_with_fidelity(0.99, 2, 2, 5)
    rep = evaluate(commitment_from_instance(x))
    assert abs(rep.binding_opt - 0.99) < 1e-9
    assert rep.hiding_stat <= math.sqrt(1 - 0.99) + 1e-9
    x = instance_with_fidelity(0.0, 2, 2, 6)
    rep = evaluate(commitment_from_instance(x))
    assert rep.binding_opt < 1e-9


def test_scheme_json_roundtrip():
    scheme = random_scheme(1, 2, 8, 17)
    again = CommitmentScheme.from_json_dict(
        json.loads(json.dumps(scheme.to_json_dict())))
    r0, r1 = evaluate(scheme), evaluate(again)
    assert abs(r0.hiding_stat - r1.hiding_stat) < 1e-12
    raw = _raw_scheme(5)
    again = CommitmentScheme.from_json_dict(raw.to_json_dict())
    assert np.allclose(again.raw_states[0].amplitudes, raw.raw_states[0].amplitudes)


# ---------------------------------------------------------------------------
# Cloning attacks

def test_clone_orthogonal_family_perfect_adversary():
    fam = [np.array([1.0, 0]), np.array([0, 1.0])]
    res = clone_attack_states(fam, 1, np.eye(2))
    assert abs(res["kappa_lower"] - 1.0) < 1e-12
    assert validate_instance(res["instance"])["kappa"] >= res["kappa_lower"] - 1e-9
    assert clone_fidelity(res) > 1 - 1e-9


def test_clone_uniform_adversary_quarter():
    fam = [np.array([1.0, 0]), np.array([0, 1.0])]
    res = clone_attack_states(fam, 1, np.full((2, 2), 0.5))
    assert abs(res["kappa_lower"] - 0.25) < 1e-12
    assert validate_instance(res["instance"])["kappa"] >= 0.25 - 1e-9


def test_clone_subspace_family():
    # Subspace-style states on 2 qubits; a coherent basis measurement gives a
    # realizable adversary, whose kappa_lower must lower-bound the fidelity.
    fam = [np.array([1.0, 0, 0, 0]),
           np.array([1.0, 1, 0, 0]) / math.sqrt(2),
           np.array([1.0, 0, 1, 0]) / math.sqrt(2),
           np.array([1.0, 0, 0, 1]) / math.sqrt(2)]
    basis, _ = np.linalg.qr(np.stack(fam, axis=1))
    eps = np.array([[abs(basis[:, j].conj() @ fam[k]) ** 2 for j in range(4)]
                    for k in range(4)])
    res = clone_attack_states(fam, 2, eps)
    kappa = validate_instance(res["instance"])["kappa"]
    assert kappa >= res["kappa_lower"] - 1e-9
    assert clone_fidelity(res) >= res["kappa_lower"] - 1e-9


def test_clone_rejects_complex_family():
    fam = [np.array([1.0, 1j]) / math.sqrt(2), np.array([1.0, 1.0]) / math.sqrt(2)]
    with pytest.raises(ValueError):
        clone_attack_states(fam, 1, np.eye(2))


def test_clone_rejects_bad_adversary():
    fam = [np.array([1.0, 0]), np.array([0, 1.0])]
    with pytest.raises(ValueError):
        clone_attack_states(fam, 1, np.full((2, 2), 0.7))
