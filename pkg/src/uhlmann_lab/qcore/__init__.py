"""Dense complex linear-algebra substrate: states, circuits, channels,
distances, SVD thresholding, and seeded randomness."""

from .gates import GATES, GateCircuit, random_circuit
from .states import (BipartiteState, DensityOp, apply_circuit, maximally_entangled,
                     maximally_mixed, partial_trace)
from .metrics import PartialIsometryOp, fidelity, sgn_eta, trace_distance
from .channels import (ChannelDesc, append_channel, apply_to_first, channel_from_circuit,
                       check_trace_preserving, complementary, compose, identity_channel,
                       run_channel, trace_out_channel, unitary_channel)
from .random_ops import (haar_state_vector, haar_unitary, pauli_matrix, random_clifford,
                         random_density, random_state, random_symplectic)
from . import linalg

__all__ = [
    "GATES", "GateCircuit", "random_circuit",
    "BipartiteState", "DensityOp", "apply_circuit", "maximally_entangled",
    "maximally_mixed", "partial_trace",
    "PartialIsometryOp", "fidelity", "sgn_eta", "trace_distance",
    "ChannelDesc", "append_channel", "apply_to_first", "channel_from_circuit",
    "check_trace_preserving", "complementary", "compose", "identity_channel",
    "run_channel", "trace_out_channel", "unitary_channel",
    "haar_state_vector", "haar_unitary", "pauli_matrix", "random_clifford",
    "random_density", "random_state", "random_symplectic",
    "linalg",
]
