"""Shared helpers: independent oracles the implementation is checked against,
plus the acceptance scoreboard printed after the run."""

import numpy as np

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from uhlmann_lab.qcore import GATES, GateCircuit
from uhlmann_lab.qcore import linalg


def kron_oracle_unitary(circ: GateCircuit) -> np.ndarray:
    """Materialize a circuit by explicit kron products and matrix products."""
    u = np.eye(circ.dim, dtype=complex)
    for g, qs in circ.gates:
        m = GATES[g]
        if len(qs) == 1:
            q = qs[0]
            full = linalg.kron_all(
                [np.eye(2)] * q + [m] + [np.eye(2)] * (circ.n_qubits - q - 1))
        else:
            perm_to = list(qs) + [a for a in range(circ.n_qubits) if a not in qs]
            p = linalg.permutation_matrix([2] * circ.n_qubits, perm_to)
            full = p.T @ np.kron(m, np.eye(2 ** (circ.n_qubits - 2))) @ p
        u = full @ u
    return u


def partial_trace_oracle(rho: np.ndarray, dims, keep) -> np.ndarray:
    """Explicit index-summation partial trace."""
    dims = list(dims)
    keep = sorted(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    out = np.zeros((d_keep, d_keep), dtype=complex)

    def unravel(flat):
        idx = []
        for d in reversed(dims):
            idx.append(flat % d)
            flat //= d
        return list(reversed(idx))

    def ravel(idx, which):
        flat = 0
        for w in which:
            flat = flat * dims[w] + idx[w]
        return flat

    d = int(np.prod(dims))
    for i in range(d):
        for j in range(d):
            ii, jj = unravel(i), unravel(j)
            if all(ii[t] == jj[t] for t in traced):
                out[ravel(ii, keep), ravel(jj, keep)] += rho[i, j]
    return out


def gram_schmidt_rank(m: np.ndarray, tol: float = 1e-9) -> int:
    """Rank by explicit Gram-Schmidt on the columns."""
    basis = []
    for j in range(m.shape[1]):
        v = m[:, j].astype(complex)
        for b in basis:
            v = v - b * (b.conj() @ v)
        if np.linalg.norm(v) > tol:
            basis.append(v / np.linalg.norm(v))
    return len(basis)


def fidelity_eig_oracle(rho: np.ndarray, sigma: np.ndarray) -> float:
    """F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 via eigendecompositions."""
    def sqrtm(m):
        vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
        vals = np.clip(vals, 0, None)
        return (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrtm(sqrtm(rho) @ sigma @ sqrtm(rho))
    return float(np.real(np.trace(inner)) ** 2)
