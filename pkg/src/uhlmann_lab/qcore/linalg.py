"""Dense tensor-register bookkeeping and Hermitian matrix helpers.

Register convention: register 0 is the most significant factor, so a state
vector over registers with dimensions (d0, d1, ...) is indexed row-major,
and ``vec.reshape(dims)`` puts register i on axis i.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def basis_vector(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def apply_matrix_to_registers(vec: np.ndarray, dims: Sequence[int], mat: np.ndarray,
                              targets: Sequence[int]) -> np.ndarray:
    """Apply ``mat`` to the given registers of a state vector.

    ``mat`` acts on the tensor product of the target registers in the order
    listed; all other registers are untouched.
    """
    dims = list(dims)
    targets = list(targets)
    d_t = int(np.prod([dims[t] for t in targets]))
    if mat.shape != (d_t, d_t):
        raise DimensionMismatch(f"matrix shape {mat.shape} does not act on dims {d_t}")
    tensor = vec.reshape(dims)
    rest = [a for a in range(len(dims)) if a not in targets]
    tensor = np.transpose(tensor, targets + rest)
    d_r = int(np.prod([dims[a] for a in rest], dtype=np.int64)) if rest else 1
    tensor = tensor.reshape(d_t, d_r)
    tensor = mat @ tensor
    tensor = tensor.reshape([dims[t] for t in targets] + [dims[a] for a in rest])
    inverse = np.argsort(targets + rest)
    tensor = np.transpose(tensor, inverse)
    return tensor.reshape(-1)


def apply_matrix_to_registers_dm(rho: np.ndarray, dims: Sequence[int], mat: np.ndarray,
                                 targets: Sequence[int]) -> np.ndarray:
    """Conjugate a density matrix by ``mat`` acting on the given registers.

    Row-major vectorization: vec(M rho M^dag) = (M ⊗ conj(M)) vec(rho).
    """
    d = int(np.prod(dims, dtype=np.int64))
    n = len(dims)
    as_vec = rho.reshape(-1)
    ext_dims = list(dims) * 2
    out = apply_matrix_to_registers(as_vec, ext_dims, mat, list(targets))
    out = apply_matrix_to_registers(out, ext_dims, mat.conj(), [t + n for t in targets])
    return out.reshape(d, d)


def permute_registers_vec(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder registers of a state vector: output register i is input register perm[i]."""
    tensor = vec.reshape(list(dims))
    return np.transpose(tensor, list(perm)).reshape(-1)


def permutation_matrix(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary P with P|r_0, r_1, ...> = |r_{perm[0]}, r_{perm[1]}, ...>."""
    d = int(np.prod(dims, dtype=np.int64))
    p = np.zeros((d, d))
    eye = np.eye(d)
    for col in range(d):
        p[:, col] = permute_registers_vec(eye[:, col], dims, perm)
    return p


def permute_registers_dm(rho: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    n = len(dims)
    tensor = rho.reshape(list(dims) * 2)
    axes = list(perm) + [p + n for p in perm]
    new_dims = [dims[p] for p in perm]
    d = int(np.prod(dims, dtype=np.int64))
    return np.transpose(tensor, axes).reshape(d, d)


def partial_trace_matrix(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out all registers not in ``keep`` (kept registers stay in order)."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    traced = [a for a in range(n) if a not in keep]
    tensor = rho.reshape(dims * 2)
    perm = keep + [k + n for k in keep] + traced + [t + n for t in traced]
    tensor = np.transpose(tensor, perm)
    d_keep = int(np.prod([dims[k] for k in keep], dtype=np.int64)) if keep else 1
    d_tr = int(np.prod([dims[t] for t in traced], dtype=np.int64)) if traced else 1
    tensor = tensor.reshape(d_keep, d_keep, d_tr, d_tr)
    return np.trace(tensor, axis1=2, axis2=3)


def swap_matrix(d1: int, d2: int) -> np.ndarray:
    """SWAP between two registers: |i>|j> -> |j>|i>."""
    s = np.zeros((d1 * d2, d1 * d2))
    for i in range(d1):
        for j in range(d2):
            s[j * d1 + i, i * d2 + j] = 1.0
    return s


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix; negative eigenvalues clamped to 0.

    Eigenvalues within 1e-13 of zero (relative to the largest) are zeroed
    before the root: the square root would otherwise amplify eigensolver
    noise on rank-deficient inputs to ~1e-8.
    """
    vals, vecs = np.linalg.eigh(hermitize(m))
    cut = 1e-13 * max(vals.max(initial=0.0), 1e-300)
    vals = np.where(vals > cut, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def psd_power(m: np.ndarray, power: float, rcond: float = 1e-12) -> np.ndarray:
    """Hermitian matrix power restricted to the support (pseudo-inverse style)."""
    vals, vecs = np.linalg.eigh(hermitize(m))
    vals = np.clip(vals, 0.0, None)
    cut = rcond * max(vals.max(initial=0.0), 1.0)
    powered = np.where(vals > cut, np.power(vals, power, where=vals > cut), 0.0)
    return (vecs * powered) @ vecs.conj().T


def is_unitary(m: np.ndarray, atol: float = 1e-10) -> bool:
    if m.shape[0] != m.shape[1]:
        return False
    return np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), ord=np.inf) <= atol


def gram_schmidt_complete(columns: np.ndarray) -> np.ndarray:
    """Complete a set of orthonormal columns (d x k) to a full unitary (d x d)."""
    d, k = columns.shape
    basis = [columns[:, j] for j in range(k)]
    for e in range(d):
        if len(basis) == d:
            break
        v = np.zeros(d, dtype=complex)
        v[e] = 1.0
        for b in basis:
            v = v - b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-9:
            basis.append(v / nrm)
    if len(basis) != d:
        raise np.linalg.LinAlgError("could not complete basis")
    return np.stack(basis, axis=1)
