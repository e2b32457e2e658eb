"""Seeded random Cliffords, Haar states, and Haar unitaries.

Cliffords are sampled exactly uniformly: a uniform symplectic matrix over
F_2 via the Koenig-Smolin transvection construction, uniform sign bits, and
then materialization of the unique unitary (up to global phase) with those
Pauli images.
"""

from __future__ import annotations

import numpy as np

from ..errors import check_pure_cap
from . import linalg
from .states import BipartiteState
from ..rng import as_seed

_PAULI_1 = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),          # X
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),          # Z
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),        # Y = iXZ
}


def _symplectic_product(v, w) -> int:
    # Interleaved (x, z) pairs: <v,w> = sum_i v_x[i] w_z[i] + v_z[i] w_x[i].
    return int((v[0::2] @ w[1::2] + v[1::2] @ w[0::2]) % 2)


def _transvection(h, v):
    return (v + _symplectic_product(h, v) * h) % 2


def _find_transvection(x, y):
    """h1, h2 with Z_h1 Z_h2 x = y for nonzero x, y (Koenig-Smolin Lemma 2)."""
    nn = x.size
    out = np.zeros((2, nn), dtype=np.int64)
    if np.array_equal(x, y):
        return out
    if _symplectic_product(x, y) == 1:
        out[0] = (x + y) % 2
        return out
    z = np.zeros(nn, dtype=np.int64)
    for i in range(nn // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1] != 0) and (y[ii] + y[ii + 1] != 0):
            z[ii] = (x[ii] + y[ii]) % 2
            z[ii + 1] = (x[ii + 1] + y[ii + 1]) % 2
            if z[ii] + z[ii + 1] == 0:
                z[ii + 1] = 1
                if x[ii] != x[ii + 1]:
                    z[ii] = 1
            out[0] = (x + z) % 2
            out[1] = (y + z) % 2
            return out
    # x nonzero on some pair where y is zero, and vice versa.
    for i in range(nn // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1] != 0) and (y[ii] + y[ii + 1] == 0):
            if x[ii] == x[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = x[ii]
                z[ii] = x[ii + 1]
            break
    for i in range(nn // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1] == 0) and (y[ii] + y[ii + 1] != 0):
            if y[ii] == y[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = y[ii]
                z[ii] = y[ii + 1]
            break
    out[0] = (x + z) % 2
    out[1] = (y + z) % 2
    return out


def random_symplectic(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform 2n x 2n symplectic matrix over F_2 (interleaved x/z pairs)."""
    nn = 2 * n
    f1 = rng.integers(0, 2, size=nn)
    while not f1.any():
        f1 = rng.integers(0, 2, size=nn)
    e1 = np.zeros(nn, dtype=np.int64)
    e1[0] = 1
    t = _find_transvection(e1, f1)
    bits = rng.integers(0, 2, size=nn - 1)
    eprime = e1.copy()
    eprime[2:] = bits[1:]
    h0 = _transvection(t[0], eprime)
    h0 = _transvection(t[1], h0)
    if bits[0] == 1:
        f1 = f1 * 0
    if n == 1:
        g = np.eye(2, dtype=np.int64)
    else:
        g = np.zeros((nn, nn), dtype=np.int64)
        g[:2, :2] = np.eye(2, dtype=np.int64)
        g[2:, 2:] = random_symplectic(n - 1, rng)
    for j in range(nn):
        g[j] = _transvection(t[0], g[j])
        g[j] = _transvection(t[1], g[j])
        g[j] = _transvection(h0, g[j])
        g[j] = _transvection(f1, g[j])
    return g


def pauli_matrix(v: np.ndarray, sign: int = 0) -> np.ndarray:
    """Hermitian Pauli for interleaved bits v: (-1)^sign i^{x.z} ⊗ X^x Z^z."""
    n = v.size // 2
    mats = [_PAULI_1[(int(v[2 * i]), int(v[2 * i + 1]))] for i in range(n)]
    m = linalg.kron_all(mats)
    return -m if sign else m


def random_clifford(n: int, seed) -> np.ndarray:
    """Uniformly random n-qubit Clifford unitary (dense, up to global phase)."""
    check_pure_cap(4 ** n, "materialized Clifford")
    rng = as_seed(seed).child("clifford").generator()
    g = random_symplectic(n, rng)
    signs = rng.integers(0, 2, size=2 * n)
    d = 2 ** n
    # Stabilizers of U|0^n>: the images of Z_1..Z_n.
    proj = np.eye(d, dtype=complex)
    for i in range(n):
        p = pauli_matrix(g[2 * i + 1], int(signs[2 * i + 1]))
        proj = 0.5 * (proj + p @ proj)
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    phi = proj[:, col]
    phi = phi / np.linalg.norm(phi)
    pivot = int(np.argmax(np.abs(phi)))
    phi = phi * (np.abs(phi[pivot]) / phi[pivot])
    # Columns: U|x> = prod_i (image of X_i)^{x_i} U|0^n>.
    x_images = [pauli_matrix(g[2 * i], int(signs[2 * i])) for i in range(n)]
    cols = [phi]
    for i in reversed(range(n)):
        cols = cols + [x_images[i] @ c for c in cols]
    return np.stack(cols, axis=1)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with the standard phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph = ph / np.abs(ph)
    return q * ph


def random_state(d: int, seed, split=None) -> BipartiteState:
    """Haar-random pure state: normalized complex Gaussian vector."""
    check_pure_cap(d)
    rng = as_seed(seed).child("haar-state").generator()
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v = v / np.linalg.norm(v)
    return BipartiteState(v, split or (1, d))


def haar_state_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int = None) -> np.ndarray:
    """Random mixed state: partial trace of a Haar state on d x rank."""
    rank = rank or d
    m = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real
