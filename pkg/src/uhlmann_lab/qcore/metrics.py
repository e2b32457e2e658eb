"""Distance measures and SVD thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NotPositive
from . import linalg
from .states import BipartiteState, DensityOp

# Singular values within this band of the cutoff count as below it, so that
# numerically rank-deficient inputs threshold the way exact arithmetic would.
SGN_BAND = 1e-12


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOp):
        return rho.matrix
    if isinstance(rho, BipartiteState):
        return rho.density().matrix
    return np.asarray(rho, dtype=complex)


def fidelity(rho, sigma) -> float:
    """Squared-convention fidelity F = ||sqrt(rho) sqrt(sigma)||_1^2, clamped to [0,1]."""
    r, s = _as_matrix(rho), _as_matrix(sigma)
    if r.shape != s.shape:
        raise DimensionMismatch(f"shapes {r.shape} vs {s.shape}")
    for m in (r, s):
        if np.linalg.eigvalsh(linalg.hermitize(m)).min() < -1e-7:
            raise NotPositive("fidelity input not PSD within tolerance")
    root = linalg.psd_sqrt(r) @ linalg.psd_sqrt(s)
    val = np.linalg.svd(root, compute_uv=False).sum() ** 2
    return float(np.clip(val.real, 0.0, 1.0))


def trace_distance(rho, sigma) -> float:
    """td = (1/2) ||rho - sigma||_1, clamped to [0,1]."""
    r, s = _as_matrix(rho), _as_matrix(sigma)
    if r.shape != s.shape:
        raise DimensionMismatch(f"shapes {r.shape} vs {s.shape}")
    vals = np.linalg.eigvalsh(linalg.hermitize(r - s))
    return float(np.clip(0.5 * np.abs(vals).sum(), 0.0, 1.0))


@dataclass(frozen=True)
class PartialIsometryOp:
    """Operator with singular values in {0, 1}; unitary on its support.

    ``polar`` caches the polar unitary of the matrix the isometry was
    thresholded from, which is the canonical unitary completion.
    """

    matrix: np.ndarray
    polar: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex).copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.polar is not None:
            p = np.asarray(self.polar, dtype=complex).copy()
            p.setflags(write=False)
            object.__setattr__(self, "polar", p)

    @property
    def support_projector(self) -> np.ndarray:
        """W^dag W, the projector onto the support."""
        return self.matrix.conj().T @ self.matrix

    @property
    def range_projector(self) -> np.ndarray:
        return self.matrix @ self.matrix.conj().T

    def rank(self) -> int:
        return int(round(np.trace(self.support_projector).real))

    def check(self, atol: float = 1e-9) -> None:
        sv = np.linalg.svd(self.matrix, compute_uv=False)
        bad = np.minimum(np.abs(sv), np.abs(sv - 1.0)).max(initial=0.0)
        if bad > atol:
            raise ValueError(f"singular values deviate from {{0,1}} by {bad:.3g}")


def sgn_eta(m: np.ndarray, eta: float = 0.0) -> PartialIsometryOp:
    """SVD thresholding: U sgn_eta(Sigma) V^dag, keeping singular values > eta.

    Uses the strict comparison s > eta with a 1e-12 dead band: values within
    the band of the cutoff are treated as below it.
    """
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    u, sv, vh = np.linalg.svd(m)
    kept = sv > (eta + SGN_BAND)
    k = int(kept.sum())
    w = u[:, :k] @ vh[:k, :]
    polar = u @ vh if m.shape[0] == m.shape[1] else None
    return PartialIsometryOp(w, polar)
