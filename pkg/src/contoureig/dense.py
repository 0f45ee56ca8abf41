"""Small dense Hermitian kernels for the reduced problems and diagnostics.

Everything here operates on matrices of the order of the subspace estimate,
never on full problem dimension.  The Hermitian eigensolver is a cyclic
Jacobi sweep; sizes stay in the low hundreds, where Jacobi is accurate and
has no trouble with tight clusters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    IndefiniteB,
    NotHermitian,
    RankDeficientInput,
    ZeroMatrix,
)

__all__ = [
    "SpectralFactorization",
    "hermitian_eigensolve",
    "generalized_eigensolve",
    "cholesky_posdef_check",
    "rank_revealing_basis",
    "principal_angle",
    "b_orthogonality",
]

#: Relative Hermitian-symmetry tolerance for input checks.
HERMITIAN_TOL = 1e-12

#: Off-diagonal reduction target of the Jacobi sweep, relative to ||S||_F.
JACOBI_TOL = 1e-15

_JACOBI_MAX_SWEEPS = 60

#: IndefiniteB fires when min eig(B_U) < -tol * max|eig(B_U)|; rounding of a
#: semidefinite matrix stays far above this.
_INDEFINITE_TOL = 1e-10


@dataclass(frozen=True)
class SpectralFactorization:
    """Full spectral factorization S = V diag(w) V^H, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _hermitian_defect(S):
    scale = np.abs(S).max()
    if scale == 0.0:
        return 0.0
    return np.abs(S - S.conj().T).max() / scale


def _require_hermitian(S, what="matrix"):
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotHermitian(f"{what} is not square: shape {S.shape}")
    if _hermitian_defect(S) > HERMITIAN_TOL:
        raise NotHermitian(
            f"{what} fails the Hermitian check at relative tolerance {HERMITIAN_TOL:g}"
        )
    return S


def _eigen_sort_order(values, vectors, component_tol=1e-12):
    """Ascending eigenvalue order; exact ties broken by the row index of the
    first nonzero eigenvector component (deterministic output)."""
    first_nonzero = np.full(values.size, values.size, dtype=int)
    for j in range(values.size):
        idx = np.nonzero(np.abs(vectors[:, j]) > component_tol)[0]
        if idx.size:
            first_nonzero[j] = idx[0]
    return np.lexsort((first_nonzero, values))


def hermitian_eigensolve(S) -> SpectralFactorization:
    """Diagonalize a Hermitian matrix with cyclic Jacobi rotations.

    Raises NotHermitian when the input fails the symmetry check.  Eigenvalues
    come out ascending; eigenvectors are the accumulated rotations, hence
    orthonormal to machine precision.
    """
    S = _require_hermitian(S, "eigensolve input")
    n = S.shape[0]
    real_input = not np.iscomplexobj(S)
    A = np.array(S, dtype=complex)
    A = (A + A.conj().T) / 2.0
    V = np.eye(n, dtype=complex)

    norm = np.linalg.norm(A, "fro")
    if n == 1 or norm == 0.0:
        values = np.real(np.diag(A)).copy()
        vectors = V.real if real_input else V
        return SpectralFactorization(values, vectors)

    stop = JACOBI_TOL * norm
    offdiag_mask = ~np.eye(n, dtype=bool)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(A[offdiag_mask])
        if off <= stop:
            break
        # skip rotations that cannot move the off-norm meaningfully
        skip = off / (n * 4.0) * 1e-2
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= skip or mag == 0.0:
                    continue
                app = A[p, p].real
                aqq = A[q, q].real
                phase = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0.0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # 2x2 unitary: columns (c, -s*conj(phase)) and (s, c*conj(phase))
                j11, j12 = c, s
                j21, j22 = -s * np.conj(phase), c * np.conj(phase)
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = j11 * colp + j21 * colq
                A[:, q] = j12 * colp + j22 * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = np.conj(j11) * rowp + np.conj(j21) * rowq
                A[q, :] = np.conj(j12) * rowp + np.conj(j22) * rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                colp = V[:, p].copy()
                colq = V[:, q].copy()
                V[:, p] = j11 * colp + j21 * colq
                V[:, q] = j12 * colp + j22 * colq

    values = np.real(np.diag(A)).copy()
    order = _eigen_sort_order(values, V)
    values = values[order]
    V = V[:, order]
    if real_input:
        V = V.real.copy()
    return SpectralFactorization(values, V)


def generalized_eigensolve(A_U, B_U, rank_tol):
    """Solve A_U W = B_U W diag(values) on the numerical range of B_U.

    B_U is factored spectrally; directions with mass at or below
    ``rank_tol * max(eigenvalue)`` are discarded, the problem is reduced to a
    standard Hermitian one on the retained subspace, and the primitive pairs
    are transformed back.  Returned vectors are B_U-orthonormal on the
    retained subspace.

    Returns ``(values, vectors, effective_rank)``.  Raises IndefiniteB when
    B_U has a significantly negative eigenvalue.
    """
    A_U = _require_hermitian(A_U, "A_U")
    bfac = hermitian_eigensolve(B_U)
    d = bfac.eigenvalues
    dmax = d.max() if d.size else 0.0
    if dmax <= 0.0:
        if d.size and d.min() < -_INDEFINITE_TOL * np.abs(d).max():
            raise IndefiniteB("B_U has a negative eigenvalue beyond tolerance")
        # zero mass: nothing to solve on
        empty = np.zeros((A_U.shape[0], 0), dtype=A_U.dtype)
        return np.zeros(0), empty, 0
    if d.min() < -_INDEFINITE_TOL * dmax:
        raise IndefiniteB(
            f"B_U eigenvalue {d.min():.3e} is negative beyond tolerance "
            f"(max {dmax:.3e})"
        )
    keep = d > max(rank_tol, 0.0) * dmax
    keep &= d > 0.0
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        empty = np.zeros((A_U.shape[0], 0), dtype=A_U.dtype)
        return np.zeros(0), empty, 0

    T = bfac.eigenvectors[:, keep] / np.sqrt(d[keep])
    S = T.conj().T @ A_U @ T
    S = (S + S.conj().T) / 2.0
    reduced = hermitian_eigensolve(S)
    W = T @ reduced.eigenvectors
    order = _eigen_sort_order(reduced.eigenvalues, W)
    return reduced.eigenvalues[order], W[:, order], rank


def cholesky_posdef_check(B_U) -> bool:
    """True iff a Cholesky factorization completes with positive pivots.

    Pivots at or below ``n * eps * max(diag)`` count as failed: a strict
    zero test would make the outcome depend on the rounding direction of a
    semidefinite input.
    """
    B = np.array(_require_hermitian(B_U, "B_U"), dtype=complex)
    n = B.shape[0]
    floor = n * np.finfo(float).eps * max(np.real(np.diag(B)).max(), 0.0)
    for k in range(n):
        pivot = B[k, k].real
        if pivot <= floor:
            return False
        r = np.sqrt(pivot)
        B[k, k] = r
        B[k + 1 :, k] /= r
        if k + 1 < n:
            col = B[k + 1 :, k]
            B[k + 1 :, k + 1 :] -= np.outer(col, col.conj())
    return True


def rank_revealing_basis(U, tol):
    """Orthonormal basis of the numerical column space of a tall matrix.

    SVD-based: singular values below ``tol * sigma_max`` are discarded.
    Returns ``(basis, rank)``; raises ZeroMatrix when sigma_max is zero.
    """
    U = np.asarray(U)
    Q, sigma, _ = np.linalg.svd(U, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        raise ZeroMatrix("input has no nonzero singular value")
    rank = int(np.count_nonzero(sigma >= tol * sigma[0]))
    return Q[:, :rank].copy(), rank


def _orthonormalize_full_rank(X, what):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] < 1:
        raise RankDeficientInput(f"{what} must be a matrix with >= 1 column")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * max(diag.max(), np.finfo(float).tiny):
        raise RankDeficientInput(f"{what} is numerically rank deficient")
    return Q


def principal_angle(X1, X2) -> float:
    """Largest canonical angle between the column spans, in degrees.

    Both inputs are orthonormalized; the angle is arccos of the smallest
    singular value of the cross-Gram matrix.  Inputs must have full column
    rank (RankDeficientInput otherwise).
    """
    Q1 = _orthonormalize_full_rank(X1, "first subspace basis")
    Q2 = _orthonormalize_full_rank(X2, "second subspace basis")
    if Q1.shape[0] != Q2.shape[0]:
        raise RankDeficientInput("subspace bases live in different dimensions")
    sigma = np.linalg.svd(Q1.conj().T @ Q2, compute_uv=False)
    smallest = np.clip(sigma.min(), 0.0, 1.0)
    return float(np.degrees(np.arccos(smallest)))


def b_orthogonality(X, B=None) -> float:
    """Worst |x_i^H B x_j| over distinct columns of X.

    Columns are expected to be B-normalized by the caller.  ``B=None`` means
    the identity.  A single-column X scores 0.
    """
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] <= 1:
        return 0.0
    BX = X if B is None else B @ X
    G = np.abs(X.conj().T @ BX)
    np.fill_diagonal(G, 0.0)
    return float(G.max())
