"""Sparse Hermitian storage (CSR), products, and Matrix Market exchange.

Matrices are immutable after construction.  ``B = None`` in a pencil is the
identity tag: standard problems skip the mass-matrix products entirely.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .errors import (
    DimensionMismatch,
    IndefiniteB,
    NotHermitian,
    ParseError,
    UnsupportedFormat,
)

__all__ = [
    "SparseMatrixCsr",
    "SparseHermitianPencil",
    "spmv",
    "spmm",
    "read_matrix_market",
    "write_matrix_market",
]


@dataclass
class SparseMatrixCsr:
    """Square sparse matrix in compressed sparse row form.

    ``row_ptr`` has length n+1 and is nondecreasing; column indices are
    strictly increasing within each row.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _backend: scipy.sparse.csr_matrix = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(self.col_idx, dtype=np.int64)
        self.values = np.asarray(self.values)
        if self.row_ptr.shape != (self.n + 1,):
            raise DimensionMismatch("row_ptr must have length n+1")
        if np.any(np.diff(self.row_ptr) < 0):
            raise DimensionMismatch("row_ptr must be nondecreasing")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.col_idx):
            raise DimensionMismatch("row_ptr endpoints disagree with col_idx length")
        if len(self.col_idx) != len(self.values):
            raise DimensionMismatch("col_idx and values lengths differ")
        if self.col_idx.size and (self.col_idx.min() < 0 or self.col_idx.max() >= self.n):
            raise DimensionMismatch("column index out of range")
        for i in range(self.n):
            cols = self.col_idx[self.row_ptr[i] : self.row_ptr[i + 1]]
            if cols.size > 1 and np.any(np.diff(cols) <= 0):
                raise DimensionMismatch(f"row {i}: column indices not strictly increasing")

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build from triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals)
        if np.iscomplexobj(vals) and np.abs(vals.imag).max(initial=0.0) == 0.0:
            vals = vals.real.copy()
        m = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(n, m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.copy())

    @classmethod
    def from_dense(cls, A):
        A = np.asarray(A)
        rows, cols = np.nonzero(A)
        return cls.from_coo(A.shape[0], rows, cols, A[rows, cols])

    @classmethod
    def identity(cls, n, dtype=float):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n, dtype=dtype))

    @property
    def nnz(self):
        return len(self.values)

    @property
    def scipy_csr(self):
        if self._backend is None:
            self._backend = scipy.sparse.csr_matrix(
                (self.values, self.col_idx, self.row_ptr), shape=(self.n, self.n)
            )
        return self._backend

    def to_dense(self):
        return self.scipy_csr.toarray()

    def hermitian_defect(self):
        """max |S - S^H| over entries, absolute."""
        d = self.scipy_csr - self.scipy_csr.conj().T
        return np.abs(d.data).max() if d.nnz else 0.0

    def is_hermitian(self, tol=1e-12):
        scale = np.abs(self.values).max() if self.nnz else 0.0
        if scale == 0.0:
            return True
        return self.hermitian_defect() <= tol * scale

    def __matmul__(self, other):
        other = np.asarray(other)
        if other.ndim == 1:
            return spmv(self, other)
        return spmm(self, other)


def spmv(S: SparseMatrixCsr, x):
    """Sparse matrix times vector."""
    x = np.asarray(x)
    if x.shape != (S.n,):
        raise DimensionMismatch(f"vector length {x.shape} does not match n={S.n}")
    return S.scipy_csr @ x


def spmm(S: SparseMatrixCsr, X):
    """Sparse matrix times dense multivector (columnwise spmv)."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != S.n:
        raise DimensionMismatch(f"block shape {X.shape} does not match n={S.n}")
    return S.scipy_csr @ X


@dataclass
class SparseHermitianPencil:
    """The problem data (A, B) with A Hermitian and B Hermitian positive
    definite.  ``b=None`` tags the identity mass matrix."""

    a: SparseMatrixCsr
    b: SparseMatrixCsr | None = None
    planted_spectrum: np.ndarray | None = None

    def __post_init__(self):
        if self.b is not None and self.b.n != self.a.n:
            raise DimensionMismatch("A and B dimensions differ")
        if not self.a.is_hermitian():
            raise NotHermitian("A fails the Hermitian check")
        if self.b is not None:
            if not self.b.is_hermitian():
                raise NotHermitian("B fails the Hermitian check")
            # probabilistic positive-definiteness spot check
            rng = np.random.default_rng(0)
            X = rng.standard_normal((self.n, 20))
            quad = np.einsum("ij,ij->j", X, spmm(self.b, X).real)
            if np.any(quad <= 0.0):
                raise IndefiniteB("B failed the positive-definiteness spot check")

    @property
    def n(self):
        return self.a.n

    @property
    def b_is_identity(self):
        return self.b is None

    @property
    def is_real(self):
        real_a = not np.iscomplexobj(self.a.values)
        real_b = self.b is None or not np.iscomplexobj(self.b.values)
        return real_a and real_b

    def apply_a(self, X):
        return self.a @ X

    def apply_b(self, X):
        if self.b is None:
            return np.asarray(X)
        return self.b @ X


_FIELDS = ("real", "complex", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


def _parse_banner(line):
    parts = line.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise ParseError(1, "malformed Matrix Market banner")
    fmt, fld, sym = parts[2], parts[3], parts[4]
    if fmt not in ("coordinate", "array"):
        raise ParseError(1, f"unknown format '{fmt}'")
    if fld not in _FIELDS:
        raise ParseError(1, f"unknown field '{fld}'")
    if sym not in _SYMMETRIES:
        raise ParseError(1, f"unknown symmetry '{sym}'")
    if fld == "pattern":
        raise UnsupportedFormat("pattern matrices carry no values")
    if sym == "skew-symmetric":
        raise UnsupportedFormat("skew-symmetric matrices are not supported")
    return fmt, fld, sym


def _parse_value(tokens, fld, lineno):
    try:
        if fld == "complex":
            return complex(float(tokens[0]), float(tokens[1]))
        return float(tokens[0])
    except (ValueError, IndexError):
        raise ParseError(lineno, "malformed numeric value") from None


def read_matrix_market(path) -> SparseMatrixCsr:
    """Read a Matrix Market file into CSR.

    Coordinate and array variants; real/integer/complex fields; general,
    symmetric, and hermitian symmetry (expanded to full storage).  Indices
    are converted to 0-based and duplicate coordinate entries are summed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(1, "empty file")
    fmt, fld, sym = _parse_banner(lines[0])

    body = [
        (i + 1, ln.strip())
        for i, ln in enumerate(lines)
        if i > 0 and ln.strip() and not ln.lstrip().startswith("%")
    ]
    if not body:
        raise ParseError(len(lines), "missing size line")
    size_lineno, size_line = body[0]
    tokens = size_line.split()
    entries = body[1:]

    complex_field = fld == "complex"
    vals_per_entry = 2 if complex_field else 1

    if fmt == "coordinate":
        if len(tokens) != 3:
            raise ParseError(size_lineno, "coordinate size line needs rows cols nnz")
        try:
            nrows, ncols, nnz = (int(t) for t in tokens)
        except ValueError:
            raise ParseError(size_lineno, "non-integer size line") from None
        if nrows != ncols:
            raise UnsupportedFormat(f"non-square matrix {nrows}x{ncols}")
        if len(entries) != nnz:
            raise ParseError(size_lineno, f"expected {nnz} entries, found {len(entries)}")
        rows, cols, vals = [], [], []
        for lineno, ln in entries:
            t = ln.split()
            if len(t) != 2 + vals_per_entry:
                raise ParseError(lineno, "wrong number of tokens in entry")
            try:
                i, j = int(t[0]), int(t[1])
            except ValueError:
                raise ParseError(lineno, "non-integer index") from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ParseError(lineno, f"index ({i}, {j}) out of range")
            v = _parse_value(t[2:], fld, lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            if sym != "general" and i != j:
                rows.append(j - 1)
                cols.append(i - 1)
                vals.append(np.conj(v) if sym == "hermitian" else v)
        dtype = complex if complex_field else float
        return SparseMatrixCsr.from_coo(
            nrows, rows, cols, np.asarray(vals, dtype=dtype)
        )

    # array format: dense column-major values, lower triangle when symmetric
    if len(tokens) != 2:
        raise ParseError(size_lineno, "array size line needs rows cols")
    try:
        nrows, ncols = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(size_lineno, "non-integer size line") from None
    if nrows != ncols:
        raise UnsupportedFormat(f"non-square matrix {nrows}x{ncols}")
    coords = []
    if sym == "general":
        for j in range(ncols):
            for i in range(nrows):
                coords.append((i, j))
    else:
        for j in range(ncols):
            for i in range(j, nrows):
                coords.append((i, j))
    if len(entries) != len(coords):
        raise ParseError(size_lineno, f"expected {len(coords)} values, found {len(entries)}")
    dtype = complex if complex_field else float
    dense = np.zeros((nrows, ncols), dtype=dtype)
    for (i, j), (lineno, ln) in zip(coords, entries):
        v = _parse_value(ln.split(), fld, lineno)
        dense[i, j] = v
        if sym != "general" and i != j:
            dense[j, i] = np.conj(v) if sym == "hermitian" else v
    return SparseMatrixCsr.from_dense(dense)


def write_matrix_market(S: SparseMatrixCsr, path):
    """Write CSR content as a general coordinate Matrix Market file."""
    complex_field = np.iscomplexobj(S.values)
    fld = "complex" if complex_field else "real"
    lines = [f"%%MatrixMarket matrix coordinate {fld} general"]
    lines.append(f"{S.n} {S.n} {S.nnz}")
    for i in range(S.n):
        for k in range(S.row_ptr[i], S.row_ptr[i + 1]):
            j = S.col_idx[k]
            v = S.values[k]
            if complex_field:
                lines.append(f"{i + 1} {j + 1} {v.real:.16e} {v.imag:.16e}")
            else:
                lines.append(f"{i + 1} {j + 1} {v:.16e}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return os.fspath(path)
