"""Contour-integration eigensolver for sparse Hermitian-definite pencils."""

from .contour import Contour, SearchInterval, build_contour, gauss_legendre, scalar_filter
from .core import (
    FeastConfig,
    FeastStatus,
    IterationTrace,
    RitzSet,
    StartingBasis,
    build_subspace,
    feast_solve,
    rayleigh_quotients,
    residual_criterion,
    trace_criterion,
)
from .dense import (
    SpectralFactorization,
    b_orthogonality,
    cholesky_posdef_check,
    generalized_eigensolve,
    hermitian_eigensolve,
    principal_angle,
    rank_revealing_basis,
)
from .generators import synthesize_test_matrix
from .linsolve import (
    LinSolveConfig,
    LinSolveReport,
    ShiftedOperator,
    direct_dense_solve,
    gmres_solve,
    solve_block,
)
from .multi import MergedSpectrum, Partition, orthogonality_matrix, solve_partitioned
from .sparse import (
    SparseHermitianPencil,
    SparseMatrixCsr,
    read_matrix_market,
    spmm,
    spmv,
    write_matrix_market,
)

__version__ = "0.1.0"
