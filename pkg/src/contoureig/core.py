"""The main solver: quadrature-projected subspace iteration with reduced
Hermitian solves, rank handling, stopping criteria, and a per-iteration
diagnostic trace.

One iteration: filter the current basis through the contour quadrature,
optionally re-reveal its numerical rank, compress A and B onto it, solve the
reduced generalized problem, assemble full-size approximate eigenpairs, and
test the configured stopping criterion.  Shift factorizations are cached per
quadrature node, so direct-backend iterations after the first cost only
triangular solves.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .contour import Contour, SearchInterval, build_contour
from .dense import (
    cholesky_posdef_check,
    generalized_eigensolve,
    principal_angle,
    rank_revealing_basis,
)
from .errors import (
    DegenerateDenominator,
    InvalidParams,
    InvalidStartingBasis,
    NotHermitian,
    ZeroMatrix,
    ZeroScale,
)
from .linsolve import LinSolveConfig, LinSolveReport, ShiftedOperator, solve_block
from .sparse import SparseHermitianPencil

__all__ = [
    "FeastStatus",
    "FeastConfig",
    "StartingBasis",
    "RitzSet",
    "IterationRecord",
    "IterationTrace",
    "build_subspace",
    "rayleigh_quotients",
    "feast_solve",
    "trace_criterion",
    "residual_criterion",
    "residual_bound",
]

_MACHINE_EPS = float(np.finfo(float).eps)

#: Consecutive-iterate canonical angle (degrees) below which the subspace
#: counts as frozen; three such iterations without the criterion firing
#: terminate with FeastStatus.STAGNATED.
STAGNATION_ANGLE_DEG = 1e-14
_STAGNATION_RUNS = 3


class FeastStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STAGNATED = "stagnated"


@dataclass
class FeastConfig:
    """Solver settings.

    ``criterion`` selects the stopping test: per-pair residuals against
    ``residual_eps * n * max(|lo|, |hi|)`` (the default, eps defaulting to
    the unit roundoff) or the relative change of the sum of in-interval
    approximate eigenvalues against ``trace_tol``.
    """

    interval: SearchInterval
    quadrature_m: int = 8
    aspect: float = 1.0
    lin: LinSolveConfig = field(default_factory=LinSolveConfig)
    max_feast_iters: int = 20
    criterion: str = "residual"
    residual_eps: float = _MACHINE_EPS
    trace_tol: float = 1e-13
    rank_strategy: str = "svd_reveal"
    rank_tol: float | None = None  # None: 1e-12 * m_estimate
    residual_scale_floor: float | None = None
    stop_on_criterion: bool = True

    def __post_init__(self):
        if self.max_feast_iters < 1:
            raise InvalidParams("max_feast_iters must be >= 1")
        if self.criterion not in ("residual", "trace"):
            raise InvalidParams(f"unknown criterion '{self.criterion}'")
        if self.rank_strategy not in ("svd_reveal", "cholesky_check"):
            raise InvalidParams(f"unknown rank strategy '{self.rank_strategy}'")

    def effective_rank_tol(self):
        if self.rank_tol is not None:
            return self.rank_tol
        return 1e-12 * self.interval.m_estimate


@dataclass
class StartingBasis:
    """Initial block Y of full column rank, with a record of its origin."""

    Y: np.ndarray
    origin: str

    @classmethod
    def random(cls, n, m, seed, complex_entries=False):
        rng = np.random.default_rng(seed)
        Y = rng.standard_normal((n, m))
        if complex_entries:
            Y = Y + 1j * rng.standard_normal((n, m))
        return cls(Y, f"random(seed={seed})")

    @classmethod
    def user_supplied(cls, Y):
        Y = np.asarray(Y)
        if Y.ndim != 2 or Y.shape[1] < 1:
            raise InvalidStartingBasis("starting basis must be a 2-d block")
        sigma = np.linalg.svd(Y, compute_uv=False)
        if sigma[-1] <= 1e-12 * sigma[0]:
            raise InvalidStartingBasis(
                f"starting basis is numerically rank deficient (rank < {Y.shape[1]})"
            )
        return cls(Y, "user_supplied")

    @classmethod
    def deflated(cls, base, reference_vectors):
        """Project the columns of ``reference_vectors`` out of ``base.Y``."""
        R = np.asarray(reference_vectors)
        Y = base.Y - R @ (R.conj().T @ base.Y)
        return cls(Y, f"deflated({base.origin}, projected_out={R.shape[1]})")


@dataclass
class RitzSet:
    """Approximate eigenpairs with recomputed full-size residuals.

    ``converged`` always holds the per-pair residual test, whatever criterion
    drove the iteration; out-of-interval pairs are reported but never count
    toward convergence.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    in_interval: np.ndarray
    converged: np.ndarray

    @property
    def n_in_interval(self):
        return int(np.count_nonzero(self.in_interval))

    def inside(self):
        """(values, vectors) restricted to the search interval."""
        return self.values[self.in_interval], self.vectors[:, self.in_interval]


@dataclass
class IterationRecord:
    iteration: int
    trace_value: float
    criterion_value: float
    residual_min: float
    residual_max: float
    residual_bound: float
    b_u_rank: int
    active_m: int
    n_in_interval: int
    n_converged: int
    angle_prev_deg: float
    angle_ref_deg: float
    revealed_rank: int | None = None
    b_u_posdef: bool | None = None


@dataclass
class IterationTrace:
    records: list

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def trace_criterion(trace_k, trace_prev, tol) -> bool:
    """Relative change of the in-interval eigenvalue sum against tol.

    Raises DegenerateDenominator instead of dividing by a vanishing sum.
    """
    if abs(trace_k) < 1e-300:
        raise DegenerateDenominator("in-interval eigenvalue sum is numerically zero")
    return abs(trace_k - trace_prev) / abs(trace_k) < tol


def residual_bound(n, lo, hi, eps, scale_floor=None) -> float:
    """Right-hand side of the per-pair residual test: eps * n * scale, where
    scale is max(|lo|, |hi|) or the configured floor when larger."""
    scale = max(abs(lo), abs(hi))
    if scale_floor is not None:
        scale = max(scale, scale_floor)
    if scale == 0.0:
        raise ZeroScale("interval magnitude and scale floor are both zero")
    return eps * n * scale


def residual_criterion(ritz: RitzSet, cfg: FeastConfig):
    """Per-pair residual flags; out-of-interval pairs are always False."""
    bound = residual_bound(
        ritz.vectors.shape[0],
        cfg.interval.lo,
        cfg.interval.hi,
        cfg.residual_eps,
        cfg.residual_scale_floor,
    )
    return (ritz.residuals <= bound) & ritz.in_interval


def _hermitize(S, what):
    scale = np.abs(S).max()
    if scale > 0.0 and np.abs(S - S.conj().T).max() > 1e-12 * scale:
        raise NotHermitian(f"{what} asymmetry exceeds 1e-12 relative")
    return (S + S.conj().T) / 2.0


def rayleigh_quotients(U, pencil: SparseHermitianPencil):
    """Compressions U^H A U and U^H B U, symmetrized after an asymmetry
    check at 1e-12 relative."""
    U = np.asarray(U)
    A_U = _hermitize(U.conj().T @ pencil.apply_a(U), "U^H A U")
    B_U = _hermitize(U.conj().T @ pencil.apply_b(U), "U^H B U")
    return A_U, B_U


def _node_operators(pencil, contour: Contour, need_conjugate):
    ops = [ShiftedOperator(pencil, complex(z)) for z in contour.nodes]
    conj_ops = None
    if need_conjugate:
        conj_ops = [ShiftedOperator(pencil, complex(np.conj(z))) for z in contour.nodes]
    return ops, conj_ops


def _accumulate_subspace(ops, conj_ops, contour, BY, lin_cfg):
    """Combine per-node solves into the filtered block.

    Real data uses the conjugate-symmetry shortcut (one solve per node);
    complex data solves at the mirrored shifts explicitly.
    """
    weights = contour.weights
    node_cfg = lin_cfg
    run_parallel = lin_cfg.workers > 1 and len(ops) > 1
    if run_parallel:
        node_cfg = dataclasses.replace(lin_cfg, workers=1)

    def solve_at(node):
        V, rep = solve_block(ops[node], BY, node_cfg)
        if conj_ops is None:
            return V, None, rep, None
        Vc, repc = solve_block(conj_ops[node], BY, node_cfg)
        return V, Vc, rep, repc

    if run_parallel:
        with ThreadPoolExecutor(max_workers=lin_cfg.workers) as pool:
            solved = list(pool.map(solve_at, range(len(ops))))
    else:
        solved = [solve_at(k) for k in range(len(ops))]

    acc = np.zeros(BY.shape, dtype=complex)
    reports = []
    labels = []
    for k, (V, Vc, rep, repc) in enumerate(solved):
        if conj_ops is None:
            acc += weights[k] * V
        else:
            acc += weights[k] * V - np.conj(weights[k]) * Vc
        reports.append(rep)
        labels.append(k)
        if repc is not None:
            reports.append(repc)
            labels.append(-k - 1)  # conjugate-node solves get negative labels

    if conj_ops is None:
        # (S - conj(S)) / 2 pi i  ==  Im(S) / pi, exactly real
        U = acc.imag / np.pi
    else:
        U = acc / (2.0j * np.pi)
    return U, LinSolveReport.merge(reports, labels)


def build_subspace(pencil: SparseHermitianPencil, contour: Contour, Y, lin_cfg=None):
    """Filter the block Y through the contour quadrature of the resolvent.

    Returns the approximate spectral projection of Y (real for real pencils)
    together with the merged inner-solve report.
    """
    if lin_cfg is None:
        lin_cfg = LinSolveConfig()
    Y = np.asarray(Y)
    real_path = pencil.is_real and not np.iscomplexobj(Y)
    ops, conj_ops = _node_operators(pencil, contour, need_conjugate=not real_path)
    BY = pencil.apply_b(Y)
    return _accumulate_subspace(ops, conj_ops, contour, BY, lin_cfg)


def _b_normalize(X, BX):
    mass = np.einsum("ij,ij->j", X.conj(), BX).real
    if np.any(mass <= 0.0):
        raise ZeroMatrix("an assembled vector has nonpositive B-mass")
    scale = 1.0 / np.sqrt(mass)
    return X * scale, BX * scale, scale


def feast_solve(pencil: SparseHermitianPencil, cfg: FeastConfig, y0: StartingBasis,
                reference_space=None):
    """Run the contour-projected subspace iteration to a stopping criterion.

    Returns ``(RitzSet, IterationTrace, FeastStatus)``.  The active subspace
    may shrink when rank revelation or the reduced solve detects a smaller
    numerical rank; the shrink is permanent for the rest of the run.
    """
    Y = np.asarray(y0.Y)
    if Y.ndim != 2 or Y.shape[0] != pencil.n:
        raise InvalidStartingBasis(f"starting basis shape {Y.shape} does not match n")
    if Y.shape[1] != cfg.interval.m_estimate:
        raise InvalidStartingBasis(
            f"starting basis has {Y.shape[1]} columns, interval estimates "
            f"{cfg.interval.m_estimate}"
        )
    sigma = np.linalg.svd(Y, compute_uv=False)
    if sigma[-1] <= 1e-12 * sigma[0]:
        raise InvalidStartingBasis("starting basis is numerically rank deficient")

    contour = build_contour(cfg.interval, cfg.quadrature_m, cfg.aspect)
    real_path = pencil.is_real and not np.iscomplexobj(Y)
    ops, conj_ops = _node_operators(pencil, contour, need_conjugate=not real_path)
    rank_tol = cfg.effective_rank_tol()
    lo, hi = cfg.interval.lo, cfg.interval.hi

    records = []
    ritz = None
    status = FeastStatus.MAX_ITERS
    prev_trace = None
    prev_X = None
    stagnant_run = 0

    for iteration in range(1, cfg.max_feast_iters + 1):
        BY = pencil.apply_b(Y)
        U, _ = _accumulate_subspace(ops, conj_ops, contour, BY, cfg.lin)

        revealed = None
        if cfg.rank_strategy == "svd_reveal":
            U, revealed = rank_revealing_basis(U, rank_tol)

        AU = pencil.apply_a(U)
        BU = pencil.apply_b(U)
        A_U = _hermitize(U.conj().T @ AU, "U^H A U")
        B_U = _hermitize(U.conj().T @ BU, "U^H B U")
        b_u_posdef = None
        if cfg.rank_strategy == "cholesky_check":
            b_u_posdef = cholesky_posdef_check(B_U)

        values, W, eff_rank = generalized_eigensolve(A_U, B_U, rank_tol)
        if eff_rank == 0:
            raise ZeroMatrix("projected subspace carries no B-mass; nothing to iterate")

        X = U @ W
        BX = BU @ W
        AX = AU @ W
        X, BX, col_scale = _b_normalize(X, BX)
        AX = AX * col_scale
        residuals = np.linalg.norm(AX - BX * values, axis=0)
        in_interval = (values >= lo) & (values <= hi)

        trace_k = float(np.sum(values[in_interval]))
        bound = residual_bound(pencil.n, lo, hi, cfg.residual_eps, cfg.residual_scale_floor)
        res_flags = (residuals <= bound) & in_interval
        res_in = residuals[in_interval]

        criterion_value = np.nan
        fired = False
        if cfg.criterion == "trace":
            if prev_trace is not None:
                try:
                    fired = trace_criterion(trace_k, prev_trace, cfg.trace_tol)
                    criterion_value = abs(trace_k - prev_trace) / abs(trace_k)
                except DegenerateDenominator:
                    criterion_value = np.nan
        else:
            fired = bool(in_interval.any()) and bool(np.all(res_flags[in_interval]))

        angle_prev = np.nan
        if prev_X is not None:
            angle_prev = principal_angle(X, prev_X)
        angle_ref = np.nan
        if reference_space is not None:
            angle_ref = principal_angle(X, reference_space)

        records.append(
            IterationRecord(
                iteration=iteration,
                trace_value=trace_k,
                criterion_value=criterion_value,
                residual_min=float(res_in.min()) if res_in.size else np.nan,
                residual_max=float(res_in.max()) if res_in.size else np.nan,
                residual_bound=bound,
                b_u_rank=eff_rank,
                active_m=X.shape[1],
                n_in_interval=int(np.count_nonzero(in_interval)),
                n_converged=int(np.count_nonzero(res_flags)),
                angle_prev_deg=angle_prev,
                angle_ref_deg=angle_ref,
                revealed_rank=revealed,
                b_u_posdef=b_u_posdef,
            )
        )
        ritz = RitzSet(values, X, residuals, in_interval, res_flags)

        if fired and cfg.stop_on_criterion:
            status = FeastStatus.CONVERGED
            break

        if not np.isnan(angle_prev) and angle_prev < STAGNATION_ANGLE_DEG:
            stagnant_run += 1
            if stagnant_run >= _STAGNATION_RUNS:
                status = FeastStatus.STAGNATED
                break
        else:
            stagnant_run = 0

        prev_trace = trace_k
        prev_X = X
        Y = X

    return ritz, IterationTrace(records), status
