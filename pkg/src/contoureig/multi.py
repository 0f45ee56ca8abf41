"""Partitioned solves over adjacent subintervals and the orthogonality
diagnostics that compare eigenvectors computed independently.

No re-orthogonalization happens across subintervals: the point of the
diagnostics is to measure what independent runs deliver, not to repair it.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contour import SearchInterval
from .core import FeastConfig, FeastStatus, RitzSet, StartingBasis, feast_solve
from .dense import b_orthogonality
from .errors import InvalidParams
from .sparse import SparseHermitianPencil

__all__ = ["Partition", "SubintervalResult", "MergedSpectrum",
           "solve_partitioned", "orthogonality_matrix"]

#: Relative tolerance for treating values from adjacent subintervals as the
#: same eigenpair found twice at a shared boundary.
BOUNDARY_DUPLICATE_RTOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Strictly ascending boundaries carving the search range into K
    subintervals, each with its own eigencount estimate."""

    boundaries: np.ndarray
    m_estimates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "boundaries", np.asarray(self.boundaries, dtype=float))
        object.__setattr__(self, "m_estimates", np.asarray(self.m_estimates, dtype=int))
        if self.boundaries.ndim != 1 or self.boundaries.size < 2:
            raise InvalidParams("need at least two boundaries")
        if np.any(np.diff(self.boundaries) <= 0.0):
            raise InvalidParams("boundaries must be strictly ascending")
        if self.m_estimates.shape != (self.boundaries.size - 1,):
            raise InvalidParams("need one eigencount estimate per subinterval")
        if np.any(self.m_estimates < 1):
            raise InvalidParams("eigencount estimates must be positive")

    @property
    def k(self):
        return self.boundaries.size - 1

    def subinterval(self, idx) -> SearchInterval:
        return SearchInterval(
            self.boundaries[idx], self.boundaries[idx + 1], int(self.m_estimates[idx])
        )

    @classmethod
    def equal_split(cls, lo, hi, k, m_estimates):
        return cls(np.linspace(lo, hi, k + 1), m_estimates)


@dataclass
class SubintervalResult:
    index: int
    interval: SearchInterval
    ritz: RitzSet
    status: FeastStatus
    orth_local: float


@dataclass
class MergedSpectrum:
    """All in-interval pairs across subintervals, merged ascending.

    ``provenance[i]`` is the subinterval that produced merged pair i; the
    pairwise orthogonality matrix |x_i^H B x_j| over the merged set feeds the
    pictorial diagnostics.
    """

    pencil: SparseHermitianPencil
    subintervals: list
    values: np.ndarray
    vectors: np.ndarray
    provenance: np.ndarray
    orth_local: np.ndarray
    orth_global: float
    orthogonality: np.ndarray = field(repr=False)


def _drop_boundary_duplicates(order_values, order_prov, order_keep, boundary, lower_k):
    """Drop the upper subinterval's copies of values both sides claim at a
    shared boundary, pairing the closest ones one to one."""
    tol = BOUNDARY_DUPLICATE_RTOL * max(abs(boundary), np.finfo(float).tiny)
    near = np.abs(order_values - boundary) <= tol
    low = np.nonzero(near & (order_prov == lower_k) & order_keep)[0]
    up = np.nonzero(near & (order_prov == lower_k + 1) & order_keep)[0]
    n_drop = min(low.size, up.size)
    if n_drop:
        by_dist = up[np.argsort(np.abs(order_values[up] - boundary), kind="stable")]
        order_keep[by_dist[:n_drop]] = False
    return order_keep


def solve_partitioned(pencil: SparseHermitianPencil, partition: Partition,
                      cfg_template: FeastConfig, base_seed=0, workers=1) -> MergedSpectrum:
    """Run the solver independently per subinterval and merge the results.

    Starting bases use seeds derived from ``base_seed`` so subinterval runs
    mirror independent parallel executions; per-subinterval statuses are
    carried in the result, never raised.  The merge is deterministic whatever
    the completion order.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(base_seed).spawn(partition.k)]

    def run(k):
        interval = partition.subinterval(k)
        cfg = dataclasses.replace(cfg_template, interval=interval)
        y0 = StartingBasis.random(pencil.n, interval.m_estimate, seeds[k])
        ritz, _, status = feast_solve(pencil, cfg, y0)
        vals, vecs = ritz.inside()
        orth = b_orthogonality(vecs, pencil.b)
        return SubintervalResult(k, interval, ritz, status, orth)

    if workers > 1 and partition.k > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(partition.k)))
    else:
        results = [run(k) for k in range(partition.k)]

    values = []
    vectors = []
    prov = []
    for res in results:
        vals, vecs = res.ritz.inside()
        values.append(vals)
        vectors.append(vecs)
        prov.append(np.full(vals.size, res.index))
    values = np.concatenate(values) if values else np.zeros(0)
    vectors = np.hstack(vectors) if vectors else np.zeros((pencil.n, 0))
    prov = np.concatenate(prov) if prov else np.zeros(0, dtype=int)

    order = np.lexsort((prov, values))
    values, prov = values[order], prov[order]
    vectors = vectors[:, order]

    keep = np.ones(values.size, dtype=bool)
    for k in range(partition.k - 1):
        keep = _drop_boundary_duplicates(values, prov, keep, partition.boundaries[k + 1], k)
    values, prov, vectors = values[keep], prov[keep], vectors[:, keep]

    orth_local = np.array([r.orth_local for r in results])
    G = _pairwise_orthogonality(vectors, pencil)
    off = G.copy()
    np.fill_diagonal(off, 0.0)
    orth_global = float(off.max()) if off.size else 0.0

    return MergedSpectrum(
        pencil=pencil,
        subintervals=results,
        values=values,
        vectors=vectors,
        provenance=prov,
        orth_local=orth_local,
        orth_global=orth_global,
        orthogonality=G,
    )


def _pairwise_orthogonality(X, pencil):
    if X.shape[1] == 0:
        return np.zeros((0, 0))
    BX = pencil.apply_b(X)
    mass = np.sqrt(np.einsum("ij,ij->j", X.conj(), BX).real)
    G = np.abs(X.conj().T @ BX) / np.outer(mass, mass)
    return (G + G.T) / 2.0


def orthogonality_matrix(merged: MergedSpectrum):
    """Dense |x_i^H B x_j| over the merged eigenvectors, recomputed with
    defensive B-normalization; symmetric, nonnegative, unit diagonal."""
    return _pairwise_orthogonality(merged.vectors, merged.pencil)
