"""Synthetic Hermitian test pencils with controlled spectra.

Each kind is deterministic for a fixed seed.  Where the construction permits,
the intended spectrum is recorded on the pencil (``planted_spectrum``):
orthogonal similarities and Lanczos tridiagonalization preserve it to a few
ulps, graph Laplacians and random pencils carry no planted values.
"""

import numpy as np

from .errors import InvalidParams
from .sparse import SparseHermitianPencil, SparseMatrixCsr

__all__ = ["synthesize_test_matrix"]


def _jittered_grid(rng, count, lo, hi, jitter=0.25):
    """count distinct values in [lo, hi] with gaps bounded away from zero."""
    if count <= 0:
        return np.zeros(0)
    if count == 1:
        return np.array([(lo + hi) / 2.0])
    base = np.linspace(lo, hi, count)
    step = (hi - lo) / (count - 1)
    return base + rng.uniform(-jitter, jitter, size=count) * step


def _graph_laplacian_csr(rng, n, edge_density):
    mask = np.triu(rng.random((n, n)) < edge_density, k=1)
    rows, cols = np.nonzero(mask)
    deg = np.zeros(n)
    np.add.at(deg, rows, 1.0)
    np.add.at(deg, cols, 1.0)
    r = np.concatenate([rows, cols, np.arange(n)])
    c = np.concatenate([cols, rows, np.arange(n)])
    v = np.concatenate([-np.ones(rows.size), -np.ones(rows.size), deg])
    return SparseMatrixCsr.from_coo(n, r, c, v)


def _graph_laplacian(params, rng):
    n = params["n"]
    density = params.get("edge_density", 0.05)
    if n < 2 or not (0.0 < density <= 1.0):
        raise InvalidParams("graph_laplacian needs n >= 2 and 0 < edge_density <= 1")
    return SparseHermitianPencil(_graph_laplacian_csr(rng, n, density))


def _symmetric_spectrum(params, rng):
    """Spectrum symmetric about zero: permuted block diagonal of
    [[0, c], [c, 0]] blocks with eigenvalues +-c."""
    n = params["n"]
    if n < 2:
        raise InvalidParams("symmetric_spectrum needs n >= 2")
    inner = params.get("inner_band", (0.8, 1.2))
    outer = params.get("outer_band", (2.4, 3.2))
    inner_fraction = params.get("inner_fraction", 0.5)
    npairs = n // 2
    n_inner = int(round(npairs * inner_fraction))
    c = np.concatenate(
        [
            _jittered_grid(rng, n_inner, *inner),
            _jittered_grid(rng, npairs - n_inner, *outer),
        ]
    )
    rng.shuffle(c)
    perm = rng.permutation(n)
    rows, cols, vals = [], [], []
    for k in range(npairs):
        i, j = perm[2 * k], perm[2 * k + 1]
        rows += [i, j]
        cols += [j, i]
        vals += [c[k], c[k]]
    # odd n leaves one zero eigenvalue on an empty row
    a = SparseMatrixCsr.from_coo(n, rows, cols, np.asarray(vals))
    planted = np.sort(np.concatenate([c, -c, np.zeros(n - 2 * npairs)]))
    return SparseHermitianPencil(a, planted_spectrum=planted)


def _lanczos_tridiagonalize(diag_values, rng):
    """Orthogonally reduce diag(values) to an unreduced symmetric tridiagonal
    with the same spectrum (Lanczos with full reorthogonalization)."""
    n = diag_values.size
    V = np.zeros((n, n))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V[:, 0] = v
    alphas = np.zeros(n)
    betas = np.zeros(n - 1)
    for j in range(n):
        w = diag_values * V[:, j]
        alphas[j] = V[:, j] @ w
        if j == n - 1:
            break
        w -= alphas[j] * V[:, j]
        if j > 0:
            w -= betas[j - 1] * V[:, j - 1]
        # two reorthogonalization passes keep the basis orthogonal to eps
        for _ in range(2):
            w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        beta = np.linalg.norm(w)
        if beta == 0.0:
            raise InvalidParams("Lanczos broke down; start vector hit an invariant subspace")
        betas[j] = beta
        V[:, j + 1] = w / beta
    rows = np.concatenate([np.arange(n), np.arange(n - 1), np.arange(1, n)])
    cols = np.concatenate([np.arange(n), np.arange(1, n), np.arange(n - 1)])
    vals = np.concatenate([alphas, betas, betas])
    return SparseMatrixCsr.from_coo(n, rows, cols, vals)


def _clustered_tridiagonal(params, rng):
    """Unreduced tridiagonal with a planted tight cluster.

    Non-cluster eigenvalues spread over [1, 2] with a guard zone around the
    cluster center 1.5; the cluster sits at 1.5 * (1 + k * cluster_gap).
    """
    n = params["n"]
    cluster_size = params["cluster_size"]
    gap = params["cluster_gap"]
    if not (1 <= cluster_size <= n) or gap <= 0:
        raise InvalidParams("need 1 <= cluster_size <= n and cluster_gap > 0")
    center = params.get("cluster_center", 1.5)
    guard = params.get("guard_width", 0.03)
    n_rest = n - cluster_size
    lo_count = n_rest // 2
    rest = np.concatenate(
        [
            _jittered_grid(rng, lo_count, 1.0, center - guard),
            _jittered_grid(rng, n_rest - lo_count, center + guard, 2.0),
        ]
    )
    cluster = center * (1.0 + gap * np.arange(cluster_size))
    planted = np.sort(np.concatenate([rest, cluster]))
    a = _lanczos_tridiagonalize(planted, rng)
    return SparseHermitianPencil(a, planted_spectrum=planted)


def _multifold(params, rng):
    """Planted spectrum with a repeated eigenvalue, hidden by a product of
    random orthogonal plane rotations."""
    n = params["n"]
    value = params["eigenvalue"]
    mult = params["multiplicity"]
    if not (1 <= mult <= n):
        raise InvalidParams("need 1 <= multiplicity <= n")
    margin = params.get("margin", 0.5)
    spread = params.get("spread", 2.5)
    n_rest = n - mult
    lo_count = n_rest // 2
    rest = np.concatenate(
        [
            _jittered_grid(rng, lo_count, value - spread, value - margin),
            _jittered_grid(rng, n_rest - lo_count, value + margin, value + spread),
        ]
    )
    planted = np.sort(np.concatenate([np.full(mult, float(value)), rest]))
    A = np.diag(rng.permutation(planted))
    for _ in range(2 * n):
        i, j = rng.choice(n, size=2, replace=False)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        rows = A[[i, j], :].copy()
        A[i, :] = c * rows[0] - s * rows[1]
        A[j, :] = s * rows[0] + c * rows[1]
        cols = A[:, [i, j]].copy()
        A[:, i] = c * cols[:, 0] - s * cols[:, 1]
        A[:, j] = s * cols[:, 0] + c * cols[:, 1]
    A = (A + A.T) / 2.0
    return SparseHermitianPencil(SparseMatrixCsr.from_dense(A), planted_spectrum=planted)


def _diag_pencil(params, rng):
    """Sparse Laplacian-like A with a random positive diagonal mass matrix."""
    n = params["n"]
    b_random_diag = params.get("b_random_diag", True)
    density = params.get("edge_density", min(6.0 / n, 0.5))
    a = _graph_laplacian_csr(rng, n, density)
    if not b_random_diag:
        return SparseHermitianPencil(a)
    d = rng.uniform(0.5, 1.5, size=n)
    idx = np.arange(n)
    b = SparseMatrixCsr.from_coo(n, idx, idx, d)
    return SparseHermitianPencil(a, b)


_KINDS = {
    "graph_laplacian": (_graph_laplacian, {"n", "edge_density"}),
    "symmetric_spectrum": (
        _symmetric_spectrum,
        {"n", "inner_band", "outer_band", "inner_fraction"},
    ),
    "clustered_tridiagonal": (
        _clustered_tridiagonal,
        {"n", "cluster_size", "cluster_gap", "cluster_center", "guard_width"},
    ),
    "multifold": (_multifold, {"n", "eigenvalue", "multiplicity", "margin", "spread"}),
    "diag_pencil": (_diag_pencil, {"n", "b_random_diag", "edge_density"}),
}

_REQUIRED = {
    "graph_laplacian": {"n"},
    "symmetric_spectrum": {"n"},
    "clustered_tridiagonal": {"n", "cluster_size", "cluster_gap"},
    "multifold": {"n", "eigenvalue", "multiplicity"},
    "diag_pencil": {"n"},
}


def synthesize_test_matrix(kind, params, seed) -> SparseHermitianPencil:
    """Build a deterministic test pencil of the given kind.

    Raises InvalidParams for unknown kinds, missing or unexpected parameters,
    and out-of-range values.
    """
    if kind not in _KINDS:
        raise InvalidParams(f"unknown generator kind '{kind}'")
    builder, allowed = _KINDS[kind]
    params = dict(params)
    missing = _REQUIRED[kind] - params.keys()
    if missing:
        raise InvalidParams(f"{kind}: missing parameters {sorted(missing)}")
    unknown = params.keys() - allowed
    if unknown:
        raise InvalidParams(f"{kind}: unexpected parameters {sorted(unknown)}")
    if params["n"] < 1:
        raise InvalidParams("n must be positive")
    return builder(params, np.random.default_rng(seed))
