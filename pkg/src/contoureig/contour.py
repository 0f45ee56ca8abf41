"""Quadrature discretization of the resolvent contour integral.

The curve is an ellipse around the search interval, symmetric with respect
to the real axis, so only the upper half is discretized; consumers combine
each node with its conjugate.  Gauss-Legendre nodes never touch the real
axis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAspect, PoleOnContour, UnsupportedOrder

__all__ = [
    "SearchInterval",
    "Contour",
    "gauss_legendre",
    "build_contour",
    "scalar_filter",
]

_MAX_ORDER = 64


@dataclass(frozen=True)
class SearchInterval:
    """Real interval [lo, hi] plus the eigenvalue-count estimate."""

    lo: float
    hi: float
    m_estimate: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.m_estimate < 1:
            raise ValueError("m_estimate must be >= 1")

    @property
    def center(self):
        return (self.lo + self.hi) / 2.0

    @property
    def radius(self):
        return (self.hi - self.lo) / 2.0

    @property
    def abs_max(self):
        return max(abs(self.lo), abs(self.hi))


@dataclass(frozen=True)
class Contour:
    """Upper-half quadrature nodes z_k and weights w_k of a closed curve.

    Weights include the parametrization derivative; the full-contour value of
    an integrand f is recovered as sum_k (w_k f(z_k) - conj(w_k) f(conj(z_k)))
    by the real-axis symmetry of the curve.
    """

    nodes: np.ndarray
    weights: np.ndarray
    half_contour: bool
    aspect: float

    def __post_init__(self):
        if np.any(self.nodes.imag == 0.0):
            raise PoleOnContour("contour nodes must stay off the real axis")
        if self.half_contour and np.any(self.nodes.imag < 0.0):
            raise ValueError("half-contour nodes must lie in the upper half-plane")


def gauss_legendre(m):
    """Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1].

    Nodes are Legendre roots found by Newton iteration from Chebyshev
    starting points; weights sum to 2.
    """
    if not (1 <= m <= _MAX_ORDER):
        raise UnsupportedOrder(f"order must be in [1, {_MAX_ORDER}], got {m}")
    k = np.arange(1, m + 1)
    x = np.cos(np.pi * (k - 0.25) / (m + 0.5))
    for _ in range(100):
        pm, pm1 = _legendre_pair(m, x)
        dpm = m * (x * pm - pm1) / (x * x - 1.0) if m > 1 else np.ones_like(x)
        step = pm / dpm
        x = x - step
        if np.abs(step).max() < 1e-15:
            break
    pm, pm1 = _legendre_pair(m, x)
    dpm = m * (x * pm - pm1) / (x * x - 1.0) if m > 1 else np.ones_like(x)
    w = 2.0 / ((1.0 - x * x) * dpm * dpm)
    order = np.argsort(x)
    return x[order], w[order]


def _legendre_pair(m, x):
    """(P_m(x), P_{m-1}(x)) by the three-term recurrence."""
    p0 = np.ones_like(x)
    if m == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for j in range(2, m + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p1, p0


def build_contour(iv: SearchInterval, m, aspect=1.0) -> Contour:
    """Elliptic contour around the interval, discretized on the upper half.

    The upper arc is parametrized by theta(t) = pi/2 * (1 + t) with t on
    [-1, 1]; nodes are z = c + r cos(theta) + i * aspect * r * sin(theta)
    and weights carry the Gauss-Legendre weight times pi/2 * dz/dtheta.
    """
    if not (0.0 < aspect <= 1.0):
        raise InvalidAspect(f"aspect must be in (0, 1], got {aspect}")
    t, glw = gauss_legendre(m)
    theta = np.pi / 2.0 * (1.0 + t)
    c, r = iv.center, iv.radius
    nodes = c + r * np.cos(theta) + 1j * aspect * r * np.sin(theta)
    dz = -r * np.sin(theta) + 1j * aspect * r * np.cos(theta)
    weights = glw * (np.pi / 2.0) * dz
    return Contour(nodes=nodes, weights=weights, half_contour=True, aspect=aspect)


def scalar_filter(contour: Contour, lam) -> float:
    """Quadrature approximation of the indicator integral (2 pi i)^-1
    closed-integral dz / (z - lam), evaluated for real lam.

    This is the solver's effective spectral filter: close to 1 inside the
    contour, decaying to 0 outside.  Raises PoleOnContour when lam falls on
    a quadrature node.
    """
    dist = np.abs(contour.nodes - lam)
    if dist.min() < 1e-14:
        raise PoleOnContour(f"evaluation point {lam} collides with a quadrature node")
    terms = contour.weights / (contour.nodes - lam)
    # conjugate-node half carries weight -conj(w_k), hence 2i Im(sum)/2 pi i
    return float(np.sum(terms.imag) / np.pi)
