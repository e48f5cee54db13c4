"""
奇异核求积
Quadrature for the weakly singular kernels shared by the simulators and transforms

- KernelCellRule: per-cell weights of (t−s)^a on a uniform grid
- inner_kernel: K(t,s) = ∫_s^t u^{H−3/2}(u−s)^{H−1/2} du on a geometric subgrid
- volterra_matrix: discretized Z_H(t_k, ·) acting on Wiener increments
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, special

from constants import check_hurst, kappa
from errors import DomainError

logger = logging.getLogger(__name__)

GAUSS_NODES = 4
PAIR_BLOCK = 4096


@dataclass(frozen=True)
class KernelCellRule:
    """Weights of the kernel (t−s)^exponent over the grid cells [s_j, s_{j+1}].

    The cell-averaged weight of the cell whose near edge lies l steps before t is
    dt^a [(l+1)^{a+1} − l^{a+1}] / (a+1); left-point evaluates ((l+1)dt)^a.
    Both depend on the lag only, so the transform matrix is lower Toeplitz.
    """
    exponent: float
    method: str = 'cell-averaged'

    def __post_init__(self):
        if self.method not in ('cell-averaged', 'left-point'):
            raise DomainError(f"Unknown kernel cell rule: {self.method}")
        if not self.exponent > -1.0:
            raise DomainError(f"Kernel exponent must exceed -1, got {self.exponent}")

    def lag_weights(self, count: int, dt: float) -> np.ndarray:
        a = self.exponent
        lags = np.arange(count + 1, dtype=float)
        if self.method == 'left-point':
            return (lags[1:] * dt) ** a
        powers = lags ** (a + 1.0)
        return dt ** a * np.diff(powers) / (a + 1.0)

    def matrix(self, n: int, dt: float) -> np.ndarray:
        """(n+1)×n matrix W with W[k, j] = weight of cell j at time t_k (zero for j ≥ k)."""
        column = np.concatenate(([0.0], self.lag_weights(n, dt)))
        return linalg.toeplitz(column, np.zeros(n))


def inner_kernel(t, s, h: float, cells: int = 64) -> np.ndarray:
    """K(t,s) = ∫_s^t u^{H−3/2}(u−s)^{H−1/2} du for t > s > 0 (broadcasting).

    The subgrid in x = u−s has a first cell [0, δ], δ = min(s/4, (t−s)/cells),
    integrated by Gauss–Jacobi with the (x)^{H−1/2} weight, followed by
    cells−1 geometric cells up to t−s, each integrated by Gauss–Legendre.
    """
    h = check_hurst(h)
    if cells < 2:
        raise DomainError(f"cells must be >= 2, got {cells}")
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(s <= 0) or np.any(t <= s):
        raise DomainError("inner_kernel needs t > s > 0")
    shape = t.shape
    t = t.ravel()
    s = s.ravel()
    out = np.empty_like(t)
    for start in range(0, t.size, PAIR_BLOCK):
        block = slice(start, start + PAIR_BLOCK)
        out[block] = _inner_kernel_block(t[block], s[block], h, cells)
    return out.reshape(shape)


def _inner_kernel_block(t: np.ndarray, s: np.ndarray, h: float, cells: int) -> np.ndarray:
    a = h - 0.5
    b = h - 1.5
    span = t - s
    delta = np.minimum(0.25 * s, span / cells)

    # first cell: weight x^a absorbed by Gauss–Jacobi on (1+y)^a
    jy, jw = special.roots_jacobi(GAUSS_NODES, 0.0, a)
    half = 0.5 * delta
    x = half[:, None] * (1.0 + jy[None, :])
    first = half ** (a + 1.0) * ((s[:, None] + x) ** b @ jw)

    ratio = (span / delta) ** (1.0 / (cells - 1))
    edges = delta[:, None] * ratio[:, None] ** np.arange(cells, dtype=float)[None, :]
    edges[:, -1] = span
    lo = edges[:, :-1]
    hi = edges[:, 1:]
    ly, lw = special.roots_legendre(GAUSS_NODES)
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    x = mid[:, :, None] + rad[:, :, None] * ly[None, None, :]
    values = x ** a * (s[:, None, None] + x) ** b
    rest = np.sum(rad * (values @ lw), axis=1)
    return first + rest


@lru_cache(maxsize=1)
def inner_kernel_grid(h: float, n: int, cells: int = 64) -> np.ndarray:
    """K(k, j+1/2) on the integer grid, as an (n+1)×n lower-triangular matrix.

    K is homogeneous of degree 2H−1, so K(t_k, s*_j) = dt^{2H−1} times this matrix.
    """
    rows, cols = np.tril_indices(n + 1, -1, n)
    grid = np.zeros((n + 1, n))
    grid[rows, cols] = inner_kernel(rows.astype(float), cols + 0.5, h, cells)
    logger.debug("inner kernel grid computed: h=%s n=%d cells=%d", h, n, cells)
    grid.flags.writeable = False
    return grid


def volterra_kernel(t, s, h: float, cells: int = 64) -> np.ndarray:
    """Z_H(t,s) = κ_H[(t/s)^{H−1/2}(t−s)^{H−1/2} − (H−1/2)s^{1/2−H}K(t,s)] for t > s > 0."""
    h = check_hurst(h)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    a = h - 0.5
    if a == 0.0:
        return np.ones(t.shape)
    k = inner_kernel(t, s, h, cells)
    return kappa(h) * ((t / s) ** a * (t - s) ** a - a * s ** (-a) * k)


@lru_cache(maxsize=1)
def volterra_matrix(h: float, n: int, T: float, cells: int = 64) -> np.ndarray:
    """(n+1)×n matrix of Z_H(t_k, ·) weights on the Wiener increments of cell j.

    The (t−s)^{H−1/2} factor is cell averaged; (t/s)^{H−1/2} and K are taken
    at the cell midpoint.
    """
    h = check_hurst(h)
    a = h - 0.5
    dt = T / n
    times = dt * np.arange(n + 1, dtype=float)
    mids = dt * (np.arange(n, dtype=float) + 0.5)
    averaged = KernelCellRule(a).matrix(n, dt)
    lower = np.tril(np.ones((n + 1, n)), -1)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(lower > 0, (times[:, None] / mids[None, :]) ** a, 0.0)
    inner = dt ** (2.0 * h - 1.0) * inner_kernel_grid(h, n, cells)
    z = kappa(h) * (ratio * averaged - a * mids[None, :] ** (-a) * inner)
    z.flags.writeable = False
    return z
