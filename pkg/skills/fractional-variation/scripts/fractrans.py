#!/usr/bin/env python3
"""
分数阶变换
Fractional transforms on sampled paths and ensembles

- frac_transform:          M ↦ M^(α)_t = ∫_0^t (t−s)^α dM_s
- inverse_frac_transform:  M^(α) ↦ M
- fundamental_martingale:  B ↦ ∫_0^t s^{1/2−H}(t−s)^{1/2−H} dB_s
- reconstruct_b:           M ↦ d_H[t^{H−1/2}R_t − (H−1/2)Y_t]
- counterexample_y:        the same reconstruction driven by a time-changed BM

Every transform accepts a Path or an Ensemble and returns the same type.
Sums are lower-triangular matrix products over the grid increments, applied in
fixed-size row chunks (see simulate.run_chunked).
"""

import logging
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special

from constants import check_alpha, check_hurst, d_h
from errors import DomainError
from fracvar_config import DEFAULTS
from kernels import KernelCellRule, inner_kernel, inner_kernel_grid, volterra_kernel
from simulate import Ensemble, Path, Process, run_chunked

logger = logging.getLogger(__name__)

__all__ = [
    'KernelCellRule', 'inner_kernel', 'volterra_kernel',
    'frac_transform', 'inverse_frac_transform', 'fundamental_martingale',
    'product_transform', 'r_process', 'y_process', 'reconstruct_b',
    'counterexample_y', 'reconstruction_integral',
]


def _rows(x: Process) -> np.ndarray:
    return np.atleast_2d(x.values)


def _rebuild(x: Process, rows: np.ndarray, **meta) -> Process:
    values = rows[0] if isinstance(x, Path) else rows
    return x.with_values(values, **meta)


def _check_start(x: Process) -> None:
    if np.any(_rows(x)[:, 0] != 0.0):
        raise DomainError("Transform input must start at 0")


def _check_origin(x: Process) -> None:
    if x.t0 != 0.0:
        raise DomainError(f"This transform needs a grid starting at t0=0, got t0={x.t0}")


@lru_cache(maxsize=2)
def _cell_matrix(exponent: float, n: int, dt: float) -> np.ndarray:
    weights = KernelCellRule(exponent).matrix(n, dt)
    weights.flags.writeable = False
    return weights


def _apply(rows: np.ndarray, weights: np.ndarray, threads: int,
           column_scale: Optional[np.ndarray] = None) -> np.ndarray:
    """rows (P, n+1) → increments (P, n) → increments @ weights.T (P, n+1)."""
    transposed = weights.T

    def kernel(block: np.ndarray) -> np.ndarray:
        increments = np.diff(block, axis=1)
        if column_scale is not None:
            increments = increments * column_scale
        return increments @ transposed

    return run_chunked(kernel, rows, threads)


def frac_transform(m: Process, alpha: float, threads: int = 1) -> Process:
    """X(t_k) = Σ_{j<k} w_{k,j} ΔM_j with cell-averaged weights of (t−s)^α."""
    alpha = check_alpha(alpha)
    _check_start(m)
    rows = _rows(m)
    if alpha == 0.0:
        return _rebuild(m, rows.copy(), transform='frac', alpha=alpha)
    out = _apply(rows, _cell_matrix(alpha, m.n, m.dt), threads)
    return _rebuild(m, out, transform='frac', alpha=alpha)


def inverse_frac_transform(x: Process, alpha: float, threads: int = 1) -> Process:
    """Invert frac_transform.

    α > 0: M = [Γ(1+α)Γ(1−α)]^{-1} ∫_0^t (t−s)^{−α} dX_s.
    α < 0: M = [Γ(1+α)Γ(−α)]^{-1} ∫_0^t (t−s)^{−1−α} X_s ds, with the kernel
    integrated exactly over each cell against the cell mean of X.
    α = 0 is the identity.
    """
    alpha = check_alpha(alpha)
    _check_start(x)
    rows = _rows(x)
    if alpha == 0.0:
        return _rebuild(x, rows.copy(), transform='invfrac', alpha=alpha)
    if alpha > 0:
        scale = 1.0 / (special.gamma(1.0 + alpha) * special.gamma(1.0 - alpha))
        out = scale * _apply(rows, _cell_matrix(-alpha, x.n, x.dt), threads)
        return _rebuild(x, out, transform='invfrac', alpha=alpha)

    scale = 1.0 / (special.gamma(1.0 + alpha) * special.gamma(-alpha))
    transposed = (x.dt * _cell_matrix(-1.0 - alpha, x.n, x.dt)).T

    def kernel(block: np.ndarray) -> np.ndarray:
        means = 0.5 * (block[:, :-1] + block[:, 1:])
        return means @ transposed

    out = scale * run_chunked(kernel, rows, threads)
    return _rebuild(x, out, transform='invfrac', alpha=alpha)


def product_transform(f: Process, alpha: float, threads: int = 1) -> Process:
    """g(t) = ∫_0^t s^α (t−s)^α df_s; s^α is frozen at the cell midpoint."""
    alpha = float(alpha)
    if not alpha > -1.0:
        raise DomainError(f"Product kernel exponent must exceed -1, got {alpha}")
    _check_origin(f)
    _check_start(f)
    mids = f.dt * (np.arange(f.n, dtype=float) + 0.5)
    out = _apply(_rows(f), _cell_matrix(alpha, f.n, f.dt), threads, mids ** alpha)
    return _rebuild(f, out, transform='product', alpha=alpha)


def fundamental_martingale(b: Process, h: float, threads: int = 1) -> Process:
    """M_t = ∫_0^t s^{1/2−H}(t−s)^{1/2−H} dB_s."""
    h = check_hurst(h)
    _check_origin(b)
    _check_start(b)
    if h == 0.5:
        return _rebuild(b, _rows(b).copy(), transform='fundamental', hurst=h)
    out = product_transform(b, 0.5 - h, threads)
    return _rebuild(b, _rows(out), transform='fundamental', hurst=h)


def r_process(m: Process, h: float, threads: int = 1) -> Process:
    """R_t = ∫_0^t (t−s)^{H−1/2} dM_s."""
    h = check_hurst(h)
    return frac_transform(m, h - 0.5, threads)


def y_process(m: Process, h: float, threads: int = 1, cells: Optional[int] = None) -> Process:
    """Y_t = ∫_0^t K(t,s) dM_s with K(t,s) = ∫_s^t u^{H−3/2}(u−s)^{H−1/2} du at cell midpoints."""
    h = check_hurst(h)
    _check_origin(m)
    _check_start(m)
    cells = cells or DEFAULTS['kernel_cells']
    weights = m.dt ** (2.0 * h - 1.0) * inner_kernel_grid(h, m.n, int(cells))
    out = _apply(_rows(m), weights, threads)
    return _rebuild(m, out, transform='y', hurst=h)


def _reconstruct(m: Process, h: float, threads: int, transform: str) -> Process:
    r = _rows(r_process(m, h, threads))
    y = _rows(y_process(m, h, threads))
    with np.errstate(divide='ignore', invalid='ignore'):
        t_pow = m.times ** (h - 0.5)
        out = d_h(h) * (t_pow * r - (h - 0.5) * y)
    out[:, 0] = 0.0
    return _rebuild(m, out, transform=transform, hurst=h)


def reconstruct_b(m: Process, h: float, threads: int = 1) -> Process:
    """B_t = d_H[t^{H−1/2}R_t − (H−1/2)Y_t]; inverse of fundamental_martingale."""
    h = check_hurst(h)
    _check_origin(m)
    _check_start(m)
    if h == 0.5:
        return _rebuild(m, _rows(m).copy(), transform='reconstruct', hurst=h)
    return _reconstruct(m, h, threads, 'reconstruct')


def counterexample_y(n_path: Process, h: float, threads: int = 1) -> Process:
    """Y built from a time-changed Brownian motion N in place of M, for H ∈ (1/2, 3/4)."""
    h = check_hurst(h)
    if not 0.5 < h < 0.75:
        raise DomainError(f"The counterexample needs h in (1/2, 3/4), got {h}")
    _check_origin(n_path)
    _check_start(n_path)
    return _reconstruct(n_path, h, threads, 'counterexample-y')


def reconstruction_integral(g: Process, alpha: float, threads: int = 1) -> Process:
    """h(t) = ∫_0^t u^{−α−1} (∫_0^u (u−s)^{−α} dg_s) du.

    The inner integral uses cell-averaged weights; the outer one freezes
    u^{−α−1} at the cell midpoint against the cell mean of the inner integral.
    """
    alpha = float(alpha)
    if not -1.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (-1, 1), got {alpha}")
    _check_origin(g)
    _check_start(g)
    inner = _apply(_rows(g), _cell_matrix(-alpha, g.n, g.dt), threads)
    mids = g.dt * (np.arange(g.n, dtype=float) + 0.5)
    cell = g.dt * mids ** (-alpha - 1.0) * 0.5 * (inner[:, :-1] + inner[:, 1:])
    out = np.concatenate((np.zeros((inner.shape[0], 1)), np.cumsum(cell, axis=1)), axis=1)
    return _rebuild(g, out, transform='reconstruction-integral', alpha=alpha)


TRANSFORMS = {
    'frac': lambda x, alpha=None, hurst=None, threads=1: frac_transform(x, alpha, threads),
    'invfrac': lambda x, alpha=None, hurst=None, threads=1: inverse_frac_transform(x, alpha, threads),
    'fundamental': lambda x, alpha=None, hurst=None, threads=1: fundamental_martingale(x, hurst, threads),
    'reconstruct': lambda x, alpha=None, hurst=None, threads=1: reconstruct_b(x, hurst, threads),
    'counterexample-y': lambda x, alpha=None, hurst=None, threads=1: counterexample_y(x, hurst, threads),
}
