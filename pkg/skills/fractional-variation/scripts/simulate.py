#!/usr/bin/env python3
"""
路径模拟
Path simulation: Brownian motion, fBm (Cholesky / Mandelbrot–Van Ness / Volterra),
binomial-cascade singular functions and time-changed Brownian motion

Seeding: a single path takes `seed` as an int or a tuple of ints fed to
numpy.random.SeedSequence; path k of an ensemble uses (master_seed, k), an
auxiliary stream of the same path uses (master_seed, k, stream).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, signal

from constants import check_alpha, check_hurst, fbm_covariance, kappa
from errors import DomainError, NumericError
from fracvar_config import DEFAULTS
from kernels import KernelCellRule, volterra_matrix

logger = logging.getLogger(__name__)

Seed = Union[None, int, Sequence[int], np.random.SeedSequence]


@dataclass(eq=False)
class Path:
    """A process sampled on the uniform grid t0 + k·dt, k = 0..n."""
    t0: float
    dt: float
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise DomainError("Path values must be a 1-D sequence with at least 2 entries")
        if not self.dt > 0:
            raise DomainError(f"Grid step must be positive, got {self.dt}")
        if self.t0 < 0:
            raise DomainError(f"Start time must be >= 0, got {self.t0}")
        self.t0 = float(self.t0)
        self.dt = float(self.dt)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n + 1, dtype=float)

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * self.n

    def with_values(self, values: np.ndarray, **meta) -> 'Path':
        return Path(self.t0, self.dt, values, {**self.meta, **meta})


@dataclass(eq=False)
class Ensemble:
    """Independent realizations sharing one grid; row k is path k."""
    t0: float
    dt: float
    values: np.ndarray
    master_seed: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] < 2 or self.values.shape[0] < 1:
            raise DomainError("Ensemble values must be a (paths, n+1) array with n >= 1")
        if not self.dt > 0:
            raise DomainError(f"Grid step must be positive, got {self.dt}")
        if self.t0 < 0:
            raise DomainError(f"Start time must be >= 0, got {self.t0}")
        self.t0 = float(self.t0)
        self.dt = float(self.dt)

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n + 1, dtype=float)

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * self.n

    def path(self, k: int) -> Path:
        return Path(self.t0, self.dt, self.values[k].copy(), {**self.meta, 'index': k})

    def paths(self) -> Iterator[Path]:
        for k in range(self.n_paths):
            yield self.path(k)

    def with_values(self, values: np.ndarray, **meta) -> 'Ensemble':
        return Ensemble(self.t0, self.dt, values, self.master_seed, {**self.meta, **meta})

    @classmethod
    def from_paths(cls, paths: Sequence[Path], master_seed: Optional[int] = None) -> 'Ensemble':
        if not paths:
            raise DomainError("Cannot build an ensemble from zero paths")
        first = paths[0]
        for p in paths[1:]:
            if p.n != first.n or p.dt != first.dt or p.t0 != first.t0:
                raise DomainError("All ensemble paths must share one grid")
        return cls(first.t0, first.dt, np.vstack([p.values for p in paths]),
                   master_seed, dict(first.meta))


Process = Union[Path, Ensemble]


def make_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence([int(v) for v in seed]))
    return np.random.default_rng(np.random.SeedSequence(seed))


def _seed_meta(seed: Seed) -> Any:
    if isinstance(seed, (tuple, list)):
        return [int(v) for v in seed]
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy
    return seed


def _check_grid(n: int, T: float) -> None:
    if int(n) != n or n < 2:
        raise DomainError(f"Grid size n must be an integer >= 2, got {n}")
    if not T > 0:
        raise DomainError(f"Horizon T must be positive, got {T}")


def run_chunked(func: Callable[[np.ndarray], np.ndarray], rows: np.ndarray,
                threads: int = 1, chunk_rows: Optional[int] = None) -> np.ndarray:
    """Apply a row-wise kernel over fixed-size row chunks, optionally in threads.

    The chunk boundaries do not depend on the worker count, so the result is
    bit-identical for any number of threads.
    """
    chunk = chunk_rows or DEFAULTS['chunk_rows']
    blocks = [rows[start:start + chunk] for start in range(0, rows.shape[0], chunk)]
    if threads <= 1 or len(blocks) == 1:
        results = [func(block) for block in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(func, blocks))
    return np.vstack(results)


def brownian_path(n: int, T: float = 1.0, seed: Seed = None) -> Path:
    """Standard Brownian motion on [0, T] with n steps."""
    _check_grid(n, T)
    rng = make_rng(seed)
    dt = T / n
    increments = rng.standard_normal(n) * math.sqrt(dt)
    values = np.concatenate(([0.0], np.cumsum(increments)))
    return Path(0.0, dt, values, {'generator': 'bm', 'seed': _seed_meta(seed)})


@lru_cache(maxsize=1)
def _cholesky_factor(h: float, n: int, T: float) -> np.ndarray:
    times = (T / n) * np.arange(1, n + 1, dtype=float)
    cov = fbm_covariance(times[:, None], times[None, :], h)
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        jitter = 1e-12 * float(np.max(np.diag(cov)))
        logger.warning("Cholesky failed for h=%s n=%d, retrying with jitter %.3e", h, n, jitter)
        try:
            factor = linalg.cholesky(cov + jitter * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            raise NumericError(
                f"fBm covariance not positive definite after jitter {jitter:.3e} "
                f"(h={h}, n={n}, T={T}, min diag={float(np.min(np.diag(cov))):.3e})"
            ) from exc
    factor.flags.writeable = False
    return factor


def fbm_cholesky(h: float, n: int, T: float = 1.0, seed: Seed = None,
                 cap: Optional[int] = None) -> Path:
    """Exact fBm sample on the grid from the Cholesky factor of its covariance."""
    h = check_hurst(h)
    _check_grid(n, T)
    cap = cap or DEFAULTS['cholesky_cap']
    if n > cap:
        raise DomainError(f"Cholesky sampling is capped at n={cap} (O(n^2) memory), got n={n}")
    factor = _cholesky_factor(h, int(n), float(T))
    z = make_rng(seed).standard_normal(n)
    values = np.concatenate(([0.0], factor @ z))
    return Path(0.0, T / n, values, {'generator': 'fbm-chol', 'hurst': h, 'seed': _seed_meta(seed)})


def fbm_mvn(alpha: float, n: int, T: float = 1.0, tail_len: Optional[float] = None,
            seed: Seed = None) -> Path:
    """Mandelbrot–Van Ness fBm with H = 1/2 + alpha, tail truncated at −tail_len·T.

    B_t = κ_H(∫_0^t (t−s)^α dW_s + ∫_{−L}^0 ((t−s)^α − (−s)^α) dW_s).
    Forward increments are drawn first from the same stream as brownian_path.
    """
    alpha = check_alpha(alpha)
    _check_grid(n, T)
    tail_len = DEFAULTS['tail_len'] if tail_len is None else float(tail_len)
    if not tail_len > 0:
        raise DomainError(f"tail_len must be positive, got {tail_len}")
    rng = make_rng(seed)
    dt = T / n
    meta = {'generator': 'fbm-mvn', 'alpha': alpha, 'tail_len': tail_len, 'seed': _seed_meta(seed)}
    increments = rng.standard_normal(n) * math.sqrt(dt)
    if alpha == 0.0:
        return Path(0.0, dt, np.concatenate(([0.0], np.cumsum(increments))), meta)

    tail_cells = int(math.ceil(tail_len * n))
    weights = KernelCellRule(alpha).lag_weights(n + tail_cells, dt)
    forward = np.convolve(increments, weights[:n])[:n]
    tail_noise = rng.standard_normal(tail_cells) * math.sqrt(dt)
    # g[k] = Σ_m weights[k+m] ξ_m
    corr = signal.fftconvolve(tail_noise[::-1], weights)[tail_cells - 1:tail_cells + n]
    tail = corr - corr[0]
    values = kappa(0.5 + alpha) * (np.concatenate(([0.0], forward)) + tail)
    values[0] = 0.0
    return Path(0.0, dt, values, meta)


def mvn_variance(alpha: float, n: int, T: float = 1.0, tail_len: Optional[float] = None) -> float:
    """Exact variance at T of the discretized Mandelbrot–Van Ness scheme."""
    alpha = check_alpha(alpha)
    _check_grid(n, T)
    tail_len = DEFAULTS['tail_len'] if tail_len is None else float(tail_len)
    if not tail_len > 0:
        raise DomainError(f"tail_len must be positive, got {tail_len}")
    dt = T / n
    tail_cells = int(math.ceil(tail_len * n))
    weights = KernelCellRule(alpha).lag_weights(n + tail_cells, dt)
    forward = np.sum(weights[:n] ** 2)
    tail = np.sum((weights[n:n + tail_cells] - weights[:tail_cells]) ** 2)
    return float(kappa(0.5 + alpha) ** 2 * dt * (forward + tail))


def fbm_volterra(h: float, n: int, T: float = 1.0, seed: Seed = None,
                 cells: Optional[int] = None) -> Path:
    """fBm as Σ_j Z_H(t, s_j*)·ΔW_j (Volterra representation)."""
    h = check_hurst(h)
    _check_grid(n, T)
    cells = cells or DEFAULTS['kernel_cells']
    w = brownian_path(n, T, seed)
    meta = {'generator': 'fbm-volterra', 'hurst': h, 'seed': _seed_meta(seed)}
    if h == 0.5:
        return w.with_values(w.values, **meta)
    z = volterra_matrix(h, int(n), float(T), int(cells))
    return w.with_values(z @ np.diff(w.values), **meta)


@dataclass(frozen=True)
class SingularFunction:
    """Binomial-cascade distribution function on [0, 1].

    The left half of every dyadic interval receives the fraction p of its mass,
    down to `depth` levels; below that the mass is spread uniformly.
    """
    p: float
    depth: int

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"Cascade parameter p must lie in (0, 1), got {self.p}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise DomainError(f"Cascade depth must be an integer >= 1, got {self.depth}")

    def __call__(self, t) -> np.ndarray:
        return singular_fn_eval(self, t)

    def masses(self, level: Optional[int] = None) -> np.ndarray:
        """Masses of the 2^level dyadic cells, left to right."""
        level = self.depth if level is None else int(level)
        if level < 0:
            raise DomainError(f"Cascade level must be >= 0, got {level}")
        if level > self.depth:
            fine = self.masses(self.depth)
            return np.repeat(fine / 2 ** (level - self.depth), 2 ** (level - self.depth))
        masses = np.ones(1)
        for _ in range(level):
            masses = np.column_stack((masses * self.p, masses * (1.0 - self.p))).ravel()
        return masses

    @property
    def holder_bound(self) -> float:
        return min(-math.log2(self.p), -math.log2(1.0 - self.p))

    def holder_exponent(self, level: Optional[int] = None, min_level: int = 4) -> float:
        """Smallest log(max |Δφ|)/log|Δt| over dyadic lags 2^0 .. 2^(level − min_level).

        The largest rise at a dyadic lag is the heaviest aligned cell, so the
        result is log2(1/max(p, 1 − p)) up to rounding.
        """
        level = min(self.depth, 12) if level is None else int(level)
        if level <= min_level:
            raise DomainError(f"level must exceed min_level={min_level}")
        phi = np.concatenate(([0.0], np.cumsum(self.masses(level))))
        step = 2.0 ** -level
        best = np.inf
        for j in range(level - min_level + 1):
            lag = 2 ** j
            rise = float(np.max(phi[lag:] - phi[:-lag]))
            best = min(best, math.log(rise) / math.log(lag * step))
        return best


def singular_fn_eval(phi: SingularFunction, t) -> np.ndarray:
    """Evaluate the depth-limited cascade distribution function at t ∈ [0, 1]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
        raise DomainError("Singular function is defined on [0, 1] only")
    x = t.copy()
    acc = np.zeros_like(x)
    scale = np.ones_like(x)
    for _ in range(phi.depth):
        digit = np.minimum(np.floor(2.0 * x), 1.0)
        acc = acc + digit * scale * phi.p
        scale = scale * np.where(digit > 0, 1.0 - phi.p, phi.p)
        x = 2.0 * x - digit
    result = acc + scale * x
    return result if result.ndim else float(result)


def time_changed_bm(phi: SingularFunction, n: int, T: float = 1.0, seed: Seed = None) -> Path:
    """N_t = W(T·φ(t/T)) sampled on n steps; increments have variance T·Δφ."""
    _check_grid(n, T)
    grid = np.arange(n + 1, dtype=float) / n
    clock = T * singular_fn_eval(phi, grid)
    z = make_rng(seed).standard_normal(n)
    increments = z * np.sqrt(np.maximum(np.diff(clock), 0.0))
    values = np.concatenate(([0.0], np.cumsum(increments)))
    return Path(0.0, T / n, values, {'generator': 'tcbm', 'cascade_p': phi.p,
                                     'cascade_depth': phi.depth, 'seed': _seed_meta(seed)})


GENERATORS: Dict[str, Callable[..., Path]] = {
    'bm': brownian_path,
    'fbm-chol': fbm_cholesky,
    'fbm-mvn': fbm_mvn,
    'fbm-volterra': fbm_volterra,
    'tcbm': time_changed_bm,
}


def simulate_ensemble(generator: Callable[..., Path], n_paths: int, master_seed: int,
                      threads: int = 1, stream: Optional[int] = None, **params) -> Ensemble:
    """Generate n_paths independent paths; path k uses seed (master_seed, k[, stream])."""
    if int(n_paths) != n_paths or n_paths < 1:
        raise DomainError(f"n_paths must be a positive integer, got {n_paths}")
    master_seed = int(master_seed)

    def seed_of(k: int) -> Tuple[int, ...]:
        return (master_seed, k) if stream is None else (master_seed, k, int(stream))

    def build(k: int) -> Path:
        return generator(seed=seed_of(k), **params)

    # the first path warms the kernel caches before workers start
    first = build(0)
    if threads <= 1 or n_paths == 1:
        rest = [build(k) for k in range(1, n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rest = list(pool.map(build, range(1, n_paths)))
    paths = [first] + rest
    logger.debug("ensemble built: generator=%s paths=%d n=%d", first.meta.get('generator'),
                 n_paths, first.n)
    meta = {k: v for k, v in first.meta.items() if k != 'seed'}
    if stream is not None:
        meta['stream'] = int(stream)
    return Ensemble(first.t0, first.dt, np.vstack([p.values for p in paths]), master_seed, meta)
