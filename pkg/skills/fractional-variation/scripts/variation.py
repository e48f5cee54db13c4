#!/usr/bin/env python3
"""
β-变差统计
β-variation sums and the estimators built on them

- variation_sum / beta_variation_estimate: S_{β,n} over uniform partitions and a
  deterministic convergence verdict across a dyadic schedule
- additivity_check: S[a,c] − S[a,b] − S[b,c] at matched resolution
- hurst_estimate: moment inversion of mean S_{1/H,n} = c_H (b−a)
- holder_norm: discrete Hölder seminorm over grid pairs
- singular_measure_sum: Σ_i (∫ ((t_i−s)^α − (t_{i−1}−s)_+^α)² dν_s)^{β/2}
- renormalized_qv: n^{2H−1} Σ (ΔB)²

Single paths report raw values; ensembles report means with standard errors.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special
from sklearn.linear_model import LinearRegression

from constants import beta_of_alpha, c_h, check_alpha, check_hurst
from errors import DomainError, EstimationError, ResolutionError
from fracvar_config import DEFAULTS
from simulate import Ensemble, Path, Process, SingularFunction

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9

CONVERGED = 'converged'
DIVERGING = 'diverging'
INCONCLUSIVE = 'inconclusive'


@dataclass(frozen=True)
class PartitionSpec:
    """Uniform partition t_i = a + (i/n)(b−a) of [a, b]."""
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.a < self.b:
            raise DomainError(f"Partition needs 0 <= a < b, got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"Partition size must be an integer >= 1, got {self.n}")

    @property
    def step(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def points(self) -> np.ndarray:
        return self.a + (np.arange(self.n + 1, dtype=float) / self.n) * (self.b - self.a)


@dataclass
class VariationEstimate:
    beta: float
    interval: Tuple[float, float]
    schedule: List[int]
    values: List[float]
    stderr: Optional[List[float]] = None
    verdict: str = INCONCLUSIVE
    final: Optional[float] = None
    limit: Optional[str] = None
    n_paths: int = 1

    @property
    def pairs(self) -> List[Tuple[int, float]]:
        return list(zip(self.schedule, self.values))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['interval'] = list(self.interval)
        return data


def _rows(x: Process) -> np.ndarray:
    return np.atleast_2d(x.values)


def ensemble_stats(samples: np.ndarray) -> Tuple[float, float]:
    """Mean and standard error of a 1-D sample."""
    samples = np.asarray(samples, dtype=float).ravel()
    mean = float(np.mean(samples))
    if samples.size < 2:
        return mean, 0.0
    return mean, float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def grid_indices(x: Process, part: PartitionSpec) -> np.ndarray:
    """Grid indices of the partition points; no interpolation."""
    if part.step < x.dt * (1.0 - GRID_TOL):
        raise ResolutionError(
            f"Partition step {part.step:.6g} is finer than the path grid step {x.dt:.6g}")
    position = (part.points - x.t0) / x.dt
    index = np.rint(position)
    if np.any(np.abs(position - index) > GRID_TOL * np.maximum(1.0, np.abs(position))):
        raise ResolutionError(
            f"Partition of [{part.a}, {part.b}] into {part.n} cells does not lie on the path grid")
    if index[0] < 0 or index[-1] > x.n:
        raise DomainError(
            f"Partition [{part.a}, {part.b}] exceeds the path horizon [{x.t0}, {x.horizon}]")
    return index.astype(int)


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not beta >= 1.0:
        raise DomainError(f"beta must be >= 1, got {beta}")
    return beta


def _sums(x: Process, beta: float, part: PartitionSpec) -> np.ndarray:
    sampled = _rows(x)[:, grid_indices(x, part)]
    return np.sum(np.abs(np.diff(sampled, axis=1)) ** beta, axis=1)


def variation_sum(x: Process, beta: float, part: PartitionSpec) -> Union[float, np.ndarray]:
    """S_{β,n}^{[a,b]} = Σ |X(t_i) − X(t_{i−1})|^β; one value per path for ensembles."""
    beta = _check_beta(beta)
    sums = _sums(x, beta, part)
    return float(sums[0]) if isinstance(x, Path) else sums


def steps_in(x: Process, a: float, b: float) -> int:
    steps = (b - a) / x.dt
    count = int(round(steps))
    if abs(steps - count) > GRID_TOL * max(1.0, steps) or count < 1:
        raise ResolutionError(f"[{a}, {b}] is not a whole number of grid steps ({steps:.6g})")
    return count


def dyadic_schedule(steps: int, levels: int = 6, minimum: int = 2) -> List[int]:
    """Power-of-two divisors of `steps`, at most `levels` of them, ending at the finest."""
    top = steps & -steps
    schedule = []
    n = top
    while n >= minimum and len(schedule) < levels:
        schedule.append(n)
        n //= 2
    if not schedule:
        raise ResolutionError(f"No dyadic partition with at least {minimum} cells divides {steps}")
    return sorted(schedule)


def classify(values: Sequence[float], stderr: Optional[Sequence[float]] = None,
             tol: float = DEFAULTS['verdict_tol'], growth: float = DEFAULTS['growth_factor'],
             sigma_band: float = DEFAULTS['sigma_band']) -> Tuple[str, Optional[float], Optional[str]]:
    """Verdict, final value and limit kind for a sequence along a refinement schedule.

    converged: last three values within max(tol·max|v|, sigma_band·max SE). With
    stderr given, the band is at least sigma_band standard errors wide, so it
    is wider than the fixed relative tolerance when sampling noise dominates;
    pass stderr=None for the fixed-tolerance rule alone.
    diverging: every ratio over the last three steps ≥ growth;
    vanishing (converged to 0): every such ratio ≤ 1/growth.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return INCONCLUSIVE, None, None
    last = values[-3:]
    if np.all(last == 0.0):
        return CONVERGED, 0.0, 'zero'
    errors = np.zeros(3) if stderr is None else np.asarray(stderr, dtype=float)[-3:]
    spread = float(np.max(last) - np.min(last))
    band = max(tol * float(np.max(np.abs(last))), sigma_band * float(np.max(errors)))
    if spread <= band:
        return CONVERGED, float(last[-1]), 'finite'
    window = values[-4:]
    if np.all(window > 0):
        ratios = window[1:] / window[:-1]
        if np.all(ratios >= growth):
            return DIVERGING, None, 'infinite'
        if np.all(ratios <= 1.0 / growth):
            return CONVERGED, 0.0, 'zero'
    return INCONCLUSIVE, None, None


def beta_variation_estimate(x: Process, beta: float, interval: Optional[Tuple[float, float]] = None,
                            schedule: Optional[Sequence[int]] = None,
                            tol: Optional[float] = None, growth: Optional[float] = None,
                            sigma_band: Optional[float] = None) -> VariationEstimate:
    """Evaluate S_{β,n} across a refinement schedule and classify the sequence."""
    beta = _check_beta(beta)
    a, b = interval if interval is not None else (x.t0, x.horizon)
    if schedule is None:
        schedule = dyadic_schedule(steps_in(x, a, b))
    schedule = [int(n) for n in schedule]
    if any(later <= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise DomainError(f"Schedule must be strictly increasing, got {schedule}")

    values, errors = [], []
    for n in schedule:
        sums = _sums(x, beta, PartitionSpec(a, b, n))
        mean, se = ensemble_stats(sums)
        values.append(mean)
        errors.append(se)
        logger.debug("S_{%.4g,%d}[%g,%g] = %.6g (se %.2g)", beta, n, a, b, mean, se)

    is_ensemble = isinstance(x, Ensemble)
    verdict, final, limit = classify(
        values, errors if is_ensemble else None,
        DEFAULTS['verdict_tol'] if tol is None else tol,
        DEFAULTS['growth_factor'] if growth is None else growth,
        DEFAULTS['sigma_band'] if sigma_band is None else sigma_band,
    )
    return VariationEstimate(
        beta=beta, interval=(float(a), float(b)), schedule=schedule, values=values,
        stderr=errors if is_ensemble else None, verdict=verdict, final=final, limit=limit,
        n_paths=_rows(x).shape[0],
    )


def additivity_check(x: Process, beta: float, a: float, b: float, c: float,
                     step: Optional[float] = None) -> float:
    """|S[a,c] − S[a,b] − S[b,c]| with every partition at the same step (ensemble means)."""
    beta = _check_beta(beta)
    if not a < b < c:
        raise DomainError(f"additivity_check needs a < b < c, got {a}, {b}, {c}")
    step = x.dt if step is None else float(step)

    def count(lo: float, hi: float) -> int:
        cells = (hi - lo) / step
        n = int(round(cells))
        if abs(cells - n) > GRID_TOL * max(1.0, cells):
            raise ResolutionError(f"[{lo}, {hi}] is not a whole number of steps of {step}")
        return n

    whole = _sums(x, beta, PartitionSpec(a, c, count(a, c)))
    left = _sums(x, beta, PartitionSpec(a, b, count(a, b)))
    right = _sums(x, beta, PartitionSpec(b, c, count(b, c)))
    return float(abs(np.mean(whole) - np.mean(left) - np.mean(right)))


def _second_moments(rows: np.ndarray, stride_levels: int) -> List[Tuple[int, float]]:
    moments = []
    stride = 1
    for _ in range(stride_levels):
        if (rows.shape[1] - 1) % stride or (rows.shape[1] - 1) // stride < 2:
            break
        coarse = rows[:, ::stride]
        moments.append((stride, float(np.mean(np.diff(coarse, axis=1) ** 2))))
        stride *= 2
    return moments


def hurst_regression(x: Process, interval: Optional[Tuple[float, float]] = None,
                     levels: int = 6) -> float:
    """Slope/2 of log E(ΔX)² against log Δt over dyadic coarsenings."""
    rows, dt = _window(x, interval)
    moments = _second_moments(rows, levels)
    if len(moments) < 2:
        raise EstimationError("Regression needs at least two dyadic levels")
    if any(m <= 0 for _, m in moments):
        raise EstimationError("Constant path: second moments vanish", {'moments': moments})
    log_dt = np.log([stride * dt for stride, _ in moments]).reshape(-1, 1)
    log_m = np.log([m for _, m in moments])
    model = LinearRegression().fit(log_dt, log_m)
    return float(model.coef_[0] / 2.0)


def _window(x: Process, interval: Optional[Tuple[float, float]]) -> Tuple[np.ndarray, float]:
    a, b = interval if interval is not None else (x.t0, x.horizon)
    steps = steps_in(x, a, b)
    start = int(round((a - x.t0) / x.dt))
    if start < 0 or start + steps > x.n:
        raise DomainError(f"[{a}, {b}] exceeds the path horizon")
    return _rows(x)[:, start:start + steps + 1], x.dt


def hurst_estimate(x: Process, interval: Optional[Tuple[float, float]] = None,
                   method: str = 'moment', bracket: Tuple[float, float] = (0.01, 0.99),
                   return_diagnostics: bool = False):
    """Estimate H by solving mean S_{1/H,n} = c_H (b−a) at the finest partition.

    A second-moment scaling check over the two finest dyadic levels rejects
    paths smoother than the bracket admits. `method='regression'` returns the
    log-log regression estimate instead.
    """
    rows, dt = _window(x, interval)
    steps = rows.shape[1] - 1
    if steps < 4 or steps % 2:
        raise EstimationError(f"Need an even number of at least 4 steps, got {steps}")
    length = steps * dt
    lo, hi = bracket

    moments = _second_moments(rows, 2)
    fine, coarse = moments[0][1], moments[1][1]
    if fine <= 0:
        raise EstimationError("Constant path: increments vanish", {'bracket': [lo, hi]})
    scaling = 0.5 * math.log2(coarse / fine)
    diagnostics: Dict[str, Any] = {'bracket': [lo, hi], 'scaling_exponent': scaling, 'steps': steps}
    try:
        diagnostics['regression'] = hurst_regression(x, interval)
    except EstimationError:
        diagnostics['regression'] = None

    if method == 'regression':
        if diagnostics['regression'] is None:
            raise EstimationError("Regression estimate unavailable", diagnostics)
        result = diagnostics['regression']
        return (result, diagnostics) if return_diagnostics else result
    if method != 'moment':
        raise DomainError(f"Unknown Hurst estimation method: {method}")
    if scaling >= hi:
        raise EstimationError(
            f"Path is smoother than the bracket admits (scaling exponent {scaling:.3f} >= {hi})",
            diagnostics)

    with np.errstate(divide='ignore'):
        log_abs = np.log(np.abs(np.diff(rows, axis=1)))
    n_paths = rows.shape[0]

    def gap(h: float) -> float:
        beta = 1.0 / h
        per_path = special.logsumexp(beta * log_abs, axis=1)
        log_mean = special.logsumexp(per_path) - math.log(n_paths)
        return float(log_mean - math.log(c_h(h) * length))

    with np.errstate(divide='ignore'):
        f_lo, f_hi = gap(lo), gap(hi)
    diagnostics['bracket_values'] = [f_lo, f_hi]
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise EstimationError(
            f"No sign change on [{lo}, {hi}]: f(lo)={f_lo:.4g}, f(hi)={f_hi:.4g}", diagnostics)
    result = float(optimize.brentq(gap, lo, hi, xtol=1e-10))
    diagnostics['moment'] = result
    logger.debug("hurst estimate %.5f (regression %s)", result, diagnostics['regression'])
    return (result, diagnostics) if return_diagnostics else result


def holder_norm(f: Process, beta: float, a: Optional[float] = None, b: Optional[float] = None,
                cap: Optional[int] = None) -> Union[float, np.ndarray]:
    """max |f(t)−f(s)| / |t−s|^β over grid pairs in [a, b]; one value per path for ensembles."""
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"Hölder order must lie in (0, 1], got {beta}")
    a = f.t0 if a is None else a
    b = f.horizon if b is None else b
    if not a < b:
        raise DomainError(f"holder_norm needs a < b, got [{a}, {b}]")
    rows, dt = _window(f, (a, b))
    cap = cap or DEFAULTS['holder_cap']
    steps = rows.shape[1] - 1
    if steps > cap:
        stride = int(math.ceil(steps / cap))
        logger.warning("holder_norm: %d steps exceed cap %d, subsampling every %d", steps, cap, stride)
        rows = rows[:, ::stride]
        dt = dt * stride
        steps = rows.shape[1] - 1
    norms = np.zeros(rows.shape[0])
    for lag in range(1, steps + 1):
        rise = np.max(np.abs(rows[:, lag:] - rows[:, :-lag]), axis=1)
        norms = np.maximum(norms, rise / (lag * dt) ** beta)
    return float(norms[0]) if isinstance(f, Path) else norms


def cascade_growth_rate(p: float, alpha: float) -> float:
    """Asymptotic per-level factor 2^{−αβ}(p^{β/2} + (1−p)^{β/2}) of the diagonal sums."""
    alpha = check_alpha(alpha)
    beta = beta_of_alpha(alpha)
    return 2.0 ** (-alpha * beta) * (p ** (beta / 2.0) + (1.0 - p) ** (beta / 2.0))


def _lag_kernel(alpha: float, cells: int, ratio: int) -> np.ndarray:
    """J(q) = ∫_0^1 ((q+x)^α − (q+x−r)_+^α)² dx for q = 0..cells−1, r = ratio."""
    q = np.arange(cells, dtype=float)
    two = 2.0 * alpha + 1.0
    out = ((q + 1.0) ** two - q ** two) / two

    far = q > ratio
    if np.any(far):
        ly, lw = special.roots_legendre(4)
        x = 0.5 * (1.0 + ly)
        qf = q[far][:, None]
        diff = (qf + x) ** alpha - (qf + x - ratio) ** alpha
        out[far] = 0.5 * (diff ** 2 @ lw)

    if ratio < cells:
        r = float(ratio)
        jy, jw = special.roots_jacobi(4, 0.0, alpha)
        x = 0.5 * (1.0 + jy)
        cross = 0.5 ** (alpha + 1.0) * float((r + x) ** alpha @ jw)
        near = ((r + 1.0) ** two - r ** two) / two
        out[ratio] = near - 2.0 * cross + 1.0 / two
    return out


def singular_measure_sum(nu: Union[SingularFunction, Sequence[float]], alpha: float,
                         part: PartitionSpec, subcell_bits: int = 4) -> float:
    """A_n = Σ_i (∫_0^{t_i} ((t_i−s)^α − (t_{i−1}−s)_+^α)² dν_s)^{β/2} on [0, 1].

    ν is resolved on 2^L dyadic cells, L = min(depth, log2 n + subcell_bits),
    and taken uniform within each cell.
    """
    alpha = check_alpha(alpha)
    if part.a != 0.0 or part.b != 1.0:
        raise DomainError("singular_measure_sum is defined for partitions of [0, 1]")
    n = int(part.n)
    if n & (n - 1):
        raise DomainError(f"Partition size must be a power of two, got {n}")
    if isinstance(nu, SingularFunction):
        depth = nu.depth
    else:
        raw = np.asarray(nu, dtype=float)
        depth = int(round(math.log2(raw.size))) if raw.size else -1
        if raw.size == 0 or 2 ** depth != raw.size:
            raise DomainError("Measure masses must cover 2^depth dyadic cells")
        if np.any(raw < 0):
            raise DomainError("Measure masses must be nonnegative")
    bits = int(math.log2(n))
    if bits > depth:
        raise ResolutionError(f"Partition of {n} cells is finer than the cascade resolution 2^{depth}")
    level = min(depth, bits + subcell_bits)
    if isinstance(nu, SingularFunction):
        masses = nu.masses(level)
    else:
        masses = raw.reshape(2 ** level, -1).sum(axis=1)
    cells = masses.size
    ratio = cells // n
    kernel = _lag_kernel(alpha, cells, ratio)
    integrals = np.convolve(masses, kernel)[:cells] * (1.0 / cells) ** (2.0 * alpha)
    picked = integrals[ratio * np.arange(1, n + 1) - 1]
    beta = beta_of_alpha(alpha)
    return float(np.sum(np.maximum(picked, 0.0) ** (beta / 2.0)))


def renormalized_qv(b: Process, h: float, t: Optional[float] = None,
                    schedule: Optional[Sequence[int]] = None) -> List[Tuple]:
    """n^{2H−1} Σ_k (B_{tk/n} − B_{t(k−1)/n})² over the schedule.

    Returns (n, value) pairs for a path and (n, mean, stderr) for an ensemble.
    """
    h = check_hurst(h)
    t = b.horizon if t is None else float(t)
    start = b.t0
    if schedule is None:
        schedule = dyadic_schedule(steps_in(b, start, t))
    result = []
    for n in schedule:
        sums = _sums(b, 2.0, PartitionSpec(start, t, int(n))) * float(n) ** (2.0 * h - 1.0)
        if isinstance(b, Path):
            result.append((int(n), float(sums[0])))
        else:
            mean, se = ensemble_stats(sums)
            result.append((int(n), mean, se))
    return result
