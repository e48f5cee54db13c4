#!/usr/bin/env python3
"""
fBm 的 Lévy 型刻画检验
Characterization battery for fractional Brownian motion

For an ensemble B and a Hurst index H the battery checks
  1. Hölder regularity of order H − ε (stability under refinement)
  2. the fundamental martingale M has orthogonal increments
  3. the quadratic variation of M has the shape (κ_H/d_H)² t^{2−2H}/(2−2H)
  4. the 1/H-variation of B equals c_H t
and cross-checks the sample covariance against the fBm covariance.
H = 1/2 runs the classical Lévy checks (linear QV, orthogonal increments).

功能:
- 单项检验 (check_*)，返回 Criterion
- 汇总报告 TestReport (JSON 可无损往返)
- 反例构造 build_counterexample: B^H + Y，Y 由奇异时间变换布朗运动驱动
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import stats
from sklearn.linear_model import LinearRegression

from constants import c_h, check_hurst, fbm_covariance, qv_reference
from errors import DegenerateDataError, DomainError, FracVarError
from fracvar_config import BatteryConfig
from fractrans import counterexample_y, fundamental_martingale
from simulate import (Ensemble, SingularFunction, fbm_cholesky, simulate_ensemble,
                      time_changed_bm)
from variation import (PartitionSpec, beta_variation_estimate, ensemble_stats, holder_norm,
                       steps_in, variation_sum)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'
PASS = 'pass'
FAIL = 'fail'
ERROR = 'error'


@dataclass
class Criterion:
    name: str
    statistic: Optional[float]
    reference: Optional[float]
    tolerance: Optional[float]
    verdict: str
    details: Dict[str, Any] = field(default_factory=dict)
    message: str = ''

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Criterion':
        return cls(**data)


@dataclass
class TestReport:
    label: str
    hurst: Optional[float] = None
    criteria: List[Criterion] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    __test__ = False  # not a pytest class

    @property
    def overall(self) -> str:
        if self.criteria and all(c.passed for c in self.criteria):
            return PASS
        return FAIL

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'label': self.label,
            'hurst': self.hurst,
            'overall': self.overall,
            'criteria': [c.to_dict() for c in self.criteria],
            'provenance': self.provenance,
            'notes': list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TestReport':
        return cls(
            label=data['label'],
            hurst=data.get('hurst'),
            criteria=[Criterion.from_dict(c) for c in data.get('criteria', [])],
            provenance=data.get('provenance', {}),
            notes=list(data.get('notes', [])),
            schema_version=data.get('schema_version', SCHEMA_VERSION),
        )


def _config(config: Optional[BatteryConfig]) -> BatteryConfig:
    return config if config is not None else BatteryConfig()


def _require_size(ensemble: Ensemble, config: BatteryConfig, name: str) -> None:
    if not isinstance(ensemble, Ensemble):
        raise DomainError(f"{name} needs an Ensemble")
    if ensemble.n_paths < config.min_paths:
        raise DomainError(
            f"{name} needs at least {config.min_paths} paths, got {ensemble.n_paths}")


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def check_holder(b: Ensemble, h: float, eps: float,
                 config: Optional[BatteryConfig] = None) -> Criterion:
    """99th-percentile Hölder norm of order h−eps must grow < holder_growth from n/4 to n."""
    config = _config(config)
    h = check_hurst(h)
    if not 0.0 < eps < h:
        raise DomainError(f"eps must lie in (0, h), got {eps}")
    if b.n % 4 or b.n < 32:
        raise DomainError(f"check_holder needs a grid divisible by 4 with n >= 32, got {b.n}")
    order = h - eps
    rows = b.values[:config.holder_paths]
    fine = Ensemble(b.t0, b.dt, rows)
    coarse = Ensemble(b.t0, 4.0 * b.dt, rows[:, ::4])
    q_coarse = float(np.quantile(holder_norm(coarse, order), config.holder_quantile))
    q_fine = float(np.quantile(holder_norm(fine, order), config.holder_quantile))
    ratio = q_fine / q_coarse if q_coarse > 0 else math.inf
    ok = math.isfinite(q_fine) and ratio < config.holder_growth
    return Criterion(
        name='holder', statistic=ratio, reference=1.0, tolerance=config.holder_growth,
        verdict=_verdict(ok),
        details={'order': order, 'grids': [coarse.n, fine.n], 'quantiles': [q_coarse, q_fine],
                 'paths': int(rows.shape[0])},
        message=f"order {order:.3f}: q{config.holder_quantile:.2f} {q_coarse:.4g} -> {q_fine:.4g}",
    )


def block_increments(m: Ensemble, blocks: int) -> np.ndarray:
    edges = np.rint(np.linspace(0, m.n, blocks + 1)).astype(int)
    if np.any(np.diff(edges) < 1):
        raise DomainError(f"Grid of {m.n} steps cannot be cut into {blocks} blocks")
    return m.values[:, edges[1:]] - m.values[:, edges[:-1]]


def check_martingale(m: Ensemble, lags: Optional[int] = None,
                     config: Optional[BatteryConfig] = None) -> Criterion:
    """Block increments must be uncorrelated at lags 1..lags and show no lag-1 regression slope."""
    config = _config(config)
    _require_size(m, config, 'check_martingale')
    lags = config.martingale_lags if lags is None else int(lags)
    if lags < 1:
        raise DomainError(f"lags must be >= 1, got {lags}")
    increments = block_increments(m, config.martingale_blocks)
    n_paths, blocks = increments.shape
    second = np.mean(increments ** 2, axis=0)
    if np.any(second <= 0.0):
        raise DegenerateDataError("Martingale test on zero-variance increments")

    band = config.sigma_band
    scores = []
    for lag in range(1, min(lags, blocks - 1) + 1):
        cross = np.mean(increments[:, :-lag] * increments[:, lag:], axis=0)
        rho = cross / np.sqrt(second[:-lag] * second[lag:])
        scores.extend((lag, j, float(r), float(r * math.sqrt(n_paths))) for j, r in enumerate(rho))
    worst = max(abs(score[3]) for score in scores)

    standardized = increments / np.sqrt(second)
    previous = standardized[:, :-1].ravel()
    if np.ptp(previous) > 1e-12:
        fit = stats.linregress(previous, standardized[:, 1:].ravel())
        slope, slope_se = float(fit.slope), float(fit.stderr)
    else:
        # deterministic increments: no spread to regress on
        slope, slope_se = 0.0, 0.0
    slope_z = slope / slope_se if slope_se > 0 else math.inf
    ok = worst <= band and abs(slope_z) <= band
    return Criterion(
        name='martingale', statistic=worst, reference=0.0, tolerance=band,
        verdict=_verdict(ok),
        details={'blocks': blocks, 'lags': lags,
                 'cross_moments': [{'lag': s[0], 'block': s[1], 'rho': s[2], 'z': s[3]} for s in scores],
                 'slope': slope, 'slope_stderr': slope_se, 'slope_z': float(slope_z)},
        message=f"max |z| {worst:.2f}, lag-1 slope z {slope_z:.2f} (band {band:g})",
    )


def check_qv_shape(m: Ensemble, h: float, config: Optional[BatteryConfig] = None) -> Criterion:
    """Mean S_2 of M on [0, t] against (κ_H/d_H)² t^{2−2H}/(2−2H), plus the fitted exponent."""
    config = _config(config)
    h = check_hurst(h)
    _require_size(m, config, 'check_qv_shape')
    means, errors, references, deviations = [], [], [], []
    ok = True
    for t in config.qv_times:
        sums = variation_sum(m, 2.0, PartitionSpec(m.t0, t, steps_in(m, m.t0, t)))
        mean, se = ensemble_stats(sums)
        reference = float(qv_reference(h, t - m.t0))
        band = max(config.rel_tol * reference, config.sigma_band * se)
        ok = ok and abs(mean - reference) <= band
        means.append(mean)
        errors.append(se)
        references.append(reference)
        deviations.append(abs(mean / reference - 1.0))

    expected = 2.0 - 2.0 * h
    if all(v > 0 for v in means):
        log_t = np.log(np.asarray(config.qv_times, dtype=float)).reshape(-1, 1)
        exponent = float(LinearRegression().fit(log_t, np.log(means)).coef_[0])
    else:
        exponent = float('nan')
    ok = ok and abs(exponent - expected) <= config.exponent_tol
    return Criterion(
        name='qv_shape', statistic=max(deviations), reference=0.0, tolerance=config.rel_tol,
        verdict=_verdict(ok),
        details={'times': list(config.qv_times), 'means': means, 'stderr': errors,
                 'references': references, 'fitted_exponent': exponent,
                 'expected_exponent': expected},
        message=f"checks exponent 2-2H = {expected:.3f}; fitted {exponent:.3f}",
    )


def check_variation(b: Ensemble, h: float, config: Optional[BatteryConfig] = None) -> Criterion:
    """1/H-variation on [0, t] must converge to c_H·t."""
    config = _config(config)
    h = check_hurst(h)
    sequences = []
    deviations = []
    ok = True
    for t in config.variation_times:
        estimate = beta_variation_estimate(b, 1.0 / h, (b.t0, t), tol=config.verdict_tol,
                                           growth=config.growth_factor,
                                           sigma_band=config.sigma_band)
        reference = c_h(h) * (t - b.t0)
        se = estimate.stderr[-1] if estimate.stderr else 0.0
        band = max(config.rel_tol * reference, config.sigma_band * se)
        hit = estimate.verdict == 'converged' and abs(estimate.final - reference) <= band
        ok = ok and hit
        last = estimate.values[-1]
        deviations.append(abs(last / reference - 1.0))
        sequences.append({'t': t, 'reference': reference, **estimate.to_dict()})
    return Criterion(
        name='variation', statistic=max(deviations), reference=0.0, tolerance=config.rel_tol,
        verdict=_verdict(ok), details={'sequences': sequences},
        message=', '.join(f"t={s['t']}: {s['verdict']}" for s in sequences),
    )


def covariance_crosscheck(b: Ensemble, h: float, config: Optional[BatteryConfig] = None) -> Criterion:
    """Sample E[B_s B_t] on a grid of times against the fBm covariance, 4σ band."""
    config = _config(config)
    h = check_hurst(h)
    _require_size(b, config, 'covariance_crosscheck')
    k = config.covariance_points
    index = np.unique(np.rint(np.arange(1, k + 1) * b.n / k).astype(int))
    times = b.times[index]
    worst = 0.0
    pairs = []
    for i in range(index.size):
        for j in range(i, index.size):
            product = b.values[:, index[i]] * b.values[:, index[j]]
            mean, se = ensemble_stats(product)
            if se <= 0.0:
                raise DegenerateDataError("Covariance check on a zero-variance product")
            reference = float(fbm_covariance(times[i] - b.t0, times[j] - b.t0, h))
            z = (mean - reference) / se
            worst = max(worst, abs(z))
            pairs.append({'s': float(times[i]), 't': float(times[j]), 'sample': mean,
                          'reference': reference, 'z': float(z)})
    band = config.sigma_band
    return Criterion(
        name='covariance', statistic=worst, reference=0.0, tolerance=band,
        verdict=_verdict(worst <= band), details={'pairs': pairs},
        message=f"max standardized deviation {worst:.2f} (band {band:g})",
    )


def _guarded(name: str, check: Callable[[], Criterion]) -> Criterion:
    try:
        return check()
    except FracVarError as exc:
        logger.warning("criterion %s errored: %s", name, exc)
        return Criterion(name=name, statistic=None, reference=None, tolerance=None,
                         verdict=ERROR, message=str(exc))


def levy_characterization_test(b: Ensemble, h: float,
                               config: Optional[BatteryConfig] = None) -> TestReport:
    """Run the battery on b at Hurst index h and aggregate a TestReport."""
    config = _config(config)
    h = check_hurst(h)
    provenance = {
        'master_seed': b.master_seed,
        'grid': {'t0': b.t0, 'dt': b.dt, 'n': b.n},
        'n_paths': b.n_paths,
        'meta': b.meta,
        'config': config.to_dict(),
    }
    if h == 0.5:
        report = TestReport(label='levy-classical', hurst=h, provenance=provenance,
                            notes=['h = 1/2: classical Lévy checks (linear QV, orthogonal increments)'])
        report.criteria.append(_guarded('qv_shape', lambda: check_qv_shape(b, h, config)))
        report.criteria.append(_guarded('martingale', lambda: check_martingale(b, None, config)))
        return report

    report = TestReport(label='fbm-characterization', hurst=h, provenance=provenance)
    report.notes.append(f"quadratic variation of the fundamental martingale checked with exponent 2-2H = {2 - 2 * h:.3f}")
    if h > 0.5:
        report.notes.append('qv_shape stands in for absolute continuity of <M>; it is a surrogate, not an equivalent')
    report.criteria.append(_guarded('holder', lambda: check_holder(b, h, config.eps, config)))
    try:
        m = fundamental_martingale(b, h, config.threads)
    except FracVarError as exc:
        m = None
        failure = str(exc)
    if m is not None:
        report.criteria.append(_guarded('martingale', lambda: check_martingale(m, None, config)))
        report.criteria.append(_guarded('qv_shape', lambda: check_qv_shape(m, h, config)))
    else:
        for name in ('martingale', 'qv_shape'):
            report.criteria.append(Criterion(name, None, None, None, ERROR, message=failure))
    report.criteria.append(_guarded('variation', lambda: check_variation(b, h, config)))
    if config.include_covariance:
        report.criteria.append(_guarded('covariance', lambda: covariance_crosscheck(b, h, config)))
    logger.info("battery h=%s: %s", h, report.overall)
    return report


def build_counterexample(h: float, p: float, depth: int, n: int, n_paths: int, master_seed: int,
                         T: float = 1.0, threads: int = 1,
                         return_parts: bool = False):
    """B̃ = B^H + Y with Y driven by N_t = W(φ(t)), φ a binomial cascade.

    B^H uses stream 0 and W stream 1 of each path seed, so they are independent.
    """
    h = check_hurst(h)
    if not 0.5 < h < 0.75:
        raise DomainError(f"The counterexample needs h in (1/2, 3/4), got {h}")
    phi = SingularFunction(p, depth)
    fbm = simulate_ensemble(fbm_cholesky, n_paths, master_seed, threads, stream=0, h=h, n=n, T=T)
    driver = simulate_ensemble(time_changed_bm, n_paths, master_seed, threads, stream=1,
                               phi=phi, n=n, T=T)
    y = counterexample_y(driver, h, threads)
    meta = {'generator': 'counterexample', 'hurst': h, 'cascade_p': p, 'cascade_depth': depth}
    tilde = Ensemble(fbm.t0, fbm.dt, fbm.values + y.values, int(master_seed), meta)
    if return_parts:
        return tilde, {'fbm': fbm, 'driver': driver, 'y': y}
    return tilde
