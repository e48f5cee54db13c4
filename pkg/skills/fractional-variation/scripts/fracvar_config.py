"""
配置管理
Defaults, configuration dataclasses and environment resolution

Config files are JSON5, so comments and trailing commas are accepted:

    {
      // characterization battery
      "battery": {"rel_tol": 0.1, "sigma_band": 4.0},
      "experiment": {"name": "rl-bm-variation", "n_paths": 2000},
    }
"""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import json5

from errors import DomainError

DEFAULTS: Dict[str, Any] = {
    'cholesky_cap': 4096,
    'tail_len': 50.0,
    'kernel_cells': 64,
    'holder_cap': 4096,
    'verdict_tol': 0.05,
    'growth_factor': 1.5,
    'rel_tol': 0.1,
    'sigma_band': 4.0,
    'min_paths': 1000,
    'chunk_rows': 64,
    'threads': 1,
    'seed': 20240101,
    'out_dir': 'fracvar-output',
}

ENV_SEED = 'FRACVAR_SEED'
ENV_THREADS = 'FRACVAR_THREADS'
ENV_OUT_DIR = 'FRACVAR_OUT_DIR'


def _from_mapping(cls, data: Dict[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise DomainError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        # JSON has no tuples
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


@dataclass(frozen=True)
class BatteryConfig:
    """Knobs of the characterization battery."""
    eps: float = 0.1
    holder_quantile: float = 0.99
    holder_growth: float = 2.0
    holder_paths: int = 200
    martingale_lags: int = 2
    martingale_blocks: int = 16
    qv_times: Tuple[float, ...] = (0.25, 0.5, 1.0)
    variation_times: Tuple[float, ...] = (0.5, 1.0)
    covariance_points: int = 5
    rel_tol: float = DEFAULTS['rel_tol']
    exponent_tol: float = 0.1
    sigma_band: float = DEFAULTS['sigma_band']
    verdict_tol: float = DEFAULTS['verdict_tol']
    growth_factor: float = DEFAULTS['growth_factor']
    min_paths: int = DEFAULTS['min_paths']
    include_covariance: bool = True
    threads: int = 1

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'BatteryConfig':
        return _from_mapping(cls, data or {})


@dataclass
class ExperimentConfig:
    """Everything that determines the output of one experiment run."""
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    n: Optional[int] = None
    schedule: Optional[List[int]] = None
    n_paths: Optional[int] = None
    seed: int = DEFAULTS['seed']
    rel_tol: float = DEFAULTS['rel_tol']
    sigma_band: float = DEFAULTS['sigma_band']
    threads: int = 1
    out_dir: Optional[str] = None
    battery: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        if 'name' not in data:
            raise DomainError("Experiment config needs a 'name'")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"Unknown ExperimentConfig keys: {', '.join(unknown)}")
        config = cls(**data)
        if config.schedule is not None:
            config.schedule = [int(v) for v in config.schedule]
        return config

    def param(self, key: str, default: Any) -> Any:
        return self.params.get(key, default)

    def battery_config(self) -> BatteryConfig:
        data = dict(self.battery)
        data.setdefault('rel_tol', self.rel_tol)
        data.setdefault('sigma_band', self.sigma_band)
        data.setdefault('threads', self.threads)
        return BatteryConfig.from_dict(data)


def load_config(config_path: str) -> Dict[str, Any]:
    """加载 JSON5 配置文件"""
    path = Path(config_path)
    if not path.exists():
        raise DomainError(f"Config file not found: {config_path}")
    with open(path, 'r', encoding='utf-8') as f:
        data = json5.load(f)
    if not isinstance(data, dict):
        raise DomainError(f"Config root must be an object: {config_path}")
    return data


def resolve_seed(cli_seed: Optional[int]) -> int:
    """FRACVAR_SEED overrides the command line, which overrides the default."""
    env_seed = os.getenv(ENV_SEED)
    if env_seed is not None and env_seed.strip():
        try:
            return int(env_seed)
        except ValueError:
            raise DomainError(f"{ENV_SEED} must be an integer, got {env_seed!r}")
    if cli_seed is not None:
        return int(cli_seed)
    return DEFAULTS['seed']


def resolve_threads(cli_threads: Optional[int]) -> int:
    if cli_threads is not None:
        threads = int(cli_threads)
    else:
        threads = int(os.getenv(ENV_THREADS, DEFAULTS['threads']))
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    return threads


def resolve_out_dir(cli_out_dir: Optional[str]) -> Path:
    return Path(cli_out_dir or os.getenv(ENV_OUT_DIR, DEFAULTS['out_dir']))
