#!/usr/bin/env python3
"""
分数阶变差工具
Command-line entry point: constants, simulation, transforms, β-variation,
Hurst estimation, the characterization battery and named experiments.

用法:
    python fracvar.py constants --hurst 0.7
    python fracvar.py --seed 7 simulate --process fbm-chol --hurst 0.7 --n 1024 --paths 2000 --out fbm.csv
    python fracvar.py transform --op fundamental --hurst 0.7 --in fbm.csv --out m.csv
    python fracvar.py variation --beta 1.4286 --interval 0,1 --in fbm.csv
    python fracvar.py hurst --in fbm.csv
    python fracvar.py levytest --hurst 0.7 --in fbm.csv --report report.json
    python fracvar.py experiment --list
    python fracvar.py --threads 4 experiment rl-bm-variation --config exp.json5

Exit codes: 0 success, 1 a test report failed, 2 invalid input or numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Tuple

import pandas as pd

from constants import all_constants, check_alpha, check_hurst
from errors import DomainError, FracVarError
from experiments import EXPERIMENTS, list_experiments, run_experiment
from fracvar_config import (ENV_SEED, BatteryConfig, ExperimentConfig, load_config, resolve_out_dir,
                            resolve_seed, resolve_threads)
from fracvar_io import (read_ensemble_csv, render_report_markdown, write_ensemble_csv, write_experiment,
                        write_json, write_report_json)
from fractrans import TRANSFORMS
from levytest import levy_characterization_test
from simulate import GENERATORS, SingularFunction, simulate_ensemble
from variation import beta_variation_estimate, hurst_estimate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _interval(text: str) -> Tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected A,B, got '{text}'")
    return values[0], values[1]


def _seed_override(args) -> Optional[int]:
    """Seed from FRACVAR_SEED or --seed, None when neither is set."""
    if getattr(args, 'seed', None) is None and not os.getenv(ENV_SEED, '').strip():
        return None
    return resolve_seed(getattr(args, 'seed', None))


def _require(args, name: str, process: str):
    value = getattr(args, name)
    if value is None:
        raise DomainError(f"'{process}' needs --{name.replace('_', '-')}")
    return value


def _generator_params(args) -> dict:
    params = {'n': args.n, 'T': args.t}
    if args.process in ('fbm-chol', 'fbm-volterra'):
        params['h'] = check_hurst(_require(args, 'hurst', args.process))
    elif args.process == 'fbm-mvn':
        if args.alpha is None and args.hurst is not None:
            args.alpha = check_hurst(args.hurst) - 0.5
        params['alpha'] = check_alpha(_require(args, 'alpha', args.process))
        if args.tail_len is not None:
            params['tail_len'] = args.tail_len
    elif args.process == 'tcbm':
        params['phi'] = SingularFunction(args.cascade_p, args.cascade_depth)
    return params


# ============================================================================
# 子命令
# ============================================================================

def cmd_constants(args) -> int:
    print(json.dumps(all_constants(args.hurst), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = resolve_seed(getattr(args, 'seed', None))
    params = _generator_params(args)
    print(f"生成路径：{args.process}，{args.paths} 条，n={args.n}，种子 {seed}")
    ensemble = simulate_ensemble(GENERATORS[args.process], args.paths, seed, args.threads, **params)
    out = args.out or resolve_out_dir(getattr(args, 'out_dir', None)) / f"{args.process}.csv"
    write_ensemble_csv(ensemble, out)
    print(f"✅ 路径已保存至：{out}")
    return EXIT_OK


def cmd_transform(args) -> int:
    x = read_ensemble_csv(args.input)
    print(f"加载路径：{args.input}，{x.n_paths} 条，n={x.n}")
    if args.op in ('frac', 'invfrac'):
        alpha = check_alpha(_require(args, 'alpha', args.op))
        result = TRANSFORMS[args.op](x, alpha=alpha, threads=args.threads)
    else:
        hurst = check_hurst(_require(args, 'hurst', args.op))
        result = TRANSFORMS[args.op](x, hurst=hurst, threads=args.threads)
    write_ensemble_csv(result, args.out)
    print(f"✅ 变换结果已保存至：{args.out}")
    return EXIT_OK


def cmd_variation(args) -> int:
    x = read_ensemble_csv(args.input)
    estimate = beta_variation_estimate(x, args.beta, args.interval, args.schedule)
    table = pd.DataFrame({'n': estimate.schedule, 'mean': estimate.values})
    if estimate.stderr is not None:
        table['stderr'] = estimate.stderr
    print(f"β={estimate.beta:g} 区间 [{estimate.interval[0]:g}, {estimate.interval[1]:g}]，{estimate.n_paths} 条路径")
    print(table.to_string(index=False))
    print(f"结论：{estimate.verdict}，极限 {estimate.limit}，最终值 {estimate.final}")
    if args.report:
        write_json(estimate.to_dict(), args.report)
        print(f"\n结果已保存至：{args.report}")
    return EXIT_OK


def cmd_hurst(args) -> int:
    x = read_ensemble_csv(args.input)
    h, diagnostics = hurst_estimate(x, args.interval, method=args.method, return_diagnostics=True)
    print(f"Hurst 估计 ({args.method})：{h:.6f}")
    regression = diagnostics.get('regression')
    if args.method == 'moment' and regression is not None:
        print(f"回归交叉验证：{regression:.6f}")
    return EXIT_OK


def _battery_from_file(path: Optional[str], threads: int, cli_threads: bool) -> BatteryConfig:
    data = load_config(path) if path else {}
    battery = dict(data.get('battery', {}) if ('battery' in data or 'experiment' in data) else data)
    if cli_threads:
        battery['threads'] = threads
    else:
        battery.setdefault('threads', threads)
    return BatteryConfig.from_dict(battery)


def cmd_levytest(args) -> int:
    x = read_ensemble_csv(args.input, master_seed=_seed_override(args))
    config = _battery_from_file(args.config, args.threads, getattr(args, 'threads_given', False))
    print(f"加载路径：{args.input}，{x.n_paths} 条，n={x.n}")
    print(f"执行 Lévy 型刻画检验 (H={args.hurst})...")
    report = levy_characterization_test(x, args.hurst, config)

    out = args.report or resolve_out_dir(getattr(args, 'out_dir', None)) / 'levytest_report.json'
    write_report_json(report, out)
    md_path = os.path.splitext(str(out))[0] + '.md'
    print("\n" + render_report_markdown(report, md_path))
    print(f"\n报告已保存至：{out}")
    return EXIT_OK if report.overall == 'pass' else EXIT_FAILED


def _experiment_config(args) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    if 'experiment' in data:
        exp = dict(data['experiment'])
        if 'battery' in data:
            exp.setdefault('battery', data['battery'])
    else:
        exp = dict(data)
    exp['name'] = args.name
    seed = _seed_override(args)
    if seed is not None:
        exp['seed'] = seed
    if getattr(args, 'threads_given', False) or 'threads' not in exp:
        exp['threads'] = args.threads
    return ExperimentConfig.from_dict(exp)


def cmd_experiment(args) -> int:
    if args.list:
        for name, description in list_experiments():
            alias = EXPERIMENTS[name].alias or ''
            print(f"  {name:<18} {alias:<30} {description}")
        return EXIT_OK
    config = _experiment_config(args)
    out_dir = resolve_out_dir(getattr(args, 'out_dir', None) or config.out_dir)
    print(f"运行实验：{config.name} (种子 {config.seed}，线程 {config.threads})")
    result = run_experiment(config.name, config)
    written = write_experiment(result, out_dir)
    print("\n" + render_report_markdown(result.report))
    print(f"\n已写入 {len(written)} 个文件至：{out_dir}")
    return EXIT_OK if result.passed else EXIT_FAILED


# ============================================================================
# 参数解析
# ============================================================================

def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS so a flag given before the subcommand is not reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS,
                        help=f'主随机种子 (环境变量 {ENV_SEED} 优先)')
    common.add_argument('--threads', type=int, default=argparse.SUPPRESS, help='工作线程数')
    common.add_argument('--out-dir', default=argparse.SUPPRESS, help='输出目录')
    common.add_argument('--verbose', action='store_true', default=argparse.SUPPRESS, help='输出调试日志')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(description='分数阶鞅与 β-变差工具', parents=[common])
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('constants', parents=[common], help='打印常数 κ_H, c_H, c_α, d_H')
    p.add_argument('--hurst', type=float, required=True, help='Hurst 指数 H ∈ (0, 1)')
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser('simulate', parents=[common], help='生成路径集合')
    p.add_argument('--process', required=True, choices=sorted(GENERATORS), help='过程类型')
    p.add_argument('--hurst', type=float, default=None, help='Hurst 指数 (fbm-chol, fbm-volterra)')
    p.add_argument('--alpha', type=float, default=None, help='α = H − 1/2 (fbm-mvn)')
    p.add_argument('--n', type=int, default=1024, help='网格步数')
    p.add_argument('--t', type=float, default=1.0, help='时间终点 T')
    p.add_argument('--paths', type=int, default=1, help='路径条数')
    p.add_argument('--tail-len', type=float, default=None, help='Mandelbrot–Van Ness 尾部长度')
    p.add_argument('--cascade-p', type=float, default=0.3, help='级联参数 p (tcbm)')
    p.add_argument('--cascade-depth', type=int, default=14, help='级联深度 (tcbm)')
    p.add_argument('--out', default=None, help='输出 CSV 路径')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('transform', parents=[common], help='对路径集合做变换')
    p.add_argument('--op', required=True, choices=list(TRANSFORMS), help='变换类型')
    p.add_argument('--alpha', type=float, default=None, help='α (frac, invfrac)')
    p.add_argument('--hurst', type=float, default=None, help='H (fundamental, reconstruct, counterexample-y)')
    p.add_argument('--in', dest='input', required=True, help='输入 CSV')
    p.add_argument('--out', required=True, help='输出 CSV')
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser('variation', parents=[common], help='估计 β-变差')
    p.add_argument('--beta', type=float, required=True, help='阶数 β ≥ 1')
    p.add_argument('--interval', type=_interval, default=None, help='区间 A,B')
    p.add_argument('--schedule', type=_ints, default=None, help='分割数列表，如 16,32,64')
    p.add_argument('--in', dest='input', required=True, help='输入 CSV')
    p.add_argument('--report', default=None, help='输出 JSON 路径')
    p.set_defaults(func=cmd_variation)

    p = sub.add_parser('hurst', parents=[common], help='估计 Hurst 指数')
    p.add_argument('--in', dest='input', required=True, help='输入 CSV')
    p.add_argument('--interval', type=_interval, default=None, help='区间 A,B')
    p.add_argument('--method', default='moment', choices=['moment', 'regression'], help='估计方法')
    p.set_defaults(func=cmd_hurst)

    p = sub.add_parser('levytest', parents=[common], help='fBm 刻画检验')
    p.add_argument('--hurst', type=float, required=True, help='待检验的 Hurst 指数')
    p.add_argument('--in', dest='input', required=True, help='输入 CSV')
    p.add_argument('--config', default=None, help='JSON5 配置文件 (battery 段)')
    p.add_argument('--report', default=None, help='输出 JSON 报告路径')
    p.set_defaults(func=cmd_levytest)

    p = sub.add_parser('experiment', parents=[common], help='运行命名实验')
    p.add_argument('name', nargs='?', default=None, help='实验名称')
    p.add_argument('--list', action='store_true', help='列出所有实验')
    p.add_argument('--config', default=None, help='JSON5 配置文件')
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == 'experiment' and not args.list and not args.name:
        parser.error("experiment needs a NAME or --list")

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, 'verbose', False) else logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    try:
        args.threads_given = getattr(args, 'threads', None) is not None
        args.threads = resolve_threads(getattr(args, 'threads', None))
        return args.func(args)
    except FracVarError as exc:
        print(f"❌ 错误：{exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
