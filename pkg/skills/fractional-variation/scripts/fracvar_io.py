#!/usr/bin/env python3
"""
文件读写
CSV ensembles, JSON reports and markdown summaries

CSV layout: header `t,p0,p1,...,p{P-1}`, one row per grid time, values
written with 17 significant digits so a write/read round trip is bit-exact.
Report JSON is validated against references/report-schema.json.
"""

import json
import logging
import re
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional

import jsonschema
import numpy as np
import pandas as pd

from errors import ParseError
from levytest import TestReport
from simulate import Ensemble, Process

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
GRID_RTOL = 1e-9
SCHEMA_PATH = FilePath(__file__).resolve().parent.parent / 'references' / 'report-schema.json'

_LINE_RE = re.compile(r'line (\d+)')


# ============================================================================
# CSV 集合
# ============================================================================

def ensemble_frame(x: Process) -> pd.DataFrame:
    rows = np.atleast_2d(x.values)
    frame = pd.DataFrame(rows.T, columns=[f'p{k}' for k in range(rows.shape[0])])
    frame.insert(0, 't', x.times)
    return frame


def write_ensemble_csv(x: Process, output_path) -> FilePath:
    """保存路径集合 (列: t, p0, p1, ...)"""
    output_path = FilePath(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    ensemble_frame(x).to_csv(output_path, index=False, float_format=FLOAT_FORMAT)
    logger.debug("ensemble written: %s", output_path)
    return output_path


def _check_header(columns: List[str]) -> None:
    if not columns or columns[0] != 't':
        raise ParseError(f"CSV header must start with 't', got {columns[:1]}", line=1, column=1)
    if len(columns) < 2:
        raise ParseError("CSV needs at least one path column", line=1, column=2)
    for k, name in enumerate(columns[1:]):
        if name != f'p{k}':
            raise ParseError(f"Expected column 'p{k}', got '{name}'", line=1, column=k + 2)


def read_ensemble_csv(input_path, master_seed: Optional[int] = None) -> Ensemble:
    """读取路径集合; malformed content raises ParseError with line and column."""
    input_path = FilePath(input_path)
    if not input_path.exists():
        raise ParseError(f"File not found: {input_path}")
    try:
        raw = pd.read_csv(input_path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError(f"Empty CSV file: {input_path}", line=1)
    except pd.errors.ParserError as exc:
        match = _LINE_RE.search(str(exc))
        raise ParseError(f"Malformed CSV: {exc}", line=int(match.group(1)) if match else None)

    _check_header([str(c).strip() for c in raw.columns])
    if len(raw) < 2:
        raise ParseError("CSV needs at least two grid times", line=len(raw) + 2)

    values = np.empty(raw.shape, dtype=float)
    for j, column in enumerate(raw.columns):
        cells = raw[column].str.strip()
        try:
            values[:, j] = cells.to_numpy().astype(float)
        except ValueError:
            bad = np.flatnonzero(pd.to_numeric(cells, errors='coerce').isna().to_numpy())
            row = int(bad[0]) if bad.size else 0
            raise ParseError(f"Not a number: {cells.iloc[row]!r}", line=row + 2, column=j + 1)

    times = values[:, 0]
    n = times.size - 1
    dt = (times[-1] - times[0]) / n
    if not dt > 0:
        raise ParseError("Grid times must increase", line=3, column=1)
    expected = times[0] + dt * np.arange(n + 1)
    off = np.flatnonzero(np.abs(times - expected) > GRID_RTOL * max(1.0, abs(times[-1])))
    if off.size:
        raise ParseError(f"Grid is not uniform at t={times[off[0]]!r}", line=int(off[0]) + 2, column=1)
    return Ensemble(float(times[0]), float(dt), values[:, 1:].T.copy(), master_seed,
                    {'source': str(input_path)})


# ============================================================================
# JSON 报告
# ============================================================================

def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate_report(data: Dict[str, Any]) -> None:
    try:
        jsonschema.validate(instance=data, schema=load_schema())
    except jsonschema.ValidationError as exc:
        where = '/'.join(str(p) for p in exc.absolute_path) or '<root>'
        raise ParseError(f"Report does not match the schema at {where}: {exc.message}")


def write_json(data: Dict[str, Any], output_path) -> FilePath:
    output_path = FilePath(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(_jsonable(data), f, ensure_ascii=False, indent=2)
    return output_path


def read_json(input_path) -> Dict[str, Any]:
    input_path = FilePath(input_path)
    try:
        with open(input_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ParseError(f"File not found: {input_path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"Malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno)


def write_report_json(report: TestReport, output_path) -> FilePath:
    """保存检验报告 (写入前先做 schema 校验)"""
    data = _jsonable(report.to_dict())
    validate_report(data)
    return write_json(data, output_path)


def read_report_json(input_path) -> TestReport:
    data = read_json(input_path)
    validate_report(data)
    return TestReport.from_dict(data)


# ============================================================================
# Markdown 摘要
# ============================================================================

def _fmt(value: Any) -> str:
    if value is None:
        return 'N/A'
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def render_report_markdown(report: TestReport, output_path=None) -> str:
    """生成检验报告摘要"""
    mark = {'pass': '✅', 'fail': '❌', 'error': '⚠️'}
    lines = []
    lines.append(f"## 📊 检验报告: {report.label}")
    lines.append("")
    if report.hurst is not None:
        lines.append(f"**Hurst 指数**: {report.hurst}")
    lines.append(f"**总体结论**: {mark[report.overall]} {report.overall}")
    seed = report.provenance.get('master_seed')
    if seed is not None:
        lines.append(f"**随机种子**: {seed}")
    lines.append("")

    lines.append("### 检验项")
    lines.append("| 检验项 | 统计量 | 参考值 | 容差 | 结论 |")
    lines.append("|------|------|------|------|------|")
    for c in report.criteria:
        lines.append(f"| {c.name} | {_fmt(c.statistic)} | {_fmt(c.reference)} | "
                     f"{_fmt(c.tolerance)} | {mark.get(c.verdict, '')} {c.verdict} |")
    lines.append("")

    messages = [c for c in report.criteria if c.message]
    if messages:
        lines.append("### 说明")
        for c in messages:
            lines.append(f"- {c.name}: {c.message}")
        lines.append("")
    if report.notes:
        lines.append("### 备注")
        for note in report.notes:
            lines.append(f"- {note}")
        lines.append("")

    text = '\n'.join(lines)
    if output_path:
        output_path = FilePath(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8') as f:
            f.write(text)
    return text


# ============================================================================
# 实验输出
# ============================================================================

def write_tables(name: str, tables: Dict[str, pd.DataFrame], out_dir) -> List[FilePath]:
    out_dir = FilePath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key, frame in tables.items():
        path = out_dir / f"{name}_{key}.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        written.append(path)
    return written


def write_experiment(result, out_dir) -> List[FilePath]:
    """Write the report (JSON + markdown) and every table of an ExperimentResult."""
    out_dir = FilePath(out_dir)
    written = write_tables(result.name, result.tables, out_dir)
    written.append(write_report_json(result.report, out_dir / f"{result.name}_report.json"))
    md_path = out_dir / f"{result.name}_report.md"
    render_report_markdown(result.report, md_path)
    written.append(md_path)
    return written