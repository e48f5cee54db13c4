"""CSV ensembles, report JSON and markdown output."""

import json

import numpy as np
import pandas as pd
import pytest

from errors import ParseError
from experiments import ExperimentResult
from fracvar_io import (read_ensemble_csv, read_json, read_report_json, render_report_markdown,
                        validate_report, write_ensemble_csv, write_experiment, write_report_json)
from levytest import ERROR, FAIL, PASS, Criterion, TestReport
from simulate import brownian_path


def sample_report():
    return TestReport(
        label='fbm-characterization', hurst=0.7,
        criteria=[
            Criterion('holder', 1.104, 1.0, 2.0, PASS, {'grids': [64, 256]}, 'order 0.600'),
            Criterion('martingale', np.float64(5.2), 0.0, 4.0, FAIL, {'blocks': np.int64(16)}),
            Criterion('covariance', None, None, None, ERROR, message='needs at least 1000 paths'),
        ],
        provenance={'master_seed': 20240101, 'grid': {'t0': 0.0, 'dt': 1 / 256, 'n': 256}},
        notes=['qv_shape stands in for absolute continuity'],
    )


def write_text(tmp_path, text, name='input.csv'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


class TestEnsembleCsv:
    def test_round_trip_is_bit_exact(self, small_ensemble, tmp_path):
        path = write_ensemble_csv(small_ensemble, tmp_path / 'sub' / 'ensemble.csv')
        back = read_ensemble_csv(path, master_seed=7)
        np.testing.assert_array_equal(back.values, small_ensemble.values)
        assert back.dt == small_ensemble.dt
        assert back.t0 == 0.0
        assert back.master_seed == 7
        assert back.meta['source'] == str(path)

    def test_header(self, tmp_path):
        path = write_ensemble_csv(brownian_path(8, seed=1), tmp_path / 'bm.csv')
        frame = pd.read_csv(path)
        assert list(frame.columns) == ['t', 'p0']
        assert len(frame) == 9

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match='File not found'):
            read_ensemble_csv(tmp_path / 'absent.csv')

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError) as info:
            read_ensemble_csv(write_text(tmp_path, ''))
        assert info.value.line == 1

    def test_first_column_must_be_time(self, tmp_path):
        with pytest.raises(ParseError, match="start with 't'") as info:
            read_ensemble_csv(write_text(tmp_path, 'x,p0\n0,0\n1,1\n'))
        assert (info.value.line, info.value.column) == (1, 1)

    def test_path_columns_in_order(self, tmp_path):
        with pytest.raises(ParseError, match="'p1'") as info:
            read_ensemble_csv(write_text(tmp_path, 't,p0,p2\n0,0,0\n1,1,1\n'))
        assert (info.value.line, info.value.column) == (1, 3)

    def test_needs_two_rows(self, tmp_path):
        with pytest.raises(ParseError, match='two grid times'):
            read_ensemble_csv(write_text(tmp_path, 't,p0\n0,0\n'))

    def test_bad_number(self, tmp_path):
        with pytest.raises(ParseError, match='Not a number') as info:
            read_ensemble_csv(write_text(tmp_path, 't,p0,p1\n0,0,0\n0.5,1,abc\n1,2,3\n'))
        assert (info.value.line, info.value.column) == (3, 3)
        assert 'line 3, column 3' in str(info.value)

    def test_non_uniform_grid(self, tmp_path):
        with pytest.raises(ParseError, match='not uniform') as info:
            read_ensemble_csv(write_text(tmp_path, 't,p0\n0,0\n0.3,1\n1,2\n'))
        assert (info.value.line, info.value.column) == (3, 1)

    def test_decreasing_grid(self, tmp_path):
        with pytest.raises(ParseError, match='increase'):
            read_ensemble_csv(write_text(tmp_path, 't,p0\n1,0\n0.5,0\n0,0\n'))


class TestReportJson:
    def test_round_trip(self, tmp_path):
        report = sample_report()
        path = write_report_json(report, tmp_path / 'report.json')
        back = read_report_json(path)
        assert back.to_dict() == json.loads(path.read_text(encoding='utf-8'))
        assert back.criterion('martingale').details['blocks'] == 16
        assert back.overall == FAIL

    def test_utf8_on_disk(self, tmp_path):
        report = sample_report()
        report.notes.append('Hölder 检验')
        path = write_report_json(report, tmp_path / 'report.json')
        assert 'Hölder 检验' in path.read_text(encoding='utf-8')

    def test_schema_rejects_missing_fields(self):
        data = sample_report().to_dict()
        del data['criteria']
        with pytest.raises(ParseError, match='schema'):
            validate_report(data)

    def test_schema_rejects_bad_verdict(self):
        data = sample_report().to_dict()
        data['criteria'][0]['verdict'] = 'maybe'
        with pytest.raises(ParseError, match='criteria/0/verdict'):
            validate_report(data)

    def test_schema_rejects_extra_keys(self):
        data = sample_report().to_dict()
        data['extra'] = 1
        with pytest.raises(ParseError):
            validate_report(data)

    def test_malformed_json_location(self, tmp_path):
        path = write_text(tmp_path, "{\n  'label': 1\n}", 'bad.json')
        with pytest.raises(ParseError) as info:
            read_json(path)
        assert info.value.line == 2

    def test_missing_json(self, tmp_path):
        with pytest.raises(ParseError, match='File not found'):
            read_report_json(tmp_path / 'none.json')


class TestMarkdown:
    def test_summary(self, tmp_path):
        target = tmp_path / 'report.md'
        text = render_report_markdown(sample_report(), target)
        assert text.startswith('## 📊 检验报告: fbm-characterization')
        assert '| holder | 1.104 | 1 | 2 | ✅ pass |' in text
        assert '❌ fail' in text
        assert '| covariance | N/A | N/A | N/A | ⚠️ error |' in text
        assert '**随机种子**: 20240101' in text
        assert '### 备注' in text
        assert target.read_text(encoding='utf-8') == text

    def test_no_file_without_path(self, tmp_path):
        text = render_report_markdown(TestReport('empty'))
        assert '❌ fail' in text
        assert not list(tmp_path.iterdir())


def test_write_experiment(tmp_path):
    result = ExperimentResult('demo', sample_report(),
                              {'variation': pd.DataFrame({'n': [2, 4], 'mean': [1.0, 0.5]})})
    written = write_experiment(result, tmp_path / 'out')
    names = sorted(p.name for p in written)
    assert names == ['demo_report.json', 'demo_report.md', 'demo_variation.csv']
    assert all(p.exists() for p in written)
    assert pd.read_csv(tmp_path / 'out' / 'demo_variation.csv')['mean'].tolist() == [1.0, 0.5]
