"""Tests of the module `elscreen.cli`."""
import argparse
import json
import logging

import pandas as pd
import pytest

import elscreen.cli as _cli
import elscreen._utils as _utils


logger = logging.getLogger(__name__)


def _simulate_args(output, *more):
    return [
        'simulate', '--model', 'ex41',
        '--n', '40', '--p', '20', '--reps', '3',
        '--seed', '7', '-o', str(output), *more]


def test_parse_index_list():
    indices = _cli._parse_index_list('2,3,4')
    assert indices == (1, 2, 3), indices
    with pytest.raises(argparse.ArgumentTypeError):
        _cli._parse_index_list('0,1')
    with pytest.raises(argparse.ArgumentTypeError):
        _cli._parse_index_list('a,1')
    method = _cli._parse_method('elsis-avg')
    assert method == 'ELSIS_AVG', method
    methods = _cli._parse_methods('melsis,cmelsis')
    assert methods == ('MELSIS', 'CMELSIS'), methods


def test_config_from_args():
    parser = _cli.make_parser()
    args = parser.parse_args([
        'simulate', '--model', 'EX43', '--n', '50', '--p', '30',
        '--methods', 'MELSIS,CMELSIS', '--cond-set', '2,3,4',
        '--soft', '0.98', '--reps', '5', '--seed', '3'])
    config = _cli.config_from_args(args)
    assert config.command == 'simulate', config
    assert config.methods == ('MELSIS', 'CMELSIS'), config.methods
    assert config.cond_set == (1, 2, 3), config.cond_set
    assert config.threshold == ('soft', 0.98), config.threshold
    assert config.replications == 5, config.replications
    s = config.scenario
    assert (s.model_id, s.n, s.p, s.seed) == ('EX43', 50, 30, 3), s
    d = config.provenance()
    assert 'threads' not in d['config'], d
    assert d['config']['master_seed'] == 3, d
    with pytest.raises(SystemExit):
        parser.parse_args([
            'screen', '--x', 'x.csv', '--y', 'y.csv',
            '--hard', '1', '--soft', '0.9'])


def test_run_config_invalid():
    with pytest.raises(ValueError):
        _cli.RunConfig(command='plot')
    with pytest.raises(ValueError):
        _cli.RunConfig(command='simulate', replications=0)
    with pytest.raises(ValueError):
        _cli.RunConfig(command='simulate', methods=('LASSO',))
    with pytest.raises(ValueError):
        _cli.RunConfig(command='simulate', threshold=('soft', 0))
    with pytest.raises(ValueError):
        _cli.RunConfig(command='simulate', output_format='xml')


def test_simulate_reproducible(tmp_path):
    a = tmp_path / 'a.json'
    b = tmp_path / 'b.json'
    assert _cli.main(_simulate_args(a)) == 0
    assert _cli.main(_simulate_args(b, '--threads', '3')) == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report['partial'] is False, report
    assert 'version' in report, report
    assert len(report['reports']) == 3, report['reports']
    assert report['scenario']['model_id'] == 'EX41', report


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(_utils.THREADS_ENV_VAR, '2')
    assert _utils.resolve_threads(1) == 2
    a = tmp_path / 'a.json'
    assert _cli.main(_simulate_args(a)) == 0
    monkeypatch.setenv(_utils.THREADS_ENV_VAR, 'many')
    with pytest.raises(ValueError):
        _utils.resolve_threads(1)
    monkeypatch.delenv(_utils.THREADS_ENV_VAR)
    assert _utils.resolve_threads(4) == 4
    assert _utils.resolve_threads(0) >= 1


def test_simulate_csv(tmp_path):
    out = tmp_path / 'out.csv'
    status = _cli.main(_simulate_args(
        out, '--format', 'csv', '--methods', 'MELSIS'))
    assert status == 0, status
    table = pd.read_csv(out)
    assert table.shape[0] == 1, table
    assert 'P_a' in table.columns, table.columns


def test_generate_then_screen(tmp_path):
    x_path = tmp_path / 'x.csv'
    y_path = tmp_path / 'y.csv'
    status = _cli.main([
        'generate', '--model', 'EX43', '--n', '60', '--p', '25',
        '--seed', '2', '--x-out', str(x_path),
        '--y-out', str(y_path)])
    assert status == 0, status
    x = pd.read_csv(x_path)
    assert x.shape == (60, 25), x.shape
    out = tmp_path / 'screen.json'
    status = _cli.main([
        'screen', '--x', str(x_path), '--y', str(y_path),
        '--hard', '1', '-o', str(out)])
    assert status == 0, status
    report = json.loads(out.read_text())
    result = report['result']
    assert result['method'] == 'MELSIS', result
    assert len(result['selected']) == 14, result['selected']
    out = tmp_path / 'screen.csv'
    status = _cli.main([
        'screen', '--x', str(x_path), '--y', str(y_path),
        '--method', 'cmelsis', '--cond-set', '2,3,4',
        '--format', 'csv', '-o', str(out)])
    assert status == 0, status
    table = pd.read_csv(out)
    assert table.columns.tolist() == [
        'predictor', 'statistic', 'rank', 'selected']
    assert table.shape[0] == 22, table.shape
    assert 'X2' not in table['predictor'].tolist(), table


def test_two_stage_command(tmp_path):
    x_path = tmp_path / 'x.csv'
    y_path = tmp_path / 'y.csv'
    assert _cli.main([
        'generate', '--model', 'EX41', '--n', '60', '--p', '40',
        '--x-out', str(x_path), '--y-out', str(y_path)]) == 0
    out = tmp_path / 'fit.json'
    status = _cli.main([
        'two-stage', '--x', str(x_path), '--y', str(y_path),
        '--s', '10', '-o', str(out)])
    assert status == 0, status
    report = json.loads(out.read_text())
    assert len(report['fits']) == 4, report


def test_bad_input(tmp_path, capsys):
    x_path = tmp_path / 'x.csv'
    y_path = tmp_path / 'y.csv'
    x_path.write_text('a,b\n1,2\nfoo,4\n')
    y_path.write_text('y\n1\n2\n')
    status = _cli.main([
        'screen', '--x', str(x_path), '--y', str(y_path)])
    assert status == 1, status
    err = capsys.readouterr().err
    line, = [
        line for line in err.splitlines()
        if line.startswith('{"error"')]
    message = json.loads(line)
    assert message['error'] == 'ParseError', message
    status = _cli.main([
        'screen', '--x', str(x_path), '--y', str(y_path),
        '--method', 'CMELSIS'])
    assert status == 1, status


if __name__ == '__main__':
    test_simulate_reproducible()
