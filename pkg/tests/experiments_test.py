"""Tests of the module `elscreen.experiments`."""
import logging

import pytest

import elscreen._abc as _abc
import elscreen.evalkit as _evalkit
import elscreen.experiments as _experiments
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)


def test_aliases():
    for alias, name in _experiments.ALIASES.items():
        exp = _experiments.experiment(alias, n=50, p=30)
        assert exp.name == name, (alias, exp.name)
    exp = _experiments.experiment('TABLE1', q=10, n=50, p=30)
    assert exp.name == 'varied-q', exp.name
    with pytest.raises(ValueError):
        _experiments.experiment('table7')
    with pytest.raises(ValueError):
        _experiments.experiment('weak-signal', q=5)


def test_varied_q():
    exp = _experiments.experiment('varied-q')
    qs = [s.q for s in exp.scenarios]
    assert qs == [5, 10, 15], qs
    assert exp.union_coverage
    methods = [spec.method for spec in exp.screeners]
    assert methods == ['MELSIS', 'ELSIS_AVG', 'ELSIS_MAX'], methods
    s = exp.scenarios[0]
    assert (s.n, s.p) == (100, 1000), s


def test_error_grids():
    exp = _experiments.experiment('weak-signal', master_seed=3)
    grid = {(s.error_case, s.rho) for s in exp.scenarios}
    assert grid == {
        ('A', 0.0), ('A', 0.5), ('B', 0.0), ('B', 0.5)}, grid
    assert all(s.seed == 3 for s in exp.scenarios)
    assert all(s.model_id == 'EX41' for s in exp.scenarios)
    exp = _experiments.experiment('random-coef')
    assert all(s.model_id == 'EX42' for s in exp.scenarios)
    assert exp.scenarios[0].n == 200, exp.scenarios[0]


def test_hidden_variable():
    exp = _experiments.experiment('hidden-variable')
    labels = [spec.label for spec in exp.screeners]
    assert len(labels) == 3 + 3 * 4, labels
    assert 'CMELSIS(C1)' in labels, labels
    assert 'CELSIS_MAX(C4)' in labels, labels
    conditional = [
        spec for spec in exp.screeners
        if spec.method == 'CMELSIS']
    sets = [spec.cond_set for spec in conditional]
    assert sets == [
        (1, 2, 3), (0, 1, 2), (0, 1, 9), (0, 8, 9)], sets


def test_soft_threshold_preset():
    exp = _experiments.experiment('soft-threshold')
    taus = {spec.tau for spec in exp.screeners}
    assert taus == {0.99, 0.98}, taus
    assert len(exp.scenarios) == 6, exp.scenarios


def test_two_step_preset():
    exp = _experiments.experiment('two-step')
    assert exp.sizes == (21, 32, 42), exp.sizes
    d1s = sorted({spec.d1 for spec in exp.screeners})
    assert d1s == [3, 5, 7, 9], d1s
    assert len(exp.screeners) == 12, exp.screeners


def test_run_experiment():
    exp = _experiments.experiment(
        'weak-signal', master_seed=1, n=50, p=30)
    entries = _experiments.run_experiment(exp, 2)
    assert len(entries) == 4, entries
    for entry in entries:
        assert entry['size'] == 12, entry['size']
        reports = entry['reports']
        assert len(reports) == 3, reports
        assert all(r.replications == 2 for r in reports)
        assert entry['scenario']['model_id'] == 'EX41', entry


def test_run_experiment_deterministic():
    exp = _experiments.experiment(
        'two-step', master_seed=4, n=50, p=30)
    a = _experiments.run_experiment(exp, 2)
    settings = _abc.Settings(threads=2)
    b = _experiments.run_experiment(exp, 2, settings)
    assert len(a) == 3, a
    for x, y in zip(a, b):
        rx = [r.to_dict() for r in x['reports']]
        ry = [r.to_dict() for r in y['reports']]
        assert rx == ry, (rx, ry)


def test_run_experiment_failure(monkeypatch):
    exp = _experiments.experiment(
        'random-coef', master_seed=2, n=40, p=20)
    bad = exp.scenarios[1].replication(1).seed
    generate = _simgen.generate

    def flaky(s):
        if s.seed == bad and s.rho == exp.scenarios[1].rho:
            raise ValueError('broken replication')
        return generate(s)
    monkeypatch.setattr(_simgen, 'generate', flaky)
    with pytest.raises(_evalkit.ReplicationFailure) as info:
        _experiments.run_experiment(exp, 2)
    entries = info.value.entries
    assert len(entries) == 2, entries
    assert len(entries[0]['reports']) == 3, entries[0]
    last = entries[1]['reports']
    assert all(r.replications == 1 for r in last), last


def test_eigen_ratio_diagnostics():
    out = _experiments.eigen_ratio_diagnostics(
        2, master_seed=5, n=60, p=40, size=5)
    assert out['replications'] == 2, out
    assert out['cond_size'] == 5, out
    assert len(out['diagnostics']) == 2, out
    means = out['means']
    assert set(means) == {
        'lhs_ratio', 'eigen_ratio',
        'conditional_lhs_ratio',
        'conditional_eigen_ratio'}, means
    assert means['lhs_ratio'] > 0, means
    assert out['scenario']['model_id'] == 'CASE1', out


def test_eigen_ratio_drop():
    # default design, fewer replications
    out = _experiments.eigen_ratio_diagnostics(10, master_seed=0)
    assert out['cond_size'] == 21, out
    means = out['means']
    logger.info(means)
    unconditional = means['eigen_ratio']
    conditional = means['conditional_eigen_ratio']
    assert conditional is not None, means
    assert conditional <= 10, means
    assert unconditional is None or (
        unconditional >= 100 * conditional), means
    lhs = means['lhs_ratio']
    conditional_lhs = means['conditional_lhs_ratio']
    assert conditional_lhs is not None, means
    assert lhs is None or lhs > conditional_lhs, means


if __name__ == '__main__':
    test_run_experiment()
