"""Tests of the module `elscreen.conditional`."""
import logging

import numpy as np
import pytest

import elscreen._abc as _abc
import elscreen.conditional as _cond
import elscreen.screening as _screening
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)


def _principal_cosine(a, b):
    """Return cosine of the largest principal angle."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(s.min())


def test_sir_single_index():
    rng = np.random.default_rng(0)
    n = 2000
    xc = rng.standard_normal((n, 3))
    xj = xc @ np.array([1.0, -1.0, 0.0]) + 0.3 * rng.standard_normal(n)
    b = _cond.sir_directions(xc, xj)
    assert b.shape == (3, 1), b.shape
    np.testing.assert_allclose(b.T @ b, np.eye(1), atol=1e-12)
    cos = _principal_cosine(b, np.array([[1.0], [-1.0], [0.0]]))
    assert cos >= 0.99, cos


def test_sir_share_controls_count():
    rng = np.random.default_rng(1)
    n = 3000
    xc = rng.standard_normal((n, 4))
    xj = xc[:, 0] + 0.8 * xc[:, 1] + 0.1 * rng.standard_normal(n)
    one = _cond.sir_directions(xc, xj, share=0.5)
    assert one.shape[1] == 1, one.shape
    every = _cond.sir_directions(xc, xj, share=1.0)
    assert every.shape[1] >= one.shape[1], every.shape
    assert every.shape[1] <= 4, every.shape


def test_sir_slice_fallback():
    rng = np.random.default_rng(2)
    xc = rng.standard_normal((40, 2))
    xj = (xc[:, 0] > 0).astype(float)
    b = _cond.sir_directions(xc, xj, n_slices=9)
    # two slices give a single direction
    assert b.shape == (2, 1), b.shape
    with pytest.raises(_cond.DegenerateSlices):
        _cond.sir_directions(xc, np.ones(40))
    with pytest.raises(ValueError):
        _cond.sir_directions(xc, np.ones(39))
    with pytest.raises(ValueError):
        _cond.sir_directions(xc, xj, share=0)


def test_conditional_expectation_fit():
    rng = np.random.default_rng(3)
    xc = rng.standard_normal((500, 2))
    directions = np.array([[1.0], [0.0]])
    xj = 2.0 * xc[:, 0] + 5.0
    coeffs = _cond.conditional_expectation_fit(xc, directions, xj)
    np.testing.assert_allclose(coeffs, [2.0], atol=1e-10)
    empty = _cond.conditional_expectation_fit(
        xc, np.zeros((2, 0)), xj)
    assert empty.size == 0, empty


def test_fit_conditioning():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((80, 10))
    y = rng.standard_normal((80, 2))
    data = _screening.make_dataset(x, y)
    spec = _cond.fit_conditioning(data, [0, 3])
    assert spec.cond_set == (0, 3), spec.cond_set
    assert spec.targets.tolist() == [1, 2, 4, 5, 6, 7, 8, 9]
    assert len(spec.directions) == 8, len(spec.directions)
    assert spec.n_slices == 9, spec.n_slices
    assert not spec.shared
    for b in spec.directions:
        assert b.shape[0] == 2, b.shape
    settings = _abc.Settings(shared_directions=True)
    shared = _cond.fit_conditioning(data, [0, 3], settings=settings)
    assert shared.shared
    first = shared.directions[0]
    for b in shared.directions:
        assert np.array_equal(b, first), (b, first)
    with pytest.raises(ValueError):
        _cond.fit_conditioning(data, [])
    with pytest.raises(ValueError):
        _cond.fit_conditioning(data, [0, 0])
    with pytest.raises(ValueError):
        _cond.fit_conditioning(data, [10])
    with pytest.raises(ValueError):
        _cond.fit_conditioning(data, [0], targets=[0, 1])


def test_centralize_removes_linear_part():
    rng = np.random.default_rng(5)
    n = 400
    z = rng.standard_normal((n, 2))
    x = np.column_stack([
        z[:, 0],
        z[:, 1],
        z[:, 0] - z[:, 1] + 0.1 * rng.standard_normal(n)])
    data = _screening.make_dataset(x, rng.standard_normal((n, 1)))
    spec = _cond.fit_conditioning(data, [0, 1], targets=[2])
    columns = _cond.centralize(data, spec)
    assert columns.shape == (n, 1), columns.shape
    residual = columns[:, 0]
    assert abs(residual.mean()) <= 1e-10, residual.mean()
    ratio = residual.var() / data.X[:, 2].var()
    assert ratio <= 0.05, ratio


def test_constant_target():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((30, 4))
    x[:, 2] = 1.5
    data = _screening.make_dataset(x, rng.standard_normal((30, 2)))
    spec = _cond.fit_conditioning(data, [0])
    k = spec.targets.tolist().index(2)
    assert spec.directions[k].shape == (1, 0), spec.directions[k].shape
    stats = _cond.cmelsis_statistics(data, spec)
    assert stats[k] == 0, stats


def test_hidden_predictor_recovered():
    scenario = _simgen.make_scenario(
        'EX43', n=200, p=100, seed=11)
    data = _simgen.generate(scenario)
    unconditional = _screening.screen(data)
    rank = unconditional.ranking.tolist().index(4)
    result = _cond.conditional_screen(
        data, 'CMELSIS', [1, 2, 3])
    ranking = result.ranking.tolist()
    assert 4 in ranking[:5], ranking[:5]
    assert ranking.index(4) < rank, (ranking.index(4), rank)
    assert set(ranking).isdisjoint({1, 2, 3}), ranking
    assert result.cond_set == (1, 2, 3), result.cond_set
    assert len(result.statistics) == 97, len(result.statistics)
    assert result.targets.tolist() == [
        j for j in range(100) if j not in (1, 2, 3)]


def test_hidden_predictor_proportion():
    scenario = _simgen.make_scenario(
        'EX43', n=200, p=100, seed=12)
    recovered = 0
    for i in range(10):
        data = _simgen.generate(scenario.replication(i))
        result = _cond.conditional_screen(
            data, 'CMELSIS', [1, 2, 3])
        top = set(result.ranking[:5].tolist())
        recovered += {0, 4} <= top
    assert recovered >= 7, recovered


def test_noise_conditioning_matches_unconditional():
    rng = np.random.default_rng(13)
    n, p = 400, 30
    cond_set = [27, 28, 29]
    agree = 0
    for _ in range(10):
        x = rng.standard_normal((n, p))
        b = rng.uniform(0.5, 1.0, size=(3, 2))
        y = x[:, :3] @ b + rng.standard_normal((n, 2))
        data = _screening.make_dataset(x, y)
        ranking = _screening.screen(data).ranking.tolist()
        unconditional = [
            j for j in ranking if j not in cond_set][:3]
        result = _cond.conditional_screen(
            data, 'CMELSIS', cond_set,
            _abc.ThresholdRule.hard(3))
        agree += set(result.selected.tolist()) == set(unconditional)
    assert agree >= 9, agree


def test_cancelling_predictor_recovered():
    scenario = _simgen.make_scenario(
        'CASE1', n=200, p=100, seed=14)
    first = 0
    buried = 0
    for i in range(5):
        data = _simgen.generate(scenario.replication(i))
        ranking = _screening.screen(data).ranking.tolist()
        buried += ranking.index(2) >= 50
        result = _cond.conditional_screen(data, 'CMELSIS', [0, 1])
        first += int(result.ranking[0]) == 2
    assert first >= 4, first
    assert buried >= 4, buried


def test_conditional_screen_variants():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((60, 15))
    y = x[:, :2] + rng.standard_normal((60, 2))
    data = _screening.make_dataset(x, y)
    for method in ('CMELSIS', 'CELSIS_AVG', 'CELSIS_MAX'):
        result = _cond.conditional_screen(
            data, method, [0],
            _abc.ThresholdRule.hard(3))
        assert result.method == method, result.method
        assert len(result.selected) == 3, result.selected
        assert 0 not in result.ranking.tolist(), result.ranking
    result = _cond.conditional_screen(
        data, 'CMELSIS', [0], tau=0.99, seed=2)
    assert result.threshold_rule['kind'] == 'soft', result
    with pytest.raises(ValueError):
        _cond.conditional_screen(data, 'MELSIS', [0])


def test_celsis_single_response():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((50, 8))
    y = x[:, [1]] + rng.standard_normal((50, 1))
    data = _screening.make_dataset(x, y)
    spec = _cond.fit_conditioning(data, [0])
    joint = _cond.cmelsis_statistics(data, spec)
    avg = _cond.celsis_statistics(data, spec, 'avg')
    top = _cond.celsis_statistics(data, spec, 'max')
    np.testing.assert_allclose(avg, joint, atol=1e-10)
    np.testing.assert_allclose(top, joint, atol=1e-10)
    with pytest.raises(ValueError):
        _cond.celsis_statistics(data, spec, 'joint')


def test_cmelsis_soft_threshold():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((50, 20))
    y = x[:, 1:3] + rng.standard_normal((50, 2))
    data = _screening.make_dataset(x, y)
    spec = _cond.fit_conditioning(data, [0])
    identity = np.arange(50)
    gamma, selected = _cond.cmelsis_soft_threshold(
        data, spec, 1.0, seed=0, permutation=identity)
    stats = _cond.cmelsis_statistics(data, spec)
    assert gamma == stats.max(), (gamma, stats.max())
    expected = spec.targets[int(np.argmax(stats))]
    assert selected.tolist() == [expected], selected
    a = _cond.cmelsis_soft_threshold(data, spec, 0.9, seed=5)
    b = _cond.cmelsis_soft_threshold(data, spec, 0.9, seed=5)
    assert a[0] == b[0], (a, b)


def test_two_step_screen():
    scenario = _simgen.make_scenario(
        'EX43', n=100, p=60, seed=2)
    data = _simgen.generate(scenario)
    result = _cond.two_step_screen(data, 3, 5)
    assert result.method == 'MELSIS-CMELSIS', result.method
    assert len(result.selected) == 8, result.selected
    assert len(result.stages) == 2, result.stages
    first = result.stages[0]
    assert result.cond_set == tuple(first.selected.tolist())
    assert result.ranking[:3].tolist() == first.selected.tolist()
    ranking = result.ranking.tolist()
    assert len(set(ranking)) == 60, ranking
    d = result.to_dict()
    assert len(d['stages']) == 2, d
    result = _cond.two_step_screen(data, 3, 5, 'ELSIS_AVG')
    assert result.method == 'ELSIS_AVG-CELSIS_AVG', result.method
    with pytest.raises(ValueError):
        _cond.two_step_screen(data, 0, 5)
    with pytest.raises(ValueError):
        _cond.two_step_screen(data, 50, 50)
    with pytest.raises(ValueError):
        _cond.two_step_screen(data, 3, 5, 'CMELSIS')


def test_sequential_screen():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((80, 20))
    y = np.column_stack([
        3 * x[:, 0] + x[:, 1],
        2 * x[:, 2] - x[:, 1]]) + rng.standard_normal((80, 2))
    data = _screening.make_dataset(x, y)
    recruited = _cond.sequential_screen(data, max_steps=4)
    assert len(recruited) == 4, recruited
    assert len(set(recruited)) == 4, recruited
    assert {0, 1, 2} <= set(recruited), recruited
    with pytest.raises(ValueError):
        _cond.sequential_screen(data, max_steps=0)


def test_sequential_screen_hidden():
    scenario = _simgen.make_scenario(
        'EX43', n=200, p=100, seed=15)
    found = 0
    for i in range(10):
        data = _simgen.generate(scenario.replication(i))
        recruited = _cond.sequential_screen(data, max_steps=5)
        assert len(recruited) == 5, recruited
        found += set(range(5)) <= set(recruited)
    assert found >= 8, found


if __name__ == '__main__':
    test_hidden_predictor_recovered()
