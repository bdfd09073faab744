"""Tests of the module `elscreen.pipeline`."""
import logging

import numpy as np
import pytest

import elscreen.pipeline as _pipeline
import elscreen.screening as _screening
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)


def test_read_matrix_header(tmp_path):
    path = tmp_path / 'x.csv'
    path.write_text('a,b\n1,2\n3,4.5\n')
    values, names = _pipeline.read_matrix(path)
    assert names == ['a', 'b'], names
    assert values.tolist() == [[1, 2], [3, 4.5]], values
    path.write_text('1,2\n3,4.5\n')
    values, names = _pipeline.read_matrix(path)
    assert names is None, names
    assert values.shape == (2, 2), values.shape
    values, names = _pipeline.read_matrix(path, header=True)
    assert names == ['1', '2'], names
    assert values.shape == (1, 2), values.shape


def test_read_matrix_errors(tmp_path):
    path = tmp_path / 'x.csv'
    path.write_text('a,b\n1,2\n3,\n')
    with pytest.raises(_pipeline.ParseError) as info:
        _pipeline.read_matrix(path)
    assert (info.value.row, info.value.column) == (2, 2), info.value
    path.write_text('a,b\n1,2\nfoo,4\n')
    with pytest.raises(_pipeline.ParseError) as info:
        _pipeline.read_matrix(path)
    assert (info.value.row, info.value.column) == (2, 1), info.value
    path.write_text('1,2\n1,nan\n')
    with pytest.raises(_pipeline.ParseError) as info:
        _pipeline.read_matrix(path)
    assert (info.value.row, info.value.column) == (2, 2), info.value
    path.write_text('')
    with pytest.raises(_pipeline.ParseError):
        _pipeline.read_matrix(path)
    path.write_text('a,b\n')
    with pytest.raises(_pipeline.ParseError):
        _pipeline.read_matrix(path)


def test_load_csv_mismatch(tmp_path):
    x_path = tmp_path / 'x.csv'
    y_path = tmp_path / 'y.csv'
    x_path.write_text('1,2\n3,4\n5,6\n7,8\n')
    y_path.write_text('1\n2\n3\n')
    with pytest.raises(_pipeline.DimensionMismatch):
        _pipeline.load_csv(x_path, y_path)


def test_csv_round_trip(tmp_path):
    scenario = _simgen.make_scenario('EX41', n=50, p=30, seed=4)
    data = _simgen.generate(scenario)
    x_path = tmp_path / 'x.csv'
    y_path = tmp_path / 'y.csv'
    _pipeline.write_csv(data, x_path, y_path)
    loaded = _pipeline.load_csv(x_path, y_path, standardize=False)
    np.testing.assert_allclose(loaded.X, data.X, rtol=1e-15, atol=0)
    np.testing.assert_allclose(loaded.Y, data.Y, rtol=1e-15, atol=0)
    assert loaded.predictor_names == data.predictor_names
    assert loaded.response_names == data.response_names
    a = _screening.melsis_statistics(data)
    b = _screening.melsis_statistics(
        _pipeline.load_csv(x_path, y_path))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_soft_threshold():
    out = _pipeline.soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0)
    assert out.tolist() == [-2.0, 0.0, 1.0], out


def test_lasso_orthonormal_design():
    rng = np.random.default_rng(0)
    n = 50
    q, _ = np.linalg.qr(rng.standard_normal((n, 4)))
    X = np.sqrt(n) * q
    y = X @ np.array([3.0, -2.0, 0.5, 0.0]) + rng.standard_normal(n)
    lam = 0.7
    beta = _pipeline.lasso_coordinate_descent(
        X, y, lam, tolerance=1e-12)
    expected = _pipeline.soft_threshold(X.T @ y / n, lam)
    np.testing.assert_allclose(beta, expected, atol=1e-8)


def test_lasso_kkt():
    rng = np.random.default_rng(1)
    n, s = 80, 10
    X = rng.standard_normal((n, s))
    y = X[:, :3] @ np.array([2.0, -1.0, 1.5]) + rng.standard_normal(n)
    lam = 0.2
    beta = _pipeline.lasso_coordinate_descent(
        X, y, lam, tolerance=1e-12)
    grad = X.T @ (y - X @ beta) / n
    active = beta != 0
    assert np.all(np.abs(grad) <= lam + 1e-6), grad
    np.testing.assert_allclose(
        grad[active], lam * np.sign(beta[active]), atol=1e-6)


def test_lasso_zero_penalty_is_ols():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 5))
    y = X @ rng.standard_normal(5) + rng.standard_normal(60)
    beta = _pipeline.lasso_coordinate_descent(
        X, y, 0.0, tolerance=1e-13)
    ols, *_ = np.linalg.lstsq(X, y, rcond=None)
    np.testing.assert_allclose(beta, ols, atol=1e-6)
    with pytest.raises(ValueError):
        _pipeline.lasso_coordinate_descent(X, y, -1.0)
    with pytest.raises(ValueError):
        _pipeline.lasso_coordinate_descent(X, y[:-1], 1.0)


def test_lasso_path():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 8))
    y = X[:, 0] * 2 + rng.standard_normal(60)
    y -= y.mean()
    lambdas, coefficients = _pipeline.lasso_path(X, y)
    assert lambdas.size == _pipeline.PATH_LENGTH, lambdas.size
    assert np.all(np.diff(lambdas) < 0), lambdas
    top = _pipeline.lambda_max(X, y)
    assert lambdas[0] == top, (lambdas[0], top)
    assert np.all(coefficients[0] == 0), coefficients[0]
    assert abs(lambdas[-1] - top * 1e-3) <= 1e-12 * top, lambdas[-1]


def test_lasso_bic():
    rng = np.random.default_rng(4)
    n = 100
    X = rng.standard_normal((n, 10))
    y = 5 + X[:, 2] * 3 - X[:, 7] * 2 + 0.5 * rng.standard_normal(n)
    fit = _pipeline.lasso_bic(X, y, 'y1', columns=np.arange(10, 20))
    assert fit.response == 'y1', fit.response
    assert set(fit.support.tolist()) >= {12, 17}, fit.support
    assert abs(fit.intercept - y.mean()) <= 1e-12, fit.intercept
    assert fit.df == fit.support.size, fit
    assert fit.selected_lambda == fit.lambda_path[fit.selected_index]
    assert fit.bic_path[fit.selected_index] == fit.bic_path.min()
    assert fit.rss <= 0.5, fit.rss
    d = fit.to_dict()
    assert d['df'] == fit.df, d


def test_lasso_bic_exact_fit():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((30, 4))
    y = X[:, 0] - X[:, 1]
    fit = _pipeline.lasso_bic(X, y)
    assert np.all(np.isfinite(fit.bic_path)), fit.bic_path
    assert {0, 1} <= set(fit.support.tolist()), fit.support


def test_two_stage():
    scenario = _simgen.make_scenario('EX41', n=80, p=60, seed=6)
    data = _simgen.generate(scenario)
    result = _pipeline.two_stage(data, s=20)
    assert len(result.fits) == 4, result.fits
    assert len(result.screening.selected) == 20
    selected = set(result.screening.selected.tolist())
    for fit in result.fits:
        assert set(fit.support.tolist()) <= selected, fit.support
        assert fit.rss >= 0, fit.rss
    frame = result.frame()
    assert frame.columns.tolist() == ['response', 'rss', 'df']
    assert frame['response'].tolist() == list(data.response_names)
    d = result.to_dict()
    assert len(d['fits']) == 4, d
    result = _pipeline.two_stage(
        data, 'CMELSIS', s=10, cond_set=[0])
    assert result.screening.method == 'CMELSIS'
    with pytest.raises(ValueError):
        _pipeline.two_stage(data, 'CMELSIS', s=10)
    with pytest.raises(ValueError):
        _pipeline.two_stage(data, s=0)
    with pytest.raises(ValueError):
        _pipeline.two_stage(data, s=100)


def test_two_stage_all_predictors():
    rng = np.random.default_rng(16)
    n, p = 100, 10
    x = rng.standard_normal((n, p))
    y = np.column_stack([
        3 * x[:, 0] - 2 * x[:, 3],
        2 * x[:, 5] + x[:, 1]]) + 0.5 * rng.standard_normal((n, 2))
    data = _screening.make_dataset(x, y)
    result = _pipeline.two_stage(data, s=p)
    ranking = result.screening.selected
    assert sorted(ranking.tolist()) == list(range(p)), ranking
    standard = data.standardize()
    for k, fit in enumerate(result.fits):
        name = standard.response_names[k]
        same = _pipeline.lasso_bic(
            standard.X[:, ranking], standard.Y[:, k], name, ranking)
        assert fit.support.tolist() == same.support.tolist()
        assert fit.rss == same.rss, (fit.rss, same.rss)
        plain = _pipeline.lasso_bic(
            standard.X, standard.Y[:, k], name)
        assert sorted(fit.support.tolist()) == sorted(
            plain.support.tolist()), (fit.support, plain.support)
        np.testing.assert_allclose(fit.rss, plain.rss, rtol=1e-6)
        assert fit.df == plain.df, (fit.df, plain.df)


if __name__ == '__main__':
    test_two_stage()
