"""Data files, and screening followed by the lasso.

The two-stage analysis screens the predictors down to
`s` of them, then fits, for each response, a lasso path
on the screened predictors and selects the penalty by
the Bayesian information criterion

```
BIC = n log(RSS) + df log(n)
```

where `RSS = (1/n) sum_i (y_i - yhat_i)^2` is from the
least-squares refit on the support of the lasso, and `df`
is the size of the support.
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import dataclasses as _dc
import logging
import math
import os
import typing as _ty

import numpy as np
import pandas as pd
import scipy.linalg as _la

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.conditional as _cond
import elscreen.screening as _screening


logger = logging.getLogger(__name__)
LASSO_TOLERANCE: _ty.Final = 1e-7
LASSO_MAX_ITER: _ty.Final = 100_000
PATH_LENGTH: _ty.Final = 50
PATH_RATIO: _ty.Final = 1e-3
RSS_FLOOR: _ty.Final = 1e-12
CSV_FLOAT_FORMAT: _ty.Final = '%.17g'
_Matrix: _ty.TypeAlias = _el_abc.Matrix
_Vector: _ty.TypeAlias = _el_abc.Vector
_Path: _ty.TypeAlias = str | os.PathLike


class ParseError(ValueError):
    """A data file has a missing or non-numeric cell.

    `row` and `column` are 1-based, counted
    over data rows and columns (a header row
    is not counted). Either can be `None`,
    if the location is unknown.
    """

    def __init__(
            self,
            message:
                str,
            row:
                _el_abc.Nat |
                None=None,
            column:
                _el_abc.Nat |
                None=None
            ) -> None:
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionMismatch(ValueError):
    """Predictor and response files have different rows."""


def _is_number(
        cell:
            _ty.Any
        ) -> _el_abc.Yes:
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def read_matrix(
        path:
            _Path,
        header:
            _el_abc.Yes |
            None=None
        ) -> tuple[
            _Matrix,
            list[str] | None]:
    """Return numeric matrix and column names from CSV file.

    @param header:
        if `None`, then the first row is a header
        when some of its cells are not numbers
    @return:
        `(matrix, names)`, with `names`
        `None` if there is no header
    """
    try:
        frame = pd.read_csv(
            path, header=None, dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding='utf-8')
    except pd.errors.EmptyDataError as error:
        raise ParseError(
            f'empty file: {path}') from error
    except pd.errors.ParserError as error:
        raise ParseError(
            f'malformed file {path}: {error}') from error
    if header is None:
        header = not all(
            _is_number(cell) for cell in frame.iloc[0])
    names = None
    if header:
        names = [str(cell).strip() for cell in frame.iloc[0]]
        frame = frame.iloc[1:]
    if frame.shape[0] == 0:
        raise ParseError(f'no data rows: {path}')
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    values = numeric.to_numpy(dtype=np.float64)
    bad = np.argwhere(~ np.isfinite(values))
    if bad.size:
        i, j = bad[0]
        cell = frame.iat[i, j]
        raise ParseError(
            f'missing or non-numeric cell {cell!r} '
            f'at row {i + 1}, column {j + 1} of {path}',
            row=int(i + 1), column=int(j + 1))
    return values, names


def load_csv(
        x_path:
            _Path,
        y_path:
            _Path,
        header:
            _el_abc.Yes |
            None=None,
        standardize:
            _el_abc.Yes=True
        ) -> _screening.Dataset:
    """Return dataset from predictor and response CSV files.

    Raise `ParseError` for missing or non-numeric cells,
    and `DimensionMismatch` if the files have
    different numbers of rows.
    """
    x, x_names = read_matrix(x_path, header)
    y, y_names = read_matrix(y_path, header)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f'{x_path} has {x.shape[0]} rows, '
            f'{y_path} has {y.shape[0]} rows')
    logger.info(
        f'read {x.shape[0]} observations of '
        f'{x.shape[1]} predictors and '
        f'{y.shape[1]} responses')
    return _screening.make_dataset(
        x, y, x_names, y_names, standardize)


def write_csv(
        data:
            _screening.Dataset,
        x_path:
            _Path,
        y_path:
            _Path
        ) -> None:
    """Write predictors and responses with a header row.

    Values are written with 17 significant digits,
    so reading them back gives the same `float`s.
    """
    pairs = (
        (data.X, data.predictor_names, x_path),
        (data.Y, data.response_names, y_path))
    for values, names, path in pairs:
        frame = pd.DataFrame(values, columns=list(names))
        frame.to_csv(
            path, index=False,
            float_format=CSV_FLOAT_FORMAT)


# Lasso


def soft_threshold(
        x:
            float |
            _Vector,
        t:
            float
        ) -> float | _Vector:
    """Return `sign(x) * max(|x| - t, 0)`."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0)


def lasso_coordinate_descent(
        X:
            _Matrix,
        y:
            _Vector,
        lam:
            float,
        beta:
            _Vector |
            None=None,
        tolerance:
            float=LASSO_TOLERANCE,
        max_iter:
            _el_abc.Nat=LASSO_MAX_ITER
        ) -> _Vector:
    """Return minimizer of `(1/2n)|y - X b|^2 + lam |b|_1`.

    Cyclic coordinate descent, stops when no
    coefficient changes by more than `tolerance`
    in a sweep. There is no intercept.

    @param beta:
        initial coefficients (warm start)
    """
    X = _utils.as_matrix(X, 'X')
    y = np.asarray(y, dtype=np.float64).ravel()
    n, s = X.shape
    if y.size != n:
        raise ValueError(
            f'`y` has {y.size} entries, expected {n}')
    if lam < 0:
        raise ValueError(
            f'`lam` must be nonnegative, got: {lam}')
    if beta is None:
        beta = np.zeros(s)
    else:
        beta = np.array(beta, dtype=np.float64)
    scale = (X**2).sum(axis=0) / n
    residual = y - X @ beta
    for sweep in range(max_iter):
        largest = 0.0
        for j in range(s):
            if scale[j] == 0:
                continue
            old = beta[j]
            rho = X[:, j] @ residual / n + scale[j] * old
            new = soft_threshold(rho, lam) / scale[j]
            if new != old:
                residual -= X[:, j] * (new - old)
                beta[j] = new
                largest = max(largest, abs(new - old))
        if largest <= tolerance:
            break
    else:
        logger.warning(
            f'coordinate descent stopped after '
            f'{max_iter} sweeps at `lam = {lam}`')
    return beta


def lambda_max(
        X:
            _Matrix,
        y:
            _Vector
        ) -> float:
    """Return smallest penalty with all-zero solution."""
    n = X.shape[0]
    return float(np.max(np.abs(X.T @ y)) / n)


def lasso_path(
        X:
            _Matrix,
        y:
            _Vector,
        n_lambdas:
            _el_abc.Cardinality=PATH_LENGTH,
        ratio:
            float=PATH_RATIO
        ) -> tuple[
            _Vector,
            _Matrix]:
    """Return decreasing penalties and coefficients.

    The penalties are `n_lambdas` geometrically
    spaced values from `lambda_max(X, y)` down
    to `ratio * lambda_max(X, y)`. Each fit is
    warm-started from the previous one.

    @return:
        `(lambdas, coefficients)`, with
        `coefficients[k]` the fit at `lambdas[k]`
    """
    top = lambda_max(X, y)
    if top == 0:
        lambdas = np.zeros(1)
    else:
        lambdas = np.geomspace(top, ratio * top, n_lambdas)
    coefficients = np.zeros((lambdas.size, X.shape[1]))
    beta = None
    for k, lam in enumerate(lambdas):
        beta = lasso_coordinate_descent(X, y, lam, beta)
        coefficients[k] = beta
    df = np.count_nonzero(coefficients, axis=1)
    if np.any(np.diff(df) < 0):
        logger.warning(
            'the number of nonzero coefficients '
            'decreases along the lasso path')
    return lambdas, coefficients


@_dc.dataclass(frozen=True, eq=False)
class LassoFit:
    """Lasso path of one response, and the BIC choice.

    Attributes:
      - `lambda_path`: decreasing penalties
      - `coefficients`: `coefficients[k]` is the
        penalized fit at `lambda_path[k]`
      - `rss_path`: `(1/n) RSS` of each penalized fit
      - `bic_path`: BIC of the refit on each support
      - `selected_index`, `selected_lambda`: BIC minimizer
      - `support`: 0-based predictor indices of the
        selected model, in the original dataset
      - `refit`: least-squares coefficients on `support`
      - `intercept`: mean of the response
      - `rss`: `(1/n) RSS` of the selected refit
      - `df`: size of `support`
    """

    response: str
    lambda_path: _Vector
    coefficients: _Matrix
    rss_path: _Vector
    bic_path: _Vector
    selected_index: _el_abc.Index
    selected_lambda: float
    support: _el_abc.IndexArray
    refit: _Vector
    intercept: float
    rss: float
    df: _el_abc.Cardinality

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        return dict(
            response=self.response,
            selected_lambda=self.selected_lambda,
            rss=self.rss,
            df=self.df,
            support=self.support.tolist(),
            refit=self.refit.tolist(),
            intercept=self.intercept,
            lambda_path=self.lambda_path.tolist(),
            rss_path=self.rss_path.tolist(),
            bic_path=self.bic_path.tolist())


def _refit_rss(
        X:
            _Matrix,
        y:
            _Vector,
        support:
            _el_abc.IndexArray
        ) -> tuple[
            float,
            _Vector]:
    """Return `(1/n) RSS` and coefficients of least squares."""
    n = X.shape[0]
    if support.size == 0:
        return float(y @ y / n), np.zeros(0)
    coeffs, *_ = _la.lstsq(X[:, support], y)
    residual = y - X[:, support] @ coeffs
    return float(residual @ residual / n), coeffs


def lasso_bic(
        X:
            _Matrix,
        y:
            _Vector,
        response:
            str='y',
        columns:
            _el_abc.IndexArray |
            None=None
        ) -> LassoFit:
    """Return lasso path of `y` on `X`, with BIC choice.

    `y` is centred first, and its mean is the
    intercept. The RSS in the BIC is floored at
    `RSS_FLOOR` times the total sum of squares.

    @param columns:
        original indices of the columns of `X`
    """
    X = _utils.as_matrix(X, 'X')
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if columns is None:
        columns = np.arange(X.shape[1])
    columns = np.asarray(columns, dtype=np.intp)
    intercept = float(y.mean())
    centred = y - intercept
    lambdas, coefficients = lasso_path(X, centred)
    residuals = centred[np.newaxis] - coefficients @ X.T
    rss_path = (residuals**2).sum(axis=1) / n
    total = float(centred @ centred / n)
    floor = max(RSS_FLOOR * total, np.finfo(float).tiny)
    bic = np.empty(lambdas.size)
    refits = list()
    for k, beta in enumerate(coefficients):
        support = np.flatnonzero(beta)
        rss, coeffs = _refit_rss(X, centred, support)
        refits.append((rss, support, coeffs))
        bic[k] = (
            n * math.log(max(rss, floor)) +
            support.size * math.log(n))
    best = int(np.argmin(bic))
    rss, support, coeffs = refits[best]
    return LassoFit(
        response=response,
        lambda_path=lambdas,
        coefficients=coefficients,
        rss_path=rss_path,
        bic_path=bic,
        selected_index=best,
        selected_lambda=float(lambdas[best]),
        support=columns[support],
        refit=coeffs,
        intercept=intercept,
        rss=rss,
        df=int(support.size))


@_dc.dataclass(frozen=True, eq=False)
class TwoStageResult:
    """Screening result and one lasso fit per response."""

    screening: _screening.ScreeningResult
    fits: tuple[LassoFit, ...]

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        return dict(
            screening=self.screening.to_dict(),
            fits=[fit.to_dict() for fit in self.fits])

    def frame(
            self
            ) -> pd.DataFrame:
        """Return table of RSS and model size per response."""
        return pd.DataFrame(dict(
            response=[fit.response for fit in self.fits],
            rss=[fit.rss for fit in self.fits],
            df=[fit.df for fit in self.fits]))


def two_stage(
        data:
            _screening.Dataset,
        method:
            _el_abc.Method='MELSIS',
        s:
            _el_abc.Cardinality |
            None=None,
        cond_set:
            _abc.Iterable[_el_abc.Index] |
            None=None,
        settings:
            _el_abc.Settings |
            None=None
        ) -> TwoStageResult:
    """Return lasso fits on the top `s` screened predictors.

    @param s:
        number of screened predictors,
        by default `[n / 2]`
    @param cond_set:
        conditioning set, for conditional methods
    """
    settings = _el_abc.settings_or_default(settings)
    data = data.standardize()
    if s is None:
        s = data.n // 2
    if not 1 <= s <= data.p:
        raise ValueError(
            f'`s` must be in `[1, p = {data.p}]`, got: {s}')
    rule = _el_abc.ThresholdRule.hard(s)
    if method in _el_abc.CONDITIONAL_METHODS:
        if cond_set is None:
            raise ValueError(
                f'{method} needs a conditioning set')
        result = _cond.conditional_screen(
            data, method, cond_set, rule,
            settings=settings)
    else:
        result = _screening.screen(
            data, method, rule, settings=settings)
    columns = result.selected
    x = data.X[:, columns]

    def fit(
            k:
                _el_abc.Index
            ) -> LassoFit:
        return lasso_bic(
            x, data.Y[:, k],
            data.response_names[k], columns)
    fits = _utils.parallel_map(
        fit, range(data.q), settings.threads)
    return TwoStageResult(
        screening=result,
        fits=tuple(fits))
