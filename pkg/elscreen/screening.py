"""Marginal screening by empirical likelihood ratios.

Each predictor `X_j` is scored by the empirical likelihood
ratio at zero of the estimating rows `X_ij * y_i`, where
`y_i` is the `q`-dimensional response of observation `i`:

  - MELSIS uses the joint `q`-dimensional rows
  - ELSIS_AVG averages the `q` single-response ratios
  - ELSIS_MAX takes the maximum of the `q` single-response ratios

Predictors are ranked by decreasing statistic, and a submodel
is selected either by size (hard rule) or by a threshold
derived from statistics computed on randomly permuted
responses (soft rule).


References
==========

Jianqing Fan, Jinchi Lv
    "Sure independence screening for ultrahigh dimensional
     feature space"
    Journal of the Royal Statistical Society: Series B
    Vol. 70, No. 5, 2008, pages 849--911

Jinyuan Chang, Cheng Yong Tang, Yichao Wu
    "Marginal empirical likelihood and sure independence
     feature screening"
    The Annals of Statistics
    Vol. 41, No. 4, 2013, pages 2123--2148
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import dataclasses as _dc
import logging
import math
import typing as _ty

import numpy as np

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.el as _el


logger = logging.getLogger(__name__)
_Matrix: _ty.TypeAlias = _el_abc.Matrix
_Vector: _ty.TypeAlias = _el_abc.Vector
_IndexArray: _ty.TypeAlias = _el_abc.IndexArray
_STANDARDIZED_TOLERANCE: _ty.Final = 1e-10


@_dc.dataclass(frozen=True, eq=False)
class Dataset:
    """Predictors `X` (`n x p`) and responses `Y` (`n x q`).

    Use `make_dataset` to build instances
    from arrays, with default names.
    """

    X: _Matrix
    Y: _Matrix
    predictor_names: tuple[str, ...]
    response_names: tuple[str, ...]
    standardized: _el_abc.Yes = False

    def __post_init__(
            self
            ) -> None:
        x = _utils.as_matrix(self.X, 'X')
        y = _utils.as_matrix(self.Y, 'Y')
        object.__setattr__(self, 'X', x)
        object.__setattr__(self, 'Y', y)
        n, p = x.shape
        if n < 3 or p < 1:
            raise ValueError(
                f'`X` needs at least 3 rows and 1 column, '
                f'got shape {x.shape}')
        if y.shape[0] != n or y.shape[1] < 1:
            raise ValueError(
                f'`Y` must have {n} rows and at least '
                f'1 column, got shape {y.shape}')
        if len(self.predictor_names) != p:
            raise ValueError(
                f'expected {p} predictor names, '
                f'got {len(self.predictor_names)}')
        if len(self.response_names) != y.shape[1]:
            raise ValueError(
                f'expected {y.shape[1]} response names, '
                f'got {len(self.response_names)}')
        if self.standardized:
            _assert_standardized(x)

    @property
    def n(
            self
            ) -> _el_abc.Cardinality:
        return self.X.shape[0]

    @property
    def p(
            self
            ) -> _el_abc.Cardinality:
        return self.X.shape[1]

    @property
    def q(
            self
            ) -> _el_abc.Cardinality:
        return self.Y.shape[1]

    def standardize(
            self
            ) -> 'Dataset':
        """Return dataset with standardized predictors.

        Responses are not transformed.
        """
        if self.standardized:
            return self
        x, _, _ = _utils.standardize_columns(self.X)
        return _dc.replace(
            self, X=x, standardized=True)

    def with_responses(
            self,
            Y:
                _Matrix
            ) -> 'Dataset':
        """Return dataset with responses replaced."""
        return _dc.replace(self, Y=Y)


def _assert_standardized(
        x:
            _Matrix
        ) -> None:
    """Raise `ValueError` if columns are not standardized.

    Constant zero columns are accepted.
    """
    means = x.mean(axis=0)
    scales = x.std(axis=0, ddof=1)
    bad_mean = np.abs(means) > _STANDARDIZED_TOLERANCE
    bad_scale = (
        (np.abs(scales - 1) > _STANDARDIZED_TOLERANCE) &
        (scales != 0))
    bad = np.flatnonzero(bad_mean | bad_scale)
    if bad.size:
        raise ValueError(
            f'{bad.size} predictor columns are not '
            f'standardized, the first is column {bad[0]}')


def make_dataset(
        X:
            _ty.Any,
        Y:
            _ty.Any,
        predictor_names:
            _abc.Sequence[str] |
            None=None,
        response_names:
            _abc.Sequence[str] |
            None=None,
        standardize:
            _el_abc.Yes=True
        ) -> Dataset:
    """Return `Dataset` from arrays.

    Default names are `X1, ..., Xp`
    and `Y1, ..., Yq`.
    """
    x = _utils.as_matrix(X, 'X')
    y = _utils.as_matrix(Y, 'Y')
    if predictor_names is None:
        predictor_names = [
            f'X{j + 1}' for j in range(x.shape[1])]
    if response_names is None:
        response_names = [
            f'Y{k + 1}' for k in range(y.shape[1])]
    data = Dataset(
        X=x, Y=y,
        predictor_names=tuple(predictor_names),
        response_names=tuple(response_names))
    if standardize:
        return data.standardize()
    return data


@_dc.dataclass(frozen=True, eq=False)
class ScreeningResult:
    """Statistics, ranking, and selected submodel.

    Indices are 0-based predictor indices
    of the screened dataset. For conditional
    screening, `targets[k]` is the predictor
    scored by `statistics[k]`; otherwise
    `targets` is `None` and `statistics[j]`
    scores predictor `j`.
    """

    method: _el_abc.Method | str
    statistics: _Vector
    ranking: _IndexArray
    selected: _IndexArray
    threshold_rule: dict[str, _ty.Any]
    failed: tuple[_el_abc.Index, ...] = tuple()
    targets: _IndexArray | None = None
    cond_set: tuple[_el_abc.Index, ...] | None = None
    stages: tuple['ScreeningResult', ...] = tuple()
    predictor_names: tuple[str, ...] | None = None

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        """Return JSON-compatible `dict`."""
        d = dict(
            method=self.method,
            statistics=self.statistics.tolist(),
            ranking=self.ranking.tolist(),
            selected=self.selected.tolist(),
            threshold_rule=dict(self.threshold_rule),
            failed=list(self.failed))
        if self.targets is not None:
            d['targets'] = self.targets.tolist()
        if self.cond_set is not None:
            d['cond_set'] = list(self.cond_set)
        if self.predictor_names is not None:
            d['selected_names'] = [
                self.predictor_names[j]
                for j in self.selected]
        if self.stages:
            d['stages'] = [
                stage.to_dict()
                for stage in self.stages]
        return d


def estimating_stack(
        columns:
            _Matrix,
        Y:
            _Matrix
        ) -> np.ndarray:
    """Return rows `columns[i, j] * Y[i]` for each column `j`.

    @return:
        array of shape `(m, n, q)`, where
        `m` is the number of `columns`
    """
    return columns.T[:, :, np.newaxis] * Y[np.newaxis]


def column_statistics(
        columns:
            _Matrix,
        Y:
            _Matrix,
        aggregate:
            _el_abc.Aggregate,
        settings:
            _el_abc.Settings |
            None=None
        ) -> tuple[
            _Vector,
            _IndexArray]:
    """Return statistics of `columns` against `Y`.

    Columns are solved in chunks of `settings.chunk_size`,
    so results do not depend on `settings.threads`.

    @param aggregate:
        `'joint'` for the `q`-dimensional ratio,
        `'avg'` or `'max'` for aggregates of
        the single-response ratios
    @return:
        `(statistics, failed)`, where `failed`
        lists the columns whose ratio could
        not be computed (their statistic is 0)
    """
    if aggregate == 'joint':
        stats, failed = _joint_statistics(
            columns, Y, settings)
    elif aggregate in ('avg', 'max'):
        matrix, failed_matrix = _componentwise(
            columns, Y, settings)
        if aggregate == 'avg':
            stats = matrix.mean(axis=1)
        else:
            stats = matrix.max(axis=1)
        failed = failed_matrix.any(axis=1)
    else:
        raise ValueError(
            f'unknown aggregate: {aggregate!r}')
    failed_indices = np.flatnonzero(failed)
    if failed_indices.size:
        logger.warning(
            f'numerical failure for {failed_indices.size} '
            f'columns, their statistic is set to 0: '
            f'{failed_indices.tolist()}')
    return stats, failed_indices


def _joint_statistics(
        columns:
            _Matrix,
        Y:
            _Matrix,
        settings:
            _el_abc.Settings |
            None
        ) -> tuple[
            _Vector,
            np.ndarray]:
    settings = _el_abc.settings_or_default(settings)

    def solve(
            span:
                range
            ) -> tuple[
                _Vector,
                np.ndarray]:
        block = columns[:, span.start:span.stop]
        stack = estimating_stack(block, Y)
        return _el.el_ratios_at_zero(stack, settings)
    parts = _run_chunks(solve, columns.shape[1], settings)
    stats = np.concatenate([r for r, _ in parts])
    failed = np.concatenate([f for _, f in parts])
    return stats, failed


def _componentwise(
        columns:
            _Matrix,
        Y:
            _Matrix,
        settings:
            _el_abc.Settings |
            None
        ) -> tuple[
            _Matrix,
            np.ndarray]:
    settings = _el_abc.settings_or_default(settings)
    n, q = Y.shape

    def solve(
            span:
                range
            ) -> tuple[
                _Matrix,
                np.ndarray]:
        block = columns[:, span.start:span.stop]
        size = block.shape[1]
        stack = estimating_stack(block, Y)
        single = stack.transpose(0, 2, 1).reshape(
            size * q, n, 1)
        ratios, failed = _el.el_ratios_at_zero(
            single, settings)
        return (
            ratios.reshape(size, q),
            failed.reshape(size, q))
    parts = _run_chunks(solve, columns.shape[1], settings)
    matrix = np.concatenate([r for r, _ in parts])
    failed = np.concatenate([f for _, f in parts])
    return matrix, failed


def _run_chunks(
        solve:
            _abc.Callable[[range], _ty.Any],
        m:
            _el_abc.Cardinality,
        settings:
            _el_abc.Settings
        ) -> list:
    spans = _utils.chunks(m, settings.chunk_size)
    return _utils.parallel_map(
        solve, spans, settings.threads)


def _checked(
        stats:
            _Vector,
        failed:
            _IndexArray,
        strict:
            _el_abc.Yes
        ) -> _Vector:
    if strict and failed.size:
        index = int(failed[0])
        raise _el.NumericalFailure(
            f'numerical failure for predictor {index}',
            index=index)
    return stats


def melsis_statistics(
        data:
            Dataset,
        settings:
            _el_abc.Settings |
            None=None,
        strict:
            _el_abc.Yes=False
        ) -> _Vector:
    """Return the joint ratio of each predictor.

    Entry `j` is the adjusted empirical likelihood
    ratio at zero of the rows `X_ij * y_i`.
    Predictors are standardized first, if needed.

    @param strict:
        if `True`, then raise `NumericalFailure`
        for the first failed predictor,
        else set its statistic to 0
    """
    data = data.standardize()
    stats, failed = column_statistics(
        data.X, data.Y, 'joint', settings)
    return _checked(stats, failed, strict)


def componentwise_statistics(
        data:
            Dataset,
        settings:
            _el_abc.Settings |
            None=None
        ) -> _Matrix:
    """Return `p x q` matrix of single-response ratios.

    Entry `(j, k)` is the ratio of the rows `X_ij * Y_ik`.
    Failed entries are 0.
    """
    data = data.standardize()
    matrix, _ = _componentwise(data.X, data.Y, settings)
    return matrix


def elsis_avg_statistics(
        data:
            Dataset,
        settings:
            _el_abc.Settings |
            None=None,
        strict:
            _el_abc.Yes=False
        ) -> _Vector:
    """Return mean over responses of single-response ratios."""
    data = data.standardize()
    stats, failed = column_statistics(
        data.X, data.Y, 'avg', settings)
    return _checked(stats, failed, strict)


def elsis_max_statistics(
        data:
            Dataset,
        settings:
            _el_abc.Settings |
            None=None,
        strict:
            _el_abc.Yes=False
        ) -> _Vector:
    """Return maximum over responses of single-response ratios."""
    data = data.standardize()
    stats, failed = column_statistics(
        data.X, data.Y, 'max', settings)
    return _checked(stats, failed, strict)


def rank_predictors(
        statistics:
            _Vector
        ) -> _IndexArray:
    """Return indices in order of decreasing statistic.

    Equal statistics are ordered by ascending index.
    """
    stats = np.asarray(statistics, dtype=np.float64)
    if stats.ndim != 1:
        raise ValueError(
            f'expected a vector, got shape {stats.shape}')
    _utils.assert_finite(stats, 'statistics')
    return np.argsort(-stats, kind='stable').astype(np.intp)


def hard_threshold_size(
        n:
            _el_abc.Cardinality,
        c:
            float=1.0
        ) -> _el_abc.Cardinality:
    """Return model size `c [n / log(n)]`.

    For integral `c`, the integer part of
    `n / log(n)` is multiplied by `c`.
    Otherwise, the integer part of
    `c n / log(n)` is returned.

    ```
    hard_threshold_size(100, 1) == 21
    hard_threshold_size(100, 1.5) == 32
    hard_threshold_size(100, 2) == 42
    ```
    """
    if not c > 0:
        raise ValueError(
            f'`c` must be positive, got: {c}')
    base = _utils.floor_log_ratio(n)
    if float(c).is_integer():
        return int(c) * base
    return int(math.floor(c * n / math.log(n)))


def nearest_rank_quantile(
        values:
            _Vector,
        tau:
            float
        ) -> float:
    """Return the `tau`-quantile by the nearest-rank rule.

    This is the `ceil(tau * m)`-th smallest
    of the `m` values, so `tau == 1` gives
    the maximum.
    """
    if not 0 < tau <= 1:
        raise ValueError(
            f'`tau` must be in `(0, 1]`, got: {tau}')
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if ordered.size == 0:
        raise ValueError('no values')
    rank = max(1, math.ceil(tau * ordered.size))
    return float(ordered[rank - 1])


def response_permutation(
        n:
            _el_abc.Cardinality,
        seed:
            _el_abc.Seed
        ) -> _IndexArray:
    """Return the seeded permutation of response rows."""
    rng = _utils.derive_rng(seed)
    return rng.permutation(n).astype(np.intp)


def permutation_threshold(
        columns:
            _Matrix,
        Y:
            _Matrix,
        aggregate:
            _el_abc.Aggregate,
        tau:
            float,
        seed:
            _el_abc.Seed,
        settings:
            _el_abc.Settings |
            None=None,
        permutation:
            _IndexArray |
            None=None
        ) -> float:
    """Return `tau`-quantile of statistics on permuted responses.

    The rows of `Y` are permuted once, which breaks
    the association with `columns`, then all
    statistics are recomputed.

    @param permutation:
        rows order, if `None` then drawn from `seed`
    """
    n = Y.shape[0]
    if permutation is None:
        permutation = response_permutation(n, seed)
    permutation = np.asarray(permutation, dtype=np.intp)
    if sorted(permutation.tolist()) != list(range(n)):
        raise ValueError(
            'not a permutation of the rows')
    auxiliary, _ = column_statistics(
        columns, Y[permutation], aggregate, settings)
    return nearest_rank_quantile(auxiliary, tau)


def soft_threshold(
        data:
            Dataset,
        screener:
            _el_abc.Method,
        tau:
            float,
        seed:
            _el_abc.Seed,
        settings:
            _el_abc.Settings |
            None=None,
        permutation:
            _IndexArray |
            None=None
        ) -> tuple[
            float,
            _IndexArray]:
    """Return threshold and the predictors that reach it.

    @param screener:
        one of `MELSIS`, `ELSIS_AVG`, `ELSIS_MAX`
    @return:
        `(gamma, selected)`, with `selected`
        in ranking order
    """
    aggregate = _unconditional_aggregate(screener)
    data = data.standardize()
    gamma = permutation_threshold(
        data.X, data.Y, aggregate, tau, seed,
        settings, permutation)
    stats, _ = column_statistics(
        data.X, data.Y, aggregate, settings)
    rule = _el_abc.ThresholdRule.soft(gamma)
    return gamma, select_model(stats, rule)


def select_model(
        statistics:
            _Vector,
        rule:
            _el_abc.ThresholdRule,
        ranking:
            _IndexArray |
            None=None
        ) -> _IndexArray:
    """Return selected indices, in ranking order.

    A hard rule larger than the number of
    statistics is clamped, with a warning.
    """
    stats = np.asarray(statistics, dtype=np.float64)
    if ranking is None:
        ranking = rank_predictors(stats)
    match rule.kind:
        case 'hard':
            size = int(rule.value)
            if size > stats.size:
                logger.warning(
                    f'model size {size} exceeds the '
                    f'{stats.size} candidates, clamped')
                size = stats.size
            return ranking[:size]
        case 'soft':
            keep = stats[ranking] >= rule.value
            return ranking[keep]
        case _:
            raise ValueError(rule)


def rule_record(
        rule:
            _el_abc.ThresholdRule,
        candidates:
            _el_abc.Cardinality,
        **extra
        ) -> dict[str, _ty.Any]:
    """Return description of `rule` for reports."""
    record = dict(kind=rule.kind, value=rule.value)
    if rule.kind == 'hard':
        record['clamped'] = rule.value > candidates
    record.update(extra)
    return record


def _unconditional_aggregate(
        method:
            str
        ) -> _el_abc.Aggregate:
    if method not in _el_abc.UNCONDITIONAL_METHODS:
        raise ValueError(
            f'expected one of '
            f'{sorted(_el_abc.UNCONDITIONAL_METHODS)}, '
            f'got: {method!r}')
    return _el_abc.AGGREGATE_OF[method]


def screen(
        data:
            Dataset,
        method:
            _el_abc.Method='MELSIS',
        rule:
            _el_abc.ThresholdRule |
            None=None,
        tau:
            float |
            None=None,
        seed:
            _el_abc.Seed=0,
        settings:
            _el_abc.Settings |
            None=None
        ) -> ScreeningResult:
    """Return result of screening `data` by `method`.

    The default rule keeps `[n / log(n)]` predictors.
    If `tau` is given, then the soft rule is used,
    with threshold from `permutation_threshold`.

    @param method:
        one of `MELSIS`, `ELSIS_AVG`, `ELSIS_MAX`,
        for conditional methods use
        `elscreen.conditional.conditional_screen`
    """
    aggregate = _unconditional_aggregate(method)
    data = data.standardize()
    stats, failed = column_statistics(
        data.X, data.Y, aggregate, settings)
    extra = dict()
    if tau is not None:
        if rule is not None:
            raise ValueError(
                'give either `rule` or `tau`, not both')
        gamma = permutation_threshold(
            data.X, data.Y, aggregate, tau, seed, settings)
        rule = _el_abc.ThresholdRule.soft(gamma)
        extra = dict(tau=tau, seed=seed)
    elif rule is None:
        rule = _el_abc.ThresholdRule.hard(
            hard_threshold_size(data.n))
    ranking = rank_predictors(stats)
    selected = select_model(stats, rule, ranking)
    return ScreeningResult(
        method=method,
        statistics=stats,
        ranking=ranking,
        selected=selected,
        threshold_rule=rule_record(rule, data.p, **extra),
        failed=tuple(failed.tolist()),
        predictor_names=data.predictor_names)
