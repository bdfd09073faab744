"""Conditional screening given a set of predictors.

A predictor `X_j` that is active but marginally uncorrelated
with the response (a hidden predictor) can be recovered by
screening the centralized predictor

```
X_j - E(X_j | B' X_C)
```

where `X_C` are the conditioning predictors, and the columns
of `B` span the directions of `X_C` that carry information
about `X_j`. The directions are estimated by sliced inverse
regression of `X_C` on `X_j`, and the conditional expectation
is estimated by a linear fit on `B' X_C`.


References
==========

Ker-Chau Li
    "Sliced inverse regression for dimension reduction"
    Journal of the American Statistical Association
    Vol. 86, No. 414, 1991, pages 316--327

Emre Barut, Jianqing Fan, Anneleen Verhasselt
    "Conditional sure independence screening"
    Journal of the American Statistical Association
    Vol. 111, No. 515, 2016, pages 1266--1277
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import dataclasses as _dc
import logging
import typing as _ty

import numpy as np
import scipy.linalg as _la

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.screening as _screening


logger = logging.getLogger(__name__)
WHITENING_RIDGE: _ty.Final = 1e-8
FIT_RIDGE: _ty.Final = 1e-8
_EIGEN_FLOOR: _ty.Final = 1e-12
_Matrix: _ty.TypeAlias = _el_abc.Matrix
_Vector: _ty.TypeAlias = _el_abc.Vector
_IndexArray: _ty.TypeAlias = _el_abc.IndexArray
_Dataset: _ty.TypeAlias = _screening.Dataset
_Result: _ty.TypeAlias = _screening.ScreeningResult


class DegenerateSlices(ValueError):
    """The target has too few distinct values to slice."""


@_dc.dataclass(frozen=True, eq=False)
class ConditioningSpec:
    """Conditioning set and fitted conditional expectations.

    For the target `targets[k]`:

      - `directions[k]` is the `|C| x b` matrix
        of estimated directions, with
        orthonormal columns
      - `projection_coeffs[k]` is the `b`-vector
        of the linear fit of the target on
        the projected conditioning predictors
    """

    cond_set: tuple[_el_abc.Index, ...]
    targets: _IndexArray
    directions: tuple[_Matrix, ...]
    projection_coeffs: tuple[_Vector, ...]
    n_slices: _el_abc.Cardinality
    direction_share: float
    shared: _el_abc.Yes = False

    def __post_init__(
            self
            ) -> None:
        if not self.cond_set:
            raise ValueError('empty conditioning set')
        overlap = set(self.cond_set).intersection(
            self.targets.tolist())
        if overlap:
            raise ValueError(
                'targets intersect the conditioning set: '
                f'{sorted(overlap)}')
        m = len(self.targets)
        if len(self.directions) != m or len(
                self.projection_coeffs) != m:
            raise ValueError(
                f'expected {m} fitted targets')


class _Whitened(_ty.NamedTuple):
    centred: _Matrix
    white: _Matrix
    inv_sqrt: _Matrix


def _whiten(
        XC:
            _Matrix
        ) -> _Whitened:
    """Return `XC` centred and whitened.

    The inverse square root of the sample covariance
    is computed after adding `WHITENING_RIDGE * trace`
    to the diagonal.
    """
    centred = XC - XC.mean(axis=0)
    n = XC.shape[0]
    cov = centred.T @ centred / (n - 1)
    size = cov.shape[0]
    cov = cov + WHITENING_RIDGE * max(
        np.trace(cov), 1.0) * np.eye(size)
    eigenvalues, vectors = _la.eigh(cov)
    inv_sqrt = (vectors / np.sqrt(eigenvalues)) @ vectors.T
    return _Whitened(
        centred=centred,
        white=centred @ inv_sqrt,
        inv_sqrt=inv_sqrt)


def _slice_count(
        xj:
            _Vector,
        n_slices:
            _el_abc.Cardinality
        ) -> _el_abc.Cardinality:
    """Return number of slices usable for `xj`.

    Raise `DegenerateSlices` if `xj` has
    fewer than 2 distinct values.
    """
    distinct = np.unique(xj).size
    if distinct < 2:
        raise DegenerateSlices(
            f'the target has {distinct} distinct values, '
            'at least 2 are needed')
    n = xj.size
    count = n_slices
    if n < 2 * count:
        count = max(2, n // 2)
    if distinct < count:
        count = distinct
    if count != n_slices:
        logger.warning(
            f'using {count} slices instead of {n_slices}')
    return count


def _between_slices(
        white:
            _Matrix,
        xj:
            _Vector,
        n_slices:
            _el_abc.Cardinality
        ) -> _Matrix:
    """Return weighted covariance of slice means.

    Observations are ordered by `xj` (stably)
    and split into groups of sizes that
    differ by at most 1.
    """
    count = _slice_count(xj, n_slices)
    n = white.shape[0]
    order = np.argsort(xj, kind='stable')
    grand = white.mean(axis=0)
    size = white.shape[1]
    between = np.zeros((size, size))
    for group in np.array_split(order, count):
        diff = white[group].mean(axis=0) - grand
        between += (group.size / n) * np.outer(diff, diff)
    return between


def _leading_directions(
        between:
            _Matrix,
        inv_sqrt:
            _Matrix,
        share:
            float,
        max_count:
            _el_abc.Cardinality
        ) -> _Matrix:
    """Return orthonormal basis of leading directions.

    The number of directions `b` is the smallest
    whose eigenvalues sum to at least `share`
    of the total, and at most `max_count`.
    """
    eigenvalues, vectors = _la.eigh(between)
    eigenvalues = eigenvalues[::-1]
    vectors = vectors[:, ::-1]
    top = eigenvalues[0]
    eigenvalues = np.where(
        eigenvalues > _EIGEN_FLOOR * max(top, 0.0),
        eigenvalues, 0.0)
    total = eigenvalues.sum()
    if total > 0:
        cumulative = np.cumsum(eigenvalues)
        reached = cumulative >= share * total * (1 - 1e-12)
        b = int(np.argmax(reached)) + 1
    else:
        b = 1
    b = max(1, min(b, max_count))
    back = inv_sqrt @ vectors[:, :b]
    basis, _ = np.linalg.qr(back)
    return basis


def sir_directions(
        XC:
            _Matrix,
        xj:
            _Vector,
        n_slices:
            _el_abc.Cardinality=9,
        share:
            float=0.80
        ) -> _Matrix:
    """Return directions of `XC` that inform on `xj`.

    Sliced inverse regression: slice the observations
    by the order of `xj`, then eigendecompose the
    weighted covariance of slice means of whitened
    `XC`. The returned `|C| x b` matrix has
    orthonormal columns.

    If `xj` has fewer distinct values than `n_slices`,
    then fewer slices are used. Raise `DegenerateSlices`
    if `xj` is constant.
    """
    XC = _utils.as_matrix(XC, 'XC')
    xj = np.asarray(xj, dtype=np.float64).ravel()
    if xj.size != XC.shape[0]:
        raise ValueError(
            f'`xj` has {xj.size} entries, '
            f'expected {XC.shape[0]}')
    if not 0 < share <= 1:
        raise ValueError(
            f'`share` must be in `(0, 1]`, got: {share}')
    whitened = _whiten(XC)
    return _directions_for(
        whitened, xj, n_slices, share)


def _directions_for(
        whitened:
            _Whitened,
        xj:
            _Vector,
        n_slices:
            _el_abc.Cardinality,
        share:
            float
        ) -> _Matrix:
    count = _slice_count(xj, n_slices)
    between = _between_slices(whitened.white, xj, count)
    max_count = min(whitened.white.shape[1], count - 1)
    return _leading_directions(
        between, whitened.inv_sqrt, share, max_count)


def conditional_expectation_fit(
        XC:
            _Matrix,
        directions:
            _Matrix,
        xj:
            _Vector
        ) -> _Vector:
    """Return coefficients of `xj` on `XC @ directions`.

    With `Z = XC @ directions`, the coefficients are
    `cov(Z)^{-1} cov(Z, xj)`, from sample covariances.
    A singular `cov(Z)` gets `FIT_RIDGE * trace`
    added to its diagonal.
    """
    XC = _utils.as_matrix(XC, 'XC')
    xj = np.asarray(xj, dtype=np.float64).ravel()
    centred = XC - XC.mean(axis=0)
    return _fit(centred @ directions, xj)


def _fit(
        z:
            _Matrix,
        xj:
            _Vector
        ) -> _Vector:
    b = z.shape[1]
    if b == 0:
        return np.zeros(0)
    n = z.shape[0]
    z = z - z.mean(axis=0)
    target = xj - xj.mean()
    cov = z.T @ z / (n - 1)
    cross = z.T @ target / (n - 1)
    eigenvalues = _la.eigvalsh(cov)
    if eigenvalues[0] <= _EIGEN_FLOOR * max(eigenvalues[-1], 0.0):
        cov = cov + FIT_RIDGE * max(
            np.trace(cov), 1.0) * np.eye(b)
    return _la.solve(cov, cross, assume_a='pos')


def _residual(
        centred:
            _Matrix,
        directions:
            _Matrix,
        coeffs:
            _Vector,
        xj:
            _Vector
        ) -> _Vector:
    target = xj - xj.mean()
    if coeffs.size == 0:
        return target
    return target - centred @ directions @ coeffs


def _as_cond_set(
        cond_set:
            _abc.Iterable[_el_abc.Index],
        p:
            _el_abc.Cardinality
        ) -> tuple[_el_abc.Index, ...]:
    members = tuple(int(j) for j in cond_set)
    if not members:
        raise ValueError('empty conditioning set')
    if len(set(members)) != len(members):
        raise ValueError(
            f'repeated conditioning indices: {members}')
    out = [j for j in members if not 0 <= j < p]
    if out:
        raise ValueError(
            f'conditioning indices out of range: {out}')
    return members


def fit_conditioning(
        data:
            _Dataset,
        cond_set:
            _abc.Iterable[_el_abc.Index],
        targets:
            _abc.Iterable[_el_abc.Index] |
            None=None,
        settings:
            _el_abc.Settings |
            None=None
        ) -> ConditioningSpec:
    """Return directions and fits for each target.

    Directions are estimated for each target,
    unless `settings.shared_directions`, in which case
    one set of directions is estimated from the average
    of the per-target slice covariances.

    @param cond_set:
        0-based indices of the conditioning predictors
    @param targets:
        0-based indices, by default all predictors
        outside `cond_set`
    """
    settings = _el_abc.settings_or_default(settings)
    data = data.standardize()
    members = _as_cond_set(cond_set, data.p)
    if targets is None:
        excluded = set(members)
        targets = [
            j for j in range(data.p)
            if j not in excluded]
    targets = np.asarray(list(targets), dtype=np.intp)
    whitened = _whiten(data.X[:, list(members)])
    if settings.shared_directions:
        directions = _shared_directions(
            data, whitened, targets, settings)
    else:
        directions = _per_target_directions(
            data, whitened, targets, settings)
    coeffs = tuple(
        _fit(whitened.centred @ b, data.X[:, j])
        for j, b in zip(targets, directions))
    return ConditioningSpec(
        cond_set=members,
        targets=targets,
        directions=directions,
        projection_coeffs=coeffs,
        n_slices=settings.n_slices,
        direction_share=settings.direction_share,
        shared=settings.shared_directions)


def _per_target_directions(
        data:
            _Dataset,
        whitened:
            _Whitened,
        targets:
            _IndexArray,
        settings:
            _el_abc.Settings
        ) -> tuple[_Matrix, ...]:
    size = whitened.white.shape[1]

    def estimate(
            span:
                range
            ) -> list[_Matrix]:
        out = list()
        for j in targets[span.start:span.stop]:
            try:
                b = _directions_for(
                    whitened, data.X[:, j],
                    settings.n_slices,
                    settings.direction_share)
            except DegenerateSlices:
                logger.warning(
                    f'predictor {j} is constant, '
                    'it is only centred')
                b = np.zeros((size, 0))
            out.append(b)
        return out
    spans = _utils.chunks(len(targets), settings.chunk_size)
    parts = _utils.parallel_map(
        estimate, spans, settings.threads)
    return tuple(b for part in parts for b in part)


def _shared_directions(
        data:
            _Dataset,
        whitened:
            _Whitened,
        targets:
            _IndexArray,
        settings:
            _el_abc.Settings
        ) -> tuple[_Matrix, ...]:
    size = whitened.white.shape[1]
    total = np.zeros((size, size))
    counts = list()
    for j in targets:
        xj = data.X[:, j]
        try:
            count = _slice_count(xj, settings.n_slices)
        except DegenerateSlices:
            continue
        total += _between_slices(whitened.white, xj, count)
        counts.append(count)
    if not counts:
        raise DegenerateSlices('every target is constant')
    between = total / len(counts)
    max_count = min(size, min(counts) - 1)
    b = _leading_directions(
        between, whitened.inv_sqrt,
        settings.direction_share, max_count)
    return tuple(b for _ in targets)


def centralize(
        data:
            _Dataset,
        spec:
            ConditioningSpec
        ) -> _Matrix:
    """Return the centralized target columns.

    Column `k` is `X_j - E(X_j | B' X_C)` for
    `j == spec.targets[k]`, with the conditional
    expectation from the linear fit.
    """
    data = data.standardize()
    XC = data.X[:, list(spec.cond_set)]
    centred = XC - XC.mean(axis=0)
    columns = [
        _residual(centred, b, c, data.X[:, j])
        for j, b, c in zip(
            spec.targets, spec.directions,
            spec.projection_coeffs)]
    if not columns:
        return np.zeros((data.n, 0))
    return np.column_stack(columns)


def cmelsis_statistics(
        data:
            _Dataset,
        spec:
            ConditioningSpec,
        settings:
            _el_abc.Settings |
            None=None
        ) -> _Vector:
    """Return joint conditional ratios, one per target.

    Entry `k` is the ratio at zero of the rows
    `X~_ij * y_i`, for `j == spec.targets[k]`.
    """
    stats, _ = _conditional_statistics(
        data, spec, 'joint', settings)
    return stats


def celsis_statistics(
        data:
            _Dataset,
        spec:
            ConditioningSpec,
        aggregate:
            _ty.Literal['avg', 'max']='avg',
        settings:
            _el_abc.Settings |
            None=None
        ) -> _Vector:
    """Return aggregated single-response conditional ratios."""
    if aggregate not in ('avg', 'max'):
        raise ValueError(aggregate)
    stats, _ = _conditional_statistics(
        data, spec, aggregate, settings)
    return stats


def _conditional_statistics(
        data:
            _Dataset,
        spec:
            ConditioningSpec,
        aggregate:
            _el_abc.Aggregate,
        settings:
            _el_abc.Settings |
            None
        ) -> tuple[
            _Vector,
            _IndexArray]:
    """Return statistics and failed target positions."""
    data = data.standardize()
    columns = centralize(data, spec)
    if columns.shape[1] == 0:
        return np.zeros(0), np.zeros(0, dtype=np.intp)
    return _screening.column_statistics(
        columns, data.Y, aggregate, settings)


def cmelsis_soft_threshold(
        data:
            _Dataset,
        spec:
            ConditioningSpec,
        tau:
            float,
        seed:
            _el_abc.Seed,
        aggregate:
            _el_abc.Aggregate='joint',
        settings:
            _el_abc.Settings |
            None=None,
        permutation:
            _IndexArray |
            None=None
        ) -> tuple[
            float,
            _IndexArray]:
    """Return threshold and the targets that reach it.

    The centralized columns are computed once.
    The rows of `Y` are then permuted and the
    auxiliary statistics recomputed on the
    same centralized columns.

    @return:
        `(gamma, selected)`, with `selected` as
        0-based predictor indices in ranking order
    """
    data = data.standardize()
    columns = centralize(data, spec)
    gamma = _screening.permutation_threshold(
        columns, data.Y, aggregate, tau, seed,
        settings, permutation)
    stats, _ = _screening.column_statistics(
        columns, data.Y, aggregate, settings)
    local = _screening.select_model(
        stats, _el_abc.ThresholdRule.soft(gamma))
    return gamma, spec.targets[local]


def conditional_screen(
        data:
            _Dataset,
        method:
            _el_abc.Method,
        cond_set:
            _abc.Iterable[_el_abc.Index],
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
        ) -> _Result:
    """Return result of conditional screening.

    Only predictors outside `cond_set` are ranked.
    The default rule keeps `[n / log(n)]` of them.

    @param method:
        one of `CMELSIS`, `CELSIS_AVG`, `CELSIS_MAX`
    """
    if method not in _el_abc.CONDITIONAL_METHODS:
        raise ValueError(
            f'expected one of '
            f'{sorted(_el_abc.CONDITIONAL_METHODS)}, '
            f'got: {method!r}')
    aggregate = _el_abc.AGGREGATE_OF[method]
    data = data.standardize()
    spec = fit_conditioning(data, cond_set, settings=settings)
    columns = centralize(data, spec)
    targets = spec.targets
    extra = dict()
    if columns.shape[1] == 0:
        stats = np.zeros(0)
        failed = np.zeros(0, dtype=np.intp)
    else:
        stats, failed = _screening.column_statistics(
            columns, data.Y, aggregate, settings)
    if tau is not None:
        if rule is not None:
            raise ValueError(
                'give either `rule` or `tau`, not both')
        gamma = _screening.permutation_threshold(
            columns, data.Y, aggregate, tau, seed, settings)
        rule = _el_abc.ThresholdRule.soft(gamma)
        extra = dict(tau=tau, seed=seed)
    elif rule is None:
        rule = _el_abc.ThresholdRule.hard(
            _screening.hard_threshold_size(data.n))
    local = _screening.rank_predictors(stats)
    selected = _screening.select_model(stats, rule, local)
    return _screening.ScreeningResult(
        method=method,
        statistics=stats,
        ranking=targets[local],
        selected=targets[selected],
        threshold_rule=_screening.rule_record(
            rule, len(targets), **extra),
        failed=tuple(targets[failed].tolist()),
        targets=targets,
        cond_set=spec.cond_set,
        predictor_names=data.predictor_names)


def two_step_screen(
        data:
            _Dataset,
        d1:
            _el_abc.Cardinality,
        d2:
            _el_abc.Cardinality,
        method:
            _el_abc.Method='MELSIS',
        settings:
            _el_abc.Settings |
            None=None
        ) -> _Result:
    """Return result of screening, then conditional screening.

    The top `d1` predictors of the unconditional
    `method` form the conditioning set, then the
    top `d2` of the conditional counterpart are
    added. The ranking lists the conditioning set
    first, followed by the conditional ranking.
    Both stages are recorded in `stages`.
    """
    if d1 < 1 or d2 < 0:
        raise ValueError(
            f'requires `d1 >= 1` and `d2 >= 0`, '
            f'got: {d1}, {d2}')
    if d1 + d2 > data.p:
        raise ValueError(
            f'`d1 + d2 = {d1 + d2}` exceeds '
            f'`p = {data.p}`')
    if method not in _el_abc.CONDITIONAL_OF:
        raise ValueError(method)
    data = data.standardize()
    first = _screening.screen(
        data, method,
        _el_abc.ThresholdRule.hard(d1),
        settings=settings)
    cond_set = first.selected
    label = f'{method}-{_el_abc.CONDITIONAL_OF[method]}'
    rule = dict(kind='two-step', d1=d1, d2=d2)
    if d1 == data.p:
        return _screening.ScreeningResult(
            method=label,
            statistics=np.zeros(0),
            ranking=cond_set,
            selected=cond_set,
            threshold_rule=rule,
            failed=first.failed,
            targets=np.zeros(0, dtype=np.intp),
            cond_set=tuple(cond_set.tolist()),
            stages=(first,),
            predictor_names=data.predictor_names)
    second = conditional_screen(
        data, _el_abc.CONDITIONAL_OF[method],
        cond_set.tolist(),
        _el_abc.ThresholdRule.hard(d2),
        settings=settings)
    return _screening.ScreeningResult(
        method=label,
        statistics=second.statistics,
        ranking=np.concatenate([cond_set, second.ranking]),
        selected=np.concatenate([cond_set, second.selected]),
        threshold_rule=rule,
        failed=tuple(sorted(
            set(first.failed) | set(second.failed))),
        targets=second.targets,
        cond_set=tuple(cond_set.tolist()),
        stages=(first, second),
        predictor_names=data.predictor_names)


def sequential_screen(
        data:
            _Dataset,
        max_steps:
            _el_abc.Cardinality |
            None=None,
        settings:
            _el_abc.Settings |
            None=None
        ) -> list[_el_abc.Index]:
    """Return predictors in order of sequential recruitment.

    The first predictor maximizes the unconditional
    joint ratio. Each next predictor maximizes the
    joint ratio conditional on those recruited so far.

    @param max_steps:
        number of predictors to recruit,
        by default `[n / log(n)]`, at most `p`
    """
    data = data.standardize()
    if max_steps is None:
        max_steps = _utils.floor_log_ratio(data.n)
    if max_steps < 1:
        raise ValueError(
            f'`max_steps` must be positive, got: {max_steps}')
    max_steps = min(max_steps, data.p)
    stats = _screening.melsis_statistics(data, settings)
    recruited = [int(_screening.rank_predictors(stats)[0])]
    while len(recruited) < max_steps:
        spec = fit_conditioning(
            data, recruited, settings=settings)
        stats = cmelsis_statistics(data, spec, settings)
        best = _screening.rank_predictors(stats)[0]
        recruited.append(int(spec.targets[best]))
        logger.debug(
            f'step {len(recruited)}: recruited '
            f'predictor {recruited[-1]}')
    return recruited
