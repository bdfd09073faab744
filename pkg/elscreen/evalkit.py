"""Screening quality metrics, diagnostics, and replications.

Metrics over replications of a simulated design:

  - minimal model size (MMS): the smallest ranking prefix
    that contains every active predictor
  - `P_j`: the proportion of selected models that contain
    the active predictor `X_j`
  - `P_a`: the proportion of selected models that contain
    all active predictors

Diagnostics:

  - `proposition_diagnostics`: the eigenvalue ratio that
    bounds the marginal moments of inactive predictors,
    unconditionally and after centralization
  - `taylor_comparator`: the joint ratio next to its
    quadratic approximations
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import dataclasses as _dc
import logging
import math
import typing as _ty

import numpy as np
import pandas as pd
import scipy.linalg as _la

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.conditional as _cond
import elscreen.el as _el
import elscreen.screening as _screening
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)
QUANTILE_PROBS: _ty.Final = (0.05, 0.25, 0.5, 0.75, 0.95)
EIGEN_FLOOR: _ty.Final = 1e-12
_Matrix: _ty.TypeAlias = _el_abc.Matrix
_Vector: _ty.TypeAlias = _el_abc.Vector
_IndexSet: _ty.TypeAlias = _abc.Iterable[_el_abc.Index]


class MissingActive(ValueError):
    """An active predictor is absent from a ranking."""


def minimal_model_size(
        ranking:
            _abc.Sequence[_el_abc.Index],
        active:
            _IndexSet
        ) -> _el_abc.Cardinality:
    """Return size of the shortest prefix that contains `active`.

    ```
    minimal_model_size([4, 1, 3, 2, 0], {1, 3}) == 3
    ```
    """
    position = {
        int(j): k
        for k, j in enumerate(ranking)}
    active = [int(j) for j in active]
    missing = [j for j in active if j not in position]
    if missing:
        raise MissingActive(
            f'active predictors missing from '
            f'the ranking: {missing}')
    if not active:
        return 0
    return 1 + max(position[j] for j in active)


def union_model_size(
        rankings:
            _abc.Sequence[_abc.Sequence[_el_abc.Index]],
        active:
            _IndexSet
        ) -> _el_abc.Cardinality:
    """Return prefix size at which some ranking has each active.

    For each active predictor take its best position
    over the `rankings`. The result is 1 plus the
    largest of these positions.
    """
    active = [int(j) for j in active]
    if not active:
        return 0
    best = {j: math.inf for j in active}
    for ranking in rankings:
        for k, j in enumerate(ranking):
            j = int(j)
            if j in best and k < best[j]:
                best[j] = k
    missing = [j for j, k in best.items() if k == math.inf]
    if missing:
        raise MissingActive(
            f'active predictors missing from '
            f'every ranking: {missing}')
    return 1 + int(max(best.values()))


def coverage_proportions(
        selections:
            _abc.Sequence[_IndexSet],
        active:
            _IndexSet
        ) -> tuple[
            dict[_el_abc.Index, float],
            float]:
    """Return per-active and joint selection proportions.

    @return:
        `(p_j, p_a)`, where `p_j[j]` is the fraction of
        `selections` that contain `j`, and `p_a` the
        fraction that contain every active predictor
    """
    if not selections:
        raise ValueError('no selections')
    active = [int(j) for j in active]
    sets = [set(int(j) for j in s) for s in selections]
    m = len(sets)
    p_j = {
        j: sum(j in s for s in sets) / m
        for j in active}
    p_a = sum(s.issuperset(active) for s in sets) / m
    return p_j, p_a


def quantile_summary(
        values:
            _abc.Sequence[float],
        probs:
            _abc.Sequence[float]=QUANTILE_PROBS
        ) -> _Vector:
    """Return empirical quantiles, interpolated linearly.

    The interpolation is between order statistics
    at positions `(m - 1) * prob`.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError('no values')
    return np.quantile(values, probs, method='linear')


def quantile_labels(
        probs:
            _abc.Sequence[float]=QUANTILE_PROBS
        ) -> list[str]:
    return [f'{100 * prob:g}%' for prob in probs]


# Diagnostics


def finite_or_none(
        x:
            float |
            None
        ) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


@_dc.dataclass(frozen=True)
class PropositionDiagnostics:
    """Eigenvalue ratio and marginal moment bound.

    Attributes:
      - `eigen_ratio`: `lambda_max(S_AI S_IA) / lambda_min(S_AA)`
      - `lhs_ratio`: `K * eigen_ratio`, with `K = |A|`
      - `rhs_min`: `min_{j in A} |E X_j y|^2`
      - `holds`: `lhs_ratio <= rhs_min`

    The `conditional_` attributes are computed
    over `A` and `I` outside the conditioning set,
    after centralizing the active predictors.
    A smallest eigenvalue below `EIGEN_FLOOR`
    gives an infinite ratio.
    """

    lhs_ratio: float
    eigen_ratio: float
    rhs_min: float
    holds: _el_abc.Yes
    conditional_lhs_ratio: float | None = None
    conditional_eigen_ratio: float | None = None
    conditional_rhs_min: float | None = None
    conditional_holds: _el_abc.Yes | None = None

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        """Return JSON-compatible `dict`.

        Infinite values are mapped to `None`.
        """
        return {
            k: (v if isinstance(v, bool) or v is None
                else finite_or_none(v))
            for k, v in _dc.asdict(self).items()}


def _eigen_ratio(
        cross:
            _Matrix,
        own:
            _Matrix
        ) -> float:
    """Return `lambda_max(cross cross') / lambda_min(own)`."""
    smallest = _la.eigvalsh(own)[0]
    if smallest < EIGEN_FLOOR:
        return math.inf
    if cross.size == 0:
        return 0.0
    top = _la.eigvalsh(cross @ cross.T)[-1]
    return float(max(top, 0.0) / smallest)


def _condition(
        cross:
            _Matrix,
        own:
            _Matrix,
        moments:
            _Matrix
        ) -> tuple[float, float, float, bool]:
    """Return `(lhs, eigen_ratio, rhs_min, holds)`.

    @param moments:
        row `k` is `E X_j y` for the `k`-th active `j`
    """
    k = own.shape[0]
    ratio = _eigen_ratio(cross, own)
    lhs = k * ratio
    rhs = float(np.min(np.sum(moments**2, axis=1)))
    return lhs, ratio, rhs, bool(lhs <= rhs)


def _as_index_list(
        indices:
            _IndexSet
        ) -> list[int]:
    return sorted({int(j) for j in indices})


def proposition_diagnostics(
        data:
            _screening.Dataset |
            None,
        active:
            _IndexSet,
        inactive:
            _IndexSet |
            None=None,
        cond_set:
            _IndexSet |
            None=None,
        covariance:
            _Matrix |
            None=None,
        coefficients:
            _Matrix |
            None=None,
        sir:
            _el_abc.Yes=False,
        settings:
            _el_abc.Settings |
            None=None
        ) -> PropositionDiagnostics:
    """Return eigenvalue diagnostics of active versus inactive.

    Either `data` is given, and sample covariances are
    used, or `data` is `None` and the population
    `covariance` (`p x p`) and `coefficients`
    (`q x s`, for the first `s` predictors) are used.

    If `cond_set` is given, then the active predictors
    outside `cond_set` are centralized given `cond_set`.
    With samples, the centralization is a linear fit on
    the conditioning predictors, or on their estimated
    directions if `sir`. With population covariances,
    it is the linear conditional expectation.

    @param inactive:
        by default, all predictors not in `active`
    """
    if data is None:
        if covariance is None or coefficients is None:
            raise ValueError(
                'give `data`, or both `covariance` '
                'and `coefficients`')
        return _population_diagnostics(
            covariance, coefficients, active,
            inactive, cond_set)
    return _sample_diagnostics(
        data, active, inactive, cond_set, sir, settings)


def _split(
        p:
            _el_abc.Cardinality,
        active:
            _IndexSet,
        inactive:
            _IndexSet |
            None,
        cond_set:
            _IndexSet |
            None
        ) -> tuple[list[int], list[int], list[int]]:
    a = _as_index_list(active)
    if inactive is None:
        excluded = set(a)
        i = [j for j in range(p) if j not in excluded]
    else:
        i = _as_index_list(inactive)
    if set(a) & set(i):
        raise ValueError(
            'active and inactive sets intersect')
    out = [j for j in (*a, *i) if not 0 <= j < p]
    if out:
        raise ValueError(
            f'indices out of range: {out}')
    if not a:
        raise ValueError('empty active set')
    c = list() if cond_set is None else _as_index_list(cond_set)
    return a, i, c


def _population_diagnostics(
        covariance:
            _Matrix,
        coefficients:
            _Matrix,
        active:
            _IndexSet,
        inactive:
            _IndexSet | None,
        cond_set:
            _IndexSet | None
        ) -> PropositionDiagnostics:
    sigma = _utils.as_matrix(covariance, 'covariance')
    p = sigma.shape[0]
    b = _utils.as_matrix(coefficients, 'coefficients')
    if b.shape[1] > p:
        raise ValueError(
            f'{b.shape[1]} coefficients for {p} predictors')
    full = np.zeros((b.shape[0], p))
    full[:, :b.shape[1]] = b
    a, i, c = _split(p, active, inactive, cond_set)
    # row `j` is `E X_j y`
    moments = (full @ sigma).T
    lhs, ratio, rhs, holds = _condition(
        sigma[np.ix_(a, i)], sigma[np.ix_(a, a)], moments[a])
    diagnostics = PropositionDiagnostics(
        lhs_ratio=lhs, eigen_ratio=ratio,
        rhs_min=rhs, holds=holds)
    if not c:
        return diagnostics
    excluded = set(c)
    a_d = [j for j in a if j not in excluded]
    i_d = [j for j in i if j not in excluded]
    if not a_d:
        logger.warning(
            'every active predictor is in the '
            'conditioning set, no conditional diagnostics')
        return diagnostics
    # linear conditional expectation given `X_C`
    gain = _la.solve(
        sigma[np.ix_(c, c)], sigma[c, :], assume_a='pos')
    residual = sigma - sigma[:, c] @ gain
    centred_moments = (full @ residual).T
    lhs, ratio, rhs, holds = _condition(
        residual[np.ix_(a_d, i_d)],
        residual[np.ix_(a_d, a_d)],
        centred_moments[a_d])
    return _dc.replace(
        diagnostics,
        conditional_lhs_ratio=lhs,
        conditional_eigen_ratio=ratio,
        conditional_rhs_min=rhs,
        conditional_holds=holds)


def _sample_cov(
        u:
            _Matrix,
        v:
            _Matrix
        ) -> _Matrix:
    n = u.shape[0]
    uc = u - u.mean(axis=0)
    vc = v - v.mean(axis=0)
    return uc.T @ vc / (n - 1)


def _sample_diagnostics(
        data:
            _screening.Dataset,
        active:
            _IndexSet,
        inactive:
            _IndexSet | None,
        cond_set:
            _IndexSet | None,
        sir:
            _el_abc.Yes,
        settings:
            _el_abc.Settings | None
        ) -> PropositionDiagnostics:
    data = data.standardize()
    x, y, n = data.X, data.Y, data.n
    a, i, c = _split(data.p, active, inactive, cond_set)
    if n <= len(a):
        raise ValueError(
            f'requires `n > |A|`, got {n} <= {len(a)}')
    moments = x[:, a].T @ y / n
    lhs, ratio, rhs, holds = _condition(
        _sample_cov(x[:, a], x[:, i]),
        _sample_cov(x[:, a], x[:, a]),
        moments)
    diagnostics = PropositionDiagnostics(
        lhs_ratio=lhs, eigen_ratio=ratio,
        rhs_min=rhs, holds=holds)
    if not c:
        return diagnostics
    excluded = set(c)
    a_d = [j for j in a if j not in excluded]
    i_d = [j for j in i if j not in excluded]
    if not a_d:
        logger.warning(
            'every active predictor is in the '
            'conditioning set, no conditional diagnostics')
        return diagnostics
    if sir:
        spec = _cond.fit_conditioning(
            data, c, targets=a_d, settings=settings)
        centred = _cond.centralize(data, spec)
    else:
        xc = x[:, c] - x[:, c].mean(axis=0)
        xa = x[:, a_d] - x[:, a_d].mean(axis=0)
        fit, *_ = _la.lstsq(xc, xa)
        centred = xa - xc @ fit
    centred_moments = centred.T @ y / n
    lhs, ratio, rhs, holds = _condition(
        _sample_cov(centred, x[:, i_d]),
        _sample_cov(centred, centred),
        centred_moments)
    return _dc.replace(
        diagnostics,
        conditional_lhs_ratio=lhs,
        conditional_eigen_ratio=ratio,
        conditional_rhs_min=rhs,
        conditional_holds=holds)


@_dc.dataclass(frozen=True)
class TaylorComparison:
    """Joint ratio and its quadratic approximations.

    With `V_i` the rows, `m` their mean and
    `S = (1/n) sum_i V_i V_i'`:

      - `hotelling`: `n m' S^{-1} m`
      - `avg_form`: `n m' diag(S)^{-1} m`
      - `max_form`: `max_k (sum_i V_ik)^2 / sum_i V_ik^2`
    """

    el_ratio: float
    hotelling: float
    avg_form: float
    max_form: float
    ael_used: _el_abc.Yes

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        return _dc.asdict(self)


def taylor_comparator(
        rows:
            _el_abc.EstimatingMatrix,
        settings:
            _el_abc.Settings |
            None=None
        ) -> TaylorComparison:
    """Return the ratio at zero and its approximations.

    The ratio is computed without the adjusting
    pseudo-row, unless zero is outside the convex
    hull of `rows`.
    """
    settings = _el_abc.settings_or_default(settings)
    v = _el.as_estimating_matrix(rows)
    n, q = v.shape
    try:
        solution = _el.solve_dual(v, settings)
    except _el.HullViolation:
        logger.info(
            'zero is outside the convex hull, '
            'using the adjusted rows')
        solution = _el.el_ratio_at_zero(v, settings)
    mean = v.mean(axis=0)
    second = v.T @ v / n
    eigenvalues = _la.eigvalsh(second)
    if eigenvalues[0] <= _el.RANK_TOLERANCE * max(eigenvalues[-1], 0):
        second = second + settings.ridge * max(
            np.trace(second), 1.0) * np.eye(q)
    hotelling = n * float(
        mean @ _la.solve(second, mean, assume_a='pos'))
    diag = np.diag(second)
    avg_form = n * float(np.sum(mean**2 / diag))
    sums = v.sum(axis=0)
    squares = (v**2).sum(axis=0)
    max_form = float(np.max(sums**2 / squares))
    return TaylorComparison(
        el_ratio=solution.ratio,
        hotelling=hotelling,
        avg_form=avg_form,
        max_form=max_form,
        ael_used=solution.ael_used)


# Replications


@_dc.dataclass(frozen=True)
class ScreenerSpec:
    """How one screening method is run in a replication.

    Attributes:
      - `method`: a method tag
      - `cond_set`: 0-based conditioning set,
        for conditional methods
      - `d1`: size of the first stage,
        for two-step screening of an
        unconditional `method`
      - `tau`: if not `None`, then use the soft
        rule with this quantile
      - `label`: name in reports
    """

    method: _el_abc.Method
    cond_set: tuple[_el_abc.Index, ...] | None = None
    d1: _el_abc.Cardinality | None = None
    tau: float | None = None
    label: str | None = None

    def __post_init__(
            self
            ) -> None:
        if self.method not in _el_abc.METHODS:
            raise ValueError(
                f'unknown method: {self.method!r}')
        conditional = self.method in _el_abc.CONDITIONAL_METHODS
        if conditional and not self.cond_set:
            raise ValueError(
                f'{self.method} needs a conditioning set')
        if self.d1 is not None and conditional:
            raise ValueError(
                'two-step screening starts from an '
                'unconditional method')
        if self.label is None:
            object.__setattr__(self, 'label', self._label())

    def _label(
            self
            ) -> str:
        if self.d1 is not None:
            second = _el_abc.CONDITIONAL_OF[self.method]
            return f'{self.method}-{second}(d1={self.d1})'
        if self.cond_set:
            members = ','.join(
                str(j + 1) for j in self.cond_set)
            return f'{self.method}(C={{{members}}})'
        return self.method

    def run(
            self,
            data:
                _screening.Dataset,
            size:
                _el_abc.Cardinality,
            seed:
                _el_abc.Seed,
            settings:
                _el_abc.Settings |
                None=None
            ) -> _screening.ScreeningResult:
        """Return screening result on `data`.

        @param size:
            model size of the hard rule
            (total size for two-step screening)
        @param seed:
            seed of the soft rule permutation
        """
        rule = None
        if self.tau is None:
            rule = _el_abc.ThresholdRule.hard(size)
        if self.d1 is not None:
            return _cond.two_step_screen(
                data, self.d1, size - self.d1,
                self.method, settings)
        if self.cond_set:
            return _cond.conditional_screen(
                data, self.method, self.cond_set,
                rule, self.tau, seed, settings)
        return _screening.screen(
            data, self.method, rule, self.tau,
            seed, settings)


@_dc.dataclass(frozen=True)
class EvaluationReport:
    """Summary of one method over replications.

    `mms` and `selection_sizes` hold one entry
    per replication, in replication order.
    """

    method: str
    replications: _el_abc.Cardinality
    mms: tuple[int, ...]
    mms_quantiles: dict[str, float]
    p_j: dict[str, float]
    p_a: float
    model_size_rule: dict[str, _ty.Any]
    selection_sizes: tuple[int, ...]
    union_coverage: dict[str, float] | None = None
    failed_predictors: _el_abc.Cardinality = 0

    def to_dict(
            self
            ) -> dict[str, _ty.Any]:
        d = _dc.asdict(self)
        d['mms'] = list(self.mms)
        d['selection_sizes'] = list(self.selection_sizes)
        return d


def _summarize(
        method:
            str,
        outcomes:
            _abc.Sequence[dict],
        names:
            _abc.Sequence[str],
        rule:
            dict[str, _ty.Any],
        union:
            _el_abc.Yes
        ) -> EvaluationReport:
    """Return report of one screener.

    `P_j` is reported for the active predictors
    that the screener ranks.
    """
    active = outcomes[0]['active']
    mms = [o['mms'] for o in outcomes]
    selections = [o['selected'] for o in outcomes]
    p_j, p_a = coverage_proportions(selections, active)
    labels = quantile_labels()
    union_coverage = None
    if union:
        union_coverage = dict(zip(
            labels,
            quantile_summary(
                [o['union'] for o in outcomes]).tolist()))
    return EvaluationReport(
        method=method,
        replications=len(outcomes),
        mms=tuple(mms),
        mms_quantiles=dict(zip(
            labels, quantile_summary(mms).tolist())),
        p_j={names[j]: p for j, p in p_j.items()},
        p_a=p_a,
        model_size_rule=rule,
        selection_sizes=tuple(len(s) for s in selections),
        union_coverage=union_coverage,
        failed_predictors=sum(
            o['failed'] for o in outcomes))


class ReplicationFailure(RuntimeError):
    """A replication raised an exception.

    Attributes:
      - `index`: replication that failed
      - `reports`: summaries of the replications
        before `index`, or an empty list
    """

    def __init__(
            self,
            message:
                str,
            index:
                _el_abc.Nat,
            reports:
                list[EvaluationReport]
            ) -> None:
        super().__init__(message)
        self.index = index
        self.reports = reports
        self.entries = None
            # set by callers that run several evaluations


def _replicate_once(
        scenario:
            _simgen.SimulationScenario,
        screeners:
            _abc.Sequence[ScreenerSpec],
        size:
            _el_abc.Cardinality,
        union:
            _el_abc.Yes,
        settings:
            _el_abc.Settings
        ) -> list[dict]:
    """Return outcome of each screener on one replication."""
    data = _simgen.generate(scenario).standardize()
    active = scenario.active_indices
    union_size = None
    if union:
        matrix = _screening.componentwise_statistics(
            data, settings)
        rankings = [
            _screening.rank_predictors(matrix[:, k])
            for k in range(data.q)]
        union_size = union_model_size(rankings, active)
    outcomes = list()
    for screener in screeners:
        result = screener.run(
            data, size, scenario.seed, settings)
        excluded = set(result.cond_set or ())
        if screener.d1 is not None:
            excluded = set()
        ranked_active = [
            j for j in active if j not in excluded]
        outcomes.append(dict(
            mms=minimal_model_size(
                result.ranking, ranked_active),
            active=ranked_active,
            selected=result.selected.tolist(),
            failed=len(result.failed),
            union=union_size))
    return outcomes


def evaluate_replications(
        scenario:
            _simgen.SimulationScenario,
        screeners:
            _abc.Sequence[ScreenerSpec],
        replications:
            _el_abc.Cardinality,
        size:
            _el_abc.Cardinality |
            None=None,
        union_coverage:
            _el_abc.Yes=False,
        settings:
            _el_abc.Settings |
            None=None
        ) -> list[EvaluationReport]:
    """Return one report per screener over `replications`.

    Replication `r` uses the data of
    `scenario.replication(r)`. Replications run on
    `settings.threads` threads and are merged in
    order, so reports do not depend on the number
    of threads.

    Raise `ReplicationFailure` if a replication
    raises, with the reports of the replications
    that precede it.

    @param size:
        hard rule model size,
        by default `[n / log(n)]`
    @param union_coverage:
        if `True`, then single-response methods
        also report the union coverage
    """
    if replications < 1:
        raise ValueError(
            f'`replications` must be positive, '
            f'got: {replications}')
    if not screeners:
        raise ValueError('no screeners')
    settings = _el_abc.settings_or_default(settings)
    if size is None:
        size = _screening.hard_threshold_size(scenario.n)
    inner = settings.copy(threads=1)

    def replicate(
            index:
                _el_abc.Nat
            ) -> list[dict] | BaseException:
        try:
            outcome = _replicate_once(
                scenario.replication(index), screeners,
                size, union_coverage, inner)
        except Exception as error:
            return error
        logger.info(
            f'replication {index + 1} of {replications} done')
        return outcome
    results = _utils.parallel_map(
        replicate, range(replications), settings.threads)
    done = list()
    failure = None
    for index, result in enumerate(results):
        if isinstance(result, BaseException):
            failure = (index, result)
            break
        done.append(result)
    names = [f'X{j + 1}' for j in range(scenario.p)]
    reports = list()
    if done:
        for k, screener in enumerate(screeners):
            union = union_coverage and (
                _el_abc.AGGREGATE_OF[screener.method] != 'joint')
            if screener.tau is None:
                rule = dict(kind='hard', value=size)
            else:
                rule = dict(kind='soft', tau=screener.tau)
            reports.append(_summarize(
                screener.label,
                [outcome[k] for outcome in done],
                names, rule, union))
    if failure is not None:
        index, error = failure
        raise ReplicationFailure(
            f'replication {index} failed: {error}',
            index, reports) from error
    return reports


def reports_frame(
        reports:
            _abc.Sequence[EvaluationReport]
        ) -> pd.DataFrame:
    """Return table with one row per method.

    Columns are the MMS quantiles, `P_j`
    for each active predictor, and `P_a`.
    """
    rows = list()
    for report in reports:
        row = dict(method=report.method)
        row.update(report.mms_quantiles)
        row.update({
            f'P_{name}': p
            for name, p in report.p_j.items()})
        row['P_a'] = report.p_a
        if report.union_coverage is not None:
            row.update({
                f'union {k}': v
                for k, v in report.union_coverage.items()})
        rows.append(row)
    return pd.DataFrame(rows)
