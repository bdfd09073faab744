"""Preconfigured simulation studies.

Each experiment is a set of scenarios, screeners, and
model sizes, evaluated over seeded replications. The
scenario seed is the master seed, so replication `r` of
every scenario draws from `(master_seed, r)`.

Experiments can also be named by the table they reproduce:

```
table1  varied-q
table2  weak-signal
table3  weak-signal
table4  random-coef
table5  soft-threshold
table6  hidden-variable
table8  two-step
```
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import dataclasses as _dc
import logging
import typing as _ty

import numpy as np

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.evalkit as _evalkit
import elscreen.screening as _screening
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)
ALIASES: _ty.Final = dict(
    table1='varied-q',
    table2='weak-signal',
    table3='weak-signal',
    table4='random-coef',
    table5='soft-threshold',
    table6='hidden-variable',
    table8='two-step')
# conditioning sets of the hidden-variable study, 0-based
CONDITIONING_SETS: _ty.Final = dict(
    C1=(1, 2, 3),
    C2=(0, 1, 2),
    C3=(0, 1, 9),
    C4=(0, 8, 9))
UNCONDITIONAL: _ty.Final = ('MELSIS', 'ELSIS_AVG', 'ELSIS_MAX')
CONDITIONAL: _ty.Final = ('CMELSIS', 'CELSIS_AVG', 'CELSIS_MAX')
TWO_STEP_FIRST_SIZES: _ty.Final = (3, 5, 7, 9)
SOFT_QUANTILES: _ty.Final = (0.99, 0.98)
_ScreenerSpec: _ty.TypeAlias = _evalkit.ScreenerSpec


@_dc.dataclass(frozen=True)
class Experiment:
    """Scenarios, screeners, and model sizes of a study.

    `sizes` are hard rule model sizes, `None`
    means `[n / log(n)]`.
    """

    name: str
    description: str
    scenarios: tuple[_simgen.SimulationScenario, ...]
    screeners: tuple[_ScreenerSpec, ...]
    sizes: tuple[_el_abc.Cardinality | None, ...] = (None,)
    union_coverage: _el_abc.Yes = False


def _conditional_screeners(
        ) -> list[_ScreenerSpec]:
    return [
        _ScreenerSpec(
            method=method,
            cond_set=cond_set,
            label=f'{method}({name})')
        for method in CONDITIONAL
        for name, cond_set in CONDITIONING_SETS.items()]


def _varied_q(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    counts = (5, 10, 15) if q is None else (q,)
    scenarios = tuple(
        _simgen.make_scenario(
            'VARIED_Q', n=n, p=p, q=k, seed=master_seed)
        for k in counts)
    return Experiment(
        name='varied-q',
        description=(
            'cumulative-sum responses, '
            'minimal model size as q grows'),
        scenarios=scenarios,
        screeners=tuple(
            _ScreenerSpec(method) for method in UNCONDITIONAL),
        union_coverage=True)


def _error_grid(
        model_id,
        master_seed,
        n,
        p
        ) -> tuple[_simgen.SimulationScenario, ...]:
    return tuple(
        _simgen.make_scenario(
            model_id, n=n, p=p, rho=rho,
            error_case=case, seed=master_seed)
        for case in ('A', 'B')
        for rho in (0.0, 0.5))


def _weak_signal(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    return Experiment(
        name='weak-signal',
        description=(
            'four responses sharing predictors, '
            'two weak signals'),
        scenarios=_error_grid('EX41', master_seed, n, p),
        screeners=tuple(
            _ScreenerSpec(method) for method in UNCONDITIONAL))


def _random_coef(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    return Experiment(
        name='random-coef',
        description=(
            'random coefficients, '
            'equicorrelated predictors'),
        scenarios=_error_grid('EX42', master_seed, n, p),
        screeners=tuple(
            _ScreenerSpec(method) for method in UNCONDITIONAL))


def _hidden_variable(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    scenarios = tuple(
        _simgen.make_scenario(
            'EX43', n=n, p=p,
            error_case=case, seed=master_seed)
        for case in ('A', 'B'))
    screeners = [
        _ScreenerSpec(method) for method in UNCONDITIONAL]
    screeners.extend(_conditional_screeners())
    return Experiment(
        name='hidden-variable',
        description=(
            'hidden active predictor, '
            'conditional screening'),
        scenarios=scenarios,
        screeners=tuple(screeners))


def _soft_threshold(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    scenarios = _error_grid('EX41', master_seed, n, p)
    scenarios += tuple(
        _simgen.make_scenario(
            'EX43', n=n, p=p,
            error_case=case, seed=master_seed)
        for case in ('A', 'B'))
    screeners = [
        _ScreenerSpec('MELSIS', tau=tau, label=f'MELSIS(tau={tau})')
        for tau in SOFT_QUANTILES]
    screeners.extend(
        _ScreenerSpec(
            'CMELSIS', cond_set=cond_set, tau=tau,
            label=f'CMELSIS({name},tau={tau})')
        for name, cond_set in CONDITIONING_SETS.items()
        for tau in SOFT_QUANTILES)
    return Experiment(
        name='soft-threshold',
        description='threshold from permuted responses',
        scenarios=scenarios,
        screeners=tuple(screeners))


def _two_step(
        master_seed,
        q,
        n,
        p
        ) -> Experiment:
    scenario = _simgen.make_scenario(
        'EX43', n=n, p=p, seed=master_seed)
    base = _screening.hard_threshold_size(scenario.n)
    sizes = (
        base,
        _screening.hard_threshold_size(scenario.n, 1.5),
        _screening.hard_threshold_size(scenario.n, 2))
    screeners = tuple(
        _ScreenerSpec(method, d1=d1)
        for method in UNCONDITIONAL
        for d1 in TWO_STEP_FIRST_SIZES)
    return Experiment(
        name='two-step',
        description=(
            'conditioning set from the first '
            'screening stage'),
        scenarios=(scenario,),
        screeners=screeners,
        sizes=sizes)


_BUILDERS: _ty.Final = {
    'varied-q': _varied_q,
    'weak-signal': _weak_signal,
    'random-coef': _random_coef,
    'hidden-variable': _hidden_variable,
    'soft-threshold': _soft_threshold,
    'two-step': _two_step}
EXPERIMENTS: _ty.Final = set(_BUILDERS)
if set(ALIASES.values()) != EXPERIMENTS:
    raise AssertionError(ALIASES)


def experiment(
        name:
            str,
        master_seed:
            _el_abc.Seed=0,
        q:
            _el_abc.Cardinality |
            None=None,
        n:
            _el_abc.Cardinality |
            None=None,
        p:
            _el_abc.Cardinality |
            None=None
        ) -> Experiment:
    """Return experiment by name or table alias.

    @param q:
        number of responses,
        only for `varied-q`
    @param n, p:
        override the default sizes
    """
    key = ALIASES.get(name.lower(), name.lower())
    if key not in _BUILDERS:
        raise ValueError(
            f'unknown experiment: {name!r}, expected one of '
            f'{sorted(EXPERIMENTS | set(ALIASES))}')
    if q is not None and key != 'varied-q':
        raise ValueError(
            f'`q` is fixed in experiment {key!r}')
    return _BUILDERS[key](master_seed, q, n, p)


def run_experiment(
        exp:
            Experiment,
        replications:
            _el_abc.Cardinality,
        settings:
            _el_abc.Settings |
            None=None
        ) -> list[dict[str, _ty.Any]]:
    """Return reports for each scenario and model size.

    Raise `evalkit.ReplicationFailure` with the
    entries completed so far in `entries`.
    """
    entries = list()
    for scenario in exp.scenarios:
        for size in exp.sizes:
            logger.info(
                f'{exp.name}: {scenario.model_id}, '
                f'case {scenario.error_case}, '
                f'rho = {scenario.rho}, size = {size}')
            try:
                reports = _evalkit.evaluate_replications(
                    scenario, exp.screeners, replications,
                    size, exp.union_coverage, settings)
            except _evalkit.ReplicationFailure as failure:
                entries.append(_entry(
                    scenario, size, failure.reports))
                failure.entries = entries
                raise
            entries.append(_entry(scenario, size, reports))
    return entries


def _entry(
        scenario:
            _simgen.SimulationScenario,
        size:
            _el_abc.Cardinality | None,
        reports:
            _abc.Sequence[_evalkit.EvaluationReport]
        ) -> dict[str, _ty.Any]:
    if size is None:
        size = _screening.hard_threshold_size(scenario.n)
    return dict(
        scenario=_dc.asdict(scenario),
        size=size,
        reports=list(reports))


def eigen_ratio_diagnostics(
        replications:
            _el_abc.Cardinality,
        master_seed:
            _el_abc.Seed=0,
        n:
            _el_abc.Cardinality=100,
        p:
            _el_abc.Cardinality=500,
        size:
            _el_abc.Cardinality |
            None=None,
        settings:
            _el_abc.Settings |
            None=None
        ) -> dict[str, _ty.Any]:
    """Return mean eigenvalue ratios over replications.

    Uses the design with a cancelling marginal
    moment (`CASE1`). The conditioning set is the
    top `size` predictors by the joint ratio,
    by default `[n / log(n)]`.
    """
    settings = _el_abc.settings_or_default(settings)
    scenario = _simgen.make_scenario(
        'CASE1', n=n, p=p, seed=master_seed)
    if size is None:
        size = _screening.hard_threshold_size(scenario.n)
    inner = settings.copy(threads=1)
    active = scenario.active_indices

    def diagnose(
            index:
                _el_abc.Nat
            ) -> _evalkit.PropositionDiagnostics:
        data = _simgen.generate(
            scenario.replication(index)).standardize()
        stats = _screening.melsis_statistics(data, inner)
        cond_set = _screening.rank_predictors(stats)[:size]
        return _evalkit.proposition_diagnostics(
            data, active, cond_set=cond_set)
    results = _utils.parallel_map(
        diagnose, range(replications), settings.threads)
    keys = (
        'lhs_ratio', 'eigen_ratio',
        'conditional_lhs_ratio', 'conditional_eigen_ratio')
    means = dict()
    for k in keys:
        values = [
            getattr(r, k) for r in results
            if getattr(r, k) is not None]
        means[k] = (
            _evalkit.finite_or_none(float(np.mean(values)))
            if values else None)
    return dict(
        scenario=_dc.asdict(scenario),
        replications=replications,
        cond_size=size,
        means=means,
        diagnostics=[r.to_dict() for r in results])
