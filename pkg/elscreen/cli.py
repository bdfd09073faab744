"""Command-line interface.

Subcommands:

  - `screen`: screen predictors of CSV data
  - `simulate`: evaluate methods on replications of a scenario
  - `replicate`: run a preconfigured study
  - `diagnose`: eigenvalue diagnostics and quadratic
    approximations of the joint ratio
  - `two-stage`: screening followed by the lasso, on CSV data
  - `generate`: write the data of a scenario to CSV files

Reports are written as JSON (default) or CSV. Each JSON
report records the version, and the configuration that
produced it. The environment variable `ELSCREEN_THREADS`
overrides `--threads`. Predictor indices on the command
line are 1-based.
"""
# This file is released under the 3-clause BSD license.
#
import argparse as _arg
import collections.abc as _abc
import dataclasses as _dc
import io
import json
import logging
import sys
import typing as _ty

import pandas as pd

import elscreen
import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.conditional as _cond
import elscreen.evalkit as _evalkit
import elscreen.experiments as _experiments
import elscreen.pipeline as _pipeline
import elscreen.screening as _screening
import elscreen.simgen as _simgen


logger = logging.getLogger(__name__)
COMMANDS: _ty.Final = (
    'screen',
    'simulate',
    'replicate',
    'diagnose',
    'two-stage',
    'generate')
DEFAULT_REPLICATIONS: _ty.Final = 100
DEFAULT_METHODS: _ty.Final = ('MELSIS', 'ELSIS_AVG', 'ELSIS_MAX')


@_dc.dataclass(frozen=True)
class RunConfig:
    """Parsed command line.

    `cond_set` is 0-based. `threshold` is
    `('hard', c)` for `c [n / log(n)]` predictors,
    or `('soft', tau)`.
    """

    command: str
    methods: tuple[str, ...] = DEFAULT_METHODS
    scenario: _simgen.SimulationScenario | None = None
    replications: _el_abc.Cardinality = DEFAULT_REPLICATIONS
    threshold: tuple[str, float] = ('hard', 1.0)
    cond_set: tuple[_el_abc.Index, ...] | None = None
    d1: _el_abc.Cardinality | None = None
    master_seed: _el_abc.Seed = 0
    output: str = '-'
    output_format: _el_abc.OutputFormat = 'json'
    threads: _el_abc.Nat | None = 1
    x_path: str | None = None
    y_path: str | None = None
    experiment: str | None = None
    q: _el_abc.Cardinality | None = None
    n: _el_abc.Cardinality | None = None
    p: _el_abc.Cardinality | None = None
    s: _el_abc.Cardinality | None = None
    y_output: str | None = None

    def __post_init__(
            self
            ) -> None:
        if self.command not in COMMANDS:
            raise ValueError(
                f'unknown command: {self.command!r}')
        if self.replications < 1:
            raise ValueError(
                f'`replications` must be positive, '
                f'got: {self.replications}')
        if self.output_format not in _el_abc.OUTPUT_FORMATS:
            raise ValueError(self.output_format)
        unknown = set(self.methods).difference(_el_abc.METHODS)
        if unknown:
            raise ValueError(
                f'unknown methods: {sorted(unknown)}')
        kind, value = self.threshold
        if kind not in _el_abc.THRESHOLD_KINDS or not value > 0:
            raise ValueError(
                f'invalid threshold: {self.threshold}')

    def provenance(
            self
            ) -> dict[str, _ty.Any]:
        """Return configuration echo for reports.

        The thread count and output location
        are omitted, as they do not affect results.
        """
        d = _dc.asdict(self)
        for k in ('threads', 'output', 'y_output'):
            d.pop(k)
        return dict(
            version=elscreen.__version__,
            config=d)


def _parse_method(
        text:
            str
        ) -> str:
    method = text.strip().upper().replace('-', '_')
    if method not in _el_abc.METHODS:
        raise _arg.ArgumentTypeError(
            f'unknown method: {text!r}, expected one of '
            f'{sorted(_el_abc.METHODS)}')
    return method


def _parse_methods(
        text:
            str
        ) -> tuple[str, ...]:
    return tuple(
        _parse_method(part)
        for part in text.split(','))


def _parse_index_list(
        text:
            str
        ) -> tuple[_el_abc.Index, ...]:
    """Return 0-based indices from 1-based `'2,3,4'`."""
    try:
        indices = tuple(
            int(part) - 1
            for part in text.split(','))
    except ValueError:
        raise _arg.ArgumentTypeError(
            f'expected comma-separated integers, got: {text!r}')
    if any(j < 0 for j in indices):
        raise _arg.ArgumentTypeError(
            f'indices are 1-based, got: {text!r}')
    return indices


def _parse_model(
        text:
            str
        ) -> str:
    model = text.strip().upper().replace('-', '_')
    if model not in _el_abc.MODEL_IDS:
        raise _arg.ArgumentTypeError(
            f'unknown model: {text!r}, expected one of '
            f'{sorted(_el_abc.MODEL_IDS)}')
    return model


def _add_common(
        parser:
            _arg.ArgumentParser
        ) -> None:
    parser.add_argument(
        '--output', '-o', default='-',
        help='output file, `-` for standard output')
    parser.add_argument(
        '--format', dest='output_format',
        choices=sorted(_el_abc.OUTPUT_FORMATS),
        default='json',
        help='report format')
    parser.add_argument(
        '--threads', type=int, default=1,
        help=(
            'number of worker threads, 0 for all CPUs '
            '(overridden by `ELSCREEN_THREADS`)'))
    parser.add_argument(
        '--seed', type=int, default=0, dest='master_seed',
        help='master seed')
    parser.add_argument(
        '--verbose', '-v', action='count', default=0,
        help='log progress, repeat for details')


def _add_threshold(
        parser:
            _arg.ArgumentParser
        ) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        '--hard', type=float, metavar='C',
        help='keep `C [n / log(n)]` predictors (default 1)')
    group.add_argument(
        '--soft', type=float, metavar='TAU',
        help=(
            'keep predictors above the `TAU`-quantile '
            'of statistics on permuted responses'))


def _add_scenario(
        parser:
            _arg.ArgumentParser
        ) -> None:
    parser.add_argument(
        '--scenario', metavar='FILE',
        help='scenario JSON document')
    parser.add_argument(
        '--model', type=_parse_model, default='EX41',
        help=f'one of {sorted(_el_abc.MODEL_IDS)}')
    parser.add_argument(
        '--case', type=str.upper, default='A',
        choices=sorted(_el_abc.ERROR_CASES),
        help='homoscedastic (A) or heteroscedastic (B)')
    parser.add_argument(
        '--rho', type=float, default=0.0,
        help='error correlation')
    _add_sizes(parser)


def _add_sizes(
        parser:
            _arg.ArgumentParser
        ) -> None:
    parser.add_argument('--n', type=int, help='observations')
    parser.add_argument('--p', type=int, help='predictors')
    parser.add_argument('--q', type=int, help='responses')


def _add_data(
        parser:
            _arg.ArgumentParser
        ) -> None:
    parser.add_argument(
        '--x', required=True, dest='x_path',
        help='CSV file of predictors')
    parser.add_argument(
        '--y', required=True, dest='y_path',
        help='CSV file of responses')


def make_parser(
        ) -> _arg.ArgumentParser:
    """Return parser of the command line."""
    parser = _arg.ArgumentParser(
        prog='elscreen',
        description=(
            'Feature screening for multivariate responses '
            'by empirical likelihood.'))
    parser.add_argument(
        '--version', action='version',
        version=f'%(prog)s {elscreen.__version__}')
    commands = parser.add_subparsers(
        dest='command', required=True)
    # screen
    screen = commands.add_parser(
        'screen', help='screen predictors of CSV data')
    _add_data(screen)
    screen.add_argument(
        '--method', type=_parse_method, default='MELSIS')
    screen.add_argument(
        '--cond-set', type=_parse_index_list,
        help='conditioning predictors, for example `2,3,4`')
    _add_threshold(screen)
    _add_common(screen)
    # simulate
    simulate = commands.add_parser(
        'simulate',
        help='evaluate methods on replications of a scenario')
    _add_scenario(simulate)
    simulate.add_argument(
        '--methods', type=_parse_methods,
        default=DEFAULT_METHODS,
        help='comma-separated methods')
    simulate.add_argument(
        '--cond-set', type=_parse_index_list,
        help='conditioning predictors of conditional methods')
    simulate.add_argument(
        '--d1', type=int,
        help='first stage size, for two-step screening')
    simulate.add_argument(
        '--reps', type=int, dest='replications',
        default=DEFAULT_REPLICATIONS)
    _add_threshold(simulate)
    _add_common(simulate)
    # replicate
    replicate = commands.add_parser(
        'replicate', help='run a preconfigured study')
    replicate.add_argument(
        'experiment',
        choices=sorted(
            _experiments.EXPERIMENTS | set(_experiments.ALIASES)))
    _add_sizes(replicate)
    replicate.add_argument(
        '--reps', type=int, dest='replications',
        default=DEFAULT_REPLICATIONS)
    _add_common(replicate)
    # diagnose
    diagnose = commands.add_parser(
        'diagnose',
        help='eigenvalue diagnostics and quadratic forms')
    diagnose.add_argument('--n', type=int, default=100)
    diagnose.add_argument('--p', type=int, default=500)
    diagnose.add_argument(
        '--reps', type=int, dest='replications',
        default=DEFAULT_REPLICATIONS)
    _add_common(diagnose)
    # two-stage
    two_stage = commands.add_parser(
        'two-stage', help='screening followed by the lasso')
    _add_data(two_stage)
    two_stage.add_argument(
        '--method', type=_parse_method, default='MELSIS')
    two_stage.add_argument(
        '--cond-set', type=_parse_index_list)
    two_stage.add_argument(
        '--s', type=int,
        help='number of screened predictors, default `[n / 2]`')
    _add_common(two_stage)
    # generate
    generate = commands.add_parser(
        'generate', help='write scenario data to CSV files')
    _add_scenario(generate)
    generate.add_argument(
        '--x-out', required=True, dest='output',
        help='CSV file of predictors')
    generate.add_argument(
        '--y-out', required=True, dest='y_output',
        help='CSV file of responses')
    generate.add_argument(
        '--seed', type=int, default=0, dest='master_seed')
    generate.add_argument(
        '--verbose', '-v', action='count', default=0)
    return parser


def config_from_args(
        args:
            _arg.Namespace
        ) -> RunConfig:
    """Return `RunConfig` from parsed arguments."""
    d = vars(args)
    kw = dict(
        command=args.command,
        master_seed=d.get('master_seed', 0),
        output=d.get('output', '-'),
        output_format=d.get('output_format', 'json'),
        threads=d.get('threads', 1),
        replications=d.get(
            'replications', DEFAULT_REPLICATIONS))
    for k in (
            'x_path', 'y_path', 'cond_set', 'd1',
            'experiment', 's', 'y_output'):
        if d.get(k) is not None:
            kw[k] = d[k]
    for k in ('n', 'p', 'q'):
        if d.get(k) is not None:
            kw[k] = d[k]
    if 'method' in d:
        kw['methods'] = (d['method'],)
    elif 'methods' in d:
        kw['methods'] = d['methods']
    if d.get('soft') is not None:
        kw['threshold'] = ('soft', d['soft'])
    elif d.get('hard') is not None:
        kw['threshold'] = ('hard', d['hard'])
    if 'model' in d:
        kw['scenario'] = _scenario_from_args(args)
    return RunConfig(**kw)


def _scenario_from_args(
        args:
            _arg.Namespace
        ) -> _simgen.SimulationScenario:
    if args.scenario is not None:
        with open(args.scenario, encoding='utf-8') as f:
            return _simgen.scenario_from_json(f.read())
    return _simgen.make_scenario(
        args.model, n=args.n, p=args.p, q=args.q,
        rho=args.rho, error_case=args.case,
        seed=args.master_seed)


def _rule(
        config:
            RunConfig,
        n:
            _el_abc.Cardinality
        ) -> tuple[
            _el_abc.ThresholdRule | None,
            float | None]:
    """Return `(rule, tau)` for screening."""
    kind, value = config.threshold
    if kind == 'soft':
        return None, value
    size = _screening.hard_threshold_size(n, value)
    return _el_abc.ThresholdRule.hard(size), None


def _settings(
        config:
            RunConfig
        ) -> _el_abc.Settings:
    threads = _utils.resolve_threads(config.threads)
    return _el_abc.Settings(threads=threads)


def run_screen(
        config:
            RunConfig,
        settings:
            _el_abc.Settings
        ) -> tuple[dict, pd.DataFrame]:
    data = _pipeline.load_csv(config.x_path, config.y_path)
    method = config.methods[0]
    rule, tau = _rule(config, data.n)
    if method in _el_abc.CONDITIONAL_METHODS:
        if config.cond_set is None:
            raise ValueError(
                f'{method} needs `--cond-set`')
        result = _cond.conditional_screen(
            data, method, config.cond_set, rule, tau,
            config.master_seed, settings)
    else:
        result = _screening.screen(
            data, method, rule, tau,
            config.master_seed, settings)
    report = dict(result=result.to_dict())
    scored = (
        result.targets if result.targets is not None
        else range(data.p))
    rank = {int(j): k + 1 for k, j in enumerate(result.ranking)}
    selected = set(result.selected.tolist())
    table = pd.DataFrame(dict(
        predictor=[data.predictor_names[j] for j in scored],
        statistic=result.statistics,
        rank=[rank[int(j)] for j in scored],
        selected=[int(j) in selected for j in scored]))
    return report, table


def _screeners(
        config:
            RunConfig
        ) -> list[_evalkit.ScreenerSpec]:
    tau = None
    if config.threshold[0] == 'soft':
        tau = config.threshold[1]
    screeners = list()
    for method in config.methods:
        conditional = method in _el_abc.CONDITIONAL_METHODS
        screeners.append(_evalkit.ScreenerSpec(
            method=method,
            cond_set=config.cond_set if conditional else None,
            d1=None if conditional else config.d1,
            tau=tau))
    return screeners


def run_simulate(
        config:
            RunConfig,
        settings:
            _el_abc.Settings
        ) -> tuple[dict, pd.DataFrame]:
    scenario = config.scenario
    size = None
    if config.threshold[0] == 'hard':
        size = _screening.hard_threshold_size(
            scenario.n, config.threshold[1])
    reports = _evalkit.evaluate_replications(
        scenario, _screeners(config),
        config.replications, size,
        union_coverage=False, settings=settings)
    report = dict(
        scenario=_dc.asdict(scenario),
        reports=[r.to_dict() for r in reports])
    return report, _evalkit.reports_frame(reports)


def _entries_output(
        entries:
            _abc.Sequence[dict]
        ) -> tuple[list, pd.DataFrame]:
    out = list()
    frames = list()
    for entry in entries:
        out.append(dict(
            scenario=entry['scenario'],
            size=entry['size'],
            reports=[r.to_dict() for r in entry['reports']]))
        if not entry['reports']:
            continue
        frame = _evalkit.reports_frame(entry['reports'])
        scenario = entry['scenario']
        frame.insert(0, 'size', entry['size'])
        for k in ('rho', 'error_case', 'q', 'model_id'):
            frame.insert(0, k, scenario[k])
        frames.append(frame)
    table = (
        pd.concat(frames, ignore_index=True)
        if frames else pd.DataFrame())
    return out, table


def run_replicate(
        config:
            RunConfig,
        settings:
            _el_abc.Settings
        ) -> tuple[dict, pd.DataFrame]:
    exp = _experiments.experiment(
        config.experiment, config.master_seed,
        q=config.q, n=config.n, p=config.p)
    entries = _experiments.run_experiment(
        exp, config.replications, settings)
    out, table = _entries_output(entries)
    report = dict(experiment=exp.name, entries=out)
    return report, table


def run_diagnose(
        config:
            RunConfig,
        settings:
            _el_abc.Settings
        ) -> tuple[dict, pd.DataFrame]:
    n = 100 if config.n is None else config.n
    p = 500 if config.p is None else config.p
    ratios = _experiments.eigen_ratio_diagnostics(
        config.replications, config.master_seed,
        n=n, p=p, settings=settings)
    scenario = _simgen.make_scenario(
        'CASE1', n=n, p=p, seed=config.master_seed)
    data = _simgen.generate(scenario.replication(0)).standardize()
    comparisons = list()
    for j in scenario.active_indices:
        rows = data.X[:, [j]] * data.Y
        comparison = _evalkit.taylor_comparator(rows, settings)
        comparisons.append(dict(
            predictor=data.predictor_names[j],
            **comparison.to_dict()))
    report = dict(
        proposition=ratios,
        taylor=comparisons)
    table = pd.DataFrame(comparisons)
    for k, v in ratios['means'].items():
        table[f'mean {k}'] = v
    return report, table


def run_two_stage(
        config:
            RunConfig,
        settings:
            _el_abc.Settings
        ) -> tuple[dict, pd.DataFrame]:
    data = _pipeline.load_csv(config.x_path, config.y_path)
    result = _pipeline.two_stage(
        data, config.methods[0], config.s,
        config.cond_set, settings)
    return result.to_dict(), result.frame()


def run_generate(
        config:
            RunConfig
        ) -> None:
    data = _simgen.generate(config.scenario)
    _pipeline.write_csv(data, config.output, config.y_output)
    logger.info(
        f'wrote {config.output} and {config.y_output}')


_RUNNERS: _ty.Final = {
    'screen': run_screen,
    'simulate': run_simulate,
    'replicate': run_replicate,
    'diagnose': run_diagnose,
    'two-stage': run_two_stage}


def _write(
        config:
            RunConfig,
        report:
            dict,
        table:
            pd.DataFrame
        ) -> None:
    if config.output_format == 'csv':
        buffer = io.StringIO()
        table.to_csv(
            buffer, index=False,
            float_format=_pipeline.CSV_FLOAT_FORMAT)
        text = buffer.getvalue()
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + '\n'
    if config.output == '-':
        sys.stdout.write(text)
        return
    with open(config.output, 'w', encoding='utf-8') as f:
        f.write(text)


def run(
        config:
            RunConfig
        ) -> int:
    """Run command of `config`, return exit status.

    If replications fail, then the completed
    ones are written with `"partial": true`,
    and the exception is raised.
    """
    if config.command == 'generate':
        run_generate(config)
        return 0
    settings = _settings(config)
    runner = _RUNNERS[config.command]
    try:
        report, table = runner(config, settings)
    except _evalkit.ReplicationFailure as failure:
        if failure.entries is not None:
            out, table = _entries_output(failure.entries)
            report = dict(experiment=config.experiment, entries=out)
        else:
            report = dict(
                scenario=(
                    None if config.scenario is None
                    else _dc.asdict(config.scenario)),
                reports=[r.to_dict() for r in failure.reports])
            table = _evalkit.reports_frame(failure.reports)
        report.update(config.provenance(), partial=True)
        _write(config, report, table)
        raise
    report.update(config.provenance(), partial=False)
    _write(config, report, table)
    return 0


def _configure_logging(
        verbosity:
            _el_abc.Nat
        ) -> None:
    log = logging.getLogger('elscreen')
    if verbosity >= 2:
        log.setLevel(logging.DEBUG)
    elif verbosity == 1:
        log.setLevel(logging.INFO)
    else:
        log.setLevel(logging.WARNING)
    if log.handlers:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(
        '%(levelname)s %(name)s: %(message)s'))
    log.addHandler(handler)


def main(
        argv:
            _abc.Sequence[str] |
            None=None
        ) -> int:
    """Entry point of the command `elscreen`."""
    parser = make_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = config_from_args(args)
        return run(config)
    except Exception as error:
        message = dict(
            error=type(error).__name__,
            message=str(error))
        sys.stderr.write(json.dumps(message) + '\n')
        return 1


if __name__ == '__main__':
    sys.exit(main())
