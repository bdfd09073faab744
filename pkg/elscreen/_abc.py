"""Shared types, enumerations, and settings.

The literal enumerations below name the screening methods,
simulation designs, and threshold rules used throughout
the package. The `Settings` class carries every numerical
tunable, and is passed to the public operations.
"""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import math
import typing as _ty

import numpy as np
import numpy.typing as npt


def _literals_of(
        type_alias:
            type
        ) -> set[str]:
    """Return arguments of `type_alias`.

    Recursive computation.
    Assumes `str` literals.
    """
    return set(_literals_of_recurse(type_alias))


def _literals_of_recurse(
        type_alias:
            type
        ) -> _abc.Iterable[str]:
    """Yield literals of `type_alias`."""
    args = _ty.get_args(type_alias)
    for arg in args:
        match arg:
            case str():
                yield arg
            case _:
                yield from _literals_of_recurse(arg)


Yes: _ty.TypeAlias = bool
Nat: _ty.TypeAlias = int
Cardinality: _ty.TypeAlias = Nat
Index: _ty.TypeAlias = Nat
    # 0-based predictor index
Seed: _ty.TypeAlias = int
Matrix: _ty.TypeAlias = npt.NDArray[np.float64]
Vector: _ty.TypeAlias = npt.NDArray[np.float64]
IndexArray: _ty.TypeAlias = npt.NDArray[np.intp]
EstimatingMatrix: _ty.TypeAlias = Matrix
    # shape `(n_rows, q)`,
    # row `i` is an estimating function
    # evaluated at zero
_UnconditionalMethod: _ty.TypeAlias = _ty.Literal[
    'MELSIS',
    'ELSIS_AVG',
    'ELSIS_MAX']
_ConditionalMethod: _ty.TypeAlias = _ty.Literal[
    'CMELSIS',
    'CELSIS_AVG',
    'CELSIS_MAX']
Method: _ty.TypeAlias = (
    _UnconditionalMethod |
    _ConditionalMethod)
UNCONDITIONAL_METHODS: _ty.Final = _literals_of(
    _UnconditionalMethod)
CONDITIONAL_METHODS: _ty.Final = _literals_of(
    _ConditionalMethod)
METHODS: _ty.Final = {
    *UNCONDITIONAL_METHODS,
    *CONDITIONAL_METHODS}
# These assertions guard against typos in
# the enumerations.
if len(METHODS) != 6:
    raise AssertionError(METHODS)
CONDITIONAL_OF: _ty.Final = dict(
    MELSIS='CMELSIS',
    ELSIS_AVG='CELSIS_AVG',
    ELSIS_MAX='CELSIS_MAX')
if set(CONDITIONAL_OF.values()) != CONDITIONAL_METHODS:
    raise AssertionError(CONDITIONAL_OF)
Aggregate: _ty.TypeAlias = _ty.Literal[
    'joint',
    'avg',
    'max']
AGGREGATE_OF: _ty.Final = dict(
    MELSIS='joint',
    ELSIS_AVG='avg',
    ELSIS_MAX='max',
    CMELSIS='joint',
    CELSIS_AVG='avg',
    CELSIS_MAX='max')
if set(AGGREGATE_OF) != METHODS:
    raise AssertionError(AGGREGATE_OF)
ModelId: _ty.TypeAlias = _ty.Literal[
    # cumulative-sum responses
    'VARIED_Q',
    # four responses sharing
    # two weak-signal predictors
    'EX41',
    # random coefficients,
    # equicorrelated predictors
    'EX42',
    # hidden active predictor
    'EX43',
    # cancelling marginal moment
    'CASE1']
MODEL_IDS: _ty.Final = _literals_of(ModelId)
if len(MODEL_IDS) != 5:
    raise AssertionError(MODEL_IDS)
ErrorCase: _ty.TypeAlias = _ty.Literal[
    # homoscedastic
    'A',
    # heteroscedastic
    'B']
ERROR_CASES: _ty.Final = _literals_of(ErrorCase)
ThresholdKind: _ty.TypeAlias = _ty.Literal[
    'hard',
    'soft']
THRESHOLD_KINDS: _ty.Final = _literals_of(ThresholdKind)
OutputFormat: _ty.TypeAlias = _ty.Literal[
    'json',
    'csv']
OUTPUT_FORMATS: _ty.Final = _literals_of(OutputFormat)


class ThresholdRule(_ty.NamedTuple):
    """How a submodel is selected from a ranking.

    - `kind == 'hard'`: keep the top `value` predictors
      (`value` is a count)
    - `kind == 'soft'`: keep predictors whose statistic
      is at least `value` (`value` is the threshold)
    """

    kind: ThresholdKind
    value: float

    @classmethod
    def hard(
            cls,
            size:
                Cardinality
            ) -> 'ThresholdRule':
        if size < 0:
            raise ValueError(
                f'negative model size: {size}')
        return cls('hard', int(size))

    @classmethod
    def soft(
            cls,
            gamma:
                float
            ) -> 'ThresholdRule':
        if not math.isfinite(gamma):
            raise ValueError(
                f'threshold must be finite, got: {gamma}')
        return cls('soft', float(gamma))


_DEFAULTS: _ty.Final = dict(
    tolerance=1e-8,
    max_iter=100,
    ael_level=None,
    ridge=1e-10,
    n_slices=9,
    direction_share=0.80,
    shared_directions=False,
    chunk_size=64,
    threads=1)


class Settings:
    """Numerical settings of screening computations.

    Attributes:
      - `tolerance`:
        sup-norm bound on the score residual of
        the dual problem
      - `max_iter`:
        cap on Newton steps
      - `ael_level`:
        level of the adjusting pseudo-observation,
        `None` means `max(1, log(n) / 2)`
      - `ridge`:
        multiple of the trace added to
        rank-deficient Hessians
      - `n_slices`, `direction_share`:
        sliced inverse regression settings
      - `shared_directions`:
        if `True`, then estimate one set of
        conditioning directions for all targets
      - `chunk_size`:
        number of predictors per batched solve
      - `threads`:
        number of worker threads, results do
        not depend on this value
    """

    def __init__(
            self,
            **kw
            ) -> None:
        for k, v in _DEFAULTS.items():
            setattr(self, k, v)
        self.configure(**kw)

    def __repr__(
            self
            ) -> str:
        items = ', '.join(
            f'{k}={getattr(self, k)!r}'
            for k in _DEFAULTS)
        return f'Settings({items})'

    def __eq__(
            self,
            other
            ) -> Yes:
        if not isinstance(other, Settings):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def as_dict(
            self
            ) -> dict[
                str,
                _ty.Any]:
        """Return settings as `dict`."""
        return {
            k: getattr(self, k)
            for k in _DEFAULTS}

    def configure(
            self,
            **kw
            ) -> dict[
                str,
                _ty.Any]:
        """Read and apply parameter values.

        First read parameter values (returned as `dict`),
        then apply `kw`. Raise `ValueError` for
        unknown parameters and invalid values.
        """
        d = self.as_dict()
        for k, v in kw.items():
            if k not in _DEFAULTS:
                raise ValueError(
                    f'Unknown parameter "{k}"')
            _check_setting(k, v)
            setattr(self, k, v)
        return d

    def copy(
            self,
            **kw
            ) -> 'Settings':
        """Return copy with `kw` applied."""
        other = Settings(**self.as_dict())
        other.configure(**kw)
        return other


def _check_setting(
        name:
            str,
        value:
            _ty.Any
        ) -> None:
    """Raise `ValueError` if `value` is invalid for `name`."""
    match name:
        case 'tolerance' | 'ridge':
            ok = value > 0
        case 'max_iter' | 'chunk_size' | 'threads':
            ok = isinstance(value, int) and value >= 1
        case 'n_slices':
            ok = isinstance(value, int) and value >= 2
        case 'direction_share':
            ok = 0 < value <= 1
        case 'ael_level':
            ok = value is None or value > 0
        case 'shared_directions':
            ok = isinstance(value, bool)
        case _:
            raise ValueError(name)
    if not ok:
        raise ValueError(
            f'Invalid value for "{name}": {value!r}')


def settings_or_default(
        settings:
            Settings |
            None
        ) -> Settings:
    """Return `settings`, or defaults if `None`."""
    if settings is None:
        return Settings()
    return settings
