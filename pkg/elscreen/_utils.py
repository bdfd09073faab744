"""Convenience functions."""
# This file is released under the 3-clause BSD license.
#
import collections.abc as _abc
import concurrent.futures as _cf
import logging
import os
import typing as _ty

import numpy as np

import elscreen._abc as _abc_el


logger = logging.getLogger(__name__)
THREADS_ENV_VAR: _ty.Final = 'ELSCREEN_THREADS'
_T = _ty.TypeVar('_T')
_R = _ty.TypeVar('_R')


def assert_finite(
        array:
            np.ndarray,
        name:
            str
        ) -> None:
    """Raise `ValueError` if `array` has non-finite entries."""
    if np.all(np.isfinite(array)):
        return
    bad = np.argwhere(~ np.isfinite(array))
    raise ValueError(
        f'`{name}` has {len(bad)} non-finite entries, '
        f'the first at index {tuple(bad[0])}')


def as_matrix(
        array:
            _ty.Any,
        name:
            str
        ) -> _abc_el.Matrix:
    """Return `array` as a 2-dimensional `float` array.

    A 1-dimensional input is read as one column.
    """
    matrix = np.asarray(array, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, np.newaxis]
    if matrix.ndim != 2:
        raise ValueError(
            f'`{name}` must be 2-dimensional, '
            f'got shape {matrix.shape}')
    assert_finite(matrix, name)
    return matrix


def standardize_columns(
        matrix:
            _abc_el.Matrix
        ) -> tuple[
            _abc_el.Matrix,
            _abc_el.Vector,
            _abc_el.Vector]:
    """Return centred and scaled columns.

    Uses the sample mean and the sample
    standard deviation (`ddof=1`).
    Constant columns are centred
    and left at zero.

    @return:
        `(standardized, means, scales)`
    """
    means = matrix.mean(axis=0)
    centred = matrix - means
    scales = centred.std(axis=0, ddof=1)
    constant = ~ (scales > 0)
    if np.any(constant):
        logger.warning(
            f'{int(constant.sum())} constant columns '
            'are centred and left at zero')
    safe = np.where(constant, 1.0, scales)
    return centred / safe, means, safe


def chunks(
        n:
            _abc_el.Cardinality,
        size:
            _abc_el.Cardinality
        ) -> list[range]:
    """Return consecutive index ranges that cover `range(n)`.

    The split depends only on `n` and `size`.
    """
    return [
        range(start, min(start + size, n))
        for start in range(0, n, size)]


def parallel_map(
        func:
            _abc.Callable[[_T], _R],
        items:
            _abc.Sequence[_T],
        threads:
            _abc_el.Nat=1
        ) -> list[_R]:
    """Return `[func(x) for x in items]`, possibly in parallel.

    The order of results is the order of `items`,
    whatever the number of `threads`.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    workers = min(threads, len(items))
    with _cf.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def resolve_threads(
        requested:
            _abc_el.Nat |
            None
        ) -> _abc_el.Nat:
    """Return number of threads to use.

    The environment variable `ELSCREEN_THREADS`
    overrides `requested`. `None` or `0`
    mean the number of available CPUs.
    """
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(
                f'`{THREADS_ENV_VAR}` must be an integer, '
                f'got: {env!r}')
    if not requested:
        requested = os.cpu_count() or 1
    if requested < 0:
        raise ValueError(requested)
    return requested


def derive_rng(
        master_seed:
            _abc_el.Seed,
        *keys:
            int
        ) -> np.random.Generator:
    """Return generator for the stream `(master_seed, *keys)`.

    Distinct key tuples give independent streams.
    """
    sequence = np.random.SeedSequence(
        [int(master_seed), *map(int, keys)])
    return np.random.default_rng(sequence)


def derive_seed(
        master_seed:
            _abc_el.Seed,
        *keys:
            int
        ) -> _abc_el.Seed:
    """Return 64-bit seed for the stream `(master_seed, *keys)`."""
    sequence = np.random.SeedSequence(
        [int(master_seed), *map(int, keys)])
    state = sequence.generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def floor_log_ratio(
        n:
            _abc_el.Cardinality
        ) -> _abc_el.Cardinality:
    """Return the integer part of `n / log(n)`."""
    if n < 3:
        raise ValueError(
            f'requires `n >= 3`, got: {n}')
    return int(np.floor(n / np.log(n)))
