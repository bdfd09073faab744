"""Empirical likelihood ratio at zero for estimating-function rows.

Given rows `g_1, ..., g_n` in `R^q`, the log empirical
likelihood ratio at zero is

```
2 * sum_i log(1 + alpha' g_i)
```

where the multiplier `alpha` solves the score equation

```
sum_i g_i / (1 + alpha' g_i) = 0
```

The multiplier maximizes the concave dual
`sum_i log(1 + alpha' g_i)`. The dual is solved by damped
Newton ascent, with the logarithm replaced below `1 / n`
by its second-order Taylor extension, so that the objective
is finite for every `alpha`. Many problems are solved
together as a stack of shape `(m, n, q)`: each problem in
the stack is iterated independently of the others.


References
==========

Art B. Owen
    "Empirical likelihood"
    Chapman and Hall/CRC, 2001
    Section 3.14

Jiahua Chen, Asokan Mulayath Variyath, Bovas Abraham
    "Adjusted empirical likelihood and its properties"
    Journal of Computational and Graphical Statistics
    Vol. 17, No. 2, 2008, pages 426--443
"""
# This file is released under the 3-clause BSD license.
#
import dataclasses as _dc
import logging
import math
import typing as _ty

import numpy as np

import elscreen._abc as _abc
import elscreen._utils as _utils


logger = logging.getLogger(__name__)
DIVERGENCE_BOUND: _ty.Final = 1e10
RANK_TOLERANCE: _ty.Final = 1e-12
_ARMIJO: _ty.Final = 1e-4
_MAX_HALVINGS: _ty.Final = 40
_Matrix: _ty.TypeAlias = _abc.Matrix
_Vector: _ty.TypeAlias = _abc.Vector
_Stack: _ty.TypeAlias = np.ndarray
    # shape `(m, n_rows, q)`


class HullViolation(ArithmeticError):
    """Zero is outside the convex hull of the rows."""


class NumericalFailure(ArithmeticError):
    """The Newton system cannot be solved."""

    def __init__(
            self,
            message:
                str,
            index:
                _abc.Index |
                None=None
            ) -> None:
        super().__init__(message)
        self.index = index


@_dc.dataclass(frozen=True)
class ELSolution:
    """Solution of the dual problem for one set of rows.

    Attributes:
      - `ratio`: the statistic `2 sum_i log(1 + alpha' g_i)`
      - `multiplier`: the Lagrange multiplier `alpha`
      - `weights`: implied observation weights
        `1 / (n_rows * (1 + alpha' g_i))`
      - `iterations`: number of Newton steps taken
      - `converged`: `True` if the score residual
        is within the solver tolerance
      - `ael_used`: `True` if the rows include
        the adjusting pseudo-observation
      - `residual`: sup-norm of the score
    """

    ratio: float
    multiplier: _Vector
    weights: _Vector
    iterations: _abc.Nat
    converged: _abc.Yes
    ael_used: _abc.Yes
    residual: float


class _StackSolution(_ty.NamedTuple):
    multipliers: _Matrix
    ratios: _Vector
    iterations: np.ndarray
    converged: np.ndarray
    diverged: np.ndarray
    failed: np.ndarray
    residuals: _Vector


def default_ael_level(
        n_rows:
            _abc.Cardinality
        ) -> float:
    """Return `max(1, log(n_rows) / 2)`."""
    return max(1.0, math.log(n_rows) / 2)


def as_estimating_matrix(
        rows:
            _ty.Any
        ) -> _abc.EstimatingMatrix:
    """Return `rows` as a valid estimating matrix.

    Raise `ValueError` if there are fewer
    than 2 rows, or non-finite entries.
    """
    matrix = _utils.as_matrix(rows, 'rows')
    n_rows, q = matrix.shape
    if n_rows < 2 or q < 1:
        raise ValueError(
            'requires at least 2 rows and 1 column, '
            f'got shape {matrix.shape}')
    return matrix


def ael_augment(
        rows:
            _abc.EstimatingMatrix,
        level:
            float |
            None=None
        ) -> _abc.EstimatingMatrix:
    """Return `rows` with the adjusting pseudo-row appended.

    The pseudo-row is `-level * mean(rows)`.
    The default `level` is `max(1, log(n_rows) / 2)`.
    """
    matrix = as_estimating_matrix(rows)
    return _ael_augment_stack(
        matrix[np.newaxis], level)[0]


def _ael_augment_stack(
        stack:
            _Stack,
        level:
            float |
            None
        ) -> _Stack:
    """Append the pseudo-row to each problem of `stack`."""
    if level is None:
        level = default_ael_level(stack.shape[1])
    if level <= 0:
        raise ValueError(
            f'`level` must be positive, got: {level}')
    pseudo = -level * stack.mean(axis=1, keepdims=True)
    return np.concatenate([stack, pseudo], axis=1)


def solve_dual(
        rows:
            _abc.EstimatingMatrix,
        settings:
            _abc.Settings |
            None=None,
        ael_used:
            _abc.Yes=False
        ) -> ELSolution:
    """Return solution of the dual problem for `rows`.

    Raise `HullViolation` if the dual diverges,
    which happens when zero is outside the convex
    hull of `rows`. Raise `NumericalFailure` if
    the Newton system is singular even after
    ridge repair.

    @param ael_used:
        recorded in the result, set by
        callers that pass augmented rows
    """
    settings = _abc.settings_or_default(settings)
    matrix = as_estimating_matrix(rows)
    sol = _solve_stack(matrix[np.newaxis], settings)
    if sol.diverged[0]:
        raise HullViolation(
            'the dual problem diverges: '
            'zero is outside the convex hull of the rows')
    if sol.failed[0]:
        raise NumericalFailure(
            'singular Newton system')
    alpha = sol.multipliers[0]
    z = 1.0 + matrix @ alpha
    n_rows = matrix.shape[0]
    weights = 1.0 / (n_rows * z)
    return ELSolution(
        ratio=float(sol.ratios[0]),
        multiplier=alpha,
        weights=weights,
        iterations=int(sol.iterations[0]),
        converged=bool(sol.converged[0]),
        ael_used=ael_used,
        residual=float(sol.residuals[0]))


def el_ratio_at_zero(
        rows:
            _abc.EstimatingMatrix,
        settings:
            _abc.Settings |
            None=None
        ) -> ELSolution:
    """Return solution for `rows` with the adjusting pseudo-row.

    The pseudo-row places zero in the convex hull,
    so only `NumericalFailure` can be raised.
    """
    settings = _abc.settings_or_default(settings)
    augmented = ael_augment(rows, settings.ael_level)
    return solve_dual(
        augmented, settings, ael_used=True)


def el_ratios_at_zero(
        stack:
            _Stack,
        settings:
            _abc.Settings |
            None=None
        ) -> tuple[
            _Vector,
            np.ndarray]:
    """Return ratios for each problem in `stack`.

    Each `stack[k]` is an estimating matrix.
    The adjusting pseudo-row is appended to
    each problem before solving.

    @return:
        `(ratios, failed)`, where `failed[k]` is
        `True` if problem `k` raised a numerical
        failure (its ratio is then 0)
    """
    settings = _abc.settings_or_default(settings)
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1] < 2:
        raise ValueError(
            f'expected shape `(m, n_rows >= 2, q)`, '
            f'got: {stack.shape}')
    _utils.assert_finite(stack, 'stack')
    augmented = _ael_augment_stack(stack, settings.ael_level)
    sol = _solve_stack(augmented, settings)
    failed = sol.failed | sol.diverged
    ratios = np.where(failed, 0.0, sol.ratios)
    not_converged = ~ sol.converged & ~ failed
    if np.any(not_converged):
        logger.debug(
            f'{int(not_converged.sum())} of {len(ratios)} '
            'dual problems stopped before '
            'meeting the tolerance')
    return ratios, failed


def _pseudo_log(
        z:
            np.ndarray,
        eps:
            float
        ) -> tuple[
            np.ndarray,
            np.ndarray,
            np.ndarray]:
    """Return value, first, and second derivative.

    Equals `log(z)` for `z >= eps`, and
    the quadratic that matches `log` to
    second order at `eps` for `z < eps`.
    """
    below = z < eps
    safe = np.where(below, eps, z)
    u = z / eps
    value = np.where(
        below,
        math.log(eps) - 1.5 + 2.0 * u - 0.5 * u**2,
        np.log(safe))
    first = np.where(
        below,
        (2.0 - u) / eps,
        1.0 / safe)
    second = np.where(
        below,
        -1.0 / eps**2,
        -1.0 / safe**2)
    return value, first, second


def _solve_stack(
        stack:
            _Stack,
        settings:
            _abc.Settings
        ) -> _StackSolution:
    """Solve the dual problem of each matrix in `stack`.

    Problems are iterated independently: the result
    of a problem does not depend on the other
    problems in `stack`.
    """
    m, n_rows, q = stack.shape
    eps = 1.0 / n_rows
    alpha = np.zeros((m, q))
    scale = np.sqrt((stack**2).sum(axis=2)).max(axis=1)
    z = np.ones((m, n_rows))
    value, first, second = _pseudo_log(z, eps)
    objective = value.sum(axis=1)
    iterations = np.zeros(m, dtype=np.intp)
    done = np.zeros(m, dtype=bool)
    diverged = np.zeros(m, dtype=bool)
    failed = np.zeros(m, dtype=bool)
    for _ in range(settings.max_iter):
        idx = np.flatnonzero(~ done)
        if idx.size == 0:
            break
        rows = stack[idx]
        grad = np.einsum('mn,mnq->mq', first[idx], rows)
        at_optimum = ~ np.any(grad != 0, axis=1)
        done[idx[at_optimum]] = True
        keep = ~ at_optimum
        idx, rows, grad = idx[keep], rows[keep], grad[keep]
        if idx.size == 0:
            break
        step, singular = _newton_direction(
            rows, -second[idx], grad, settings.ridge)
        failed[idx[singular]] = True
        done[idx[singular]] = True
        keep = ~ singular
        idx, rows, grad, step = (
            idx[keep], rows[keep], grad[keep], step[keep])
        if idx.size == 0:
            continue
        trial, accepted = _line_search(
            rows, alpha[idx], step, grad,
            objective[idx], eps)
        done[idx[~ accepted]] = True
            # no ascent possible
        moved = idx[accepted]
        alpha[moved] = trial[accepted]
        iterations[moved] += 1
        z[moved] = 1.0 + np.einsum(
            'mnq,mq->mn', stack[moved], alpha[moved])
        value_m, first_m, second_m = _pseudo_log(z[moved], eps)
        value[moved] = value_m
        first[moved] = first_m
        second[moved] = second_m
        objective[moved] = value_m.sum(axis=1)
        escaped = (
            np.linalg.norm(alpha[moved], axis=1) * scale[moved]
            > DIVERGENCE_BOUND)
        diverged[moved[escaped]] = True
        done[moved[escaped]] = True
    grad = np.einsum('mn,mnq->mq', first, stack)
    residuals = np.abs(grad).max(axis=1)
    in_domain = np.all(z >= eps, axis=1)
    converged = (
        in_domain &
        (residuals <= settings.tolerance) &
        ~ diverged & ~ failed)
    ratios = 2.0 * objective
    return _StackSolution(
        multipliers=alpha,
        ratios=ratios,
        iterations=iterations,
        converged=converged,
        diverged=diverged,
        failed=failed,
        residuals=residuals)


def _newton_direction(
        rows:
            _Stack,
        curvature:
            _Matrix,
        grad:
            _Matrix,
        ridge:
            float
        ) -> tuple[
            _Matrix,
            np.ndarray]:
    """Return Newton ascent directions and singular flags.

    The negated Hessian `sum_i c_i g_i g_i'` is positive
    semidefinite. When its smallest eigenvalue is below
    `RANK_TOLERANCE` times its largest, `ridge * trace`
    is added to the diagonal.
    """
    hessian = np.einsum(
        'mn,mnq,mnr->mqr', curvature, rows, rows)
    eigenvalues, vectors = np.linalg.eigh(hessian)
    top = eigenvalues[:, -1]
    trace = eigenvalues.sum(axis=1)
    repair = eigenvalues[:, 0] <= RANK_TOLERANCE * top
    eigenvalues = eigenvalues + np.where(
        repair, ridge * trace, 0.0)[:, np.newaxis]
    singular = ~ (
        np.all(np.isfinite(eigenvalues), axis=1) &
        (eigenvalues[:, 0] > 0))
    safe = np.where(singular[:, np.newaxis], 1.0, eigenvalues)
    coords = np.einsum('mqr,mq->mr', vectors, grad) / safe
    step = np.einsum('mqr,mr->mq', vectors, coords)
    return step, singular


def _line_search(
        rows:
            _Stack,
        alpha:
            _Matrix,
        step:
            _Matrix,
        grad:
            _Matrix,
        objective:
            _Vector,
        eps:
            float
        ) -> tuple[
            _Matrix,
            np.ndarray]:
    """Return damped iterates and acceptance flags.

    Halves the step until the objective increases
    by a fraction of the predicted increase.
    """
    m = alpha.shape[0]
    slope = np.einsum('mq,mq->m', grad, step)
    t = np.ones(m)
    accepted = np.zeros(m, dtype=bool)
    trial = alpha.copy()
    for _ in range(_MAX_HALVINGS):
        pending = ~ accepted
        if not np.any(pending):
            break
        candidate = alpha + t[:, np.newaxis] * step
        z = 1.0 + np.einsum('mnq,mq->mn', rows, candidate)
        value = _pseudo_log(z, eps)[0].sum(axis=1)
        ok = pending & (
            value > objective + _ARMIJO * t * slope)
        trial[ok] = candidate[ok]
        accepted |= ok
        t = np.where(pending & ~ ok, 0.5 * t, t)
    return trial, accepted
