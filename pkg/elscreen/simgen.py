"""Seeded generators of simulated screening data.

Each `SimulationScenario` names a design (`model_id`), the
sample size `n`, the number of predictors `p`, the error
correlation `rho`, the error case (homoscedastic `'A'`, or
heteroscedastic `'B'`), and a seed. The data of a scenario
are a deterministic function of the scenario.

Designs (predictor indices 1-based):

  - `VARIED_Q`: independent predictors,
    `Y_k = X_1 + ... + X_k + e_k` for `k <= q`
  - `EX41`: independent predictors,
    four responses that share two weak predictors
  - `EX42`: equicorrelated predictors (0.3),
    five responses with random coefficients on `X_1, ..., X_5`
  - `EX43`: equicorrelated predictors (0.5), except `X_5`,
    which is independent of the others
  - `CASE1`: equicorrelated predictors (0.9),
    two responses, and `E[X_3 y] = 0`
"""
# This file is released under the 3-clause BSD license.
#
import dataclasses as _dc
import json
import logging
import typing as _ty

import numpy as np
import scipy.linalg as _la

import elscreen._abc as _el_abc
import elscreen._utils as _utils
import elscreen.screening as _screening


logger = logging.getLogger(__name__)
SIGMA_CLIP: _ty.Final = 1e3
SYMMETRY_TOLERANCE: _ty.Final = 1e-10
PSD_TOLERANCE: _ty.Final = 1e-8
RESPONSE_COUNTS: _ty.Final = dict(
    EX41=4,
    EX42=5,
    EX43=3,
    CASE1=2)
DEFAULT_SIZES: _ty.Final = dict(
    VARIED_Q=(100, 1000),
    EX41=(100, 2000),
    EX42=(200, 1000),
    EX43=(100, 1000),
    CASE1=(100, 500))
PREDICTOR_CORRELATION: _ty.Final = dict(
    VARIED_Q=0.0,
    EX41=0.0,
    EX42=0.3,
    EX43=0.5,
    CASE1=0.9)
HETEROSCEDASTIC_MODELS: _ty.Final = {
    'EX41', 'EX42', 'EX43'}
# streams derived from the scenario seed
_PREDICTOR_STREAM: _ty.Final = 0
_COEFFICIENT_STREAM: _ty.Final = 1
_ERROR_STREAM: _ty.Final = 2
if set(DEFAULT_SIZES) != _el_abc.MODEL_IDS:
    raise AssertionError(DEFAULT_SIZES)


class NotPSD(ValueError):
    """Covariance matrix is not positive semidefinite."""


@_dc.dataclass(frozen=True)
class SimulationScenario:
    """Design, dimensions, errors, and seed of simulated data."""

    model_id: _el_abc.ModelId
    n: _el_abc.Cardinality
    p: _el_abc.Cardinality
    q: _el_abc.Cardinality
    rho: float = 0.0
    error_case: _el_abc.ErrorCase = 'A'
    seed: _el_abc.Seed = 0
    clip_sigma: _el_abc.Yes = False

    def __post_init__(
            self
            ) -> None:
        if self.model_id not in _el_abc.MODEL_IDS:
            raise ValueError(
                f'unknown model: {self.model_id!r}, '
                f'expected one of {sorted(_el_abc.MODEL_IDS)}')
        if self.error_case not in _el_abc.ERROR_CASES:
            raise ValueError(
                f'unknown error case: {self.error_case!r}')
        if (self.error_case == 'B' and
                self.model_id not in HETEROSCEDASTIC_MODELS):
            raise ValueError(
                f'model {self.model_id} has no '
                'heteroscedastic case')
        fixed_q = RESPONSE_COUNTS.get(self.model_id)
        if fixed_q is not None and self.q != fixed_q:
            raise ValueError(
                f'model {self.model_id} has {fixed_q} '
                f'responses, got `q = {self.q}`')
        if self.q < 1:
            raise ValueError(
                f'`q` must be positive, got: {self.q}')
        if self.n < 3:
            raise ValueError(
                f'`n` must be at least 3, got: {self.n}')
        if self.p <= max(self.active_set):
            raise ValueError(
                f'`p = {self.p}` must exceed the largest '
                f'active index {max(self.active_set)}')
        if not -1 < self.rho < 1:
            raise ValueError(
                f'`rho` must be in `(-1, 1)`, got: {self.rho}')

    @property
    def active_set(
            self
            ) -> tuple[int, ...]:
        """Active predictors, 1-based."""
        match self.model_id:
            case 'VARIED_Q':
                count = self.q
            case 'CASE1':
                count = 3
            case _:
                count = 5
        return tuple(range(1, count + 1))

    @property
    def active_indices(
            self
            ) -> _el_abc.IndexArray:
        """Active predictors, 0-based."""
        return np.asarray(self.active_set, dtype=np.intp) - 1

    def to_json(
            self
            ) -> str:
        """Return scenario as JSON document."""
        return json.dumps(
            _dc.asdict(self), sort_keys=True)

    def replication(
            self,
            index:
                _el_abc.Nat
            ) -> 'SimulationScenario':
        """Return scenario of replication `index`.

        The seed is derived from `(self.seed, index)`.
        """
        seed = _utils.derive_seed(self.seed, index)
        return _dc.replace(self, seed=seed)


def make_scenario(
        model_id:
            _el_abc.ModelId,
        n:
            _el_abc.Cardinality |
            None=None,
        p:
            _el_abc.Cardinality |
            None=None,
        q:
            _el_abc.Cardinality |
            None=None,
        **kw
        ) -> SimulationScenario:
    """Return scenario with default sizes filled in.

    `VARIED_Q` defaults to `q = 5`.
    """
    model_id = model_id.upper()
    if model_id not in DEFAULT_SIZES:
        raise ValueError(
            f'unknown model: {model_id!r}')
    default_n, default_p = DEFAULT_SIZES[model_id]
    if q is None:
        q = RESPONSE_COUNTS.get(model_id, 5)
    return SimulationScenario(
        model_id=model_id,
        n=default_n if n is None else n,
        p=default_p if p is None else p,
        q=q,
        **kw)


def scenario_from_json(
        text:
            str
        ) -> SimulationScenario:
    """Return scenario from JSON document.

    Missing sizes take the defaults of the model.
    """
    d = json.loads(text)
    if not isinstance(d, dict):
        raise ValueError(
            f'expected a JSON object, got: {text!r}')
    fields = {f.name for f in _dc.fields(SimulationScenario)}
    unknown = set(d).difference(fields)
    if unknown:
        raise ValueError(
            f'unknown scenario keys: {sorted(unknown)}')
    if 'model_id' not in d:
        raise ValueError('missing key "model_id"')
    return make_scenario(**d)


def mvn_sample(
        cov:
            _el_abc.Matrix,
        n:
            _el_abc.Cardinality,
        seed:
            _el_abc.Seed |
            np.random.Generator
        ) -> _el_abc.Matrix:
    """Return `n` rows drawn from `N(0, cov)`.

    Uses the Cholesky factor of `cov`, or the
    symmetric square root when `cov` is singular.
    Raise `NotPSD` if the smallest eigenvalue
    of `cov` is below `-PSD_TOLERANCE * trace`.
    """
    cov = _utils.as_matrix(cov, 'cov')
    d = cov.shape[0]
    if cov.shape != (d, d):
        raise ValueError(
            f'`cov` must be square, got shape {cov.shape}')
    if np.max(np.abs(cov - cov.T), initial=0) > SYMMETRY_TOLERANCE:
        raise ValueError('`cov` is not symmetric')
    eigenvalues, vectors = _la.eigh(cov)
    trace = max(np.trace(cov), 0.0)
    if eigenvalues[0] < -PSD_TOLERANCE * trace:
        raise NotPSD(
            f'smallest eigenvalue {eigenvalues[0]} is '
            'negative')
    try:
        factor = _la.cholesky(cov, lower=True)
    except _la.LinAlgError:
        factor = vectors * np.sqrt(np.clip(eigenvalues, 0, None))
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = _utils.derive_rng(seed)
    z = rng.standard_normal((n, d))
    return z @ factor.T


def equicorrelation(
        size:
            _el_abc.Cardinality,
        rho:
            float
        ) -> _el_abc.Matrix:
    """Return correlation matrix with off-diagonal `rho`."""
    matrix = np.full((size, size), float(rho))
    np.fill_diagonal(matrix, 1.0)
    return matrix


def predictor_covariance(
        model_id:
            _el_abc.ModelId,
        p:
            _el_abc.Cardinality
        ) -> _el_abc.Matrix:
    """Return population covariance of the predictors."""
    cov = equicorrelation(p, PREDICTOR_CORRELATION[model_id])
    if model_id == 'EX43':
        cov[4, :] = 0.0
        cov[:, 4] = 0.0
        cov[4, 4] = 1.0
    return cov


def coefficient_matrix(
        scenario:
            SimulationScenario
        ) -> _el_abc.Matrix:
    """Return coefficients of the active predictors.

    Row `k` holds the coefficients of response `k`
    on the predictors `X_1, ..., X_s`, where `s` is
    the number of active predictors. The random
    coefficients of `EX42` are drawn from the
    scenario seed.
    """
    match scenario.model_id:
        case 'VARIED_Q':
            return np.tril(np.ones((scenario.q, scenario.q)))
        case 'EX41':
            return np.array([
                [3.0, 2.0, 0.0, 0.0, 0.0],
                [4.0, 0.0, 1.0, 0.0, 0.0],
                [0.0, 2.0, 0.0, 4.0, 0.0],
                [0.0, 0.0, 0.0, 3.0, 1.0]])
        case 'EX42':
            rng = _utils.derive_rng(
                scenario.seed, _COEFFICIENT_STREAM)
            signs = rng.choice(
                [1.0, -1.0, 0.0], size=(5, 5),
                p=[0.4, 0.4, 0.2])
            return signs * rng.uniform(0.0, 1.0, size=(5, 5))
        case 'EX43':
            return np.array([
                [1.0, 2.0, 3.0, -3.0, 0.0],
                [2.0, -2.0, 2.0, -3.0, 0.0],
                [1.0, 2.0, 1.0, -3.0, 1.0]])
        case 'CASE1':
            return np.array([
                [2.0, -2.0, 0.0],
                [4.0, 6.0, -9.0]])
    raise ValueError(scenario.model_id)


def _predictors(
        scenario:
            SimulationScenario
        ) -> _el_abc.Matrix:
    """Return predictors of the design.

    Equicorrelated predictors are formed as
    `sqrt(r) F + sqrt(1 - r) E`, with a common
    factor `F` and independent `E`.
    """
    rng = _utils.derive_rng(scenario.seed, _PREDICTOR_STREAM)
    n, p = scenario.n, scenario.p
    r = PREDICTOR_CORRELATION[scenario.model_id]
    noise = rng.standard_normal((n, p))
    if r == 0:
        return noise
    factor = rng.standard_normal((n, 1))
    x = np.sqrt(r) * factor + np.sqrt(1 - r) * noise
    if scenario.model_id == 'EX43':
        x[:, 4] = noise[:, 4]
    return x


def _error_scales(
        scenario:
            SimulationScenario,
        x:
            _el_abc.Matrix
        ) -> _el_abc.Matrix:
    """Return the factors `sigma_k(X)`, shape `(n, q)`."""
    sigma = np.ones((scenario.n, scenario.q))
    if scenario.error_case == 'A':
        return sigma
    with np.errstate(divide='ignore'):
        match scenario.model_id:
            case 'EX41':
                sigma[:, 0] = 1 / (x[:, 0] + x[:, 1])
                sigma[:, 2] = 1 / (x[:, 1]**2 + x[:, 3]**2)
            case 'EX42':
                for k in (0, 2, 4):
                    sigma[:, k] = 1 / x[:, k]
            case 'EX43':
                sigma[:, 0] = x[:, 0]
                sigma[:, 1] = x[:, 2]
                sigma[:, 2] = x[:, 4]
    if scenario.clip_sigma:
        sigma = np.clip(sigma, -SIGMA_CLIP, SIGMA_CLIP)
    return sigma


def generate(
        scenario:
            SimulationScenario
        ) -> _screening.Dataset:
    """Return the data of `scenario`.

    Predictors are returned as drawn,
    not standardized.
    """
    x = _predictors(scenario)
    coeffs = coefficient_matrix(scenario)
    s = coeffs.shape[1]
    errors = mvn_sample(
        equicorrelation(scenario.q, scenario.rho),
        scenario.n,
        _utils.derive_rng(scenario.seed, _ERROR_STREAM))
    sigma = _error_scales(scenario, x)
    y = x[:, :s] @ coeffs.T + sigma * errors
    if not np.all(np.isfinite(y)):
        raise ValueError(
            'non-finite responses, consider '
            'clipping the error scales')
    return _screening.make_dataset(x, y, standardize=False)
