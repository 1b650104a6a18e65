"""Multi-horizon probabilistic load forecasting and scenario generation.

One recursive-least-squares model per lookahead horizon (24 independent
models sharing a regressor recipe), a full covariance model of the
horizon-residual vector for joint Gaussian scenario paths, and a
quantile-copula sampler driven by empirical marginals with a Gaussian-domain
temporal correlation.

Regressors per target hour: intercept, three daily and two weekly Fourier
harmonics, forecast temperature at the matching horizon, and load lags at
24 h and 168 h.

Randomness is drawn from numpy's Philox counter-based generator, a named,
documented algorithm, so a seed pins scenario sets bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .domain import ScenarioSet
from .errors import (ColdStartError, CovarianceError, DimensionError,
                     EmptyMarginal)

N_HORIZONS = 24
WARMUP_UPDATES = 168          # one full week of hourly observations
HISTORY_WINDOW = 672          # sliding estimation window, 28 days
MIN_MARGINAL_POINTS = 50
DEFAULT_FORGETTING = 0.999

REGRESSOR_NAMES = (
    "intercept",
    "sin_d1", "cos_d1", "sin_d2", "cos_d2", "sin_d3", "cos_d3",
    "sin_w1", "cos_w1", "sin_w2", "cos_w2",
    "temp_c", "lag_24h", "lag_168h",
)
N_REGRESSORS = len(REGRESSOR_NAMES)


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator; ``seed`` may be an int or a tuple of ints."""
    return np.random.Generator(np.random.Philox(seed))


def regressor_row(hour_of_day: float, hour_of_week: float, temp_c: float,
                  lag_24h: float, lag_168h: float) -> np.ndarray:
    wd = 2.0 * math.pi * hour_of_day / 24.0
    ww = 2.0 * math.pi * hour_of_week / 168.0
    return np.array([
        1.0,
        math.sin(wd), math.cos(wd), math.sin(2 * wd), math.cos(2 * wd),
        math.sin(3 * wd), math.cos(3 * wd),
        math.sin(ww), math.cos(ww), math.sin(2 * ww), math.cos(2 * ww),
        temp_c, lag_24h, lag_168h,
    ])


# -- recursive least squares ----------------------------------------------------


@dataclass(frozen=True)
class RlsState:
    """Per-horizon exponentially-forgetting least squares, information form.

    Also carries the recent load history so point forecasts can assemble
    their own lag regressors.
    """

    theta: np.ndarray        # (H, p) coefficients
    info: np.ndarray         # (H, p, p) information matrices
    moment: np.ndarray       # (H, p) information vectors
    forgetting: float
    layout: tuple = REGRESSOR_NAMES
    n_updates: int = 0
    history: np.ndarray = field(default_factory=lambda: np.empty(0))

    @staticmethod
    def create(n_horizons: int = N_HORIZONS, n_features: int = N_REGRESSORS,
               forgetting: float = DEFAULT_FORGETTING,
               layout: tuple = REGRESSOR_NAMES, ridge: float = 1e-6) -> "RlsState":
        if not 0.9 < forgetting <= 1.0:
            raise ValueError("forgetting factor must lie in (0.9, 1]")
        return RlsState(
            theta=np.zeros((n_horizons, n_features)),
            info=np.repeat(ridge * np.eye(n_features)[None], n_horizons, axis=0),
            moment=np.zeros((n_horizons, n_features)),
            forgetting=forgetting, layout=tuple(layout), n_updates=0,
            history=np.empty(0),
        )

    @property
    def n_horizons(self) -> int:
        return self.theta.shape[0]

    @property
    def n_features(self) -> int:
        return self.theta.shape[1]

    @property
    def warm(self) -> bool:
        return self.n_updates >= WARMUP_UPDATES


def rls_update(state: RlsState, regressors, observed_kwh: float) -> RlsState:
    """One forgetting-weighted update of every horizon model against the
    newly observed target.

    ``regressors`` is (H, p): row k holds the regressor vector horizon k's
    model would have used for this target.  The observation is appended to
    the state's load history.
    """
    x = np.atleast_2d(np.asarray(regressors, dtype=float))
    if x.shape != (state.n_horizons, state.n_features):
        raise DimensionError(
            f"regressors shaped {x.shape}, expected "
            f"({state.n_horizons}, {state.n_features})")
    lam = state.forgetting
    info = lam * state.info + np.einsum("hi,hj->hij", x, x)
    moment = lam * state.moment + x * float(observed_kwh)
    try:
        theta = np.linalg.solve(info, moment[..., None])[..., 0]
    except np.linalg.LinAlgError:
        # re-regularize: bump the ridge and retry once
        bump = 1e-8 * np.trace(info, axis1=1, axis2=2).max()
        info = info + max(bump, 1e-10) * np.eye(state.n_features)[None]
        theta = np.linalg.solve(info, moment[..., None])[..., 0]
    hist = np.append(state.history, float(observed_kwh))
    if hist.size > 2 * HISTORY_WINDOW:
        hist = hist[-2 * HISTORY_WINDOW:]
    return replace(state, theta=theta, info=info, moment=moment,
                   n_updates=state.n_updates + 1, history=hist)


def update_regressors(state: RlsState, target_hour_of_day: int,
                      target_hour_of_week: int,
                      temp_per_horizon) -> np.ndarray:
    """Regressor matrix (H, p) for the target that is about to be learned.

    ``temp_per_horizon[k-1]`` is the temperature forecast horizon k's model
    saw for this target (issued k-1 hours before it).  Lags come from the
    state's own history, which at this moment ends one hour before the
    target.
    """
    h = state.history
    if h.size < WARMUP_UPDATES:
        lag24 = h[-24] if h.size >= 24 else (h[-1] if h.size else 0.0)
        lag168 = h[-168] if h.size >= 168 else lag24
    else:
        lag24, lag168 = h[-24], h[-168]
    temp = np.asarray(temp_per_horizon, dtype=float).ravel()
    if temp.shape[0] != state.n_horizons:
        raise DimensionError("one temperature per horizon required")
    return np.stack([
        regressor_row(target_hour_of_day, target_hour_of_week,
                      temp[k], lag24, lag168)
        for k in range(state.n_horizons)])


def point_forecast(state: RlsState, nwp_temp, clock_hour_of_day: int,
                   clock_hour_of_week: int) -> np.ndarray:
    """Nonnegative mean forecast for the next H hours.

    ``nwp_temp[k-1]`` is the temperature forecast for the hour starting
    k-1 hours from now; the clock arguments describe that first hour.
    """
    if not state.warm:
        raise ColdStartError(
            f"forecaster has {state.n_updates} updates, needs {WARMUP_UPDATES}")
    temp = np.asarray(nwp_temp, dtype=float).ravel()
    if temp.shape[0] != state.n_horizons:
        raise DimensionError("one temperature per horizon required")
    h = state.history
    mean = np.empty(state.n_horizons)
    for k in range(state.n_horizons):
        # target hour is clock + k; its lag-24 sits 24 - k hours back
        lag24 = h[k - 24] if k < 24 else h[-1]
        lag168 = h[k - 168]
        row = regressor_row((clock_hour_of_day + k) % 24,
                            (clock_hour_of_week + k) % 168,
                            temp[k], lag24, lag168)
        mean[k] = row @ state.theta[k]
    return np.maximum(mean, 0.0)


# -- residual model --------------------------------------------------------------


@dataclass
class ResidualModel:
    """Horizon-residual covariance plus sliding marginal histories."""

    n_horizons: int = N_HORIZONS
    window: int = HISTORY_WINDOW
    residuals: list = field(default_factory=list)   # completed (H,) vectors
    loads: list = field(default_factory=list)       # recent observed loads

    def push_residual(self, vec) -> None:
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.shape[0] != self.n_horizons:
            raise DimensionError("residual vector length mismatch")
        self.residuals.append(vec)
        if len(self.residuals) > self.window:
            del self.residuals[: len(self.residuals) - self.window]

    def push_load(self, value: float) -> None:
        self.loads.append(float(value))
        if len(self.loads) > self.window:
            del self.loads[: len(self.loads) - self.window]

    @property
    def n_residuals(self) -> int:
        return len(self.residuals)

    def covariance(self) -> np.ndarray:
        if len(self.residuals) < 2:
            raise ColdStartError("need at least two completed residual vectors")
        r = np.asarray(self.residuals)
        return np.cov(r, rowvar=False, ddof=1)

    def load_window(self) -> np.ndarray:
        return np.asarray(self.loads, dtype=float)


def regularize_spd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize and ridge a covariance until Cholesky succeeds.

    Ridge is ``max(1e-8, 1e-6 * trace / n)``, retried once at tenfold;
    failing that raises CovarianceError.  Returns (matrix, cholesky factor).
    """
    m = np.asarray(mat, dtype=float)
    m = 0.5 * (m + m.T)
    n = m.shape[0]
    eps = max(1e-8, 1e-6 * float(np.trace(m)) / n)
    for ridge in (eps, 10.0 * eps):
        cand = m + ridge * np.eye(n)
        try:
            return cand, np.linalg.cholesky(cand)
        except np.linalg.LinAlgError:
            continue
    raise CovarianceError("matrix not positive definite after regularization")


def sample_scenarios_rls(residual: ResidualModel, mean, s_count: int,
                         seed) -> ScenarioSet:
    """Joint-Gaussian residual paths around the mean, clamped at zero,
    equal probabilities.  Seeded and reproducible."""
    if s_count < 1:
        raise ValueError("need at least one scenario")
    mean = np.asarray(mean, dtype=float).ravel()
    sigma, chol = regularize_spd(residual.covariance())
    rng = make_rng(seed)
    z = rng.standard_normal((int(s_count), mean.shape[0]))
    paths = np.maximum(mean[None, :] + z @ chol.T, 0.0)
    return ScenarioSet(paths, np.full(int(s_count), 1.0 / int(s_count)))


# -- quantile copula --------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalCdf:
    """Empirical distribution with linear quantile interpolation between
    order statistics and flat extrapolation beyond the observed range."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise EmptyMarginal("empirical CDF needs at least one point")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def ppf(self, u) -> np.ndarray:
        knots = (np.arange(self.n) + 0.5) / self.n
        return np.interp(np.asarray(u, dtype=float), knots, self.values)

    def mean(self) -> float:
        return float(self.values.mean())


def sample_scenarios_copula(marginals, corr, s_count: int, seed,
                            min_points: int = MIN_MARGINAL_POINTS) -> ScenarioSet:
    """Gaussian-copula paths: draw z ~ N(0, corr), push each coordinate
    through the normal CDF and invert its empirical marginal.  Equal
    probabilities, output clamped at zero."""
    if s_count < 1:
        raise ValueError("need at least one scenario")
    marginals = list(marginals)
    h = len(marginals)
    for k, m in enumerate(marginals):
        if m.n < min_points:
            raise EmptyMarginal(
                f"marginal {k} has {m.n} support points, needs {min_points}")
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (h, h):
        raise DimensionError("correlation must be H x H")
    _, chol = regularize_spd(corr)
    rng = make_rng(seed)
    z = rng.standard_normal((int(s_count), h)) @ chol.T
    # re-standardize so the regularization ridge cannot shift the marginals
    z = z / np.sqrt(np.diag(chol @ chol.T))[None, :]
    u = norm.cdf(z)
    paths = np.column_stack([marginals[k].ppf(u[:, k]) for k in range(h)])
    return ScenarioSet(np.maximum(paths, 0.0),
                       np.full(int(s_count), 1.0 / int(s_count)))


def gaussian_rank_corr(window: np.ndarray, n_horizons: int = N_HORIZONS) -> np.ndarray:
    """Toeplitz temporal correlation in the Gaussian domain, estimated from
    the normal scores of a load window's autocorrelation."""
    w = np.asarray(window, dtype=float).ravel()
    if w.size < n_horizons + 2:
        raise EmptyMarginal("window too short for a temporal correlation")
    ranks = np.argsort(np.argsort(w))
    z = norm.ppf((ranks + 0.5) / w.size)
    z = z - z.mean()
    denom = float(z @ z)
    acf = np.empty(n_horizons)
    acf[0] = 1.0
    for lag in range(1, n_horizons):
        acf[lag] = float(z[lag:] @ z[:-lag]) / denom
    idx = np.abs(np.arange(n_horizons)[:, None] - np.arange(n_horizons)[None, :])
    return acf[idx]


# -- bundles ---------------------------------------------------------------------


@dataclass(frozen=True)
class ForecastBundle:
    """Point forecast plus the scenario set issued alongside it."""

    mean_kwh: np.ndarray
    scenarios: ScenarioSet
    issued_at: object = None

    def __post_init__(self):
        m = np.asarray(self.mean_kwh, dtype=float).ravel()
        if m.shape[0] != self.scenarios.horizon:
            raise DimensionError("mean and scenarios disagree on horizon")
        object.__setattr__(self, "mean_kwh", m)


def central_band(scen: ScenarioSet, level: float = 0.8):
    """Lower/upper per-horizon quantiles of the central ``level`` band."""
    lo = (1.0 - level) / 2.0
    return (np.quantile(scen.demand_kwh, lo, axis=0),
            np.quantile(scen.demand_kwh, 1.0 - lo, axis=0))
