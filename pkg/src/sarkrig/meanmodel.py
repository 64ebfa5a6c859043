"""Daily mean model: ordinary least squares with an optional lagged field.

The observed value at a station is regressed on its covariate row
(intercept, coordinates, whatever else the caller supplies) plus, when
available, the previous day's field sampled at the same location. The
residuals feed the spatial model; the lag coefficient is reported
separately from the covariate coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ValidationError


@dataclass(frozen=True)
class ObservationSet:
    """One day of point observations.

    locations: (n, 2) coordinates; values: (n,); covariates: (n, p)
    design matrix including the intercept column; lag_values: optional
    (n,) previous-day field at the same locations.
    """

    locations: np.ndarray
    values: np.ndarray
    covariates: np.ndarray | None = None
    lag_values: np.ndarray | None = None
    day_id: str = ""
    covariate_names: tuple | None = None
    station_ids: tuple | None = None

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        val = np.asarray(self.values, dtype=float).ravel()
        if loc.shape != (val.shape[0], 2):
            raise ValidationError(f"locations {loc.shape} do not match {val.shape[0]} values")
        if not np.all(np.isfinite(loc)) or not np.all(np.isfinite(val)):
            raise ValidationError("locations and values must be finite")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "values", val)
        if self.covariates is not None:
            X = np.atleast_2d(np.asarray(self.covariates, dtype=float))
            if X.shape[0] != val.shape[0]:
                raise ValidationError(f"covariates have {X.shape[0]} rows for {val.shape[0]} values")
            if val.shape[0] < X.shape[1]:
                raise ValidationError(f"need n >= p, got n={val.shape[0]} p={X.shape[1]}")
            if not np.all(np.isfinite(X)):
                raise ValidationError("covariates must be finite")
            object.__setattr__(self, "covariates", X)
            if self.covariate_names is not None and len(self.covariate_names) != X.shape[1]:
                raise ValidationError(
                    f"{len(self.covariate_names)} covariate names for {X.shape[1]} columns"
                )
        if self.lag_values is not None:
            lag = np.asarray(self.lag_values, dtype=float).ravel()
            if lag.shape != val.shape:
                raise ValidationError(f"lag_values shape {lag.shape} does not match values")
            if not np.all(np.isfinite(lag)):
                raise ValidationError("lag_values must be finite")
            object.__setattr__(self, "lag_values", lag)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def dedupe_observations(obs: ObservationSet) -> tuple:
    """Average repeated observations at identical locations.

    Returns (deduplicated ObservationSet, number of rows merged away).
    Covariates and lag values are averaged alongside the values.
    """
    _, inverse, counts = np.unique(
        obs.locations, axis=0, return_inverse=True, return_counts=True
    )
    n_unique = counts.shape[0]
    if n_unique == obs.n:
        return obs, 0

    def pool(a):
        out = np.zeros((n_unique,) + a.shape[1:])
        np.add.at(out, inverse, a)
        return out / counts.reshape((-1,) + (1,) * (a.ndim - 1))

    return (
        ObservationSet(
            locations=pool(obs.locations),
            values=pool(obs.values),
            covariates=None if obs.covariates is None else pool(obs.covariates),
            lag_values=None if obs.lag_values is None else pool(obs.lag_values),
            day_id=obs.day_id,
            covariate_names=obs.covariate_names,
        ),
        obs.n - n_unique,
    )


@dataclass(frozen=True)
class RegressionFit:
    """OLS output: covariate coefficients, optional lag coefficient, residuals."""

    beta: np.ndarray
    alpha: float | None
    fitted: np.ndarray
    residuals: np.ndarray

    @property
    def r_squared(self) -> float:
        y = self.fitted + self.residuals
        tss = float(np.sum((y - y.mean()) ** 2))
        if tss == 0.0:
            return 0.0
        return 1.0 - float(np.sum(self.residuals**2)) / tss


def _collinear_columns(X: np.ndarray, names) -> list:
    # QR with column pivoting: tiny trailing R diagonals mark dependent columns.
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0)
    bad = piv[diag <= tol]
    return [names[j] for j in sorted(bad)]


def fit_mean_arx1(obs: ObservationSet) -> RegressionFit:
    """OLS of values on covariates plus the lagged field when present.

    Residuals are exactly values - fitted; rank deficiency raises with
    the offending column names.
    """
    if obs.covariates is None:
        raise ValidationError("fit_mean_arx1 needs a covariate design matrix")
    X = obs.covariates
    names = list(obs.covariate_names) if obs.covariate_names else [f"x{j}" for j in range(X.shape[1])]
    if obs.lag_values is not None:
        X = np.column_stack([X, obs.lag_values])
        names.append("lag")
    if obs.n < X.shape[1]:
        raise ValidationError(f"need n >= p, got n={obs.n} p={X.shape[1]}")

    coef, _, rank, _ = np.linalg.lstsq(X, obs.values, rcond=None)
    if rank < X.shape[1]:
        raise ValidationError(
            f"design matrix is rank deficient (rank {rank} of {X.shape[1]}); "
            f"collinear columns: {_collinear_columns(X, names)}"
        )
    fitted = X @ coef
    if obs.lag_values is not None:
        beta, alpha = coef[:-1], float(coef[-1])
    else:
        beta, alpha = coef, None
    return RegressionFit(beta=beta, alpha=alpha, fitted=fitted, residuals=obs.values - fitted)
