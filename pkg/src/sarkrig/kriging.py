"""Kriging prediction at arbitrary locations with standard errors.

A fitted model holds one factorization of the posterior system and reuses
it for every prediction batch and every conditional-simulation draw. The
posterior coefficient mean is M^-1 Phi_o^T z / lam; the latent mean at
targets is Phi_t times that, and the latent variance is the chunked
diagonal of sigma2 * Phi_t M^-1 Phi_t^T. With tau2 = 0 the model is an
exact interpolator of the observations (dense small-n path).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lattice import BasisSpec, LatticeGrid, evaluate_basis
from .likelihood import CovParams, _posterior_core
from .meanmodel import ObservationSet, RegressionFit
from .sar import build_sar, precision


@dataclass(frozen=True)
class KrigingResult:
    """Predictions at targets: mean, standard error, coefficient posterior mean."""

    targets: np.ndarray
    mean: np.ndarray
    se: np.ndarray | None
    coef_mean: np.ndarray

    def __post_init__(self):
        if self.se is not None and np.any(self.se < 0):
            raise ValidationError("negative standard errors")


class KrigingModel:
    """One day's fitted spatial model, reusable across prediction batches.

    Parameters
    ----------
    obs : ObservationSet
        Observations; values are used as-is unless mean_fit is given,
        in which case mean_fit.residuals drive the spatial part.
    cov : CovParams
        Covariance parameters (node fields, sigma2, tau2).
    grid, spec : lattice geometry and basis configuration.
    mean_fit : RegressionFit, optional
        Fitted mean model; predictions add the fixed effects back when
        target covariates are supplied.
    """

    def __init__(
        self,
        obs: ObservationSet,
        cov: CovParams,
        grid: LatticeGrid,
        spec: BasisSpec,
        mean_fit: RegressionFit | None = None,
    ):
        self.obs = obs
        self.cov = cov
        self.grid = grid
        self.spec = spec
        self.mean_fit = mean_fit
        self.B = build_sar(grid, cov.params)
        self.Phi_o = evaluate_basis(grid, spec, obs.locations).matrix
        self.core = _posterior_core(precision(self.B), self.Phi_o, cov.lam)
        self.resid = mean_fit.residuals if mean_fit is not None else obs.values
        if self.resid.shape != obs.values.shape:
            raise ValidationError("mean_fit residuals do not match the observations")
        self.coef_mean = self.core.krig_coef(self.resid)

    def _fixed_effects(self, n_targets, target_design, target_lag):
        if self.mean_fit is None:
            return np.zeros(n_targets)
        fit = self.mean_fit
        if target_design is None:
            raise ValidationError("model was fitted with a mean model; pass target_design")
        X = np.atleast_2d(np.asarray(target_design, dtype=float))
        if X.shape != (n_targets, fit.beta.shape[0]):
            raise ValidationError(
                f"target_design {X.shape} does not match {n_targets} targets x {fit.beta.shape[0]} coefficients"
            )
        mu = X @ fit.beta
        if fit.alpha is not None:
            if target_lag is None:
                raise ValidationError("mean model has a lag coefficient; pass target_lag")
            mu = mu + fit.alpha * np.asarray(target_lag, dtype=float).ravel()
        return mu

    def predict(
        self,
        targets,
        target_design=None,
        target_lag=None,
        include_nugget: bool = False,
        compute_se: bool = True,
        chunk: int = 512,
    ) -> KrigingResult:
        """Kriging mean (and optionally SE) at target locations.

        include_nugget adds tau2 to the variance, predicting the observed
        quantity rather than the latent field.
        """
        pts = np.atleast_2d(np.asarray(targets, dtype=float))
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise ValidationError(f"targets must be finite (n, 2) points, got {pts.shape}")
        Phi_t = evaluate_basis(self.grid, self.spec, pts).matrix
        mean = Phi_t @ self.coef_mean + self._fixed_effects(pts.shape[0], target_design, target_lag)
        se = None
        if compute_se:
            var = self.cov.sigma2 * self.core.latent_var_diag(Phi_t, chunk=chunk)
            if include_nugget:
                var = var + self.cov.tau2
            se = np.sqrt(np.clip(var, 0.0, None))
        return KrigingResult(targets=pts, mean=mean, se=se, coef_mean=self.coef_mean)


def krige(
    obs: ObservationSet,
    cov: CovParams,
    grid: LatticeGrid,
    spec: BasisSpec,
    targets,
    mean_fit: RegressionFit | None = None,
    target_design=None,
    target_lag=None,
    include_nugget: bool = False,
) -> KrigingResult:
    """One-shot kriging: build the model and predict at targets."""
    model = KrigingModel(obs, cov, grid, spec, mean_fit=mean_fit)
    return model.predict(
        targets,
        target_design=target_design,
        target_lag=target_lag,
        include_nugget=include_nugget,
    )
