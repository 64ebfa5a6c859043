"""Conditional simulation, cross-validation folds, and the metric suite.

Conditional draws follow the residual-correction scheme: simulate an
unconditional field, add synthetic noise at the observation sites, krige
those synthetic observations with the already-factorized model, and
correct the kriging mean by the difference. One factorization serves all
draws. Intervals are Gaussian (mean +/- z * SE) by default; ensemble
quantiles are available where an ensemble exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

from .errors import ValidationError
from .kriging import KrigingModel
from .lattice import evaluate_basis
from .rng import substream
from .simulate import coefficients_from_noise

_D_COND = 0xCD
_D_FOLD = 0xF0

# (model id, seed) pairs already used, to flag accidental stream overlap.
_SEEN_STREAMS: set = set()


@dataclass(frozen=True)
class ConditionalEnsemble:
    """Draws from the predictive distribution at fixed targets."""

    targets: np.ndarray
    draws: np.ndarray  # (n_draws, n_targets)
    seed: int
    metadata: dict

    def __post_init__(self):
        if not np.all(np.isfinite(self.draws)):
            raise ValidationError("conditional draws contain non-finite values")
        if self.draws.ndim != 2 or self.draws.shape[1] != self.targets.shape[0]:
            raise ValidationError(
                f"draws {self.draws.shape} do not match {self.targets.shape[0]} targets"
            )

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


@dataclass(frozen=True)
class UQMetrics:
    """RMSE, interval coverage, and mean interval width at one nominal level."""

    rmse: float
    picp: float
    mpiw: float
    n: int
    level: float = 0.95

    def __post_init__(self):
        if not (0 <= self.picp <= 1):
            raise ValidationError(f"picp must be in [0,1], got {self.picp}")
        if self.rmse < 0 or self.mpiw < 0:
            raise ValidationError("rmse and mpiw must be non-negative")

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "picp": self.picp, "mpiw": self.mpiw, "n": self.n, "level": self.level}


@dataclass(frozen=True)
class FoldAssignment:
    """Exhaustive disjoint fold ids with sizes differing by at most one."""

    k: int
    fold_ids: np.ndarray
    seed: int

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_ids == fold)


def conditional_simulate(
    model: KrigingModel,
    targets,
    n_draws: int,
    seed: int,
    target_design=None,
    target_lag=None,
    include_nugget: bool = False,
) -> ConditionalEnsemble:
    """Draw n_draws conditional realizations of the field at targets.

    Draw k is reproducible from (seed, k) alone. include_nugget adds
    observation noise to each draw at the targets (observed-quantity
    simulation rather than latent-field simulation).
    """
    if n_draws < 1:
        raise ValidationError(f"n_draws must be >= 1, got {n_draws}")
    pts = np.atleast_2d(np.asarray(targets, dtype=float))
    base = model.predict(pts, target_design=target_design, target_lag=target_lag, compute_se=False)
    Phi_t = evaluate_basis(model.grid, model.spec, pts).matrix
    Phi_o = model.Phi_o
    m = model.B.shape[0]
    n = Phi_o.shape[0]
    sigma = np.sqrt(model.cov.sigma2)
    tau = np.sqrt(model.cov.tau2)

    key = (id(model), int(seed))
    reused = key in _SEEN_STREAMS
    _SEEN_STREAMS.add(key)

    # One unconditional batch; the model's factorization is reused per draw.
    noise = np.empty((n_draws, m))
    eps = np.empty((n_draws, n))
    for k in range(n_draws):
        gen = substream(seed, _D_COND, k)
        noise[k] = gen.standard_normal(m)
        eps[k] = gen.standard_normal(n)
    C_star = sigma * coefficients_from_noise(model.B, noise)  # (n_draws, m)

    draws = np.empty((n_draws, pts.shape[0]))
    for k in range(n_draws):
        z_star = Phi_o @ C_star[k] + tau * eps[k]
        c_hat = model.core.krig_coef(z_star)
        draws[k] = base.mean + Phi_t @ (C_star[k] - c_hat)
    if include_nugget and tau > 0:
        for k in range(n_draws):
            gen = substream(seed, _D_COND, k, 1)
            draws[k] += tau * gen.standard_normal(pts.shape[0])

    return ConditionalEnsemble(
        targets=pts,
        draws=draws,
        seed=int(seed),
        metadata={"n_draws": n_draws, "include_nugget": include_nugget, "seed_reused": reused},
    )


def summarize_uncertainty(ens: ConditionalEnsemble) -> tuple:
    """(mean, SE) per target; SE is the across-draw sample sd (denominator n-1)."""
    if ens.n_draws < 2:
        raise ValidationError(f"need at least 2 draws to summarize, got {ens.n_draws}")
    return ens.draws.mean(axis=0), ens.draws.std(axis=0, ddof=1)


def ensemble_interval(ens: ConditionalEnsemble, level: float = 0.95) -> tuple:
    """Per-target equal-tail quantile interval (lo, hi) from the draws."""
    if not 0 < level < 1:
        raise ValidationError(f"level must be in (0,1), got {level}")
    lo, hi = np.quantile(ens.draws, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return lo, hi


def kfold_assign(n: int, k: int, seed: int) -> FoldAssignment:
    """Random fold ids for n items: shuffled round-robin, sizes differ by <= 1."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k={k} folds for n={n} items")
    perm = substream(seed, _D_FOLD).permutation(n)
    fold_ids = np.empty(n, dtype=np.int64)
    fold_ids[perm] = np.arange(n) % k
    return FoldAssignment(k=k, fold_ids=fold_ids, seed=int(seed))


def compute_metrics(pred_mean, pred_se, truth, level: float = 0.95) -> UQMetrics:
    """RMSE, PICP, and MPIW against symmetric normal-quantile intervals."""
    mu = np.asarray(pred_mean, dtype=float).ravel()
    se = np.asarray(pred_se, dtype=float).ravel()
    y = np.asarray(truth, dtype=float).ravel()
    if mu.size == 0:
        raise ValidationError("empty prediction set")
    if not (mu.shape == se.shape == y.shape):
        raise ValidationError(f"length mismatch: {mu.shape}, {se.shape}, {y.shape}")
    if np.any(se < 0):
        raise ValidationError("standard errors must be non-negative")
    if not 0 < level < 1:
        raise ValidationError(f"level must be in (0,1), got {level}")
    z = scipy.stats.norm.ppf(0.5 + level / 2)
    rmse = float(np.sqrt(np.mean((mu - y) ** 2)))
    picp = float(np.mean(np.abs(y - mu) <= z * se))
    mpiw = float(np.mean(2.0 * z * se))
    return UQMetrics(rmse=rmse, picp=picp, mpiw=mpiw, n=mu.size, level=level)


def compute_metrics_from_ensemble(ens: ConditionalEnsemble, truth, level: float = 0.95) -> UQMetrics:
    """Metrics with ensemble-quantile intervals instead of Gaussian ones."""
    y = np.asarray(truth, dtype=float).ravel()
    if y.shape[0] != ens.targets.shape[0]:
        raise ValidationError(f"{y.shape[0]} truths for {ens.targets.shape[0]} targets")
    mu = ens.draws.mean(axis=0)
    lo, hi = ensemble_interval(ens, level)
    rmse = float(np.sqrt(np.mean((mu - y) ** 2)))
    picp = float(np.mean((y >= lo) & (y <= hi)))
    mpiw = float(np.mean(hi - lo))
    return UQMetrics(rmse=rmse, picp=picp, mpiw=mpiw, n=y.size, level=level)
