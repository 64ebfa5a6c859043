"""Exact marginal Gaussian log-likelihood and covariance-parameter fitting.

The observed residual vector is modeled as N(0, sigma2 * (Phi Q^-1 Phi^T
+ lam * I)) with lam = tau2 / sigma2. All dense n x n algebra is avoided
for lam > 0 through two sparse identities built on M = Q + Phi^T Phi / lam:

    S^-1 v   = (v - Phi M^-1 Phi^T v / lam) / lam
    logdet S = n log lam + logdet M - logdet Q

Both determinants come from sparse symmetric factorizations with a
fill-reducing (minimum-degree) ordering. sigma2 and any fixed-effect
coefficients are profiled in closed form; the numeric search runs only
over (log kappa2, log lam) with a derivative-free coordinate
golden-section scheme restarted from three deterministic points.

lam = 0 (no nugget) switches to a dense Cholesky path, which is exact but
only viable for small observation counts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ValidationError
from .lattice import BasisMatrix, BasisSpec, LatticeGrid, evaluate_basis
from .meanmodel import ObservationSet
from .sar import ParamFields, build_sar, constant_params, precision
from .simulate import FieldEnsemble

_LOG_2PI = float(np.log(2.0 * np.pi))
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CovParams:
    """Covariance parameters: node fields plus (sigma2, tau2).

    sigma2 scales the latent process, tau2 is the white observation
    noise; their ratio lam = tau2 / sigma2 is what the sparse identities
    consume.
    """

    params: ParamFields
    sigma2: float
    tau2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be finite and positive, got {self.sigma2}")
        if not (np.isfinite(self.tau2) and self.tau2 >= 0):
            raise ValidationError(f"tau2 must be finite and non-negative, got {self.tau2}")

    @property
    def lam(self) -> float:
        return self.tau2 / self.sigma2


def stationary_cov(grid: LatticeGrid, kappa2: float, sigma2: float = 1.0, tau2: float = 0.0) -> CovParams:
    """Constant-parameter CovParams with rho = 1 (five-point stencil)."""
    return CovParams(params=constant_params(grid.m, kappa2), sigma2=sigma2, tau2=tau2)


def _factor_spd(A: sp.spmatrix, what: str):
    """Sparse LU tuned for SPD input; returns (factor, logdet)."""
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise NumericalError(f"{what}: sparse factorization failed ({exc})") from exc
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise NumericalError(
            f"{what}: matrix is not positive definite "
            f"(pivot range [{d.min():.3e}, {d.max():.3e}])"
        )
    return lu, float(np.log(d).sum())


def _as_matrix(Phi) -> sp.csr_matrix:
    return Phi.matrix if isinstance(Phi, BasisMatrix) else sp.csr_matrix(Phi)


class _SparseCore:
    """Factorized posterior algebra for one (Q, Phi, lam) triple, lam > 0."""

    def __init__(self, Q: sp.spmatrix, Phi: sp.csr_matrix, lam: float, q_factor=None):
        if lam <= 0:
            raise ValidationError(f"sparse path needs lam > 0, got {lam}")
        self.Phi = Phi
        self.lam = float(lam)
        self.n = Phi.shape[0]
        self.Q_lu, self.logdet_Q = q_factor if q_factor is not None else _factor_spd(Q, "precision")
        M = (sp.csc_matrix(Q) + (Phi.T @ Phi).tocsc() / lam).tocsc()
        M.sort_indices()
        self.M_lu, self.logdet_M = _factor_spd(M, "posterior system")
        self.logdet_S = self.n * np.log(lam) + self.logdet_M - self.logdet_Q

    def solve_S(self, V: np.ndarray) -> np.ndarray:
        v = np.asarray(V, dtype=float)
        one_d = v.ndim == 1
        v2 = v.reshape(-1, 1) if one_d else v
        out = (v2 - self.Phi @ self.M_lu.solve(self.Phi.T @ v2) / self.lam) / self.lam
        return out.ravel() if one_d else out

    def krig_coef(self, z: np.ndarray) -> np.ndarray:
        """Posterior mean of the coefficient vector given residuals z."""
        return self.M_lu.solve(self.Phi.T @ np.asarray(z, dtype=float)) / self.lam

    def latent_var_diag(self, Phi_t: sp.csr_matrix, chunk: int = 512) -> np.ndarray:
        """diag(Phi_t M^-1 Phi_t^T): posterior latent variance / sigma2."""
        nt = Phi_t.shape[0]
        out = np.empty(nt)
        for lo in range(0, nt, chunk):
            blk = Phi_t[lo : lo + chunk]
            R = self.M_lu.solve(blk.T.toarray())
            out[lo : lo + blk.shape[0]] = np.asarray(blk.multiply(R.T).sum(axis=1)).ravel()
        return out

    def prior_var_diag(self, Phi_t: sp.csr_matrix, chunk: int = 512) -> np.ndarray:
        """diag(Phi_t Q^-1 Phi_t^T): prior latent variance / sigma2."""
        nt = Phi_t.shape[0]
        out = np.empty(nt)
        for lo in range(0, nt, chunk):
            blk = Phi_t[lo : lo + chunk]
            R = self.Q_lu.solve(blk.T.toarray())
            out[lo : lo + blk.shape[0]] = np.asarray(blk.multiply(R.T).sum(axis=1)).ravel()
        return out


class _DenseCore:
    """Zero-nugget posterior algebra; dense in n, so small instances only."""

    _N_MAX = 4000

    def __init__(self, Q: sp.spmatrix, Phi: sp.csr_matrix, q_factor=None):
        n = Phi.shape[0]
        if n > self._N_MAX:
            raise ValidationError(f"zero-nugget path is dense in n; {n} observations exceed {self._N_MAX}")
        self.Phi = Phi
        self.lam = 0.0
        self.n = n
        self.Q_lu, self.logdet_Q = q_factor if q_factor is not None else _factor_spd(Q, "precision")
        self.W = self.Q_lu.solve(Phi.T.toarray())  # Q^-1 Phi^T, (m, n)
        S0 = Phi @ self.W
        S0 = (S0 + S0.T) / 2.0
        try:
            self.cho = scipy.linalg.cho_factor(S0, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "zero-nugget covariance is singular; duplicate or "
                "basis-dependent observation locations"
            ) from exc
        self.logdet_S = 2.0 * float(np.log(np.diag(self.cho[0])).sum())

    def solve_S(self, V: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self.cho, np.asarray(V, dtype=float))

    def krig_coef(self, z: np.ndarray) -> np.ndarray:
        return self.W @ self.solve_S(np.asarray(z, dtype=float))

    def latent_var_diag(self, Phi_t: sp.csr_matrix, chunk: int = 512) -> np.ndarray:
        nt = Phi_t.shape[0]
        out = np.empty(nt)
        for lo in range(0, nt, chunk):
            blk = Phi_t[lo : lo + chunk]
            X = self.Q_lu.solve(blk.T.toarray())
            prior = np.asarray(blk.multiply(X.T).sum(axis=1)).ravel()
            K = blk @ self.W  # rows are phi_t^T Q^-1 Phi_o^T
            red = np.einsum("ij,ij->i", K, self.solve_S(K.T).T)
            out[lo : lo + blk.shape[0]] = prior - red
        return out

    def prior_var_diag(self, Phi_t: sp.csr_matrix, chunk: int = 512) -> np.ndarray:
        nt = Phi_t.shape[0]
        out = np.empty(nt)
        for lo in range(0, nt, chunk):
            blk = Phi_t[lo : lo + chunk]
            X = self.Q_lu.solve(blk.T.toarray())
            out[lo : lo + blk.shape[0]] = np.asarray(blk.multiply(X.T).sum(axis=1)).ravel()
        return out


def _posterior_core(Q, Phi, lam, q_factor=None):
    if lam > 0:
        return _SparseCore(Q, Phi, lam, q_factor=q_factor)
    return _DenseCore(Q, Phi, q_factor=q_factor)


def log_likelihood(obs: ObservationSet, cov: CovParams, grid: LatticeGrid, spec: BasisSpec) -> float:
    """Exact log density of the (residualized) observations under cov.

    The values in obs are treated as zero-mean residuals; fit the mean
    model first and pass its residuals here.
    """
    Phi = evaluate_basis(grid, spec, obs.locations).matrix
    Q = precision(build_sar(grid, cov.params))
    core = _posterior_core(Q, Phi, cov.lam)
    z = obs.values
    quad = float(z @ core.solve_S(z))
    n = z.size
    return -0.5 * (n * _LOG_2PI + n * np.log(cov.sigma2) + core.logdet_S + quad / cov.sigma2)


def _gls_pieces(core, z: np.ndarray, X: np.ndarray | None):
    """GLS coefficient, residual, and quadratic form for one day."""
    if X is None:
        Sz = core.solve_S(z)
        return None, float(z @ Sz)
    SX = core.solve_S(X)
    A = X.T @ SX
    b = X.T @ core.solve_S(z)
    try:
        beta = scipy.linalg.solve(A, b, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError("GLS normal equations are singular") from exc
    r = z - X @ beta
    return beta, float(r @ core.solve_S(r))


def profile_loglik(
    obs,
    grid: LatticeGrid,
    spec: BasisSpec,
    params: ParamFields,
    lam: float,
    phis: list | None = None,
) -> tuple:
    """Profile log-likelihood at fixed (params, lam), pooling replicate days.

    sigma2 is profiled in closed form across all days jointly; each day's
    fixed effects (obs.covariates, when present) are profiled by GLS.
    Returns (loglik, sigma2_hat, betas).
    """
    days = list(obs) if isinstance(obs, (list, tuple)) else [obs]
    if not days:
        raise ValidationError("no observation days supplied")
    if phis is None:
        phis = [evaluate_basis(grid, spec, d.locations).matrix for d in days]
    Q = precision(build_sar(grid, params))
    q_factor = _factor_spd(Q, "precision")

    total_n = 0
    total_logdet = 0.0
    total_quad = 0.0
    betas = []
    for d, Phi in zip(days, phis):
        core = _posterior_core(Q, Phi, lam, q_factor=q_factor)
        beta, quad = _gls_pieces(core, d.values, d.covariates)
        betas.append(beta)
        total_n += d.n
        total_logdet += core.logdet_S
        total_quad += quad
    p_total = sum(0 if d.covariates is None else d.covariates.shape[1] for d in days)
    if total_n <= p_total:
        raise ValidationError(f"{total_n} observations cannot profile {p_total} mean coefficients and sigma2")
    sigma2 = total_quad / total_n
    if not sigma2 > 0:
        raise NumericalError("profiled sigma2 is not positive; residuals are degenerate")
    ll = -0.5 * (total_n * _LOG_2PI + total_n * np.log(sigma2) + total_logdet + total_n)
    return float(ll), float(sigma2), betas


@dataclass(frozen=True)
class SearchConfig:
    """Bounded derivative-free search settings.

    Bounds are in log space. restarts deterministic: the optimizer
    launches one coordinate-descent pass per starting fraction pair.
    """

    log_kappa2_bounds: tuple = (-12.0, 4.0)
    log_lambda_bounds: tuple = (-10.0, 6.0)
    sweeps: int = 10
    tol: float = 1e-3
    start_fracs: tuple = ((0.5, 0.5), (0.25, 0.75), (0.75, 0.25))
    boundary_frac: float = 1e-3

    def __post_init__(self):
        for name in ("log_kappa2_bounds", "log_lambda_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValidationError(f"{name} must be ordered, got ({lo}, {hi})")
        if self.sweeps < 1:
            raise ValidationError("sweeps must be >= 1")
        if not self.start_fracs:
            raise ValidationError("need at least one starting point")


@dataclass(frozen=True)
class MleResult:
    """Fit output: parameters, profile likelihood, and search diagnostics."""

    cov: CovParams
    loglik: float
    converged: bool
    boundary: tuple
    history: tuple
    n_eval: int
    betas: tuple = ()


def _golden_max(f, lo: float, hi: float, tol: float, max_iter: int = 100):
    """Golden-section maximization of f on [lo, hi]."""
    a, b = float(lo), float(hi)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while (b - a) > tol and it < max_iter:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        it += 1
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _coordinate_max(f, bounds, cfg: SearchConfig):
    """Coordinate golden-section over a box with deterministic restarts.

    Returns (best_point, best_value, history, n_eval, converged). f is
    memoized so repeated probes at identical points are free.
    """
    cache: dict = {}
    n_eval = [0]

    def fc(pt):
        if pt not in cache:
            n_eval[0] += 1
            cache[pt] = f(pt)
        return cache[pt]

    spans = [hi - lo for lo, hi in bounds]
    history = []
    best_pt, best_val = None, -np.inf
    converged = False
    for fracs in cfg.start_fracs:
        x = [lo + fr * (hi - lo) for (lo, hi), fr in zip(bounds, fracs)]
        val = fc(tuple(x))
        settled = False
        for sweep in range(cfg.sweeps):
            prev_val, prev_x = val, list(x)
            for dim in range(len(bounds)):
                lo, hi = bounds[dim]
                if sweep >= 2:
                    # Later sweeps refine locally; the window halves each
                    # sweep so ridge-following stays cheap.
                    hw = max(spans[dim] * 0.25 * 0.5 ** (sweep - 2), 4.0 * cfg.tol * spans[dim])
                    lo = max(lo, x[dim] - hw)
                    hi = min(hi, x[dim] + hw)

                def along(t, _dim=dim):
                    y = list(x)
                    y[_dim] = t
                    return fc(tuple(y))

                x[dim], val = _golden_max(along, lo, hi, cfg.tol * spans[dim])
            history.append((tuple(x), val))
            # Settled when a sweep stops moving the point (beyond the
            # golden-section resolution) or improving the value.
            move = max(abs(a - b) / s for a, b, s in zip(x, prev_x, spans))
            if sweep > 0 and (
                move <= 2.0 * cfg.tol or abs(val - prev_val) <= 1e-6 * (1.0 + abs(val))
            ):
                settled = True
                break
        if val > best_val:
            best_pt, best_val = tuple(x), val
            converged = settled
    return best_pt, best_val, tuple(history), n_eval[0], converged


def _boundary_flags(point, bounds, names, frac):
    flags = []
    for x, (lo, hi), name in zip(point, bounds, names):
        span = hi - lo
        if x - lo <= frac * span:
            flags.append(f"{name}_lower")
        elif hi - x <= frac * span:
            flags.append(f"{name}_upper")
    return tuple(flags)


def fit_stationary_mle(obs, grid: LatticeGrid, spec: BasisSpec, search: SearchConfig | None = None) -> MleResult:
    """Maximum-likelihood (kappa2, lam) for the stationary (rho=1) model.

    obs may be a single ObservationSet or a list pooled under shared
    covariance parameters (sigma2 pooled, fixed effects per day).
    """
    cfg = search or SearchConfig()
    days = list(obs) if isinstance(obs, (list, tuple)) else [obs]
    if sum(d.n for d in days) < 3:
        raise ValidationError("need at least 3 pooled observations")
    phis = [evaluate_basis(grid, spec, d.locations).matrix for d in days]

    def objective(point):
        k2 = float(np.exp(point[0]))
        lam = float(np.exp(point[1]))
        try:
            return profile_loglik(days, grid, spec, constant_params(grid.m, k2), lam, phis=phis)[0]
        except NumericalError:
            return -np.inf

    bounds = [cfg.log_kappa2_bounds, cfg.log_lambda_bounds]
    point, _, history, n_eval, converged = _coordinate_max(objective, bounds, cfg)
    k2 = float(np.exp(point[0]))
    lam = float(np.exp(point[1]))
    params = constant_params(grid.m, k2)
    ll, sigma2, betas = profile_loglik(days, grid, spec, params, lam, phis=phis)
    flags = _boundary_flags(point, bounds, ("log_kappa2", "log_lambda"), cfg.boundary_frac)
    return MleResult(
        cov=CovParams(params=params, sigma2=sigma2, tau2=lam * sigma2),
        loglik=ll,
        converged=converged and not flags,
        boundary=flags,
        history=history,
        n_eval=n_eval,
        betas=tuple(b for b in betas),
    )


def _pooled_profile(days, phis, Q, q_factor, lam):
    """(loglik, sigma2, betas) at fixed lam, reusing a precision factor."""
    total_n = 0
    total_logdet = 0.0
    total_quad = 0.0
    betas = []
    for d, Phi in zip(days, phis):
        core = _SparseCore(Q, Phi, lam, q_factor=q_factor)
        beta, quad = _gls_pieces(core, d.values, d.covariates)
        betas.append(beta)
        total_n += d.n
        total_logdet += core.logdet_S
        total_quad += quad
    sigma2 = total_quad / total_n
    if not sigma2 > 0:
        raise NumericalError("profiled sigma2 is not positive")
    ll = -0.5 * (total_n * _LOG_2PI + total_n * np.log(sigma2) + total_logdet + total_n)
    return float(ll), float(sigma2), betas


def max_over_lambda(days, phis, Q, q_factor, cfg: SearchConfig):
    """Golden-section over log lam at fixed structure; returns (ll, lam, sigma2, betas)."""
    cache: dict = {}

    def objective(loglam):
        if loglam not in cache:
            try:
                cache[loglam] = _pooled_profile(days, phis, Q, q_factor, float(np.exp(loglam)))[0]
            except NumericalError:
                cache[loglam] = -np.inf
        return cache[loglam]

    lo, hi = cfg.log_lambda_bounds
    xbest, _ = _golden_max(objective, lo, hi, cfg.tol * (hi - lo))
    lam = float(np.exp(xbest))
    ll, sigma2, betas = _pooled_profile(days, phis, Q, q_factor, lam)
    return ll, lam, sigma2, betas, len(cache)


def fit_lambda_mle(obs, params: ParamFields, grid: LatticeGrid, spec: BasisSpec, search: SearchConfig | None = None) -> MleResult:
    """Fit only the noise ratio lam for fixed structure parameters.

    The precision factorization is shared across all probes, so each
    evaluation costs one posterior-system factorization.
    """
    cfg = search or SearchConfig()
    days = list(obs) if isinstance(obs, (list, tuple)) else [obs]
    phis = [evaluate_basis(grid, spec, d.locations).matrix for d in days]
    Q = precision(build_sar(grid, params))
    q_factor = _factor_spd(Q, "precision")
    ll, lam, sigma2, betas, n_eval = max_over_lambda(days, phis, Q, q_factor, cfg)
    xbest = float(np.log(lam))
    flags = _boundary_flags((xbest,), [cfg.log_lambda_bounds], ("log_lambda",), cfg.boundary_frac)
    return MleResult(
        cov=CovParams(params=params, sigma2=sigma2, tau2=lam * sigma2),
        loglik=ll,
        converged=not flags,
        boundary=flags,
        history=((xbest, ll),),
        n_eval=n_eval,
        betas=tuple(betas),
    )


def mle_small_grid_oracle(ens: FieldEnsemble, grid: LatticeGrid, spec: BasisSpec, kappa2s, rhos, thetas):
    """Exhaustive constant-parameter MLE over a candidate product grid.

    Test and diagnostic tool only: requires the basis lattice to coincide
    with the pixel grid (buffer 0), so the basis matrix is square and the
    replicate likelihood reduces to sparse solves against it. Intended
    for raw (unstandardized) ensembles. Returns (ParamFields, info dict).
    """
    if grid.buffer != 0:
        raise ValidationError("oracle requires buffer=0 (square basis matrix)")
    if grid.nx > 16 or grid.ny > 16:
        raise ValidationError(f"oracle is exhaustive; lattice {grid.nx}x{grid.ny} exceeds 16x16")
    if ens.shape != (grid.ny, grid.nx):
        raise ValidationError(f"ensemble grid {ens.shape} does not match lattice {(grid.ny, grid.nx)}")
    if ens.r == 1:
        warnings.warn("r=1: replicate likelihood is nearly flat; expect unstable selection")

    kappa2s = np.atleast_1d(np.asarray(kappa2s, dtype=float))
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    m = grid.m
    r = ens.r
    Z = ens.values.reshape(r, m)

    Phi = evaluate_basis(grid, spec, grid.interior_points()).matrix
    try:
        phi_lu = spla.splu(sp.csc_matrix(Phi))
    except RuntimeError as exc:
        raise NumericalError(f"basis matrix factorization failed: {exc}") from exc
    W = phi_lu.solve(Z.T)  # (m, r): coefficient reconstructions

    scores = np.full((kappa2s.size, rhos.size, thetas.size), -np.inf)
    best = (-np.inf, None, None)
    for i, k2 in enumerate(kappa2s):
        for j, rho in enumerate(rhos):
            for k, th in enumerate(thetas):
                params = ParamFields(
                    kappa2=np.full(m, k2), rho=np.full(m, rho), theta=np.full(m, th)
                )
                Q = precision(build_sar(grid, params))
                _, logdet_Q = _factor_spd(Q, "candidate precision")
                quad = float(np.einsum("mr,mr->", W, Q @ W))
                sigma2 = quad / (r * m)
                score = r * logdet_Q - r * m * np.log(sigma2)
                scores[i, j, k] = score
                if score > best[0]:
                    best = (score, (i, j, k), sigma2)

    i, j, k = best[1]
    params = ParamFields(
        kappa2=np.full(m, kappa2s[i]), rho=np.full(m, rhos[j]), theta=np.full(m, thetas[k])
    )
    info = {"scores": scores, "index": (int(i), int(j), int(k)), "sigma2": best[2]}
    return params, info
