"""Experiment drivers: windows, gridded mean, reconstruction, CV, fine maps.

Conventions shared by every driver: grids are row-major with rows
advancing along +y; day sequences are index-addressed (calendar padding
is the caller's job); all randomness flows from named integer seeds; and
JSON outputs are written with sorted keys and no timestamps, so a rerun
with identical inputs is byte-identical.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .config import VARIANTS
from .cosp import WeightMask, refine_kappa_point
from .errors import NumericalError, ValidationError
from .gridstack import GridStack
from .kriging import KrigingModel
from .lattice import BasisSpec, LatticeGrid
from .likelihood import SearchConfig, fit_lambda_mle, fit_stationary_mle
from .meanmodel import ObservationSet, fit_mean_arx1
from .rng import substream
from .sar import ParamFields
from .simulate import FieldEnsemble, standardize_ensemble
from .uq import (
    ConditionalEnsemble,
    compute_metrics,
    compute_metrics_from_ensemble,
    conditional_simulate,
    kfold_assign,
    summarize_uncertainty,
)

_D_MASK = 0x3A


def pixel_centers(bounds, h: int, w: int) -> np.ndarray:
    """Node-aligned pixel coordinates: row-major (h*w, 2), rows along +y."""
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, w)
    ys = np.linspace(ymin, ymax, h)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def build_window_ensembles(fields, t, before: int = 15, after: int = 14) -> FieldEnsemble:
    """Standardized ensemble of the days in [t-before, t+after].

    fields is either a mapping day -> 2-D array or a (T, h, w) array
    indexed by position. Gaps abort with the list of missing days.
    """
    wanted = list(range(t - before, t + after + 1))
    if isinstance(fields, Mapping):
        missing = [d for d in wanted if d not in fields]
        if missing:
            raise ValidationError(f"window around day {t} is missing days {missing}")
        arrs = [np.asarray(fields[d], dtype=float) for d in wanted]
    else:
        arr = np.asarray(fields, dtype=float)
        missing = [d for d in wanted if not 0 <= d < arr.shape[0]]
        if missing:
            raise ValidationError(f"window around day {t} is missing days {missing}")
        arrs = [arr[d] for d in wanted]
    return standardize_ensemble(FieldEnsemble(values=np.stack(arrs)))


def fit_gridded_day(values, lag, covariates, bounds):
    """Per-day pixel regression on intercept, lon, lat, covariates, lagged grid.

    Returns (residual grid, RegressionFit). covariates maps channel name
    to a 2-D grid aligned with values.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValidationError(f"values grid must be 2-D, got {v.shape}")
    if lag is None:
        raise ValidationError("missing lag day: the previous day's grid is required")
    h, w = v.shape
    pts = pixel_centers(bounds, h, w)
    cols = [np.ones(h * w), pts[:, 0], pts[:, 1]]
    names = ["intercept", "lon", "lat"]
    for name in sorted(covariates or {}):
        c = np.asarray(covariates[name], dtype=float)
        if c.shape != (h, w):
            raise ValidationError(f"covariate {name!r} has shape {c.shape}, expected {(h, w)}")
        cols.append(c.ravel())
        names.append(name)
    obs = ObservationSet(
        locations=pts,
        values=v.ravel(),
        covariates=np.column_stack(cols),
        lag_values=np.asarray(lag, dtype=float).ravel(),
        covariate_names=tuple(names),
    )
    fit = fit_mean_arx1(obs)
    return fit.residuals.reshape(h, w), fit


def fit_gridded_mean(values, covariates, bounds):
    """Run fit_gridded_day over days 1..T-1 of a (T, h, w) stack.

    Returns (residual stack of shape (T-1, h, w), list of fits); the
    residual at index i belongs to input day i+1. Per-day covariates may
    be (T, h, w); static ones (h, w).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 3 or arr.shape[0] < 2:
        raise ValidationError(f"need a (T>=2, h, w) stack, got {arr.shape}")
    resids, fits = [], []
    for t in range(1, arr.shape[0]):
        cov_t = {
            name: (c[t] if np.asarray(c).ndim == 3 else c)
            for name, c in (covariates or {}).items()
        }
        r, fit = fit_gridded_day(arr[t], arr[t - 1], cov_t, bounds)
        resids.append(r)
        fits.append(fit)
    return np.stack(resids), fits


def select_observed_pixels(h: int, w: int, frac: float, seed: int) -> np.ndarray:
    """Sorted flat indices of a random fraction of pixels."""
    if not 0 < frac < 1:
        raise ValidationError(f"observed fraction must be in (0,1), got {frac}")
    npix = h * w
    k = max(1, int(round(frac * npix)))
    idx = substream(seed, _D_MASK).choice(npix, size=k, replace=False)
    idx.sort()
    return idx


def _strip_mean(obs: ObservationSet):
    """OLS mean fit (when a design is present) and the residual-only set."""
    if obs.covariates is None:
        return None, obs
    mfit = fit_mean_arx1(obs)
    robs = ObservationSet(locations=obs.locations, values=mfit.residuals, day_id=obs.day_id)
    return mfit, robs


def fit_day_variant(
    obs: ObservationSet,
    grid: LatticeGrid,
    spec: BasisSpec,
    variant: str,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    search: SearchConfig | None = None,
):
    """Fit one model variant on one day and return a ready KrigingModel.

    The mean model (if obs carries covariates) is removed by OLS first;
    the covariance fit runs on the residuals. Returns (model, fit_result,
    extras) where extras holds variant-specific values such as the
    refined kappa offset.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    mfit, robs = _strip_mean(obs)
    extras = {}
    if variant == "stationary":
        res = fit_stationary_mle(robs, grid, spec, search)
        cov = res.cov
    else:
        if base_params is None:
            raise ValidationError(f"variant {variant!r} needs base parameter fields")
        if variant == "nonstationary":
            res = fit_lambda_mle(robs, base_params, grid, spec, search)
            cov = res.cov
        else:
            use_mask = mask if mask is not None else WeightMask(np.ones(grid.m))
            delta, cov, res = refine_kappa_point(robs, base_params, use_mask, grid, spec, search)
            extras["kappa_point"] = delta
    model = KrigingModel(obs, cov, grid, spec, mean_fit=mfit)
    return model, res, extras


def reconstruct_day(
    field,
    obs_idx,
    grid: LatticeGrid,
    spec: BasisSpec,
    bounds,
    variants,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    search: SearchConfig | None = None,
) -> dict:
    """Fit each variant on the observed pixels and score the held-out ones.

    field is the full (h, w) truth; obs_idx are flat indices of observed
    pixels. Returns per-variant dicts with the held-out RMSE and the
    full predicted grid.
    """
    f = np.asarray(field, dtype=float)
    h, w = f.shape
    idx = np.asarray(obs_idx, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= h * w:
        raise ValidationError(f"observed-pixel indices out of range for a {h}x{w} grid")
    held = np.setdiff1d(np.arange(h * w), idx)
    if held.size == 0:
        raise ValidationError("all pixels observed; no held-out set to score")
    pts = pixel_centers(bounds, h, w)
    obs = ObservationSet(locations=pts[idx], values=f.ravel()[idx])

    out = {}
    for name in variants:
        model, res, extras = fit_day_variant(obs, grid, spec, name, base_params, mask, search)
        pred = model.predict(pts, compute_se=False)
        rmse = float(np.sqrt(np.mean((pred.mean[held] - f.ravel()[held]) ** 2)))
        out[name] = {"rmse": rmse, "pred": pred.mean.reshape(h, w), "fit": res, **extras}
    return out


def run_reconstruction(
    fields,
    grid: LatticeGrid,
    spec: BasisSpec,
    bounds,
    variants=("stationary", "nonstationary"),
    frac: float = 0.03,
    seed: int = 0,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    search: SearchConfig | None = None,
) -> dict:
    """Masked-reconstruction experiment over a (T, h, w) stack of truths.

    Each day gets its own random observed-pixel mask. Emits per-day RMSE
    per variant and, when both are run, the percent-difference series
    (nonstationary / stationary - 1) * 100.
    """
    arr = np.asarray(fields, dtype=float)
    if arr.ndim != 3:
        raise ValidationError(f"need a (T, h, w) stack, got {arr.shape}")
    T, h, w = arr.shape
    per_day = []
    for t in range(T):
        idx = select_observed_pixels(h, w, frac, substream(seed, t).integers(2**63))
        rec = reconstruct_day(arr[t], idx, grid, spec, bounds, variants, base_params, mask, search)
        per_day.append({"day": t, "rmse": {v: rec[v]["rmse"] for v in variants}})
    summary = {
        "per_day": per_day,
        "mean_rmse": {
            v: float(np.mean([d["rmse"][v] for d in per_day])) for v in variants
        },
        "frac_observed": frac,
        "n_days": T,
    }
    if "stationary" in variants and "nonstationary" in variants:
        diffs = [
            (d["rmse"]["nonstationary"] / d["rmse"]["stationary"] - 1.0) * 100.0
            for d in per_day
        ]
        summary["percent_diff"] = diffs
        summary["days_nonstationary_better"] = int(sum(x < 0 for x in diffs))
    return summary


def run_station_day(
    obs: ObservationSet,
    grid: LatticeGrid,
    spec: BasisSpec,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    variants=VARIANTS,
    search: SearchConfig | None = None,
) -> dict:
    """Fit the requested variants on one day of station data.

    Per-variant failures are recorded and do not stop the others. The
    diagnostics block compares fitted log kappa2 levels over masked
    (land) nodes.
    """
    out = {"fits": {}, "models": {}, "extras": {}, "errors": {}, "diagnostics": {}}
    for name in variants:
        try:
            model, res, extras = fit_day_variant(obs, grid, spec, name, base_params, mask, search)
        except (ValidationError, NumericalError) as exc:
            out["errors"][name] = str(exc)
            continue
        out["fits"][name] = res
        out["models"][name] = model
        out["extras"][name] = extras

    land = None
    if mask is not None:
        land = mask.values > 0
    elif base_params is not None:
        land = np.ones(base_params.m, dtype=bool)
    fits = out["fits"]
    if land is not None and "nonstationary_adjusted" in fits and base_params is not None:
        adj = fits["nonstationary_adjusted"].cov.params.kappa2
        out["diagnostics"]["mean_log_kappa2_adj_minus_base"] = float(
            np.mean(np.log(adj[land]) - np.log(base_params.kappa2[land]))
        )
        if "stationary" in fits:
            stat_k2 = fits["stationary"].cov.params.kappa2
            out["diagnostics"]["mean_log_kappa2_adj_minus_stationary"] = float(
                np.mean(np.log(adj[land]) - np.log(stat_k2[land]))
            )
    return out


def _subset_obs(obs: ObservationSet, idx: np.ndarray) -> ObservationSet:
    return ObservationSet(
        locations=obs.locations[idx],
        values=obs.values[idx],
        covariates=None if obs.covariates is None else obs.covariates[idx],
        lag_values=None if obs.lag_values is None else obs.lag_values[idx],
        day_id=obs.day_id,
        covariate_names=obs.covariate_names,
        station_ids=None if obs.station_ids is None else tuple(np.asarray(obs.station_ids)[idx]),
    )


def cv_day(
    obs: ObservationSet,
    grid: LatticeGrid,
    spec: BasisSpec,
    k: int,
    seed: int,
    variants=VARIANTS,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    search: SearchConfig | None = None,
    level: float = 0.95,
    picp_intervals: str = "gaussian",
    n_draws: int = 0,
) -> dict:
    """k-fold fit-and-predict on one day.

    Held-out predictions use the observed-quantity SE (nugget included).
    Returns per-variant pooled (pred, se, truth) arrays plus fold errors;
    a fold is skipped on failure, the day fails only if every fold does.
    """
    if k < 2:
        raise ValidationError(f"cross-validation needs k >= 2, got {k}")
    folds = kfold_assign(obs.n, k, seed)
    use_ensemble = picp_intervals == "ensemble" and n_draws >= 2
    pool = {v: {"pred": [], "se": [], "truth": [], "draws": [], "loc": []} for v in variants}
    fold_errors = {}
    for f in range(k):
        test_idx = folds.indices(f)
        train_idx = np.setdiff1d(np.arange(obs.n), test_idx)
        train, test = _subset_obs(obs, train_idx), _subset_obs(obs, test_idx)
        try:
            for name in variants:
                model, _, _ = fit_day_variant(train, grid, spec, name, base_params, mask, search)
                if use_ensemble:
                    ens = conditional_simulate(
                        model, test.locations, n_draws, seed + 1000 * (f + 1),
                        target_design=test.covariates, target_lag=test.lag_values,
                        include_nugget=True,
                    )
                    mu, se = summarize_uncertainty(ens)
                    pool[name]["draws"].append(ens.draws)
                    pool[name]["loc"].append(test.locations)
                else:
                    res = model.predict(
                        test.locations,
                        target_design=test.covariates,
                        target_lag=test.lag_values,
                        include_nugget=True,
                    )
                    mu, se = res.mean, res.se
                pool[name]["pred"].append(mu)
                pool[name]["se"].append(se)
                pool[name]["truth"].append(test.values)
        except (ValidationError, NumericalError) as exc:
            fold_errors[f] = str(exc)
            continue
    if len(fold_errors) == k:
        raise NumericalError(f"all {k} folds failed on day {obs.day_id!r}: {fold_errors}")
    out = {"fold_errors": fold_errors, "pooled": {}, "metrics": {}}
    for name in variants:
        p = pool[name]
        pred = np.concatenate(p["pred"]) if p["pred"] else np.empty(0)
        se = np.concatenate(p["se"]) if p["se"] else np.empty(0)
        truth = np.concatenate(p["truth"]) if p["truth"] else np.empty(0)
        out["pooled"][name] = {"pred": pred, "se": se, "truth": truth}
        if use_ensemble and p["draws"]:
            ens = ConditionalEnsemble(
                targets=np.concatenate(p["loc"], axis=0),
                draws=np.concatenate(p["draws"], axis=1),
                seed=int(seed),
                metadata={"pooled_folds": k - len(fold_errors)},
            )
            out["metrics"][name] = compute_metrics_from_ensemble(ens, truth, level).as_dict()
        else:
            out["metrics"][name] = compute_metrics(pred, se, truth, level).as_dict()
    return out


def run_cv(
    days,
    grid: LatticeGrid,
    spec: BasisSpec,
    k: int,
    seed: int,
    variants=VARIANTS,
    base_params: ParamFields | None = None,
    mask: WeightMask | None = None,
    search: SearchConfig | None = None,
    level: float = 0.95,
    picp_intervals: str = "gaussian",
    n_draws: int = 0,
) -> dict:
    """Cross-validation over many days, pooled into one metrics table.

    The table is keyed variant -> {rmse, picp, mpiw, n}; failed days are
    listed with their error and excluded from the pool.
    """
    pools = {v: {"pred": [], "se": [], "truth": []} for v in variants}
    per_day = []
    skipped = []
    for i, obs in enumerate(days):
        try:
            res = cv_day(
                obs, grid, spec, k, seed + i, variants, base_params, mask, search,
                level, picp_intervals, n_draws,
            )
        except (ValidationError, NumericalError) as exc:
            skipped.append({"day": obs.day_id, "error": str(exc)})
            continue
        per_day.append({"day": obs.day_id, "metrics": res["metrics"]})
        for v in variants:
            for key in ("pred", "se", "truth"):
                pools[v][key].append(res["pooled"][v][key])
    table = {}
    for v in variants:
        if not pools[v]["pred"]:
            continue
        pred = np.concatenate(pools[v]["pred"])
        se = np.concatenate(pools[v]["se"])
        truth = np.concatenate(pools[v]["truth"])
        table[v] = compute_metrics(pred, se, truth, level).as_dict()
    return {
        "table": table,
        "per_day": per_day,
        "skipped_days": skipped,
        "k": k,
        "level": level,
        "interval_mode": picp_intervals,
    }


def resample_nearest(src, src_bounds, tgt_shape, tgt_bounds) -> np.ndarray:
    """Nearest-neighbor resample between node-aligned grids.

    Equidistant ties break toward the lower source index.
    """
    a = np.asarray(src, dtype=float)
    hs, ws = a.shape
    ht, wt = tgt_shape
    xmin, xmax, ymin, ymax = src_bounds
    txmin, txmax, tymin, tymax = tgt_bounds
    xs = np.linspace(txmin, txmax, wt)
    ys = np.linspace(tymin, tymax, ht)
    ux = (xs - xmin) / ((xmax - xmin) / (ws - 1)) if ws > 1 else np.zeros(wt)
    uy = (ys - ymin) / ((ymax - ymin) / (hs - 1)) if hs > 1 else np.zeros(ht)
    ix = np.clip(np.ceil(ux - 0.5).astype(np.int64), 0, ws - 1)
    iy = np.clip(np.ceil(uy - 0.5).astype(np.int64), 0, hs - 1)
    return a[np.ix_(iy, ix)]


def resample_average(src, src_bounds, tgt_shape, tgt_bounds) -> np.ndarray:
    """Block-average resample: each target cell averages the source pixels
    nearest to it; cells that capture none fall back to nearest-neighbor."""
    a = np.asarray(src, dtype=float)
    hs, ws = a.shape
    ht, wt = tgt_shape
    xmin, xmax, ymin, ymax = src_bounds
    txmin, txmax, tymin, tymax = tgt_bounds
    sx = np.linspace(xmin, xmax, ws)
    sy = np.linspace(ymin, ymax, hs)
    vx = (sx - txmin) / ((txmax - txmin) / (wt - 1)) if wt > 1 else np.zeros(ws)
    vy = (sy - tymin) / ((tymax - tymin) / (ht - 1)) if ht > 1 else np.zeros(hs)
    jx = np.clip(np.ceil(vx - 0.5).astype(np.int64), 0, wt - 1)
    jy = np.clip(np.ceil(vy - 0.5).astype(np.int64), 0, ht - 1)
    flat = jy[:, None] * wt + jx[None, :]
    sums = np.bincount(flat.ravel(), weights=a.ravel(), minlength=ht * wt)
    counts = np.bincount(flat.ravel(), minlength=ht * wt)
    out = np.full(ht * wt, np.nan)
    got = counts > 0
    out[got] = sums[got] / counts[got]
    out = out.reshape(ht, wt)
    if not np.all(got):
        fallback = resample_nearest(a, src_bounds, tgt_shape, tgt_bounds)
        out = np.where(np.isfinite(out), out, fallback)
    return out


def run_predict_fine(
    model: KrigingModel,
    tgt_bounds,
    tgt_shape,
    covariates: dict | None = None,
    lag=None,
    average_channels=("elevation",),
    n_draws: int = 0,
    seed: int = 0,
) -> dict:
    """Mean map and SE map on a finer target grid.

    covariates maps channel name -> (array, bounds) on the source grid;
    channels listed in average_channels are block-averaged, the rest
    resampled nearest-neighbor. When the model carries a mean fit, all
    its named covariate channels beyond intercept/lon/lat must be
    supplied. SE comes from conditional simulation when n_draws >= 2,
    else from the exact posterior variance.
    """
    ht, wt = int(tgt_shape[0]), int(tgt_shape[1])
    pts = pixel_centers(tgt_bounds, ht, wt)
    design = None
    lag_t = None
    if model.mean_fit is not None:
        fit = model.mean_fit
        names = list(model.obs.covariate_names or [f"x{j}" for j in range(fit.beta.shape[0])])
        cols = []
        missing = []
        for name in names:
            if name == "intercept":
                cols.append(np.ones(ht * wt))
            elif name == "lon":
                cols.append(pts[:, 0])
            elif name == "lat":
                cols.append(pts[:, 1])
            elif covariates and name in covariates:
                arr, b = covariates[name]
                rs = resample_average if name in average_channels else resample_nearest
                cols.append(rs(arr, b, (ht, wt), tgt_bounds).ravel())
            else:
                missing.append(name)
        if missing:
            raise ValidationError(f"fine-grid prediction lacks covariate channels {missing}")
        design = np.column_stack(cols)
        if fit.alpha is not None:
            if lag is None:
                raise ValidationError("mean model has a lag term; pass lag=(array, bounds)")
            arr, b = lag
            lag_t = resample_nearest(arr, b, (ht, wt), tgt_bounds).ravel()

    mean_res = model.predict(pts, target_design=design, target_lag=lag_t, compute_se=False)
    if n_draws >= 2:
        ens = conditional_simulate(model, pts, n_draws, seed, target_design=design, target_lag=lag_t)
        _, se = summarize_uncertainty(ens)
    else:
        se = model.predict(pts, target_design=design, target_lag=lag_t, compute_se=True).se
    xmin, xmax, ymin, ymax = tgt_bounds
    spacing = ((xmax - xmin) / max(wt - 1, 1), (ymax - ymin) / max(ht - 1, 1))
    mean_stack = GridStack(
        channels=("mean",), values=mean_res.mean.reshape(1, ht, wt),
        origin=(xmin, ymin), spacing=spacing,
        metadata={"kind": "prediction-mean", "n_draws": n_draws, "seed": seed},
    )
    se_stack = GridStack(
        channels=("se",), values=se.reshape(1, ht, wt),
        origin=(xmin, ymin), spacing=spacing,
        metadata={"kind": "prediction-se", "n_draws": n_draws, "seed": seed},
    )
    return {"mean": mean_stack, "se": se_stack}


_VIRIDIS = (
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
)


def _apply_colormap(u: np.ndarray, name: str) -> np.ndarray:
    """Map unit values to RGB; u is (h, w) in [0, 1]."""
    if name == "gray":
        g = np.round(u * 255).astype(np.uint8)
        return np.stack([g, g, g], axis=-1)
    if name == "viridis":
        stops = np.array([s for s, _ in _VIRIDIS])
        cols = np.array([c for _, c in _VIRIDIS], dtype=float)
        rgb = np.empty(u.shape + (3,), dtype=np.uint8)
        for ch in range(3):
            rgb[..., ch] = np.round(np.interp(u, stops, cols[:, ch])).astype(np.uint8)
        return rgb
    raise ValidationError(f"unknown colormap {name!r}; use gray or viridis")


def render_png(
    stack: GridStack,
    channel: str,
    out_path,
    vmin: float | None = None,
    vmax: float | None = None,
    colormap: str = "viridis",
    nan_mode: str = "transparent",
) -> dict:
    """Write one channel as an 8-bit PNG with a linear value ramp.

    Row 0 of the grid (lowest y) lands at the bottom of the image. NaNs
    become transparent pixels or a sentinel magenta, per nan_mode. A
    sidecar JSON (<out>.json) records the ramp and the channel stats.
    Returns the sidecar dict.
    """
    from PIL import Image

    arr = stack.channel(channel)
    finite = np.isfinite(arr)
    if not finite.any():
        raise ValidationError(f"channel {channel!r} has no finite values to render")
    lo = float(np.min(arr[finite])) if vmin is None else float(vmin)
    hi = float(np.max(arr[finite])) if vmax is None else float(vmax)
    span = hi - lo
    u = np.zeros_like(arr)
    if span > 0:
        u = np.clip((np.where(finite, arr, lo) - lo) / span, 0.0, 1.0)
    rgb = _apply_colormap(u, colormap)
    alpha = np.full(arr.shape, 255, dtype=np.uint8)
    if nan_mode == "transparent":
        alpha[~finite] = 0
    elif nan_mode == "sentinel":
        rgb[~finite] = (255, 0, 255)
    else:
        raise ValidationError(f"nan_mode must be transparent or sentinel, got {nan_mode!r}")
    rgba = np.dstack([rgb, alpha])[::-1]  # north up
    Image.fromarray(rgba, "RGBA").save(out_path)
    sidecar = {
        "channel": channel,
        "vmin": lo,
        "vmax": hi,
        "channel_min": float(np.min(arr[finite])),
        "channel_max": float(np.max(arr[finite])),
        "h": stack.h,
        "w": stack.w,
        "colormap": colormap,
        "nan_mode": nan_mode,
        "nan_count": int((~finite).sum()),
    }
    with open(f"{out_path}.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(sidecar, sort_keys=True, indent=2))
        fh.write("\n")
    return sidecar


def write_metrics_json(data: dict, path) -> None:
    """Deterministic JSON dump: sorted keys, two-space indent, no timestamps."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(data, sort_keys=True, indent=2))
        fh.write("\n")
