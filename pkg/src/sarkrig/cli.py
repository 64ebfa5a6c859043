"""Command-line entry point.

Subcommands wrap the library drivers one-to-one; every command accepts
--config (JSON file) plus repeated --set section.key=value overrides,
with explicit flags winning over both. Exit codes: 0 success, 2 invalid
inputs or configuration, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import RunConfig, config_to_dict, load_config
from .cosp import mask_from_stack
from .errors import NumericalError, ValidationError
from .gridstack import GridStack, params_from_stack, read_gridstack, write_gridstack
from .lattice import evaluate_basis
from .likelihood import SearchConfig
from .pipeline import (
    build_window_ensembles,
    fit_day_variant,
    fit_gridded_mean,
    pixel_centers,
    render_png,
    run_cv,
    run_predict_fine,
    run_reconstruction,
    run_station_day,
    write_metrics_json,
)
from .sar import build_sar, constant_params
from .simulate import (
    ensemble_to_stack,
    generate_training_set,
    simulate_fields,
    standardize_ensemble,
)
from .stations import ingest_stations
from .uq import conditional_simulate


def _cfg(args) -> RunConfig:
    return load_config(args.config, args.sets)


def _stack_bounds(stack: GridStack):
    x0, y0 = stack.origin
    dx, dy = stack.spacing
    return (x0, x0 + dx * (stack.w - 1), y0, y0 + dy * (stack.h - 1))


def _load_params(path):
    return params_from_stack(read_gridstack(path)) if path else None


def _load_mask(path):
    return mask_from_stack(read_gridstack(path)) if path else None


def _pick_day(days, date):
    if date is None:
        return days[0]
    for obs in days:
        if str(obs.day_id) == date:
            return obs
    raise ValidationError(f"no day {date!r} in the cleaned station data")


def _parse_shape(text: str):
    try:
        h, w = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ValidationError(f"target shape must look like 255x255, got {text!r}") from None
    if h < 2 or w < 2:
        raise ValidationError(f"target shape must be at least 2x2, got {text!r}")
    return h, w


def _parse_bounds(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError(f"bounds must be xmin,xmax,ymin,ymax, got {text!r}")
    return tuple(float(p) for p in parts)


def _fit_summary(res) -> dict:
    cov = res.cov
    k2 = cov.params.kappa2
    return {
        "loglik": float(res.loglik),
        "converged": bool(res.converged),
        "boundary": list(res.boundary),
        "n_eval": int(res.n_eval),
        "sigma2": float(cov.sigma2),
        "tau2": float(cov.tau2),
        "lambda": float(cov.lam),
        "kappa2_mean": float(k2.mean()),
        "kappa2_min": float(k2.min()),
        "kappa2_max": float(k2.max()),
    }


def _cmd_validate_config(args) -> int:
    cfg = _cfg(args)
    print(json.dumps(config_to_dict(cfg), sort_keys=True, indent=2))
    return 0


def _cmd_simulate(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    if args.params:
        params = _load_params(args.params)
        if params.m != grid.m:
            raise ValidationError(
                f"parameter stack has {params.m} nodes, lattice has {grid.m}"
            )
    else:
        params = constant_params(grid.m, args.kappa2, args.rho, args.theta)
    B = build_sar(grid, params)
    pts = grid.interior_points()
    Phi = evaluate_basis(grid, spec, pts)
    ens = simulate_fields(B, Phi, (grid.ny, grid.nx), args.r, args.seed)
    if args.standardize:
        ens = standardize_ensemble(ens)
    stack = ensemble_to_stack(
        ens,
        origin=(grid.x0, grid.y0),
        spacing=(grid.dx, grid.dy),
        metadata={"seed": args.seed, "standardized": bool(args.standardize)},
    )
    write_gridstack(stack, args.out)
    print(f"wrote {args.r} replicates to {args.out}")
    return 0


def _cmd_gen_train(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    n_pairs = args.n_pairs if args.n_pairs is not None else cfg.train.n_pairs
    r = args.r if args.r is not None else cfg.train.r
    seed = args.seed if args.seed is not None else cfg.seeds.master
    summary = generate_training_set(
        n_pairs, grid, cfg.prior, r, seed, args.out, spec=spec, overwrite=args.overwrite
    )
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _cmd_fit_mean(args) -> int:
    stack = read_gridstack(args.values)
    bounds = _stack_bounds(stack)
    covariates = {}
    if args.covariates:
        cstack = read_gridstack(args.covariates)
        if (cstack.h, cstack.w) != (stack.h, stack.w):
            raise ValidationError(
                f"covariate grid {cstack.h}x{cstack.w} does not match values {stack.h}x{stack.w}"
            )
        covariates = {name: cstack.channel(name) for name in cstack.channels}
    resid, fits = fit_gridded_mean(stack.values, covariates, bounds)
    out_stack = GridStack(
        channels=stack.channels[1:],
        values=resid,
        origin=stack.origin,
        spacing=stack.spacing,
        metadata={"kind": "mean-model-residuals"},
    )
    write_gridstack(out_stack, args.out_residuals)
    if args.out_fits:
        rows = []
        for name, fit in zip(stack.channels[1:], fits):
            rows.append(
                {
                    "day": name,
                    "beta": {n: float(b) for n, b in zip(
                        ("intercept", "lon", "lat", *sorted(covariates)), fit.beta
                    )},
                    "alpha": None if fit.alpha is None else float(fit.alpha),
                    "r_squared": float(fit.r_squared),
                }
            )
        write_metrics_json({"days": rows}, args.out_fits)
    print(f"fit {len(fits)} days; residuals in {args.out_residuals}")
    return 0


def _cmd_windows(args) -> int:
    cfg = _cfg(args)
    stack = read_gridstack(args.residuals)
    ens = build_window_ensembles(
        stack.values, args.t, before=cfg.windows.before, after=cfg.windows.after
    )
    out = ensemble_to_stack(
        ens,
        origin=stack.origin,
        spacing=stack.spacing,
        metadata={"center_day": args.t, "source_channel": stack.channels[args.t]},
    )
    write_gridstack(out, args.out)
    print(f"window around day {args.t}: {ens.r} standardized replicates -> {args.out}")
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    stack = read_gridstack(args.values)
    variants = tuple(args.variants.split(","))
    summary = run_reconstruction(
        stack.values,
        grid,
        spec,
        _stack_bounds(stack),
        variants=variants,
        frac=args.frac,
        seed=args.seed if args.seed is not None else cfg.seeds.master,
        base_params=_load_params(args.params),
        mask=_load_mask(args.mask),
    )
    write_metrics_json(summary, args.out)
    print(json.dumps(summary["mean_rmse"], sort_keys=True, indent=2))
    return 0


def _station_day(args, cfg):
    days, report = ingest_stations(args.stations, cfg.stations, cfg.domain.bounds)
    return _pick_day(days, args.date), report


def _cmd_fit_day(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    obs, report = _station_day(args, cfg)
    variants = tuple(args.variants.split(","))
    out = run_station_day(
        obs, grid, spec, _load_params(args.params), _load_mask(args.mask), variants
    )
    payload = {
        "day": str(obs.day_id),
        "n_obs": obs.n,
        "cleaning": report.as_dict(),
        "fits": {name: _fit_summary(res) for name, res in out["fits"].items()},
        "extras": {k: {kk: float(vv) for kk, vv in v.items()} for k, v in out["extras"].items()},
        "errors": out["errors"],
        "diagnostics": out["diagnostics"],
    }
    write_metrics_json(payload, args.out)
    print(f"day {obs.day_id}: fitted {sorted(out['fits'])}, errors {sorted(out['errors'])}")
    return 0


def _cmd_refine(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    obs, _ = _station_day(args, cfg)
    base = _load_params(args.params)
    if base is None:
        raise ValidationError("refine needs --params with the base parameter fields")
    search = SearchConfig()
    _, res, extras = fit_day_variant(
        obs, grid, spec, "nonstationary_adjusted", base, _load_mask(args.mask), search
    )
    payload = {"day": str(obs.day_id), "kappa_point": extras["kappa_point"], **_fit_summary(res)}
    write_metrics_json(payload, args.out)
    print(f"day {obs.day_id}: kappa offset {extras['kappa_point']:.4g}")
    return 0


def _cmd_cv(args) -> int:
    cfg = _cfg(args)
    grid, spec = cfg.build_grid(), cfg.build_spec()
    days, report = ingest_stations(args.stations, cfg.stations, cfg.domain.bounds)
    if args.dates:
        wanted = set(args.dates.split(","))
        days = [d for d in days if str(d.day_id) in wanted]
        if not days:
            raise ValidationError(f"none of the requested dates survived cleaning: {sorted(wanted)}")
    base = _load_params(args.params)
    variants = tuple(args.variants.split(",")) if args.variants else (
        ("stationary", "nonstationary", "nonstationary_adjusted") if base else ("stationary",)
    )
    result = run_cv(
        days,
        grid,
        spec,
        cfg.cv.folds,
        cfg.seeds.master,
        variants=variants,
        base_params=base,
        mask=_load_mask(args.mask),
        picp_intervals=cfg.picp_intervals,
        n_draws=cfg.condsim.n_draws if cfg.picp_intervals == "ensemble" else 0,
    )
    result["cleaning"] = report.as_dict()
    write_metrics_json(result, args.out)
    print(json.dumps(result["table"], sort_keys=True, indent=2))
    return 0


def _fitted_model(args, cfg):
    grid, spec = cfg.build_grid(), cfg.build_spec()
    obs, _ = _station_day(args, cfg)
    variant = args.variant or cfg.variant
    model, res, extras = fit_day_variant(
        obs, grid, spec, variant, _load_params(args.params), _load_mask(args.mask)
    )
    return model, res, extras, obs


def _cmd_predict(args) -> int:
    cfg = _cfg(args)
    model, _, _, obs = _fitted_model(args, cfg)
    bounds = _parse_bounds(args.target_bounds) if args.target_bounds else cfg.domain.bounds
    shape = _parse_shape(args.target_shape)
    n_draws = args.n_draws if args.n_draws is not None else cfg.condsim.n_draws
    seed = args.seed if args.seed is not None else cfg.seeds.master
    maps = run_predict_fine(model, bounds, shape, n_draws=n_draws, seed=seed)
    write_gridstack(maps["mean"], args.out_mean)
    if args.out_se:
        write_gridstack(maps["se"], args.out_se)
    print(f"day {obs.day_id}: {shape[0]}x{shape[1]} mean map -> {args.out_mean}")
    return 0


def _cmd_condsim(args) -> int:
    cfg = _cfg(args)
    model, _, _, obs = _fitted_model(args, cfg)
    bounds = _parse_bounds(args.target_bounds) if args.target_bounds else cfg.domain.bounds
    ht, wt = _parse_shape(args.target_shape)
    pts = pixel_centers(bounds, ht, wt)
    design = None
    if model.mean_fit is not None:
        names = model.obs.covariate_names or ()
        known = {"intercept": np.ones(ht * wt), "lon": pts[:, 0], "lat": pts[:, 1]}
        missing = [n for n in names if n not in known]
        if missing:
            raise ValidationError(f"cannot build target design for channels {missing}")
        design = np.column_stack([known[n] for n in names])
    n_draws = args.n_draws if args.n_draws is not None else cfg.condsim.n_draws
    seed = args.seed if args.seed is not None else cfg.seeds.master
    ens = conditional_simulate(
        model, pts, n_draws, seed, target_design=design, include_nugget=args.include_nugget
    )
    width = max(3, len(str(n_draws - 1)))
    stack = GridStack(
        channels=tuple(f"draw_{k:0{width}d}" for k in range(n_draws)),
        values=ens.draws.reshape(n_draws, ht, wt),
        origin=(bounds[0], bounds[2]),
        spacing=((bounds[1] - bounds[0]) / (wt - 1), (bounds[3] - bounds[2]) / (ht - 1)),
        metadata={"kind": "conditional-draws", "seed": seed, **ens.metadata},
    )
    write_gridstack(stack, args.out)
    print(f"day {obs.day_id}: {n_draws} conditional draws -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    stack = read_gridstack(args.stack)
    channel = args.channel or stack.channels[0]
    sidecar = render_png(
        stack, channel, args.out,
        vmin=args.vmin, vmax=args.vmax,
        colormap=args.colormap, nan_mode=args.nan_mode,
    )
    print(f"{channel}: [{sidecar['vmin']:.6g}, {sidecar['vmax']:.6g}] -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarkrig",
        description="Lattice-basis spatial modeling: simulation, fitting, prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument(
            "--set", dest="sets", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override one config entry (repeatable)",
        )
        p.set_defaults(func=func)
        return p

    add("validate-config", _cmd_validate_config, "check the config and echo its canonical form")

    p = add("simulate", _cmd_simulate, "draw replicate fields from the lattice model")
    p.add_argument("--params", default=None, help="parameter-field stack (.gstk)")
    p.add_argument("--kappa2", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--r", type=int, default=30, help="number of replicates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True)

    p = add("gen-train", _cmd_gen_train, "generate the training-pair corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-pairs", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--overwrite", action="store_true")

    p = add("fit-mean", _cmd_fit_mean, "per-day pixel regression with a one-day lag")
    p.add_argument("--values", required=True, help="day stack (.gstk, one channel per day)")
    p.add_argument("--covariates", default=None, help="static covariate stack (.gstk)")
    p.add_argument("--out-residuals", required=True)
    p.add_argument("--out-fits", default=None, help="JSON summary of the per-day fits")

    p = add("windows", _cmd_windows, "standardized residual ensemble around one day")
    p.add_argument("--residuals", required=True, help="residual day stack (.gstk)")
    p.add_argument("--t", type=int, required=True, help="center day index")
    p.add_argument("--out", required=True)

    p = add("reconstruct", _cmd_reconstruct, "masked-pixel reconstruction experiment")
    p.add_argument("--values", required=True, help="truth day stack (.gstk)")
    p.add_argument("--params", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--variants", default="stationary,nonstationary")
    p.add_argument("--frac", type=float, default=0.03)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="metrics JSON")

    p = add("fit-day", _cmd_fit_day, "fit model variants on one station day")
    p.add_argument("--stations", required=True, help="station CSV")
    p.add_argument("--date", default=None, help="ISO date; default first cleaned day")
    p.add_argument("--params", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--variants", default="stationary,nonstationary,nonstationary_adjusted")
    p.add_argument("--out", required=True)

    p = add("refine", _cmd_refine, "profile the land-mask precision offset on one day")
    p.add_argument("--stations", required=True)
    p.add_argument("--date", default=None)
    p.add_argument("--params", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--out", required=True)

    p = add("cv", _cmd_cv, "k-fold cross-validation table over station days")
    p.add_argument("--stations", required=True)
    p.add_argument("--dates", default=None, help="comma-separated subset of days")
    p.add_argument("--params", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--variants", default=None)
    p.add_argument("--out", required=True)

    p = add("predict", _cmd_predict, "fine-grid mean and SE maps for one day")
    p.add_argument("--stations", required=True)
    p.add_argument("--date", default=None)
    p.add_argument("--variant", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--target-shape", required=True, metavar="HxW")
    p.add_argument("--target-bounds", default=None, metavar="XMIN,XMAX,YMIN,YMAX")
    p.add_argument("--n-draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-mean", required=True)
    p.add_argument("--out-se", default=None)

    p = add("condsim", _cmd_condsim, "conditional field draws on a target grid")
    p.add_argument("--stations", required=True)
    p.add_argument("--date", default=None)
    p.add_argument("--variant", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--target-shape", required=True, metavar="HxW")
    p.add_argument("--target-bounds", default=None, metavar="XMIN,XMAX,YMIN,YMAX")
    p.add_argument("--n-draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--include-nugget", action="store_true")
    p.add_argument("--out", required=True)

    p = add("render", _cmd_render, "render one channel of a grid stack to PNG")
    p.add_argument("--stack", required=True)
    p.add_argument("--channel", default=None, help="default: first channel")
    p.add_argument("--vmin", type=float, default=None)
    p.add_argument("--vmax", type=float, default=None)
    p.add_argument("--colormap", default="viridis", choices=("gray", "viridis"))
    p.add_argument("--nan-mode", default="transparent", choices=("transparent", "sentinel"))
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
