"""Unconditional simulation and synthetic training-set generation.

Coefficient draws solve B c = e directly with a sparse LU of B (exact for
any full-rank B, and cheaper than factorizing Q = B^T B). Fields are the
basis image Phi c reshaped to the data grid. Training pairs couple a
standardized replicate ensemble with the parameter fields that generated
it; every pair is reproducible in isolation from (seed, pair_id).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ValidationError
from .gridstack import GridStack, read_gridstack, write_gridstack
from .lattice import BasisMatrix, BasisSpec, LatticeGrid, evaluate_basis
from .rng import substream
from .sar import ParamFields, build_sar

# Substream domain tags: keep distinct so the same (seed, stream) prefix
# can feed several independent consumers.
_D_COEF = 0xC0
_D_PRIOR = 0xA1


@dataclass(frozen=True)
class FieldEnsemble:
    """r replicate fields on an h x w grid, values shaped (r, h, w)."""

    values: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValidationError(f"ensemble values must be (r,h,w), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("ensemble contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def r(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]


@dataclass(frozen=True)
class PriorConfig:
    """Ranges and texture of the parameter-field prior.

    Each field is drawn as a mixture of a spatially constant value, a
    linear gradient in a random direction, or a smooth random surface
    (sum of `smoothness` long-wavelength cosine harmonics squashed into
    the range). Weights order: (constant, gradient, smooth).
    """

    log_kappa2_range: tuple = (-9.2, 2.3)
    rho_range: tuple = (1.0, 7.0)
    theta_range: tuple = (-np.pi / 2, np.pi / 2)
    smoothness: int = 4
    mix_weights: tuple = (0.25, 0.35, 0.40)

    def __post_init__(self):
        for name in ("log_kappa2_range", "rho_range", "theta_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"{name} must be ordered finite bounds, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.rho_range[0] < 1:
            raise ValidationError(f"rho prior must start at >= 1, got {self.rho_range}")
        if self.theta_range[0] < -np.pi / 2 or self.theta_range[1] > np.pi / 2:
            raise ValidationError(f"theta prior must stay within [-pi/2, pi/2], got {self.theta_range}")
        if self.smoothness < 1:
            raise ValidationError(f"smoothness must be >= 1, got {self.smoothness}")
        w = np.asarray(self.mix_weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError(f"mix_weights must be 3 nonnegative weights summing to 1, got {self.mix_weights}")
        object.__setattr__(self, "mix_weights", tuple(float(x) for x in w))


@dataclass(frozen=True)
class TrainingPair:
    """Standardized ensemble plus the (3, h, w) parameter tensor behind it."""

    fields: FieldEnsemble
    params: np.ndarray  # channels: log_kappa2, rho, theta
    pair_id: int = 0

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != 3:
            raise ValidationError(f"params tensor must be (3,h,w), got {p.shape}")
        object.__setattr__(self, "params", p)

    @property
    def param_fields(self) -> ParamFields:
        return ParamFields(
            kappa2=np.exp(self.params[0].ravel()),
            rho=self.params[1].ravel().copy(),
            theta=self.params[2].ravel().copy(),
        )


def _lu_of(B: sp.spmatrix) -> spla.SuperLU:
    """Sparse LU of the SAR operator with pivot diagnostics on failure."""
    try:
        lu = spla.splu(sp.csc_matrix(B))
    except RuntimeError as exc:
        raise NumericalError(f"SAR operator factorization failed: {exc}") from exc
    diag = lu.U.diagonal()
    bad = np.flatnonzero(~np.isfinite(diag) | (diag == 0.0))
    if bad.size:
        nodes = lu.perm_c[bad[:8]].tolist()
        raise NumericalError(
            f"SAR operator is numerically singular at {bad.size} pivots; "
            f"suspect nodes {nodes} (zero kappa2 or degenerate boundary)"
        )
    return lu


def coefficients_from_noise(B: sp.spmatrix, noise: np.ndarray) -> np.ndarray:
    """Solve B c = e for each noise row e; the deterministic core of simulation."""
    E = np.atleast_2d(np.asarray(noise, dtype=float))
    if E.shape[1] != B.shape[0]:
        raise ValidationError(f"noise has {E.shape[1]} entries per draw, operator is {B.shape[0]}x{B.shape[1]}")
    lu = _lu_of(B)
    return lu.solve(E.T).T


def simulate_coefficients(B: sp.spmatrix, n_draws: int, seed: int, stream: tuple = ()) -> np.ndarray:
    """Draw coefficient vectors c ~ N(0, (B^T B)^-1), shape (n_draws, m).

    Draw k is generated from the substream (seed, *stream, k) so any
    single draw can be regenerated without producing the others.
    """
    if n_draws < 1:
        raise ValidationError(f"n_draws must be >= 1, got {n_draws}")
    m = B.shape[0]
    noise = np.empty((n_draws, m))
    for k in range(n_draws):
        noise[k] = substream(seed, *stream, _D_COEF, k).standard_normal(m)
    return coefficients_from_noise(B, noise)


def simulate_fields(
    B: sp.spmatrix,
    Phi,
    shape: tuple,
    r: int,
    seed: int,
    stream: tuple = (),
) -> FieldEnsemble:
    """Simulate r replicate fields Phi c on an h x w grid (unstandardized)."""
    mat = Phi.matrix if isinstance(Phi, BasisMatrix) else Phi
    h, w = int(shape[0]), int(shape[1])
    if mat.shape[0] != h * w:
        raise ValidationError(f"basis has {mat.shape[0]} rows, grid has {h * w} pixels")
    if mat.shape[1] != B.shape[0]:
        raise ValidationError(f"basis has {mat.shape[1]} columns, operator has {B.shape[0]} nodes")
    C = simulate_coefficients(B, r, seed, stream=stream)
    F = (mat @ C.T).T.reshape(r, h, w)
    return FieldEnsemble(values=F, standardized=False)


def standardize_ensemble(ens: FieldEnsemble) -> FieldEnsemble:
    """Center and scale every pixel across replicates (sd denominator r-1)."""
    if ens.r < 2:
        raise ValidationError(f"standardization needs r >= 2 replicates, got {ens.r}")
    mu = ens.values.mean(axis=0)
    sd = ens.values.std(axis=0, ddof=1)
    dead = ~(sd > 0)
    if np.any(dead):
        row, col = np.argwhere(dead)[0]
        raise ValidationError(
            f"pixel ({row}, {col}) is constant across replicates; cannot standardize"
        )
    return FieldEnsemble(values=(ens.values - mu) / sd, standardized=True)


def _smooth_surface(gen: np.random.Generator, xy: np.ndarray, extent: float, k: int) -> np.ndarray:
    """Zero-mean, unit-sd sum of k long-wavelength cosine harmonics."""
    z = np.zeros(xy.shape[0])
    for _ in range(k):
        ang = gen.uniform(0.0, 2.0 * np.pi)
        wavelength = gen.uniform(extent / 4.0, extent)
        phase = gen.uniform(0.0, 2.0 * np.pi)
        amp = gen.standard_normal()
        proj = xy[:, 0] * np.cos(ang) + xy[:, 1] * np.sin(ang)
        z += amp * np.cos(2.0 * np.pi * proj / wavelength + phase)
    sd = z.std()
    if sd > 0:
        z = (z - z.mean()) / sd
    return z


def _one_prior_field(gen: np.random.Generator, xy: np.ndarray, extent: float, lo: float, hi: float, cfg: PriorConfig) -> np.ndarray:
    pattern = gen.choice(3, p=cfg.mix_weights)
    if pattern == 0:
        return np.full(xy.shape[0], gen.uniform(lo, hi))
    if pattern == 1:
        a, b = gen.uniform(lo, hi, size=2)
        ang = gen.uniform(0.0, 2.0 * np.pi)
        t = xy[:, 0] * np.cos(ang) + xy[:, 1] * np.sin(ang)
        span = t.max() - t.min()
        t = (t - t.min()) / span if span > 0 else np.zeros_like(t)
        return a + (b - a) * t
    z = _smooth_surface(gen, xy, extent, cfg.smoothness)
    # Logistic squash keeps the field strictly inside (lo, hi).
    return lo + (hi - lo) / (1.0 + np.exp(-1.5 * z))


def sample_param_fields(grid: LatticeGrid, cfg: PriorConfig, seed: int, stream: tuple = ()) -> ParamFields:
    """Draw smooth (kappa2, rho, theta) node fields from the prior."""
    gen = substream(seed, *stream, _D_PRIOR)
    xy = grid.all_points()
    extent = max((grid.nx - 1) * grid.dx, (grid.ny - 1) * grid.dy)
    log_k2 = _one_prior_field(gen, xy, extent, *cfg.log_kappa2_range, cfg)
    rho = _one_prior_field(gen, xy, extent, *cfg.rho_range, cfg)
    theta = _one_prior_field(gen, xy, extent, *cfg.theta_range, cfg)
    return ParamFields(kappa2=np.exp(log_k2), rho=rho, theta=theta)


def make_training_pair(
    grid: LatticeGrid,
    Phi,
    cfg: PriorConfig,
    r: int,
    seed: int,
    pair_id: int,
) -> TrainingPair:
    """Generate one (ensemble, parameter-tensor) pair keyed by (seed, pair_id)."""
    params = sample_param_fields(grid, cfg, seed, stream=(pair_id,))
    B = build_sar(grid, params)
    raw = simulate_fields(B, Phi, (grid.ny, grid.nx), r, seed, stream=(pair_id,))
    shape = (grid.nrows, grid.ncols)
    tensor = np.stack(
        [
            np.log(params.kappa2).reshape(shape),
            params.rho.reshape(shape),
            params.theta.reshape(shape),
        ]
    )
    return TrainingPair(fields=standardize_ensemble(raw), params=tensor, pair_id=pair_id)


def _replicate_names(r: int) -> list:
    width = max(2, len(str(r - 1)))
    return [f"rep_{k:0{width}d}" for k in range(r)]


def split_sizes(n_pairs: int) -> tuple:
    """90/8/2 train/validation/test sizes; remainder goes to test."""
    n_train = int(0.9 * n_pairs)
    n_val = int(0.08 * n_pairs)
    return n_train, n_val, n_pairs - n_train - n_val


def _split_of(pid: int, n_train: int, n_val: int) -> str:
    if pid < n_train:
        return "train"
    if pid < n_train + n_val:
        return "val"
    return "test"


def _stack_is_valid(path: Path, channels: int, h: int, w: int) -> bool:
    try:
        stack = read_gridstack(path)
    except (ValidationError, OSError):
        return False
    return stack.values.shape == (channels, h, w)


def generate_training_set(
    n_pairs: int,
    grid: LatticeGrid,
    cfg: PriorConfig,
    r: int,
    seed: int,
    out_dir,
    spec: BasisSpec | None = None,
    overwrite: bool = False,
) -> dict:
    """Write n_pairs training pairs plus a split manifest under out_dir.

    Each pair lands in two files, pair_XXXXX.fields.gstk (r channels) and
    pair_XXXXX.params.gstk (log_kappa2, rho, theta). Existing files that
    read back with the right shape are kept, so an interrupted run can be
    resumed; pair content depends only on (seed, pair_id), never on which
    pairs were skipped.
    """
    if n_pairs < 1:
        raise ValidationError(f"n_pairs must be >= 1, got {n_pairs}")
    if r < 2:
        raise ValidationError(f"r must be >= 2 to standardize, got {r}")
    spec = spec or BasisSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    Phi = evaluate_basis(grid, spec, grid.interior_points())

    n_train, n_val, n_test = split_sizes(n_pairs)
    x00, y00 = grid.node_xy(0, 0)
    pairs_meta = []
    written = skipped = 0
    for pid in range(n_pairs):
        f_name = f"pair_{pid:05d}.fields.gstk"
        p_name = f"pair_{pid:05d}.params.gstk"
        f_path, p_path = out / f_name, out / p_name
        fresh = overwrite or not (
            _stack_is_valid(f_path, r, grid.ny, grid.nx)
            and _stack_is_valid(p_path, 3, grid.nrows, grid.ncols)
        )
        if fresh:
            pair = make_training_pair(grid, Phi, cfg, r, seed, pid)
            write_gridstack(
                GridStack(
                    channels=_replicate_names(r),
                    values=pair.fields.values,
                    origin=(grid.x0, grid.y0),
                    spacing=(grid.dx, grid.dy),
                    metadata={"kind": "training-fields", "pair": pid, "seed": seed},
                ),
                f_path,
            )
            write_gridstack(
                GridStack(
                    channels=("log_kappa2", "rho", "theta"),
                    values=pair.params,
                    origin=(float(x00), float(y00)),
                    spacing=(grid.dx, grid.dy),
                    metadata={"kind": "training-params", "pair": pid, "seed": seed},
                ),
                p_path,
            )
            written += 1
        else:
            skipped += 1
        pairs_meta.append(
            {"id": pid, "split": _split_of(pid, n_train, n_val), "fields": f_name, "params": p_name}
        )

    manifest = {
        "format": "training-set-v1",
        "n_pairs": n_pairs,
        "r": r,
        "seed": seed,
        "split_sizes": {"train": n_train, "val": n_val, "test": n_test},
        "lattice": {
            "nx": grid.nx, "ny": grid.ny, "x0": grid.x0, "y0": grid.y0,
            "dx": grid.dx, "dy": grid.dy, "buffer": grid.buffer,
        },
        "basis": {"support_multiple": spec.support_multiple, "normalize": spec.normalize},
        "prior": {
            "log_kappa2_range": list(cfg.log_kappa2_range),
            "rho_range": list(cfg.rho_range),
            "theta_range": list(cfg.theta_range),
            "smoothness": cfg.smoothness,
            "mix_weights": list(cfg.mix_weights),
            "family": "mixture prior: constant / linear gradient / smooth cosine surface",
        },
        "standardization": {"sd_denominator": "r-1"},
        "pairs": pairs_meta,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2))
        fh.write("\n")
    return {
        "n_pairs": n_pairs,
        "written": written,
        "skipped": skipped,
        "split_sizes": (n_train, n_val, n_test),
        "out_dir": str(out),
    }


def ensemble_to_stack(ens: FieldEnsemble, origin=(0.0, 0.0), spacing=(1.0, 1.0), metadata=None) -> GridStack:
    """Pack an ensemble as a stack with one channel per replicate."""
    return GridStack(
        channels=_replicate_names(ens.r),
        values=ens.values,
        origin=origin,
        spacing=spacing,
        metadata=metadata or {},
    )


def ensemble_from_stack(stack: GridStack, standardized: bool = False) -> FieldEnsemble:
    return FieldEnsemble(values=stack.values, standardized=standardized)
