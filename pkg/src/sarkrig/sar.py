"""Spatially varying SAR operator and sparse precision matrix.

Each lattice node carries a local range parameter kappa2, an anisotropy
ratio rho >= 1 and an orientation theta. rho and theta define a rotation
Psi and a unit-determinant scaling Lambda = diag(sqrt(rho), 1/sqrt(rho));
their combination D = Psi^T Lambda Psi is the local dispersion matrix.
The SAR row for a node places a nine-point stencil built from (kappa2, D)
on the node and its eight lattice neighbors; rho = 1 collapses it to the
classic five-point stencil. The precision of the coefficient field is
Q = B^T B.

Stencil orientation: offsets are (row, col) = (dy, dx) with +row = north.

    NW = +d12/2   N = -d22      NE = -d12/2
    W  = -d11     C = k2+2d11+2d22   E = -d11
    SW = -d12/2   S = -d22      SE = +d12/2

The nine entries always sum to kappa2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .lattice import LatticeGrid

THETA_MIN = -np.pi / 2
THETA_MAX = np.pi / 2


@dataclass(frozen=True)
class ParamFields:
    """Per-node (kappa2, rho, theta) aligned to LatticeGrid node ordering.

    kappa2 is stored on the natural scale; file exchange uses log kappa2
    (see gridstack helpers).
    """

    kappa2: np.ndarray
    rho: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        k2 = np.asarray(self.kappa2, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        if not (k2.shape == rho.shape == th.shape) or k2.ndim != 1:
            raise ValidationError(
                f"parameter fields must be equal-length 1-D arrays, got "
                f"{k2.shape}/{rho.shape}/{th.shape}"
            )
        if not np.all(np.isfinite(k2)) or np.any(k2 <= 0):
            raise ValidationError("kappa2 must be finite and positive at every node")
        if not np.all(np.isfinite(rho)) or np.any(rho < 1):
            raise ValidationError("rho must be finite and >= 1 at every node")
        if not np.all(np.isfinite(th)) or np.any(th < THETA_MIN) or np.any(th >= THETA_MAX):
            raise ValidationError("theta must lie in [-pi/2, pi/2)")
        object.__setattr__(self, "kappa2", k2)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "theta", th)

    @property
    def m(self) -> int:
        return self.kappa2.shape[0]


def constant_params(m: int, kappa2: float, rho: float = 1.0, theta: float = 0.0) -> ParamFields:
    """Spatially constant parameter fields (the stationary case when rho=1)."""
    return ParamFields(
        kappa2=np.full(m, float(kappa2)),
        rho=np.full(m, float(rho)),
        theta=np.full(m, float(theta)),
    )


@dataclass(frozen=True)
class DispersionMatrix:
    """Symmetric 2x2 dispersion matrix with unit determinant."""

    d11: float
    d12: float
    d22: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.d11, self.d12], [self.d12, self.d22]])

    @property
    def det(self) -> float:
        return self.d11 * self.d22 - self.d12**2


def _dispersion_entries(theta, rho):
    """Vectorized (d11, d12, d22) of Psi^T Lambda Psi."""
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    lam1 = np.sqrt(rho)
    lam2 = 1.0 / lam1
    d11 = lam1 * c**2 + lam2 * s**2
    d22 = lam1 * s**2 + lam2 * c**2
    d12 = c * s * (lam2 - lam1)
    # rho = 1 must reduce to D = I exactly (cos^2 + sin^2 rounds).
    iso = rho == 1.0
    d11 = np.where(iso, 1.0, d11)
    d22 = np.where(iso, 1.0, d22)
    d12 = np.where(iso, 0.0, d12)
    return d11, d12, d22


def dispersion_matrix(theta: float, rho: float) -> DispersionMatrix:
    """Dispersion matrix D = Psi^T Lambda Psi for one node.

    rho >= 1 is required: direction is carried entirely by theta, so an
    anisotropy ratio below one has no canonical meaning here.
    """
    if not np.isfinite(theta):
        raise ValidationError("theta must be finite")
    if not rho >= 1:
        raise ValidationError(f"rho must be >= 1 (got {rho}); encode direction via theta")
    d11, d12, d22 = _dispersion_entries(theta, rho)
    return DispersionMatrix(d11=float(d11), d12=float(d12), d22=float(d22))


@dataclass(frozen=True)
class Stencil9:
    """Nine stencil weights indexed weights[dr+1, dc+1] for offsets in {-1,0,1}."""

    weights: np.ndarray

    def offset_value(self, dr: int, dc: int) -> float:
        return float(self.weights[dr + 1, dc + 1])

    @property
    def center(self) -> float:
        return float(self.weights[1, 1])

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def stencil_at(kappa2: float, D: DispersionMatrix) -> Stencil9:
    """Nine-point stencil for local parameters (kappa2, D)."""
    if not kappa2 > 0:
        raise ValidationError(f"kappa2 must be positive, got {kappa2}")
    w = np.zeros((3, 3))
    half = D.d12 / 2.0
    w[1, 1] = kappa2 + 2.0 * D.d11 + 2.0 * D.d22
    w[1, 0] = w[1, 2] = -D.d11  # W, E
    w[0, 1] = w[2, 1] = -D.d22  # S, N
    w[2, 0] = +half  # NW
    w[2, 2] = -half  # NE
    w[0, 0] = -half  # SW
    w[0, 2] = +half  # SE
    return Stencil9(weights=w)


def stationary_stencil(kappa2: float) -> Stencil9:
    """Five-point stencil: center kappa2 + 4, edge neighbors -1, corners 0.

    Delegates to the nine-point stencil at D = I so the two agree bit for
    bit whenever rho = 1.
    """
    return stencil_at(kappa2, DispersionMatrix(d11=1.0, d12=0.0, d22=1.0))


def build_sar(grid: LatticeGrid, params: ParamFields) -> sp.csr_matrix:
    """Assemble the sparse m x m SAR operator B.

    Row i holds the stencil of node i placed at its nine lattice offsets;
    neighbors falling outside the padded lattice are dropped, so boundary
    rows keep fewer nonzeros (truncation boundary).
    """
    if params.m != grid.m:
        raise ValidationError(
            f"parameter fields have {params.m} nodes but lattice has {grid.m}"
        )
    m = grid.m
    nrows, ncols = grid.nrows, grid.ncols
    d11, d12, d22 = _dispersion_entries(params.theta, params.rho)
    half = d12 / 2.0
    center = params.kappa2 + 2.0 * d11 + 2.0 * d22

    rows = np.arange(m, dtype=np.int64)
    r = rows // ncols
    c = rows % ncols

    # (dr, dc) -> per-node weight array
    offsets = [
        (0, 0, center),
        (0, -1, -d11),
        (0, 1, -d11),
        (-1, 0, -d22),
        (1, 0, -d22),
        (1, -1, +half),
        (1, 1, -half),
        (-1, -1, -half),
        (-1, 1, +half),
    ]
    ii, jj, vv = [], [], []
    for dr, dc, w in offsets:
        rn = r + dr
        cn = c + dc
        ok = (rn >= 0) & (rn < nrows) & (cn >= 0) & (cn < ncols)
        ii.append(rows[ok])
        jj.append(rn[ok] * ncols + cn[ok])
        vv.append(np.broadcast_to(w, (m,))[ok])
    B = sp.csr_matrix(
        (np.concatenate(vv), (np.concatenate(ii), np.concatenate(jj))), shape=(m, m)
    )
    B.sum_duplicates()
    return B


def precision(B: sp.spmatrix) -> sp.csc_matrix:
    """Materialize the sparse precision Q = B^T B (symmetric positive definite)."""
    Q = (B.T @ B).tocsc()
    Q.sort_indices()
    return Q
