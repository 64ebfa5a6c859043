"""Lattice of basis-function centers and compactly supported basis evaluation.

The lattice is a regular grid of nodes, optionally padded by ``buffer``
extra node rings on every side. Basis functions are radially symmetric
Wendland polynomials scaled so their support covers ``support_multiple``
lattice spacings; evaluating them at a set of locations produces the
sparse matrix linking point values to lattice coefficients.

Distances are computed in the planar coordinate units of the grid, with
each axis scaled by its own node spacing, so anisotropic spacings behave
like a unit lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


@dataclass(frozen=True)
class LatticeGrid:
    """Regular lattice of basis-function centers.

    ``x0, y0`` locate the first non-buffer node; buffer nodes extend
    outward by ``buffer`` spacings per side. Node ordering is row-major
    over the full padded lattice: index = row * ncols + col, with rows
    advancing along +y and columns along +x.
    """

    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float
    buffer: int = 0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValidationError(f"lattice needs nx, ny >= 3, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValidationError(f"node spacing must be positive, got dx={self.dx}, dy={self.dy}")
        if self.buffer < 0:
            raise ValidationError(f"buffer must be non-negative, got {self.buffer}")

    @property
    def ncols(self) -> int:
        return self.nx + 2 * self.buffer

    @property
    def nrows(self) -> int:
        return self.ny + 2 * self.buffer

    @property
    def m(self) -> int:
        """Total node count including buffer."""
        return self.nrows * self.ncols

    def node_index(self, row: int, col: int) -> int:
        return row * self.ncols + col

    def node_xy(self, row, col):
        """Coordinates of node (row, col) of the padded lattice."""
        x = self.x0 + (np.asarray(col) - self.buffer) * self.dx
        y = self.y0 + (np.asarray(row) - self.buffer) * self.dy
        return x, y

    def all_points(self) -> np.ndarray:
        """(m, 2) coordinates of every node, row-major."""
        rows, cols = np.mgrid[0 : self.nrows, 0 : self.ncols]
        x, y = self.node_xy(rows.ravel(), cols.ravel())
        return np.column_stack([x, y])

    def interior_points(self) -> np.ndarray:
        """(nx*ny, 2) coordinates of the non-buffer nodes, row-major."""
        rows, cols = np.mgrid[0 : self.ny, 0 : self.nx]
        x = self.x0 + cols.ravel() * self.dx
        y = self.y0 + rows.ravel() * self.dy
        return np.column_stack([x, y])

    def interior_index(self) -> np.ndarray:
        """Padded-lattice indices of the interior nodes, row-major."""
        rows, cols = np.mgrid[self.buffer : self.buffer + self.ny, self.buffer : self.buffer + self.nx]
        return rows.ravel() * self.ncols + cols.ravel()


@dataclass(frozen=True)
class BasisSpec:
    """Basis-function configuration.

    support_multiple: support radius in units of the lattice spacing.
    normalize: if True, each nonzero row of the basis matrix is divided
    by its sum.
    """

    support_multiple: float = 2.5
    normalize: bool = False

    def __post_init__(self):
        if not self.support_multiple > 1:
            raise ValidationError(
                f"support_multiple must exceed 1, got {self.support_multiple}"
            )


@dataclass(frozen=True)
class BasisMatrix:
    """Sparse basis evaluations: n locations x m lattice nodes."""

    matrix: sp.csr_matrix
    n_zero_rows: int = 0

    @property
    def shape(self):
        return self.matrix.shape


def build_lattice(domain_bounds, nx: int, ny: int, buffer: int = 0) -> LatticeGrid:
    """Build a lattice whose non-buffer nodes span ``domain_bounds`` exactly.

    Parameters
    ----------
    domain_bounds : (xmin, xmax, ymin, ymax)
    nx, ny : node counts along x and y (>= 3)
    buffer : extra node rings padded on each side
    """
    xmin, xmax, ymin, ymax = map(float, domain_bounds)
    if not (xmax > xmin and ymax > ymin):
        raise ValidationError(f"degenerate domain bounds {domain_bounds}")
    if nx < 3 or ny < 3:
        raise ValidationError(f"lattice needs nx, ny >= 3, got {nx}x{ny}")
    dx = (xmax - xmin) / (nx - 1)
    dy = (ymax - ymin) / (ny - 1)
    return LatticeGrid(nx=nx, ny=ny, x0=xmin, y0=ymin, dx=dx, dy=dy, buffer=int(buffer))


def wendland(d):
    """C2 Wendland polynomial at normalized distance d (distance / support radius).

    Returns (1-d)^6 (35 d^2 + 18 d + 3) / 3 for d < 1, else 0. Equals 1
    at d = 0 and decreases monotonically to 0 at d = 1.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValidationError("wendland distance must be non-negative")
    inside = d < 1.0
    dd = np.where(inside, d, 0.0)
    val = (1.0 - dd) ** 6 * (35.0 * dd**2 + 18.0 * dd + 3.0) / 3.0
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def evaluate_basis(grid: LatticeGrid, spec: BasisSpec, locations) -> BasisMatrix:
    """Evaluate every basis function at each location.

    Returns a sparse n x m matrix whose (i, j) entry is
    wendland(||s_i - u_j|| / radius), with per-axis distances measured in
    units of the lattice spacing and radius = support_multiple. Rows with
    no covering basis function are all-zero and counted in
    ``n_zero_rows``; with ``spec.normalize`` every nonzero row is scaled
    to sum to one.
    """
    pts = np.asarray(locations, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"locations must be (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("locations must be finite")

    n = pts.shape[0]
    a = spec.support_multiple
    # Location coordinates in padded-lattice index units.
    ux = (pts[:, 0] - grid.x0) / grid.dx + grid.buffer
    uy = (pts[:, 1] - grid.y0) / grid.dy + grid.buffer

    # Candidate node columns per location: integer c with |c - ux| < a.
    col_lo = np.ceil(ux - a).astype(np.int64)
    row_lo = np.ceil(uy - a).astype(np.int64)
    width = int(np.floor(2 * a)) + 1  # candidates per axis

    rows_out = []
    cols_out = []
    vals_out = []
    loc_idx = np.arange(n, dtype=np.int64)
    for oi in range(width):
        r = row_lo + oi
        ok_r = (r >= 0) & (r < grid.nrows)
        dy2 = (r - uy) ** 2
        for oj in range(width):
            c = col_lo + oj
            ok = ok_r & (c >= 0) & (c < grid.ncols)
            d = np.sqrt(dy2 + (c - ux) ** 2) / a
            ok &= d < 1.0
            if not np.any(ok):
                continue
            rows_out.append(loc_idx[ok])
            cols_out.append(r[ok] * grid.ncols + c[ok])
            vals_out.append(wendland(d[ok]))

    if rows_out:
        rows_cat = np.concatenate(rows_out)
        cols_cat = np.concatenate(cols_out)
        vals_cat = np.concatenate(vals_out)
    else:
        rows_cat = np.empty(0, dtype=np.int64)
        cols_cat = np.empty(0, dtype=np.int64)
        vals_cat = np.empty(0, dtype=float)

    mat = sp.csr_matrix((vals_cat, (rows_cat, cols_cat)), shape=(n, grid.m))
    mat.sum_duplicates()

    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    n_zero = int(np.sum(row_sums == 0.0))
    if spec.normalize:
        scale = np.ones(n)
        nz = row_sums > 0
        scale[nz] = 1.0 / row_sums[nz]
        mat = sp.diags(scale) @ mat
        mat = mat.tocsr()
    return BasisMatrix(matrix=mat, n_zero_rows=n_zero)
