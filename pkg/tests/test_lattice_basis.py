import numpy as np
import numpy.testing as npt
import pytest

from sarkrig import (
    BasisSpec,
    LatticeGrid,
    ValidationError,
    build_lattice,
    evaluate_basis,
    wendland,
)


def test_build_lattice_spacing_and_origin():
    grid = build_lattice((0.0, 1.0, 0.0, 2.0), nx=11, ny=21, buffer=2)
    assert grid.dx == pytest.approx(0.1)
    assert grid.dy == pytest.approx(0.1)
    assert grid.ncols == 15 and grid.nrows == 25
    assert grid.m == 15 * 25
    # first padded node sits buffer spacings outside the domain corner
    x, y = grid.node_xy(0, 0)
    assert x == pytest.approx(-0.2) and y == pytest.approx(-0.2)


def test_interior_points_cover_domain():
    grid = build_lattice((0.0, 1.0, 0.0, 1.0), nx=5, ny=5, buffer=1)
    pts = grid.interior_points()
    assert pts.shape == (25, 2)
    npt.assert_allclose(pts[0], [0.0, 0.0])
    npt.assert_allclose(pts[-1], [1.0, 1.0])
    # row-major with rows advancing along +y
    npt.assert_allclose(pts[1], [0.25, 0.0])
    npt.assert_allclose(pts[5], [0.0, 0.25])
    idx = grid.interior_index()
    npt.assert_allclose(grid.all_points()[idx], pts)


def test_lattice_validation():
    with pytest.raises(ValidationError):
        build_lattice((0, 1, 0, 1), nx=2, ny=5)
    with pytest.raises(ValidationError):
        LatticeGrid(nx=5, ny=5, x0=0, y0=0, dx=-0.1, dy=0.1)
    with pytest.raises(ValidationError):
        LatticeGrid(nx=5, ny=5, x0=0, y0=0, dx=0.1, dy=0.1, buffer=-1)


def test_wendland_reference_values():
    # closed form (1-d)^6 (35 d^2 + 18 d + 3) / 3 at d = 1/2
    assert wendland(0.0) == pytest.approx(1.0)
    assert wendland(0.5) == pytest.approx(20.75 / 192.0, rel=0, abs=1e-15)
    assert wendland(1.0) == 0.0
    assert wendland(1.5) == 0.0
    d = np.linspace(0, 1, 200)
    v = wendland(d)
    assert v.shape == d.shape
    assert np.all(np.diff(v) <= 0)
    assert np.all(v >= 0)


def test_wendland_smooth_at_support_edge():
    # C2 taper: value and first differences vanish smoothly at d = 1
    eps = 1e-6
    assert wendland(1.0 - eps) < 1e-15


def test_basis_support_footprint():
    # center node of a 5x5 unit lattice with radius 2.5 spacings reaches
    # exactly the 21 nodes with integer offset norm < 2.5
    grid = build_lattice((0.0, 4.0, 0.0, 4.0), nx=5, ny=5, buffer=0)
    spec = BasisSpec(support_multiple=2.5)
    center = np.array([[2.0, 2.0]])
    row = evaluate_basis(grid, spec, center).matrix.toarray()[0]
    assert np.count_nonzero(row) == 21
    offsets = grid.all_points() - center
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    npt.assert_allclose(row, wendland(dist / 2.5), atol=1e-15)


def test_basis_matches_bruteforce():
    # distances are taken per axis in units of the node spacing, so an
    # anisotropic-spacing grid (dx != dy) exercises the real convention
    rng = np.random.default_rng(42)
    grid = build_lattice((0.0, 1.0, 0.0, 1.0), nx=9, ny=7, buffer=2)
    spec = BasisSpec()
    pts = rng.uniform(-0.1, 1.1, size=(40, 2))
    phi = evaluate_basis(grid, spec, pts).matrix.toarray()
    nodes = grid.all_points()
    for i in range(len(pts)):
        d = np.hypot(
            (nodes[:, 0] - pts[i, 0]) / grid.dx,
            (nodes[:, 1] - pts[i, 1]) / grid.dy,
        )
        npt.assert_allclose(phi[i], wendland(d / spec.support_multiple), atol=1e-14)


def test_basis_zero_row_count():
    grid = build_lattice((0.0, 1.0, 0.0, 1.0), nx=5, ny=5, buffer=0)
    spec = BasisSpec()
    pts = np.array([[0.5, 0.5], [50.0, 50.0]])
    res = evaluate_basis(grid, spec, pts)
    assert res.n_zero_rows == 1


def test_basis_spec_validation():
    with pytest.raises(ValidationError):
        BasisSpec(support_multiple=0.0)
    with pytest.raises(ValidationError):
        BasisSpec(support_multiple=-1.0)


def test_basis_rejects_bad_locations():
    grid = build_lattice((0.0, 1.0, 0.0, 1.0), nx=5, ny=5)
    with pytest.raises(ValidationError):
        evaluate_basis(grid, BasisSpec(), np.array([[0.5, np.nan]]))
