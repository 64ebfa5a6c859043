import numpy as np
import numpy.testing as npt
import pytest
import scipy.sparse as sp

from sarkrig import (
    DispersionMatrix,
    ParamFields,
    ValidationError,
    build_lattice,
    build_sar,
    constant_params,
    dispersion_matrix,
    precision,
    stationary_stencil,
    stencil_at,
)


def test_dispersion_reference_case():
    # theta = pi/4, rho = 4: eigenvalues 2 and 1/2 along the diagonal axes
    D = dispersion_matrix(np.pi / 4, 4.0)
    npt.assert_allclose(D.matrix, [[1.25, -0.75], [-0.75, 1.25]], atol=1e-14)
    assert D.det == pytest.approx(1.0, abs=1e-14)


def test_dispersion_isotropic_is_exact_identity():
    D = dispersion_matrix(0.7312, 1.0)
    assert D.d11 == 1.0
    assert D.d12 == 0.0
    assert D.d22 == 1.0


def test_dispersion_validation():
    with pytest.raises(ValidationError):
        dispersion_matrix(0.0, 0.5)
    with pytest.raises(ValidationError):
        dispersion_matrix(np.nan, 2.0)


def test_param_fields_validation():
    ok = constant_params(4, kappa2=0.5, rho=2.0, theta=0.1)
    assert ok.m == 4
    with pytest.raises(ValidationError):
        constant_params(4, kappa2=0.0)
    with pytest.raises(ValidationError):
        constant_params(4, kappa2=0.5, rho=0.5)
    with pytest.raises(ValidationError):
        constant_params(4, kappa2=0.5, theta=np.pi)  # theta in [-pi/2, pi/2)
    with pytest.raises(ValidationError):
        ParamFields(kappa2=np.ones(3), rho=np.ones(4), theta=np.zeros(4))


def test_stencil_hand_values():
    k2 = 0.3
    st = stencil_at(k2, dispersion_matrix(np.pi / 4, 4.0))
    # d11 = d22 = 1.25, d12 = -0.75
    assert st.center == pytest.approx(k2 + 5.0)
    assert st.offset_value(0, -1) == pytest.approx(-1.25)  # west
    assert st.offset_value(0, 1) == pytest.approx(-1.25)  # east
    assert st.offset_value(1, 0) == pytest.approx(-1.25)  # north
    assert st.offset_value(-1, 0) == pytest.approx(-1.25)  # south
    half = -0.75 / 2.0
    assert st.offset_value(1, -1) == pytest.approx(+half)  # NW
    assert st.offset_value(1, 1) == pytest.approx(-half)  # NE
    assert st.offset_value(-1, -1) == pytest.approx(-half)  # SW
    assert st.offset_value(-1, 1) == pytest.approx(+half)  # SE
    assert st.total == pytest.approx(k2, abs=1e-14)


def test_stencil_sum_property():
    rng = np.random.default_rng(7)
    for _ in range(200):
        k2 = float(np.exp(rng.uniform(-6, 3)))
        rho = float(np.exp(rng.uniform(0, 2)))
        theta = float(rng.uniform(-np.pi / 2, np.pi / 2))
        D = dispersion_matrix(theta, rho)
        st = stencil_at(k2, D)
        assert abs(st.total - k2) < 1e-12
        assert abs(D.det - 1.0) < 1e-12


def test_isotropic_reduction_is_bitwise():
    for k2 in (1e-4, 0.37, 1.0, 250.0):
        five = stationary_stencil(k2)
        nine = stencil_at(k2, DispersionMatrix(d11=1.0, d12=0.0, d22=1.0))
        assert np.array_equal(five.weights, nine.weights)
        assert five.center == k2 + 4.0
        assert five.offset_value(1, 1) == 0.0


def test_stencil_validation():
    with pytest.raises(ValidationError):
        stencil_at(0.0, DispersionMatrix(1.0, 0.0, 1.0))


def bruteforce_sar(grid, params):
    m = grid.m
    B = np.zeros((m, m))
    for row in range(grid.nrows):
        for col in range(grid.ncols):
            i = grid.node_index(row, col)
            st = stencil_at(
                float(params.kappa2[i]),
                dispersion_matrix(float(params.theta[i]), float(params.rho[i])),
            )
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rn, cn = row + dr, col + dc
                    if 0 <= rn < grid.nrows and 0 <= cn < grid.ncols:
                        B[i, grid.node_index(rn, cn)] += st.offset_value(dr, dc)
    return B


def test_build_sar_matches_bruteforce():
    rng = np.random.default_rng(3)
    grid = build_lattice((0, 1, 0, 1), nx=4, ny=5, buffer=1)
    params = ParamFields(
        kappa2=np.exp(rng.uniform(-2, 1, grid.m)),
        rho=np.exp(rng.uniform(0, 1.5, grid.m)),
        theta=rng.uniform(-np.pi / 2, np.pi / 2, grid.m),
    )
    B = build_sar(grid, params)
    npt.assert_allclose(B.toarray(), bruteforce_sar(grid, params), atol=1e-13)


def test_build_sar_boundary_truncation():
    grid = build_lattice((0, 1, 0, 1), nx=4, ny=4, buffer=0)
    B = build_sar(grid, constant_params(grid.m, kappa2=0.5, rho=2.0, theta=0.4))
    counts = np.diff(B.indptr)
    # corner keeps 4 of 9 entries, edges 6, interior all 9
    assert counts[0] == 4
    assert counts[1] == 6
    assert counts[grid.node_index(1, 1)] == 9


def test_precision_is_spd():
    grid = build_lattice((0, 1, 0, 1), nx=5, ny=5, buffer=1)
    B = build_sar(grid, constant_params(grid.m, kappa2=0.2, rho=3.0, theta=-0.8))
    Q = precision(B)
    assert sp.issparse(Q)
    Qd = Q.toarray()
    npt.assert_allclose(Qd, Qd.T, atol=1e-13)
    w = np.linalg.eigvalsh(Qd)
    assert w.min() > 0
    npt.assert_allclose(Qd, B.toarray().T @ B.toarray(), atol=1e-12)


def test_build_sar_shape_mismatch():
    grid = build_lattice((0, 1, 0, 1), nx=4, ny=4)
    with pytest.raises(ValidationError):
        build_sar(grid, constant_params(grid.m + 1, kappa2=0.5))
