"""Acceptance gate: twelve end-to-end checks with pinned tolerances and
wall-clock budgets.

One test per check; under pytest -v each test name is its pass or fail
line, and every test prints a one-line summary with the measured numbers.
Budgets are generous multiples of times measured on modest hardware so
the gate stays meaningful without being flaky. Seeds are fixed; nothing
here depends on ambient entropy.
"""

import time

import numpy as np
import numpy.testing as npt
import scipy.linalg as sla
import scipy.stats

from sarkrig import (
    ArealPartition,
    BasisSpec,
    CovParams,
    GridStack,
    KrigingModel,
    ObservationSet,
    PriorConfig,
    SearchConfig,
    WeightMask,
    adjust_kappa,
    areal_average,
    areal_covariance,
    build_lattice,
    build_sar,
    build_window_ensembles,
    compute_metrics,
    conditional_simulate,
    constant_params,
    dispersion_matrix,
    ensemble_interval,
    evaluate_basis,
    fit_lambda_mle,
    generate_training_set,
    log_likelihood,
    mle_small_grid_oracle,
    pixel_centers,
    precision,
    read_gridstack,
    refine_kappa_point,
    run_cv,
    run_predict_fine,
    run_reconstruction,
    simulate_coefficients,
    simulate_fields,
    standardize_ensemble,
    stationary_stencil,
    stencil_at,
    write_gridstack,
    write_metrics_json,
)

SPEC = BasisSpec()
Z95 = scipy.stats.norm.ppf(0.975)


def midpoint_pixels(n):
    # centers (i+0.5)/n on the unit square; pixel_centers itself is node-aligned
    h = 0.5 / n
    return pixel_centers((h, 1.0 - h, h, 1.0 - h), n, n)


def test_stencil_sums_determinant_and_isotropic_reduction():
    """1000 random local parameter draws: weights sum to kappa2, the
    anisotropy matrix has unit determinant, and rho=1 reproduces the
    five-point stencil bit for bit."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_sum = worst_det = 0.0
    for _ in range(1000):
        k2 = 10.0 ** rng.uniform(-2.0, 1.3)
        rho = rng.uniform(1.0, 8.0)
        th = rng.uniform(-np.pi / 2, np.pi / 2)
        D = dispersion_matrix(th, rho)
        worst_det = max(worst_det, abs(D.d11 * D.d22 - D.d12 * D.d12 - 1.0))
        st = stencil_at(k2, D)
        worst_sum = max(worst_sum, abs(st.weights.sum() - k2))
        iso = stencil_at(k2, dispersion_matrix(th, 1.0))
        assert np.array_equal(iso.weights, stationary_stencil(k2).weights)
    dt = time.perf_counter() - t0
    assert worst_sum < 1e-12
    assert worst_det < 1e-12
    assert dt < 1.0
    print(f"[stencil] 1000 draws, max sum err {worst_sum:.2e}, "
          f"max det err {worst_det:.2e}, {dt:.2f}s")


def dense_loglik(z, Phi, Q, sigma2, lam):
    Qinv = np.linalg.inv(Q.toarray())
    S = sigma2 * (Phi @ Qinv @ Phi.T + lam * np.eye(len(z)))
    L = sla.cholesky(S, lower=True)
    alpha = sla.solve_triangular(L, z, lower=True)
    return -0.5 * (len(z) * np.log(2 * np.pi) + 2 * np.log(np.diag(L)).sum() + alpha @ alpha)


def dense_krige(z, Phi_o, Phi_t, Q, sigma2, lam):
    Qinv = np.linalg.inv(Q.toarray())
    S = sigma2 * (Phi_o @ Qinv @ Phi_o.T + lam * np.eye(len(z)))
    K_to = sigma2 * (Phi_t @ Qinv @ Phi_o.T)
    prior = sigma2 * np.einsum("ij,jk,ik->i", Phi_t, Qinv, Phi_t)
    mean = K_to @ np.linalg.solve(S, z)
    var = prior - np.einsum("ij,jk,ik->i", K_to, np.linalg.inv(S), K_to)
    return mean, var


def spread_points(rng, n, min_dist):
    # rejection sample so no two sites nearly coincide (keeps S well conditioned)
    pts = []
    while len(pts) < n:
        p = rng.uniform(0.02, 0.98, size=2)
        if all((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 >= min_dist**2 for q in pts):
            pts.append(p)
    return np.asarray(pts)


def test_sparse_path_matches_dense_gaussian_oracle():
    """200 random small instances: sparse log-likelihood, kriging mean and
    kriging variance agree with plain dense multivariate-normal algebra
    within 1e-8, including the zero-nugget path.

    Zero-nugget instances are kept numerically well posed (sites at least
    most of a lattice spacing apart, short-to-moderate ranges); otherwise
    the Gram matrix condition number eats the comparison budget in both
    implementations and the check would measure roundoff, not agreement.
    """
    t0 = time.perf_counter()
    worst = {"loglik": 0.0, "mean": 0.0, "var": 0.0}
    for inst in range(200):
        rng = np.random.default_rng(2000 + inst)
        nx, ny = rng.integers(4, 13, size=2)
        buffer = int(rng.integers(0, 3))
        grid = build_lattice((0, 1, 0, 1), int(nx), int(ny), buffer)
        if inst % 2 == 0:
            k2 = 10.0 ** rng.uniform(-0.5, 1.0)
            rho = rng.uniform(1.0, 5.0)
            lam = 0.0
            n = int(rng.integers(5, 13))
            sep = max(0.06, 0.7 * max(grid.dx, grid.dy))
        else:
            k2 = 10.0 ** rng.uniform(-1.3, 1.0)
            rho = rng.uniform(1.0, 8.0)
            lam = 10.0 ** rng.uniform(-3.0, 0.0)
            n = int(rng.integers(5, 21))
            sep = 0.02
        params = constant_params(grid.m, k2, rho, rng.uniform(-np.pi / 2, np.pi / 2))
        sigma2 = rng.uniform(0.3, 3.0)
        locs = spread_points(rng, n, sep)
        z = rng.standard_normal(n)
        tgts = spread_points(rng, 8, 0.02)

        Q = precision(build_sar(grid, params))
        Phi_o = evaluate_basis(grid, SPEC, locs).matrix.toarray()
        Phi_t = evaluate_basis(grid, SPEC, tgts).matrix.toarray()
        obs = ObservationSet(locations=locs, values=z)
        cov = CovParams(params=params, sigma2=sigma2, tau2=sigma2 * lam)

        got_ll = log_likelihood(obs, cov, grid, SPEC)
        want_ll = dense_loglik(z, Phi_o, Q, sigma2, lam)
        worst["loglik"] = max(worst["loglik"], abs(got_ll - want_ll))

        res = KrigingModel(obs, cov, grid, SPEC).predict(tgts)
        want_mean, want_var = dense_krige(z, Phi_o, Phi_t, Q, sigma2, lam)
        worst["mean"] = max(worst["mean"], np.abs(res.mean - want_mean).max())
        worst["var"] = max(worst["var"], np.abs(res.se**2 - want_var).max())
    dt = time.perf_counter() - t0
    assert worst["loglik"] < 1e-8
    assert worst["mean"] < 1e-8
    assert worst["var"] < 1e-8
    assert dt < 60.0
    print(f"[dense-oracle] 200 instances, max errs loglik {worst['loglik']:.2e} "
          f"mean {worst['mean']:.2e} var {worst['var']:.2e}, {dt:.1f}s")


def test_simulated_field_covariance_matches_model():
    """Sample covariance of 20,000 simulated 8x8 fields vs the implied
    basis-times-inverse-precision covariance: within 5% relative
    Frobenius."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 8, 8, 1)
    params = constant_params(grid.m, 0.8, 2.0, 0.4)
    B = build_sar(grid, params)
    px = pixel_centers((0, 1, 0, 1), 8, 8)
    Phi = evaluate_basis(grid, SPEC, px).matrix
    ens = simulate_fields(B, Phi, (8, 8), 20000, seed=5)
    rows = ens.values.reshape(20000, 64)
    Cs = np.cov(rows, rowvar=False)
    Ct = Phi @ np.linalg.inv(precision(B).toarray()) @ Phi.T.toarray()
    rel = np.linalg.norm(Cs - Ct) / np.linalg.norm(Ct)
    dt = time.perf_counter() - t0
    assert rel <= 0.05
    assert dt < 60.0
    print(f"[sim-law] rel Frobenius {rel:.4f} (cap 0.05), {dt:.1f}s")


def test_standardized_ensembles_have_unit_moments():
    """Every standardized replicate ensemble is per-pixel mean zero and
    unit sample standard deviation to 1e-10."""
    grid = build_lattice((0, 1, 0, 1), 10, 10, 1)
    px = pixel_centers((0, 1, 0, 1), 10, 10)
    Phi = evaluate_basis(grid, SPEC, px).matrix
    worst_mean = worst_sd = 0.0
    for i, (k2, rho, th) in enumerate([(0.3, 2.0, 0.2), (1.5, 4.0, -0.7), (5.0, 1.5, 1.0)]):
        B = build_sar(grid, constant_params(grid.m, k2, rho, th))
        ens = standardize_ensemble(simulate_fields(B, Phi, (10, 10), 30, seed=40 + i))
        assert ens.standardized
        worst_mean = max(worst_mean, np.abs(ens.values.mean(axis=0)).max())
        worst_sd = max(worst_sd, np.abs(ens.values.std(axis=0, ddof=1) - 1.0).max())
    # moving-window path standardizes too
    fields = np.random.default_rng(8).standard_normal((30, 6, 6))
    win = build_window_ensembles(fields, 15, before=15, after=14)
    worst_mean = max(worst_mean, np.abs(win.values.mean(axis=0)).max())
    worst_sd = max(worst_sd, np.abs(win.values.std(axis=0, ddof=1) - 1.0).max())
    assert worst_mean < 1e-10
    assert worst_sd < 1e-10
    print(f"[standardize] max |mean| {worst_mean:.2e}, max |sd-1| {worst_sd:.2e}")


def test_small_grid_oracle_recovers_true_cell():
    """Exhaustive 5x5x5 candidate-grid MLE from 30 replicates finds the
    generating cell in at least 45 of 50 trials."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 12, 12, 0)
    Phi = evaluate_basis(grid, SPEC, grid.interior_points()).matrix
    k2s = np.array([0.08, 0.28, 1.0, 3.5, 12.0])
    rhos = np.array([2.0, 3.8, 7.2, 13.7, 26.0])
    thetas = np.pi * ((np.arange(5) + 0.5) / 5.0 - 0.5)
    rng = np.random.default_rng(77)
    hits = 0
    for trial in range(50):
        idx = rng.integers(0, 5, size=3)
        params = constant_params(grid.m, k2s[idx[0]], rhos[idx[1]], thetas[idx[2]])
        ens = simulate_fields(build_sar(grid, params), Phi, (12, 12), 30, seed=1000 + trial)
        _, info = mle_small_grid_oracle(ens, grid, SPEC, k2s, rhos, thetas)
        hits += info["index"] == tuple(int(v) for v in idx)
    dt = time.perf_counter() - t0
    assert hits >= 45
    assert dt < 300.0
    print(f"[oracle] {hits}/50 cells recovered (need >= 45), {dt:.1f}s")


def test_masked_kappa_refinement_recovers_offset():
    """Land-masked kappa2 offset: truth 2.0 recovered within +-25% in at
    least 24 of 30 trials, and truth 0.0 estimated within 0.5 in at least
    24 of 30 trials. Each trial pools four replicate days with 200
    observations each."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 24, 24, 2)
    nodes = grid.all_points()
    land = WeightMask((nodes[:, 0] < 0.5).astype(float))
    base = constant_params(grid.m, 1.0, 1.0, 0.0)
    search = SearchConfig(tol=0.01, log_lambda_bounds=(-14.0, -8.0))

    def estimate(seed, delta_true):
        truth = adjust_kappa(base, land, delta_true)
        B = build_sar(grid, truth)
        days = []
        for d in range(4):
            rng = np.random.default_rng(seed * 100 + d)
            loc = rng.uniform(0.02, 0.98, size=(200, 2))
            c = simulate_coefficients(B, 1, seed=seed * 997 + d)[0]
            days.append(ObservationSet(locations=loc,
                                       values=evaluate_basis(grid, SPEC, loc).matrix @ c))
        delta, _, _ = refine_kappa_point(days, base, land, grid, SPEC, search, delta_max=8.0)
        return delta

    est2 = [estimate(5000 + s, 2.0) for s in range(30)]
    ok2 = sum(1.5 <= d <= 2.5 for d in est2)
    est0 = [estimate(6000 + s, 0.0) for s in range(30)]
    ok0 = sum(abs(d) <= 0.5 for d in est0)
    dt = time.perf_counter() - t0
    assert ok2 >= 24
    assert ok0 >= 24
    assert dt < 600.0
    print(f"[refine] offset 2.0: {ok2}/30 within +-25%; offset 0.0: {ok0}/30 "
          f"within 0.5 (need >= 24 each), {dt/60:.1f} min")


def test_oriented_model_beats_stationary_on_anisotropic_truth():
    """Masked reconstruction of strongly anisotropic truths from 3% of
    pixels: the oriented variant's mean held-out RMSE is no worse than the
    stationary fit's, with positive mean improvement."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 20, 20, 2)
    truth = constant_params(grid.m, 0.5, 6.0, np.pi / 3)
    B = build_sar(grid, truth)
    h = w = 40
    px = pixel_centers((0, 1, 0, 1), h, w)
    Phi = evaluate_basis(grid, SPEC, px).matrix
    C = simulate_coefficients(B, 20, seed=9000)
    fields = (C @ Phi.T).reshape(20, h, w)
    out = run_reconstruction(fields, grid, SPEC, (0, 1, 0, 1),
                             frac=0.03, seed=41, base_params=truth)
    mean_s = out["mean_rmse"]["stationary"]
    mean_n = out["mean_rmse"]["nonstationary"]
    mean_diff = float(np.mean(out["percent_diff"]))
    dt = time.perf_counter() - t0
    assert mean_n <= mean_s
    assert mean_diff < 0.0
    assert out["days_nonstationary_better"] >= 11  # majority of the 20 days
    assert dt < 900.0
    print(f"[reconstruction] mean RMSE oriented {mean_n:.4f} vs stationary {mean_s:.4f}, "
          f"mean diff {mean_diff:.1f}%, better on {out['days_nonstationary_better']}/20 days, "
          f"{dt:.0f}s")


def test_conditional_simulation_calibration_and_exactness():
    """Pooled 95% interval coverage over 600 held-out points sits in
    [0.92, 0.97] with 1000 draws per day; with zero point nugget every
    draw reproduces the observations to 1e-8."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 12, 12, 2)
    params = constant_params(grid.m, 4.0, 1.8, -0.4)
    B = build_sar(grid, params)
    master = 3
    covered = total = 0
    for day in range(24):
        rng = np.random.default_rng(master * 1000 + day)
        c = simulate_coefficients(B, 1, seed=master * 77 + day)[0]
        oloc = rng.uniform(0.02, 0.98, size=(100, 2))
        z = evaluate_basis(grid, SPEC, oloc).matrix @ c + np.sqrt(0.05) * rng.standard_normal(100)
        tloc = rng.uniform(0.02, 0.98, size=(25, 2))
        truth = evaluate_basis(grid, SPEC, tloc).matrix @ c
        model = KrigingModel(ObservationSet(locations=oloc, values=z),
                             CovParams(params, 1.0, 0.05), grid, SPEC)
        ens = conditional_simulate(model, tloc, 1000, seed=master * 13 + day)
        lo, hi = ensemble_interval(ens, 0.95)
        covered += int(((truth >= lo) & (truth <= hi)).sum())
        total += 25
    picp = covered / total

    rng = np.random.default_rng(999)
    oloc = rng.uniform(0.02, 0.98, size=(40, 2))
    c = simulate_coefficients(B, 1, seed=999)[0]
    z = evaluate_basis(grid, SPEC, oloc).matrix @ c
    exact = KrigingModel(ObservationSet(locations=oloc, values=z),
                         CovParams(params, 1.0, 0.0), grid, SPEC)
    draws = conditional_simulate(exact, oloc, 50, seed=7).draws
    max_err = float(np.abs(draws - z[None, :]).max())
    dt = time.perf_counter() - t0
    assert total >= 500
    assert 0.92 <= picp <= 0.97
    assert max_err <= 1e-8
    assert dt < 300.0
    print(f"[condsim] pooled PICP {picp:.4f} over n={total} (band [0.92, 0.97]); "
          f"zero-nugget max draw err {max_err:.1e}, {dt:.0f}s")


def test_areal_covariance_quadrature_vs_monte_carlo():
    """Quadrature areal covariance on a 4x4-cell partition matches the
    Monte-Carlo covariance of areally averaged simulated fields within 5%
    relative Frobenius; the areal-vs-point gap shrinks monotonically as
    cells shrink 4x in area."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 16, 16, 2)
    params = constant_params(grid.m, 1.0, 2.5, 0.6)
    cov = CovParams(params, 1.0, 0.0)
    B = build_sar(grid, params)
    part4 = ArealPartition(0.0, 0.0, 0.25, 0.25, 4, 4, q=6)
    Sg = areal_covariance(cov, part4, grid, SPEC)

    npx = 24  # 6 pixels per cell side, matching the q=6 quadrature nodes
    px = midpoint_pixels(npx)
    Phi = evaluate_basis(grid, SPEC, px).matrix
    fields = simulate_coefficients(B, 20000, seed=11) @ Phi.T
    avg = np.array([areal_average(f.reshape(npx, npx), part4) for f in fields])
    rel = np.linalg.norm(np.cov(avg, rowvar=False) - Sg) / np.linalg.norm(Sg)

    Qinv = np.linalg.inv(precision(B).toarray())
    gaps = []
    for nc in (2, 4, 8):
        cell = 1.0 / nc
        Sa = areal_covariance(cov, ArealPartition(0.0, 0.0, cell, cell, nc, nc, q=6),
                              grid, SPEC)
        cent = pixel_centers((cell / 2, 1 - cell / 2, cell / 2, 1 - cell / 2), nc, nc)
        Phc = evaluate_basis(grid, SPEC, cent).matrix.toarray()
        Sp = Phc @ Qinv @ Phc.T
        gaps.append(np.linalg.norm(Sa - Sp) / np.linalg.norm(Sp))
    dt = time.perf_counter() - t0
    assert rel <= 0.05
    assert gaps[0] > gaps[1] > gaps[2]
    assert dt < 300.0
    print(f"[areal] MC rel Frobenius {rel:.4f} (cap 0.05); point-gap "
          f"{gaps[0]:.3f} > {gaps[1]:.3f} > {gaps[2]:.3f}, {dt:.0f}s")


def make_cv_days(grid, n_per_day, n_days, seed):
    B = build_sar(grid, constant_params(grid.m, 1.0, 2.0, 0.3))
    days = []
    for d in range(n_days):
        rng = np.random.default_rng(seed + d)
        loc = rng.uniform(0.05, 0.95, size=(n_per_day, 2))
        c = simulate_coefficients(B, 1, seed=seed + 100 + d)[0]
        z = evaluate_basis(grid, SPEC, loc).matrix @ c + 0.05 * rng.standard_normal(n_per_day)
        days.append(ObservationSet(locations=loc, values=z, day_id=f"d{d}"))
    return days


def test_metrics_fixture_and_cv_table_shape():
    """Interval metrics reproduce a five-point hand computation exactly,
    and the cross-validation driver emits the full three-variant by
    three-metric table."""
    pred = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    truth = np.array([0.5, 1.0, 2.0, 3.0, 3.0])
    se = np.array([1.0, 1.0, 1.0, 1.0, 0.4])
    m = compute_metrics(pred, se, truth, level=0.95)
    # errors (-0.5, 0, 0, 0, 1): mean square 0.25 exactly, so RMSE is 0.5;
    # the last interval halfwidth Z95*0.4 < 1 misses, the rest cover
    assert m.rmse == 0.5
    assert m.picp == 0.8
    assert m.mpiw == float(np.mean(2.0 * Z95 * se))
    assert m.n == 5
    assert m.level == 0.95

    grid = build_lattice((0, 1, 0, 1), 6, 6, 1)
    nodes = grid.all_points()
    out = run_cv(
        make_cv_days(grid, 45, 2, seed=60),
        grid,
        SPEC,
        k=3,
        seed=5,
        base_params=constant_params(grid.m, 1.0, 1.0, 0.0),
        mask=WeightMask((nodes[:, 0] < 0.5).astype(float)),
        search=SearchConfig(sweeps=2, tol=1e-2, start_fracs=((0.5, 0.5),)),
    )
    variants = ("stationary", "nonstationary", "nonstationary_adjusted")
    assert set(out["table"]) == set(variants)
    for v in variants:
        row = out["table"][v]
        assert set(row) >= {"rmse", "picp", "mpiw"}
        assert np.isfinite([row["rmse"], row["picp"], row["mpiw"]]).all()
        assert row["n"] == 90  # every observation held out exactly once
    assert not out["skipped_days"]
    print(f"[metrics] fixture exact; CV table rmse: "
          + ", ".join(f"{v}={out['table'][v]['rmse']:.3f}" for v in variants))


def test_determinism_roundtrip_and_regeneration(tmp_path):
    """Binary stacks round-trip bit for bit, repeated runs write
    byte-identical metrics JSON, and a 10-pair training-set generation
    reproduces byte-identical shards."""
    rng = np.random.default_rng(31)
    vals = rng.standard_normal((3, 7, 5))
    vals[0, 2, 1] = np.nan
    vals[2, 0, 4] = np.nan
    stack = GridStack(
        channels=("a", "b", "c"),
        values=vals,
        origin=(0.25, -1.5),
        spacing=(0.1, 0.2),
        metadata={"note": "fixture", "standardized": False},
    )
    write_gridstack(stack, tmp_path / "rt.gstk")
    back = read_gridstack(tmp_path / "rt.gstk")
    assert back.values.tobytes() == stack.values.tobytes()
    assert tuple(back.channels) == ("a", "b", "c")
    assert back.origin == stack.origin and back.spacing == stack.spacing
    assert back.metadata == stack.metadata

    grid = build_lattice((0, 1, 0, 1), 6, 6, 1)
    fast = SearchConfig(sweeps=2, tol=1e-2, start_fracs=((0.5, 0.5),))
    paths = []
    for run in ("first", "second"):
        out = run_cv(make_cv_days(grid, 30, 1, seed=21), grid, SPEC, k=2, seed=9,
                     variants=("stationary", "nonstationary"),
                     base_params=constant_params(grid.m, 1.0, 1.0, 0.0), search=fast)
        p = tmp_path / f"metrics_{run}.json"
        write_metrics_json(out, p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()

    gen_grid = build_lattice((0, 1, 0, 1), 8, 8, 1)
    dirs = (tmp_path / "genA", tmp_path / "genB")
    for d in dirs:
        generate_training_set(10, gen_grid, PriorConfig(), r=2, seed=99, out_dir=d)
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    assert sum(n.endswith(".fields.gstk") for n in names) == 10
    for n in names:
        assert (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes()
    print(f"[determinism] stack round-trip exact; metrics JSON byte-identical; "
          f"{len(names)} training shards regenerate byte-identically")


def test_day_fit_and_fine_prediction_within_budget():
    """A 128x128-lattice single-day fit plus mean and SE maps on a 255x255
    target grid completes in under two minutes."""
    t0 = time.perf_counter()
    grid = build_lattice((0, 1, 0, 1), 128, 128, 2)
    params = constant_params(grid.m, 1.0, 3.0, np.pi / 6)
    B = build_sar(grid, params)
    c = simulate_coefficients(B, 1, seed=12)[0]
    rng = np.random.default_rng(3)
    loc = rng.uniform(0.01, 0.99, size=(600, 2))
    z = evaluate_basis(grid, SPEC, loc).matrix @ c + 0.05 * rng.standard_normal(600)
    obs = ObservationSet(locations=loc, values=z)

    res = fit_lambda_mle(obs, params, grid, SPEC)
    model = KrigingModel(obs, res.cov, grid, SPEC)
    out = run_predict_fine(model, (0, 1, 0, 1), (255, 255), n_draws=16, seed=4)
    dt = time.perf_counter() - t0
    assert out["mean"].values.shape == (1, 255, 255)
    assert out["se"].values.shape == (1, 255, 255)
    assert np.isfinite(out["mean"].values).all()
    assert np.isfinite(out["se"].values).all()
    assert (out["se"].values >= 0).all()
    assert dt < 120.0
    print(f"[throughput] 128x128 fit + 255x255 mean/SE maps in {dt:.1f}s (budget 120s)")
