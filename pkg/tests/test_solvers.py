import math

import numpy as np
import pytest

from anchorkit import operators as ops
from anchorkit import solvers as solv
from anchorkit.errors import ConfigError

ROT = ops.rotation2d()
X0 = np.array([1.0, 0.0])


def test_zero_operator_stationary():
    log = solv.run_generalized_anchor(ops.zero_operator(2), 1.0, 1.0,
                                      np.array([2.0, -1.0]),
                                      solv.SolverConfig(max_iter=50))
    assert np.allclose(log.xs, log.xs[0], atol=0)
    assert np.allclose(log.residuals, 0.0, atol=0)


def test_generalized_reduces_to_appm_exactly():
    cfg = solv.SolverConfig(max_iter=100)
    a = solv.run_appm(ROT, X0, cfg)
    b = solv.run_generalized_anchor(ROT, 1.0, 1.0, X0, cfg)
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.ys, b.ys)


def test_appm_residual_bound():
    cfg = solv.SolverConfig(max_iter=10_000)
    for op in (ROT, ops.scaled_identity(0.1)):
        log = solv.run_appm(op, X0, cfg)
        norms = np.sqrt(log.residual_sq())
        bound = np.linalg.norm(X0) / log.ks
        assert np.all(norms <= bound * (1 + 1e-10))


def test_appm_rate_slope_scaled_identity():
    log = solv.run_appm(ops.scaled_identity(0.1), X0,
                        solv.SolverConfig(max_iter=10_000))
    from anchorkit.diagnostics import fit_rate
    fit = fit_rate(log, window=(100, 10_000))
    assert fit.slope <= -2 + 0.15


def test_halpern_degenerate_weights():
    cfg = solv.SolverConfig(max_iter=30)
    # constant weight 1 freezes the y sequence at the start
    log = solv.run_halpern(ROT, np.ones(30), X0, cfg)
    assert np.allclose(log.ys, X0, atol=0)
    # weight 0 is plain Picard iteration on the reflected resolvent
    log0 = solv.run_halpern(ROT, np.zeros(30), X0, cfg)
    y = X0.copy()
    for i in range(30):
        y = ops.reflected_resolvent(ROT, y, 1.0)
        assert np.allclose(log0.ys[i], y, atol=0)


def test_halpern_matches_appm_with_matched_weights():
    n = 200
    cfg = solv.SolverConfig(max_iter=n)
    appm = solv.run_appm(ROT, X0, cfg)
    halp = solv.run_halpern(ROT, [1.0 / (k + 2.0) for k in range(n)], X0, cfg)
    assert np.max(np.abs(appm.ys - halp.ys)) <= 1e-12


def test_halpern_validates_weights():
    with pytest.raises(ConfigError):
        solv.run_halpern(ROT, [0.5, 1.5], X0, solv.SolverConfig(max_iter=2))
    with pytest.raises(ConfigError):
        solv.run_halpern(ROT, [0.5], X0, solv.SolverConfig(max_iter=5))


def test_osppm_mu_zero_equals_appm():
    cfg = solv.SolverConfig(max_iter=100)
    appm = solv.run_appm(ROT, X0, cfg)
    os0 = solv.run_osppm(ROT, 0.0, X0, cfg)
    assert np.max(np.abs(appm.ys - os0.ys)) <= 1e-12
    assert np.max(np.abs(appm.xs - os0.xs)) <= 1e-12


def test_osppm_exponential_decay_rate():
    # on mu I the method contracts by exactly 1/nu per step, so the squared
    # residual decays at slope 2 log(1/nu) per iteration (direct simulation
    # oracle; nu = 1 + 2 h mu)
    mu, h = 0.2, 1.0
    nu = 1.0 + 2.0 * h * mu
    log = solv.run_osppm(ops.scaled_identity(mu), mu, X0,
                         solv.SolverConfig(max_iter=60, h=h))
    rs = log.residual_sq()
    keep = rs > 1e-280
    slope = np.polyfit(log.ks[keep], np.log(rs[keep]), 1)[0]
    assert slope <= math.log(nu ** -2) * 0.9
    assert slope == pytest.approx(2.0 * math.log(1.0 / nu), rel=0.05)


def test_osppm_stationary_at_zero():
    log = solv.run_osppm(ops.scaled_identity(0.5), 0.5, np.zeros(2),
                         solv.SolverConfig(max_iter=20))
    assert np.allclose(log.xs, 0.0, atol=0)
    assert np.allclose(log.residuals, 0.0, atol=0)


def test_osppm_weight_recurrence_never_overflows():
    # nu^{2k} overflows around k ~ 700 at h mu = 0.5; the reciprocal
    # recurrence must keep going
    log = solv.run_osppm(ops.scaled_identity(0.5), 0.5, X0,
                         solv.SolverConfig(max_iter=2000))
    assert np.all(np.isfinite(log.betas))
    assert log.betas[-1] >= 0.0


def test_adaptive_first_weight_is_half():
    for op in (ROT, ops.scaled_identity(1.0), ops.l1_subdifferential(0.5, 2)):
        log = solv.run_adaptive(op, np.array([1.0, 0.4]),
                                solv.SolverConfig(max_iter=5))
        assert log.betas[0] == pytest.approx(0.5, abs=1e-15)


def test_adaptive_weight_envelope():
    rng = np.random.default_rng(7)
    for op in (ROT, ops.scaled_identity(1.0),
               ops.affine([[1.0, 2.0], [-2.0, 1.0]]),
               ops.l1_subdifferential(0.5, 2)):
        x0 = rng.standard_normal(op.dim) * 2.0
        log = solv.run_adaptive(op, x0, solv.SolverConfig(max_iter=1000))
        assert np.all(log.betas >= 0.0)
        assert np.all(log.betas < 1.0)
        assert np.all(log.betas <= 1.0 / (log.ks + 1.0) + 1e-12)


def test_adaptive_inner_product_stays_negative():
    rng = np.random.default_rng(3)
    for op in (ROT, ops.scaled_identity(0.5), ops.l1_subdifferential(0.3, 2)):
        x0 = rng.standard_normal(op.dim) * 2.0
        log = solv.run_adaptive(op, x0, solv.SolverConfig(max_iter=400))
        raw = log.residuals * log.h
        rs = np.einsum("ij,ij->i", raw, raw)
        inner = np.einsum("ij,ij->i", raw, log.xs - x0)
        live = rs > 1e-24
        assert np.all(inner[live] < 0)


def test_adaptive_exact_zero_freezes_iterates():
    # soft-thresholding kills the start in one step; the residual hits an
    # exact zero at k = 2 and the method must stay put from then on
    op = ops.l1_subdifferential(1.0, 1)
    log = solv.run_adaptive(op, np.array([0.5]), solv.SolverConfig(max_iter=10))
    assert np.allclose(log.xs, 0.0, atol=0)
    rs = log.residual_sq()
    assert rs[0] == pytest.approx(0.25)
    assert np.all(rs[1:] == 0.0)
    assert np.all(log.betas[1:] == 0.0)


def test_iterates_bounded_for_anchored_methods():
    rng = np.random.default_rng(11)
    cfg = solv.SolverConfig(max_iter=300)
    for op in (ROT, ops.scaled_identity(0.3), ops.l1_subdifferential(0.4, 2)):
        x0 = rng.standard_normal(op.dim) * 3.0
        d0 = np.linalg.norm(x0)
        for log in (solv.run_appm(op, x0, cfg),
                    solv.run_generalized_anchor(op, 2.0, 0.7, x0, cfg),
                    solv.run_adaptive(op, x0, cfg)):
            dists = np.linalg.norm(log.xs, axis=1)
            assert np.all(dists <= d0 * (1 + 1e-10))


def test_iterate_log_reverifies_against_resolvent():
    cfg = solv.SolverConfig(max_iter=50, h=0.5)
    log = solv.run_generalized_anchor(ROT, 1.5, 1.0, X0, cfg)
    prox = ops.make_resolvent(ROT, log.h)
    for x, resid in zip(log.xs, log.residuals):
        y_prev = x + log.h * resid
        assert np.linalg.norm(prox(y_prev) - x) <= 1e-10


def test_record_every_subsamples():
    cfg = solv.SolverConfig(max_iter=100, record_every=10)
    log = solv.run_appm(ROT, X0, cfg)
    assert list(log.ks) == [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]


def test_table_rates_generalized_method():
    # discrete decay exponents across the (p, gamma) regimes
    from anchorkit.diagnostics import fit_rate
    cases = [(1.0, 1.0, -2.0), (1.0, 2.0, -2.0), (1.0, 0.5, -1.0),
             (0.5, 1.0, -1.0)]
    for p, gamma, target in cases:
        log = solv.run_generalized_anchor(ROT, gamma, p, X0,
                                          solv.SolverConfig(max_iter=20_000))
        fit = fit_rate(log, window=(200, 20_000))
        assert abs(fit.slope - target) <= 0.15, (p, gamma, fit.slope)
    log = solv.run_generalized_anchor(ROT, 1.0, 1.5, X0,
                                      solv.SolverConfig(max_iter=20_000))
    fit = fit_rate(log, window=(200, 20_000))
    assert -0.2 < fit.slope <= 0.2
