import numpy as np
from fastapi.testclient import TestClient

from anchorkit.service.app import app

client = TestClient(app)


def test_health():
    res = client.get("/health")
    assert res.status_code == 200
    assert res.json()["status"] == "ok"


def test_solve_appm():
    res = client.post("/solve", json={
        "method": "appm",
        "operator": {"kind": "rotation2d"},
        "iters": 2000,
    })
    assert res.status_code == 200
    body = res.json()
    assert body["columns"] == ["k", "resid_sq", "beta"]
    assert len(body["rows"]) == 2000
    assert body["summary"]["method"] == "appm"
    assert -2.2 <= body["summary"]["slope"] <= -1.8


def test_solve_include_coords():
    res = client.post("/solve", json={
        "method": "appm",
        "operator": {"kind": "rotation2d"},
        "iters": 50,
        "include_coords": True,
    })
    assert res.json()["columns"] == ["k", "resid_sq", "beta", "x_0", "x_1"]


def test_solve_adaptive_bounds_reported():
    res = client.post("/solve", json={
        "method": "adaptive",
        "operator": {"kind": "scaled_identity", "mu": 1.0},
        "iters": 200,
        "x_star": [0.0, 0.0],
    })
    body = res.json()
    checks = dict((name, ok) for name, ok in body["summary"]["bounds_ok"])
    assert checks["iterates_bounded"]
    assert checks["beta_first_is_half"]
    assert checks["beta_le_inv_kp1"]


def test_simulate_trajectory_schema():
    res = client.post("/simulate", json={
        "operator": {"kind": "rotation2d"},
        "schedule": {"family": "power_law", "gamma": 1.0, "p": 1.0},
        "t_max": 5.0,
        "steps": 500,
    })
    assert res.status_code == 200
    body = res.json()
    assert body["columns"] == ["t", "x_0", "x_1", "resid_sq", "beta"]
    assert len(body["rows"]) == 501
    # spiral toward the origin: state norm shrinks
    first = np.hypot(body["rows"][0][1], body["rows"][0][2])
    last = np.hypot(body["rows"][-1][1], body["rows"][-1][2])
    assert last < first


def test_simulate_strongly_monotone_bounds():
    res = client.post("/simulate", json={
        "operator": {"kind": "scaled_identity", "mu": 1.0},
        "schedule": {"family": "strongly_monotone", "mu": 1.0},
        "t_max": 10.0,
        "steps": 20000,
        "x_star": [0.0, 0.0],
    })
    checks = dict((n, ok) for n, ok in res.json()["summary"]["bounds_ok"])
    assert checks["trajectory_bounded"]
    assert checks["strong_residual_bound"]
    assert checks["strong_lyapunov_nonpositive"]


def test_rates_requires_window():
    res = client.post("/rates", json={
        "method": "appm",
        "operator": {"kind": "rotation2d"},
        "iters": 100,
    })
    assert res.status_code == 422


def test_rates_with_window():
    res = client.post("/rates", json={
        "method": "appm",
        "operator": {"kind": "rotation2d"},
        "iters": 5000,
        "window": [50, 5000],
    })
    body = res.json()
    assert body["summary"]["method"] == "rates"
    assert -2.2 <= body["summary"]["slope"] <= -1.8


def test_worstcase_endpoint():
    res = client.post("/worstcase", json={
        "gamma": 1.0, "p": 1.0, "r_kind": "t2",
        "t_min": 10.0, "t_max": 60.0, "n_points": 120, "floor": 3.5,
    })
    body = res.json()
    assert body["summary"]["limsup_estimate"] >= 3.5
    assert dict((n, ok) for n, ok in body["summary"]["bounds_ok"])["above_floor"]


def test_pgextra_endpoint_and_schema():
    res = client.post("/pgextra", json={
        "seed": 7, "iters": 300,
        "anchor": {"family": "adaptive"},
    })
    body = res.json()
    assert body["columns"] == ["k", "resid_sq_euclid", "resid_sq_M", "beta"]
    assert len(body["rows"]) == 300
    checks = dict((n, ok) for n, ok in body["summary"]["bounds_ok"])
    assert checks["beta_le_inv_kp1"]


def test_pgextra_paper_preset_dimensions():
    res = client.post("/pgextra", json={"seed": 1, "iters": 5, "preset": "paper"})
    body = res.json()
    assert body["summary"]["d"] == 100
    assert body["summary"]["n_agents"] == 20


def test_limitcheck_endpoint():
    res = client.post("/limitcheck", json={
        "operator": {"kind": "scaled_identity", "mu": 1.0},
        "t_horizon": 10.0,
        "h_list": [0.1, 0.05, 0.025],
    })
    body = res.json()
    assert body["columns"] == ["h", "max_deviation"]
    checks = dict((n, ok) for n, ok in body["summary"]["bounds_ok"])
    assert checks["deviations_decreasing"]


def test_validation_error_is_422():
    res = client.post("/solve", json={
        "method": "generalized",
        "operator": {"kind": "rotation2d"},
        "p": -0.5,
    })
    assert res.status_code == 422


def test_domain_error_maps_to_400_with_kind():
    # adaptive flow from an exact zero of the operator is a config error
    res = client.post("/simulate", json={
        "operator": {"kind": "rotation2d"},
        "schedule": {"family": "adaptive"},
        "x0": [0.0, 0.0],
        "t_max": 1.0,
        "steps": 100,
    })
    assert res.status_code == 400
    assert res.json()["kind"] == "config"


def test_invariant_error_kind():
    # the adaptive rotation flow reaches the zero near t = 2 pi; past it the
    # coefficient denominator vanishes, a numeric failure
    res = client.post("/simulate", json={
        "operator": {"kind": "rotation2d"},
        "schedule": {"family": "adaptive"},
        "t_max": 10.0,
        "steps": 2000,
    })
    assert res.status_code == 400
    assert res.json()["kind"] == "numeric"
