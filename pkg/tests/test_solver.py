import numpy as np
import pytest
from conftest import SCENARIOS, flat_spec

from rayleigh_nehari.energy import energy, second_derivative_diag
from rayleigh_nehari.solver import (
    AT_SUBSTAR,
    BELOW_SUBSTAR,
    BETWEEN,
    N_MINUS,
    N_PLUS,
    NOT_APPLICABLE,
    RefusedError,
    SolverError,
    check_lambda,
    classify_trichotomy,
    default_starts,
    project,
    solve_bound,
    solve_branch,
    solve_ground,
)
from rayleigh_nehari.verify import stationarity

FLAT_LAMBDA_STAR = 0.2**0.25 * 0.8


@pytest.fixture(scope="module")
def flat():
    return flat_spec(0.3, n=64)


def _constant_roots(lam):
    # constant solutions of c - lam c^0.5 - c^3 = 0, i.e. c^0.5 (1 - c^2) = lam
    from scipy.optimize import brentq

    g = lambda c: c**0.5 * (1 - c**2) - lam  # noqa: E731
    return brentq(g, 1e-12, np.sqrt(0.2)), brentq(g, np.sqrt(0.2), 1.0)


def test_flat_ground_state_is_constant_root(flat):
    c_plus, _ = _constant_roots(0.3)
    assert c_plus == pytest.approx(0.0915271, abs=1e-7)
    res = solve_ground(flat, lambda_star=FLAT_LAMBDA_STAR)
    assert res.converged
    np.testing.assert_allclose(res.u, c_plus, rtol=1e-7)
    vol = 2 * np.pi
    expected = vol * (0.5 * c_plus**2 - 0.3 / 1.5 * c_plus**1.5 - c_plus**4 / 4)
    assert res.j == pytest.approx(expected, rel=1e-9)


def test_flat_bound_state_below_constant_competitor(flat):
    _, c_minus = _constant_roots(0.3)
    res = solve_bound(flat, lambda_star=FLAT_LAMBDA_STAR)
    assert res.converged
    assert res.j <= energy(flat, np.full(64, c_minus)) + 1e-12
    assert res.j2_diag < 0


@pytest.mark.parametrize("name", SCENARIOS)
def test_ground_and_bound_solutions(name, solves):
    sp, ground, bound = solves[name, "0.5"]
    for res, sign in ((ground, 1), (bound, -1)):
        assert res.converged
        assert res.residual <= 1e-6 * (1 + res.norm_v)
        assert abs(res.pairing) <= 1e-6 * res.scale
        assert np.sign(res.j2_diag) == sign
        assert stationarity(sp, res.u) <= 1e-4 * res.scale
    assert ground.j < 0
    assert ground.j < bound.j


@pytest.mark.parametrize("name", SCENARIOS)
def test_iterate_histories(name, solves):
    _, ground, bound = solves[name, "0.25"]
    for res, sign in ((ground, 1), (bound, -1)):
        h = np.array(res.energy_history)
        assert np.all(np.diff(h) <= 0)
        scale = np.array(res.norm_history) ** 2
        assert np.all(np.abs(res.pairing_history) <= 1e-8 * scale)
        assert np.all(np.sign(res.j2_history) == sign)
        assert len(h) == res.iterations + 1


def test_refusal_at_and_above_lambda_star(flat):
    with pytest.raises(RefusedError, match="lambda_star"):
        solve_ground(flat.with_lambda(FLAT_LAMBDA_STAR), lambda_star=FLAT_LAMBDA_STAR)
    with pytest.raises(RefusedError):
        solve_bound(flat.with_lambda(0.6), lambda_star=FLAT_LAMBDA_STAR)
    check_lambda(flat, None)
    check_lambda(flat, FLAT_LAMBDA_STAR)


def test_start_without_crossing(flat):
    # above Lambda_n of the start nothing can be projected
    sp = flat.with_lambda(0.6)
    with pytest.raises(SolverError, match="no Nehari crossing"):
        solve_branch(sp, N_PLUS, np.ones(64))


def test_bad_inputs(flat):
    with pytest.raises(SolverError):
        solve_branch(flat, N_PLUS, np.zeros(64))
    with pytest.raises(ValueError):
        solve_branch(flat, "sideways", np.ones(64))


def test_projection_lands_on_branch(flat):
    w = np.cos(flat.grid.axis()) + 2.0
    for branch, sign in ((N_PLUS, 1), (N_MINUS, -1)):
        t, u = project(flat, w, branch)
        assert t > 0
        assert np.sign(second_derivative_diag(flat, u)) == sign
    assert project(flat.with_lambda(5.0), w, N_PLUS) is None


def test_default_starts(flat):
    a = default_starts(flat, N_MINUS, 4, 3)
    b = default_starts(flat, N_MINUS, 4, 3)
    assert len(a) == 4
    assert a[0].min() > 0
    assert a[1].min() < 0 < a[1].max()
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert len(default_starts(flat, N_PLUS, 1, 0)) == 1


def test_trichotomy_labels(solves, estimates):
    est = estimates["power"]
    expect = {"half_substar": BELOW_SUBSTAR, "substar": AT_SUBSTAR, "mid": BETWEEN}
    for key, label in expect.items():
        sp, ground, bound = solves["power", key]
        assert classify_trichotomy(sp, bound, est) == label
        assert "trichotomy_sign_mismatch" not in bound.flags
        assert classify_trichotomy(sp, ground, est) == NOT_APPLICABLE


def test_result_json(solves):
    _, ground, _ = solves["power", "0.5"]
    js = ground.to_json("field_ground.csv")
    assert js["branch"] == N_PLUS
    assert js["field_csv_path"] == "field_ground.csv"
    assert js["converged"] is True
