import numpy as np
import pytest
from conftest import surrogate_spec

from rayleigh_nehari.config import bundled_path, load_config
from rayleigh_nehari.energy import derivative_pairing, energy, evaluate
from rayleigh_nehari.fibers import (
    NO_ROOT,
    TANGENT,
    TWO_ROOTS,
    FiberError,
    Ray,
    bisect_increasing,
    fiber_report,
    lambda_e,
    lambda_n,
    rayleigh_e,
    rayleigh_n,
    sample_fiber,
)
from rayleigh_nehari.verify import aii_defect, random_fields


@pytest.fixture(scope="module")
def log_spec():
    return load_config(bundled_path("log_power")).build_spec(0.05)


@pytest.fixture(scope="module")
def power_spec():
    return load_config(bundled_path("power")).build_spec(0.5)


def surrogate_ray(lam=0.3):
    sp = surrogate_spec(lam)
    return Ray(sp, np.ones(8))


def test_surrogate_integrals_are_unity():
    ray = surrogate_ray()
    assert ray.A == pytest.approx(1.0, rel=1e-14)
    assert ray.D == pytest.approx(1.0, rel=1e-14)


def test_surrogate_fiber_maps():
    # constant field with A = D = 1 and f = t^3: q_n = t^0.5 (1 - t^2), q_e = 1.5 t^0.5 (1/2 - t^2/4)
    ray = surrogate_ray()
    for t in (0.1, 0.5, 1.0, 2.0):
        assert ray.q_n(t) == pytest.approx(t**0.5 * (1 - t**2), rel=1e-13)
        assert ray.q_e(t) == pytest.approx(1.5 * t**0.5 * (0.5 - t**2 / 4), rel=1e-13)
    assert ray.q_n(0.0) == 0.0


def test_surrogate_maximizers():
    ray = surrogate_ray()
    # d/dt t^0.5 (1 - t^2) = 0 at t^2 = 1/5; d/dt t^0.5 (2 - t^2) = 0 at t^2 = 2/5
    assert ray.t_n() == pytest.approx(np.sqrt(0.2), rel=1e-9)
    assert ray.t_e() == pytest.approx(np.sqrt(0.4), rel=1e-9)
    assert lambda_n(ray.spec, ray.u) == pytest.approx(0.2**0.25 * 0.8, rel=1e-12)
    assert lambda_e(ray.spec, ray.u) == pytest.approx(1.5 * 0.4**0.25 * 0.4, rel=1e-12)


def test_surrogate_nehari_roots():
    ray = surrogate_ray()
    r = ray.nehari_roots(0.3)
    assert r.status == TWO_ROOTS
    for t in r.pair():
        assert t**0.5 * (1 - t**2) == pytest.approx(0.3, rel=1e-9)
    assert r.plus == pytest.approx(0.0915271, abs=1e-6)
    assert r.minus == pytest.approx(0.8174, abs=1e-4)


def test_surrogate_no_root_and_tangent():
    ray = surrogate_ray()
    assert ray.nehari_roots(0.6).status == NO_ROOT
    ln = 0.2**0.25 * 0.8
    r = ray.nehari_roots(ln)
    assert r.status == TANGENT
    assert r.plus == r.minus == pytest.approx(np.sqrt(0.2), rel=1e-9)


def test_surrogate_aii_spot_value():
    ray = surrogate_ray()
    # q_n(1) - q_e(1) = 0 - 0.375
    assert ray.q_n(1.0) - ray.q_e(1.0) == pytest.approx(-0.375, rel=1e-13)
    h = 1e-6
    dqe = (ray.q_e(1 + h) - ray.q_e(1 - h)) / (2 * h)
    assert dqe / 1.5 == pytest.approx(-0.375, rel=1e-8)


def test_rayleigh_quotients_at_unit_scale(power_spec):
    u = random_fields(power_spec, 1, 0)[0]
    fv = evaluate(power_spec, u)
    rn = (fv.norm_v_sq - fv.nl_pairing) / fv.norm_qa_q
    re = 1.5 * (fv.norm_v_sq / 2 - fv.nl_energy) / fv.norm_qa_q
    assert rayleigh_n(power_spec, u) == pytest.approx(rn, rel=1e-12)
    assert rayleigh_e(power_spec, u) == pytest.approx(re, rel=1e-12)


def _scan_qn(spec, u, ts):
    """q_n on many t, assembled directly from the grid sums."""
    h = spec.grid.h
    A = evaluate(spec, u).norm_v_sq
    D = h * np.sum(spec.a * np.abs(u) ** spec.q)
    w = h * spec.b * u**2
    out = np.empty_like(ts)
    for i in range(0, ts.size, 4096):
        chunk = ts[i : i + 4096, None]
        s = np.log1p(chunk * np.abs(u)[None, :]) @ w
        out[i : i + 4096] = chunk[:, 0] ** (2 - spec.q) * (A - s) / D
    return out


def test_log_maximizer_against_dense_scan(log_spec):
    u = random_fields(log_spec, 1, 3)[0]
    ray = Ray(log_spec, u)
    tn = ray.t_n()
    ts = np.geomspace(tn / 10, tn * 10, 10**6)
    vals = _scan_qn(log_spec, u, ts)
    i = int(np.argmax(vals))
    # grid spacing in t is about 4.6e-6 relative
    assert tn == pytest.approx(ts[i], rel=1e-4)
    assert ray.q_n(tn) == pytest.approx(vals[i], rel=1e-9)
    assert ray.q_n(tn) >= vals[i] - 1e-12 * abs(vals[i])


@pytest.mark.parametrize("name", ["power_spec", "log_spec"])
def test_aii_identity(name, request):
    sp = request.getfixturevalue(name)
    rng = np.random.default_rng(1)
    for u in random_fields(sp, 20, 2):
        ray = Ray(sp, u)
        for t in ray.t_n() * 10 ** rng.uniform(-1, 1, 5):
            assert aii_defect(ray, t) <= 1e-6


@pytest.mark.parametrize("name", ["power_spec", "log_spec"])
def test_orderings(name, request):
    sp = request.getfixturevalue(name)
    for u in random_fields(sp, 40, 4):
        ray = Ray(sp, u)
        tn, te = ray.t_n(), ray.t_e()
        assert tn < te
        assert ray.q_e(te) < ray.q_n(tn)
        lam = 0.5 * ray.q_e(te)
        rn = ray.nehari_roots(lam, t_n=tn)
        re = ray.zero_energy_roots(lam, t_e=te)
        assert rn.status == re.status == TWO_ROOTS
        assert rn.plus < tn < rn.minus
        assert re.plus < te < re.minus
        assert te < rn.minus < re.minus
        assert re.plus < rn.minus


def test_sign_dictionary(power_spec):
    sp = power_spec
    for u in random_fields(sp, 10, 5):
        ray = Ray(sp, u)
        lam = 0.5 * ray.q_e(ray.t_e())
        spl = sp.with_lambda(lam)
        for t in ray.t_n() * np.geomspace(0.05, 20, 15):
            dn = ray.q_n(t) - lam
            de = ray.q_e(t) - lam
            pair = derivative_pairing(spl, t * u)
            J = energy(spl, t * u)
            if abs(dn) > 1e-9:
                assert np.sign(dn) == np.sign(pair)
            if abs(de) > 1e-9:
                assert np.sign(de) == np.sign(J)


def test_pairing_root_is_critical_on_ray(power_spec):
    u = random_fields(power_spec, 1, 6)[0]
    ray = Ray(power_spec, u)
    r = ray.nehari_roots(power_spec.lam)
    if r.status != TWO_ROOTS:
        pytest.skip("lambda above Lambda_n for this field")
    for t in r.pair():
        assert abs(ray.pairing(t)) <= 1e-8 * t * t * ray.A
    assert ray.second(r.plus) > 0 > ray.second(r.minus)


@pytest.mark.parametrize("alpha", [0.1, 3.0, 10.0])
def test_homogeneity(alpha, log_spec):
    for u in random_fields(log_spec, 5, 7):
        a, b = Ray(log_spec, u), Ray(log_spec, alpha * u)
        assert b.t_n() == pytest.approx(a.t_n() / alpha, rel=1e-9)
        assert lambda_n(log_spec, alpha * u) == pytest.approx(lambda_n(log_spec, u), rel=1e-9)
        assert lambda_e(log_spec, alpha * u) == pytest.approx(lambda_e(log_spec, u), rel=1e-9)


def test_fiber_report_fields(power_spec):
    u = random_fields(power_spec, 1, 8)[0]
    fr = fiber_report(power_spec, u, lam=1e-3)
    assert fr.status_n == fr.status_e == TWO_ROOTS
    assert fr.t_n < fr.t_e
    js = fr.to_json()
    assert js["roots_n"][0] < js["t_n"] < js["roots_n"][1]
    fr2 = fiber_report(power_spec, u, lam=1e3)
    assert fr2.status_n == NO_ROOT and fr2.roots_n is None


def test_zero_field_rejected(power_spec):
    with pytest.raises(FiberError):
        Ray(power_spec, np.zeros(power_spec.grid.shape))


def test_zero_denominator_rejected():
    from rayleigh_nehari.grid import build_grid
    from rayleigh_nehari.nonlinearity import power_sum
    from rayleigh_nehari.problem import ProblemSpec

    g = build_grid(1, 64, 4.0, 0.4)
    x = g.axis()
    sp = ProblemSpec(grid=g, q=1.5, p=4, lam=0.5, V=1.0, a=(x < 0).astype(float), b=1.0, nonlinearity=power_sum(4))
    with pytest.raises(FiberError):
        Ray(sp, np.where(x > 0, 1.0, 0.0))


def test_sample_fiber_rows(power_spec):
    u = random_fields(power_spec, 1, 9)[0]
    rows = sample_fiber(power_spec, u, 1e-2, 1e2, 50)
    assert rows.shape == (50, 4)
    assert np.all(np.diff(rows[:, 0]) > 0)
    ray = Ray(power_spec, u)
    np.testing.assert_allclose(rows[10, 1:], [ray.q_n(rows[10, 0]), ray.q_e(rows[10, 0]), ray.energy(rows[10, 0])])
    with pytest.raises(ValueError):
        sample_fiber(power_spec, u, 1.0, 0.5, 10)


def test_bisect_increasing():
    root = bisect_increasing(lambda t: t**2 - 2.0, 1.0, 2.0, 1e-12)
    assert root == pytest.approx(np.sqrt(2.0), rel=1e-11)
