"""Invariant suite run by ``rayleigh-nehari verify``.

Each check returns an :class:`Invariant` row; nothing here raises on a
failed property, so the CLI can print the whole table.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from . import fibers, solver
from .energy import evaluate, residual_field, second_derivative_diag
from .extremal import ExtremalEstimate, certify_gap, estimate_extremals
from .fibers import TWO_ROOTS, FiberError, Ray
from .grid import apply_fractional_laplacian, inner_product_V, integrate, norm_V_sq
from .hypotheses import check_hypotheses, sample_points
from .nonlinearity import numeric_primitive
from .problem import ProblemSpec

log = logging.getLogger(__name__)

FLOOR = 1e-12


@dataclass
class Invariant:
    module: str
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"module": self.module, "name": self.name, "pass": bool(self.passed), "detail": self.detail}


def rel_err(a: float, b: float, scale: float | None = None) -> float:
    ref = max(abs(a), abs(b)) if scale is None else abs(scale)
    return abs(a - b) / max(ref, FLOOR)


def random_field(spec: ProblemSpec, rng: np.random.Generator) -> np.ndarray:
    """Sum of one to three Gaussian bumps with random signs and overall scale."""
    grid = spec.grid
    coords = grid.coords()
    L = grid.L
    u = np.zeros(grid.shape)
    for _ in range(rng.integers(1, 4)):
        center = rng.uniform(-0.5 * L, 0.5 * L, size=grid.d)
        width = rng.uniform(0.05, 0.3) * L
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
        u += rng.uniform(-2.0, 2.0) * np.exp(-0.5 * r2 / width**2)
    return u * 10.0 ** rng.uniform(-1.0, 1.0)


def random_fields(spec: ProblemSpec, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [random_field(spec, rng) for _ in range(count)]


def random_direction(spec: ProblemSpec, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``m * u`` with ``m`` a random trigonometric polynomial of size O(1).

    The ``|u|^q`` term is only C^1 where ``u`` vanishes, so a direction that is
    large where ``u`` is tiny makes central differences converge like
    ``eps^(q-1)``. A multiplier keeps ``u + eps*phi`` from changing sign.
    """
    g = spec.grid
    m = np.full(g.shape, rng.uniform(-1.0, 1.0))
    for _ in range(4):
        k = rng.integers(1, 6, size=g.d)
        phase = sum(kk * np.pi * c / g.L for kk, c in zip(k, g.coords()))
        m += rng.uniform(-1.0, 1.0) * np.cos(phase + rng.uniform(0, 2 * np.pi))
    return m * u


# -- spectral_grid --------------------------------------------------------------
def check_grid(spec: ProblemSpec, seed: int = 0) -> list[Invariant]:
    g, V = spec.grid, spec.V
    out = []
    m = g.multipliers
    idx = (-np.arange(g.n)) % g.n
    flipped = m[np.ix_(*[idx] * g.d)]
    ok = m.flat[0] == 0.0 and np.all(m >= 0) and np.allclose(m, flipped, rtol=1e-14, atol=0)
    out.append(Invariant("spectral_grid", "multipliers", bool(ok), "zero mode 0, nonnegative, k -> -k symmetric"))

    fields_ = random_fields(spec, 50, seed)
    worst = 0.0
    for u in fields_:
        val = integrate(g, u * apply_fractional_laplacian(g, u))
        worst = min(worst, val / max(integrate(g, u * u) * m.max(), FLOOR))
    const = integrate(g, np.ones(g.shape) * apply_fractional_laplacian(g, np.ones(g.shape)))
    out.append(
        Invariant(
            "spectral_grid",
            "parseval_nonnegative",
            worst >= -1e-10 and abs(const) <= 1e-10,
            f"min relative value {worst:.3g}; constant field {const:.3g}",
        )
    )

    worst = 0.0
    for u, v in zip(fields_[::2], fields_[1::2]):
        a, b = inner_product_V(g, V, u, v), inner_product_V(g, V, v, u)
        scale = np.sqrt(norm_V_sq(g, V, u) * norm_V_sq(g, V, v))
        worst = max(worst, abs(a - b) / max(scale, FLOOR))
    out.append(Invariant("spectral_grid", "inner_product_symmetric", worst <= 1e-12, f"max defect {worst:.3g}"))

    x = g.coords()[0]
    k = 3
    mode = np.cos(k * np.pi * x / g.L)
    lap = apply_fractional_laplacian(g, mode, s=1.0)
    err = np.max(np.abs(lap - (k * np.pi / g.L) ** 2 * mode)) / (k * np.pi / g.L) ** 2
    out.append(Invariant("spectral_grid", "s_to_1_laplacian", err <= 1e-10, f"max relative defect {err:.3g}"))
    return out


# -- problem_model --------------------------------------------------------------
def check_problem(spec: ProblemSpec) -> list[Invariant]:
    nl, q = spec.nonlinearity, spec.q
    out = []
    rep = check_hypotheses(spec)
    failed = [c.name for c in rep.checks() if not c.passed]
    out.append(
        Invariant("problem_model", "hypotheses", rep.all_passed, "all passed" if not failed else f"failed: {failed}")
    )
    ts = sample_points(400, 1e3)
    Gp, Gm = np.asarray(nl.G(q, ts)), np.asarray(nl.G(q, -ts))
    ok = bool(np.all(np.diff(Gp) > 0) and np.all(np.diff(Gm) > 0))
    out.append(Invariant("problem_model", "G_monotone", ok, "G strictly increasing in |t| on samples"))
    both = np.concatenate([-ts[::-1], ts])
    gap = np.asarray(nl.f(both)) * both - q * np.asarray(nl.F(both))
    out.append(Invariant("problem_model", "ft_ge_qF", bool(np.all(gap >= 0)), f"min f t - q F = {gap.min():.3g}"))
    if nl.kind != "custom" or nl._F is not None:
        tt = np.linspace(-10.0, 10.0, 41)
        err = float(np.max(np.abs(numeric_primitive(nl.f, tt) - np.asarray(nl.F(tt)))))
        out.append(Invariant("problem_model", "primitive_matches_quadrature", err <= 1e-9, f"max |diff| {err:.3g}"))
    return out


# -- energy_functional ------------------------------------------------------------
def check_energy(spec: ProblemSpec, seed: int = 1, pairs: int = 20) -> list[Invariant]:
    g, V = spec.grid, spec.V
    out = []
    rng = np.random.default_rng(seed)
    worst_dec = worst_d1 = worst_d2 = 0.0
    for _ in range(pairs):
        u = random_field(spec, rng)
        phi = random_direction(spec, u, rng)
        fv = evaluate(spec, u)
        parts = fv.norm_v_sq / 2 - spec.lam / spec.q * fv.norm_qa_q - fv.nl_energy
        worst_dec = max(worst_dec, rel_err(fv.j, parts, max(abs(fv.j), fv.norm_v_sq)))
        phi = phi * np.sqrt(norm_V_sq(g, V, u) / norm_V_sq(g, V, phi))
        eps = 1e-5
        fd = (evaluate(spec, u + eps * phi).j - evaluate(spec, u - eps * phi).j) / (2 * eps)
        an = integrate(g, residual_field(spec, u) * phi)
        worst_d1 = max(worst_d1, rel_err(fd, an))
        h = 1e-4
        j = lambda t: evaluate(spec, t * u).j  # noqa: E731
        fd2 = (j(1 + h) - 2 * j(1.0) + j(1 - h)) / h**2
        worst_d2 = max(worst_d2, rel_err(fd2, second_derivative_diag(spec, u, fv)))
    out.append(Invariant("energy_functional", "decomposition", worst_dec <= 1e-12, f"max rel {worst_dec:.3g}"))
    out.append(Invariant("energy_functional", "directional_derivative_fd", worst_d1 <= 1e-5, f"max rel {worst_d1:.3g}"))
    out.append(Invariant("energy_functional", "second_derivative_fd", worst_d2 <= 1e-4, f"max rel {worst_d2:.3g}"))
    out.append(check_coercivity(spec))
    return out


def coercivity_family(spec: ProblemSpec, seed: int = 0) -> list[np.ndarray]:
    """Fields whose Nehari projections have growing norm.

    Localized oscillations ``bump * cos(k pi x / L)`` followed by low-pass
    filtered noise with increasing cutoff.
    """
    g = spec.grid
    x = g.coords()[0]
    bump = np.exp(-0.5 * g.radius() ** 2 / (0.2 * g.L) ** 2)
    out = [bump * np.cos(k * np.pi * x / g.L) for k in np.unique(np.geomspace(1, g.n // 4, 12).astype(int))]
    rng = np.random.default_rng(seed)
    noise = np.fft.fftn(rng.standard_normal(g.shape))
    freq = np.sqrt(sum(k**2 for k in np.meshgrid(*[np.fft.fftfreq(g.n, 1.0 / g.n)] * g.d, indexing="ij")))
    for kc in np.geomspace(2, g.n // 2, 8):
        out.append(np.real(np.fft.ifftn(noise * (freq <= kc))))
    return out


def check_coercivity(spec: ProblemSpec) -> Invariant:
    """J grows with the norm along Nehari points spanning a tenfold norm range.

    Each field of :func:`coercivity_family` is projected to its ``N_minus``
    root; sorted by norm, J must increase past its smallest sampled value.
    """
    pts = []
    for w in coercivity_family(spec):
        try:
            ray = Ray(spec, w)
            r = ray.nehari_roots(spec.lam)
        except FiberError:
            continue
        if r.status == TWO_ROOTS:
            fv = evaluate(spec, r.minus * ray.u)
            pts.append((np.sqrt(fv.norm_v_sq), fv.j))
    pts.sort()
    if len(pts) < 3:
        return Invariant("energy_functional", "coercive_on_nehari", False, "too few Nehari samples")
    norms, js = np.array(pts).T
    tail = js[int(np.argmin(js)):]
    ok = norms[-1] >= 10.0 * norms[0] and bool(np.all(np.diff(tail) > 0))
    return Invariant(
        "energy_functional",
        "coercive_on_nehari",
        ok,
        f"{len(pts)} samples, norms {norms[0]:.3g}..{norms[-1]:.3g}, J {js[0]:.3g}..{js[-1]:.3g}",
    )


# -- fiber_analysis -----------------------------------------------------------------
def aii_defect(ray: Ray, t: float) -> float:
    """Relative defect of ``q_n - q_e = (t/q) q_e'`` with a central difference."""
    h = 1e-6 * t
    dqe = (ray.q_e(t + h) - ray.q_e(t - h)) / (2 * h)
    lhs = ray.q_n(t) - ray.q_e(t)
    rhs = t / ray.q * dqe
    return abs(lhs - rhs) / max(abs(lhs), abs(ray.q_n(t)) + abs(ray.q_e(t)), FLOOR)


def check_fibers(spec: ProblemSpec, seed: int = 2, count: int = 100) -> list[Invariant]:
    lam = spec.lam
    out = []
    rng = np.random.default_rng(seed + 1000)
    fields_ = random_fields(spec, count, seed)
    worst_aii = 0.0
    order_bad, chain_bad, sign_bad, bridge_bad, homog = [], [], [], [], 0.0
    min_norm = np.inf
    two = 0
    for i, u in enumerate(fields_):
        ray = Ray(spec, u)
        tn, te = ray.t_n(), ray.t_e()
        Ln, Le = ray.q_n(tn), ray.q_e(te)
        if i < 50:
            for t in tn * 10.0 ** rng.uniform(-1.0, 1.0, 10):
                worst_aii = max(worst_aii, aii_defect(ray, t))
        rn = ray.nehari_roots(lam, t_n=tn)
        re = ray.zero_energy_roots(lam, t_e=te)
        if not (tn < te and Le < Ln):
            order_bad.append(i)
        if rn.status == TWO_ROOTS:
            two += 1
            if not rn.plus < tn < rn.minus:
                order_bad.append(i)
            # derivative bridge at both roots
            for t, sgn in ((rn.plus, 1.0), (rn.minus, -1.0)):
                h = 1e-6 * t
                dq = (ray.q_n(t + h) - ray.q_n(t - h)) / (2 * h)
                if np.sign(dq) != sgn or np.sign(ray.second(t)) != sgn:
                    bridge_bad.append(i)
            if re.status == TWO_ROOTS and not (te < rn.minus < re.minus and re.plus < rn.minus):
                chain_bad.append(i)
        for t in tn * np.array([0.1, 0.5, 2.0, 5.0]):
            if np.sign(ray.q_n(t) - lam) != np.sign(ray.pairing(t)) or np.sign(ray.q_e(t) - lam) != np.sign(
                ray.energy(t)
            ):
                sign_bad.append(i)
        for alpha in (0.1, 3.0, 10.0):
            r2 = Ray(spec, alpha * u)
            homog = max(homog, rel_err(r2.q_n(r2.t_n()), Ln), rel_err(r2.q_e(r2.t_e()), Le))
        min_norm = min(min_norm, tn * np.sqrt(ray.A))
    out.append(Invariant("fiber_analysis", "identity_aii", worst_aii <= 1e-6, f"max rel {worst_aii:.3g}"))
    out.append(
        Invariant("fiber_analysis", "ordering", not order_bad, f"{count} fields, {two} with two roots, bad {order_bad[:5]}")
    )
    out.append(Invariant("fiber_analysis", "ordering_chain", not chain_bad, f"bad {chain_bad[:5]}"))
    out.append(Invariant("fiber_analysis", "sign_dictionary", not sign_bad, f"bad {sign_bad[:5]}"))
    out.append(Invariant("fiber_analysis", "derivative_bridge", not bridge_bad, f"bad {bridge_bad[:5]}"))
    out.append(Invariant("fiber_analysis", "homogeneity", homog <= 1e-9, f"max rel {homog:.3g}"))
    out.append(Invariant("fiber_analysis", "t_n_norm_lower_bound", min_norm >= 1e-3, f"min ||t_n u||_V = {min_norm:.3g}"))
    return out


# -- extremal_search -------------------------------------------------------------------
def check_extremal(spec: ProblemSpec, est: ExtremalEstimate, probes: int = 200, seed: int = 3) -> list[Invariant]:
    out = []
    ls, lss = est.lambda_star, est.lambda_substar
    out.append(Invariant("extremal_search", "gap", 0 < lss < ls, f"lambda_substar={lss:.10g} < lambda_star={ls:.10g}"))
    audit = certify_gap(spec, dataclasses.replace(est), probes=probes, seed=seed)
    out.append(
        Invariant(
            "extremal_search",
            "certify_gap",
            audit.first_round_violations == 0,
            f"{probes} probes, {audit.first_round_violations} violations, min probe {audit.min_probe_n:.10g}",
        )
    )
    inflated = certify_gap(spec, dataclasses.replace(est, lambda_star=1.1 * ls), probes=probes, seed=seed)
    out.append(
        Invariant(
            "extremal_search",
            "audit_sensitivity",
            inflated.first_round_violations > 0,
            f"{inflated.first_round_violations} violations at 1.1 lambda_star",
        )
    )
    wn = est.argmin_n
    err = rel_err(fibers.lambda_n(spec, 7.3 * wn), fibers.lambda_n(spec, wn))
    out.append(Invariant("extremal_search", "sphere_homogeneity", err <= 1e-9, f"rel {err:.3g}"))

    below = 0.5 * lss
    bad = 0
    for u in random_fields(spec, 50, seed):
        ray = Ray(spec, u)
        if ray.nehari_roots(below).status != TWO_ROOTS or ray.zero_energy_roots(below).status != TWO_ROOTS:
            bad += 1
    out.append(Invariant("extremal_search", "two_roots_below_substar", bad == 0, f"{bad} of 50 probes without two roots"))
    mid = 0.5 * (lss + ls)
    ray = Ray(spec, est.argmin_e)
    ok = ray.q_e(ray.t_e()) < mid and ray.zero_energy_roots(mid).status == fibers.NO_ROOT
    out.append(Invariant("extremal_search", "no_zero_energy_root_between", ok, f"lambda={mid:.10g}"))
    return out


# -- nehari_solver ---------------------------------------------------------------------
def stationarity(spec: ProblemSpec, u: np.ndarray, seed: int = 4, directions: int = 5) -> float:
    """Largest central-difference derivative of J along random directions, over ``||u||_V^2``."""
    g, V = spec.grid, spec.V
    scale = norm_V_sq(g, V, u)
    worst = 0.0
    for phi in random_fields(spec, directions, seed):
        phi = phi * np.sqrt(scale / norm_V_sq(g, V, phi))
        eps = 1e-5
        d = (evaluate(spec, u + eps * phi).j - evaluate(spec, u - eps * phi).j) / (2 * eps)
        worst = max(worst, abs(d) / max(scale, FLOOR))
    return worst


def iterate_checks(res: solver.SolveResult) -> tuple[bool, bool, bool]:
    """Nehari residence, N0 avoidance and monotone descent along accepted iterates."""
    n2 = np.asarray(res.norm_history) ** 2
    resid = bool(np.all(np.abs(res.pairing_history) <= 1e-8 * n2))
    avoid = bool(np.all(np.abs(res.j2_history) > 1e-10 * n2))
    mono = bool(np.all(np.diff(res.energy_history) <= 0))
    return resid, avoid, mono


def check_solver(spec: ProblemSpec, est: ExtremalEstimate, starts: int = 2, seed: int = 0, tol: float = 1e-8):
    """Ground states at 0.25/0.5/0.75 lambda_star, bound states across lambda_substar."""
    ls, lss = est.lambda_star, est.lambda_substar
    out, results = [], {}
    ground = {}
    for frac in (0.25, 0.5, 0.75):
        sp = spec.with_lambda(frac * ls)
        try:
            r = solver.solve_ground(sp, starts=starts, seed=seed, lambda_star=ls, tol=tol)
        except solver.SolverError as exc:
            out.append(Invariant("nehari_solver", f"ground_{frac}", False, str(exc)))
            continue
        ground[frac] = r
        st = stationarity(sp, r.u)
        ok = r.converged and r.j < 0 and r.j2_diag > 0 and r.residual <= 1e-6 * (1 + r.norm_v) and st <= 1e-4
        out.append(
            Invariant(
                "nehari_solver",
                f"ground_{frac}",
                bool(ok),
                f"J={r.j:.6g} J''={r.j2_diag:.6g} residual={r.residual:.3g} stationarity={st:.3g}",
            )
        )
        results[f"ground_{frac}"] = r
    cases = (("below_substar", 0.5 * lss), ("at_substar", lss), ("between", 0.5 * (lss + ls)))
    for label, lam in cases:
        sp = spec.with_lambda(lam)
        try:
            r = solver.solve_bound(sp, starts=starts, seed=seed, lambda_star=ls, tol=tol)
        except solver.SolverError as exc:
            out.append(Invariant("nehari_solver", f"bound_{label}", False, str(exc)))
            continue
        got = solver.classify_trichotomy(sp, r, est)
        if label == "below_substar":
            sign_ok = r.j > 0
        elif label == "at_substar":
            sign_ok = abs(r.j) <= 1e-3 * r.scale
        else:
            sign_ok = r.j < 0
        ok = r.converged and got == label and sign_ok and r.j2_diag < 0
        out.append(
            Invariant("nehari_solver", f"bound_{label}", bool(ok), f"label={got} J={r.j:.6g} J''={r.j2_diag:.6g}")
        )
        results[f"bound_{label}"] = r
    # paired solves at the ground-state lambdas
    for frac, g in ground.items():
        sp = spec.with_lambda(frac * ls)
        try:
            b = solver.solve_bound(sp, starts=starts, seed=seed, lambda_star=ls, tol=tol)
        except solver.SolverError as exc:
            out.append(Invariant("nehari_solver", f"two_solutions_{frac}", False, str(exc)))
            continue
        dist = np.sqrt(norm_V_sq(sp.grid, sp.V, g.u - b.u))
        ok = dist > 1e-3 and g.j < b.j
        out.append(
            Invariant("nehari_solver", f"two_solutions_{frac}", bool(ok), f"||u-v||_V={dist:.4g} c+={g.j:.6g} c-={b.j:.6g}")
        )
        results[f"bound_{frac}"] = b
    flags = [iterate_checks(r) for r in results.values()]
    out.append(Invariant("nehari_solver", "nehari_residence", all(f[0] for f in flags), "|J'(u)u| <= 1e-8 ||u||_V^2"))
    out.append(Invariant("nehari_solver", "n0_avoidance", all(f[1] for f in flags), "|J''(u)(u,u)| > 1e-10 ||u||_V^2"))
    out.append(Invariant("nehari_solver", "monotone_descent", all(f[2] for f in flags), "J nonincreasing"))
    try:
        solver.solve_ground(spec.with_lambda(1.01 * ls), starts=1, lambda_star=ls)
        refused = False
    except solver.RefusedError:
        refused = True
    out.append(Invariant("nehari_solver", "refuses_above_lambda_star", refused, "lambda = 1.01 lambda_star"))
    return out


def run_all(
    spec: ProblemSpec,
    est: ExtremalEstimate | None = None,
    starts: int = 2,
    seed: int = 0,
    probes: int = 200,
    budget: int = 100,
    basis_size: int = 32,
    tol: float = 1e-8,
) -> tuple[list[Invariant], ExtremalEstimate]:
    if est is None:
        est = estimate_extremals(spec, starts=starts, seed=seed, budget=budget, basis_size=basis_size)
    rows = check_grid(spec, seed)
    rows += check_problem(spec)
    rows += check_energy(spec, seed + 1)
    rows += check_fibers(spec.with_lambda(0.5 * est.lambda_star), seed + 2)
    rows += check_extremal(spec, est, probes, seed + 3)
    rows += check_solver(spec, est, starts=starts, seed=seed, tol=tol)
    return rows, est


def format_table(rows: list[Invariant]) -> str:
    w1 = max(len(r.module) for r in rows)
    w2 = max(len(r.name) for r in rows)
    lines = [f"{'module':<{w1}}  {'invariant':<{w2}}  result  detail"]
    for r in rows:
        lines.append(f"{r.module:<{w1}}  {r.name:<{w2}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
