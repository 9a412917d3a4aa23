"""Multistart estimation of the extremal parameters.

``lambda_star = inf Lambda_n`` and ``lambda_substar = inf Lambda_e`` over
nonzero fields.  Both functionals are 0-homogeneous, so the search runs on
the unit sphere of the V-norm, parametrized by coefficients in the lowest
eigenmodes of the discrete V-form.  The outer optimizer is derivative free
(coordinate descent with parabolic steps); values are upper bounds audited by probing,
never proofs of the infimum.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fibers import FiberError, Ray
from .grid import form_eigenmodes
from .problem import ProblemSpec

log = logging.getLogger(__name__)

DEFAULT_BASIS = 32
SEARCH_RTOL = 1e-8
FTOL = 1e-8


class ExtremalError(RuntimeError):
    pass


@dataclass
class ExtremalEstimate:
    lambda_star: float
    lambda_substar: float
    argmin_n: np.ndarray = field(repr=False)
    argmin_e: np.ndarray = field(repr=False)
    starts: int
    per_start_values: list[tuple[float, float]]
    converged: list[bool]
    failed_starts: int = 0
    basis_size: int = 0
    best_so_far: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "lambda_substar": self.lambda_substar,
            "starts": self.starts,
            "failed_starts": self.failed_starts,
            "basis_size": self.basis_size,
            "per_start_values": [list(v) for v in self.per_start_values],
            "best_so_far": [list(v) for v in self.best_so_far],
            "converged": list(self.converged),
            "note": "upper-bound estimates from a finite multistart search",
        }


def _lambda_n(spec, w, rtol=SEARCH_RTOL):
    ray = Ray(spec, w)
    return ray.q_n(ray.t_n(rtol))


def _lambda_e(spec, w, rtol=SEARCH_RTOL):
    ray = Ray(spec, w)
    return ray.q_e(ray.t_e(rtol))


def gaussian_bump(spec: ProblemSpec, center, width: float) -> np.ndarray:
    coords = spec.grid.coords()
    r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
    return np.exp(-0.5 * r2 / width**2)


def start_fields(spec: ProblemSpec, starts: int, seed: int, modes: np.ndarray) -> list[np.ndarray]:
    """Deterministic start set: low eigenmodes first, then random Gaussian bumps."""
    children = np.random.SeedSequence(seed).spawn(starts)
    L = spec.grid.L
    out = []
    n_mode = min(2, starts, len(modes))
    for i in range(starts):
        rng = np.random.default_rng(children[i])
        if i < n_mode:
            w = modes[0] if i == 0 else modes[0] + 0.5 * modes[1]
        else:
            center = rng.uniform(-0.4 * L, 0.4 * L, size=spec.grid.d)
            width = rng.uniform(0.05, 0.3) * L
            w = gaussian_bump(spec, center, width)
        out.append(np.array(w, dtype=float))
    return out


def coordinate_search(objective, c0: np.ndarray, budget: int, step: float = 0.05, rtol: float = FTOL):
    """Derivative-free coordinate descent on a 0-homogeneous objective.

    Each coordinate is probed at ``+-step_i``; when the three values bracket
    a minimum, the vertex of the interpolating parabola is tried as well.
    Steps grow after success and halve after failure.  Stops when a full
    sweep improves by less than ``rtol`` relatively and all steps are below
    ``1e-6``, or after ``budget`` sweeps.

    Returns ``(c, value, converged, history)``.
    """
    c = c0 / np.linalg.norm(c0)
    fc = objective(c)
    steps = np.full(c.size, step)
    history = [fc]
    converged = False
    for _ in range(budget):
        f_start = fc
        for i in range(c.size):
            h = steps[i]
            e = np.zeros_like(c)
            e[i] = h
            fp, fm = objective(c + e), objective(c - e)
            cand = [(fp, 1.0), (fm, -1.0)]
            curv = fp - 2.0 * fc + fm
            if curv > 0:
                x = 0.5 * (fm - fp) / curv
                if abs(x) <= 4.0:
                    cand.append((objective(c + x * e), x))
            fbest, xbest = min(cand)
            if fbest < fc:
                c = c + xbest * e
                c /= np.linalg.norm(c)
                fc = fbest
                steps[i] = min(max(abs(xbest) * h, 0.5 * h) * 2.0, 0.5)
            else:
                steps[i] = 0.5 * h
        history.append(fc)
        if f_start - fc <= rtol * abs(fc) and steps.max() < 1e-6:
            converged = True
            break
    return c, fc, converged, history


def _minimize_on_sphere(spec, modes, c0, functional, budget):
    def objective(c):
        nrm = np.linalg.norm(c)
        if not np.isfinite(nrm) or nrm == 0:
            return np.inf
        w = np.tensordot(c / nrm, modes, axes=1)
        try:
            return functional(spec, w)
        except FiberError:
            return np.inf

    c, val, conv, _ = coordinate_search(objective, c0, budget)
    return val, np.tensordot(c, modes, axes=1), conv


def _run_start(spec, modes, w0, budget):
    from .grid import inner_product_V

    c0 = np.array([inner_product_V(spec.grid, spec.V, w0, m) for m in modes])
    if not np.any(c0):
        raise FiberError("start has no component in the search basis")
    # validate the start itself
    _lambda_n(spec, np.tensordot(c0, modes, axes=1))
    vn, wn, okn = _minimize_on_sphere(spec, modes, c0, _lambda_n, budget)
    ve, we, oke = _minimize_on_sphere(spec, modes, c0, _lambda_e, budget)
    return vn, wn, ve, we, okn and oke


def estimate_extremals(
    spec: ProblemSpec,
    starts: int = 4,
    seed: int = 0,
    budget: int = 100,
    basis_size: int = DEFAULT_BASIS,
    workers: int = 1,
) -> ExtremalEstimate:
    """Estimate ``lambda_star`` and ``lambda_substar`` by multistart search."""
    if starts < 1:
        raise ValueError("starts must be >= 1")
    if budget < 10:
        raise ValueError("budget must be >= 10")
    _, modes = form_eigenmodes(spec.grid, spec.V, basis_size)
    fields = start_fields(spec, starts, seed, modes)

    def job(w0):
        try:
            return _run_start(spec, modes, w0, budget)
        except FiberError as exc:
            log.info("extremal start dropped: %s", exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, fields))
    else:
        results = [job(w) for w in fields]

    ok = [r for r in results if r is not None]
    if not ok:
        raise ExtremalError("every extremal start failed")
    per_start, conv, best = [], [], []
    bn = be = np.inf
    wn_best = we_best = None
    for vn, wn, ve, we, c in ok:
        per_start.append((vn, ve))
        conv.append(c)
        if vn < bn:
            bn, wn_best = vn, wn
        if ve < be:
            be, we_best = ve, we
        best.append((bn, be))
    est = ExtremalEstimate(
        lambda_star=float(bn),
        lambda_substar=float(be),
        argmin_n=wn_best,
        argmin_e=we_best,
        starts=starts,
        per_start_values=per_start,
        converged=conv,
        failed_starts=len(results) - len(ok),
        basis_size=len(modes),
        best_so_far=best,
    )
    if not 0 < est.lambda_substar < est.lambda_star:
        raise ExtremalError(
            f"estimates violate 0 < lambda_substar < lambda_star: {est.lambda_substar}, {est.lambda_star}"
        )
    return est


CERTIFY_RTOL = 1e-6


@dataclass
class GapReport:
    lambda_star: float
    lambda_substar: float
    probes: int
    rounds: int
    violations: list[dict]
    min_probe_n: float
    min_probe_e: float
    lowered: bool
    converged: bool
    first_round_violations: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "lambda_star_floor": self.lambda_star,
            "lambda_substar_floor": self.lambda_substar,
            "probes": self.probes,
            "rounds": self.rounds,
            "violations": list(self.violations),
            "min_probe_lambda_n": self.min_probe_n,
            "min_probe_lambda_e": self.min_probe_e,
            "first_round_violations": self.first_round_violations,
            "lowered": self.lowered,
            "converged": self.converged,
            "passed": self.passed,
        }


def probe_fields(spec: ProblemSpec, est: ExtremalEstimate, probes: int, seed: int) -> list[np.ndarray]:
    """Witnesses, random bumps, random low-mode mixtures and perturbed witnesses.

    Perturbations stay inside the search basis: the audit checks the search,
    not the discretization of the basis itself.
    """
    grid = spec.grid
    L = grid.L
    k = est.basis_size or DEFAULT_BASIS
    _, modes = form_eigenmodes(grid, spec.V, k)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E37]))
    out = [est.argmin_n, est.argmin_e]
    i = 0
    while len(out) < probes:
        kind = i % 3
        if kind == 0:
            center = rng.uniform(-0.5 * L, 0.5 * L, size=grid.d)
            w = gaussian_bump(spec, center, rng.uniform(0.03, 0.4) * L)
        elif kind == 1:
            m = rng.integers(2, len(modes) + 1)
            w = np.tensordot(rng.standard_normal(m) / (1.0 + np.arange(m)), modes[:m], axes=1)
        else:
            base = est.argmin_n if (i // 3) % 2 == 0 else est.argmin_e
            eps = 10.0 ** rng.uniform(-3, -1)
            w = base + eps * np.tensordot(rng.standard_normal(len(modes)), modes, axes=1) / np.sqrt(len(modes))
        out.append(np.asarray(w, dtype=float))
        i += 1
    return out[:probes]


def _audit(spec, fields, ls, lss):
    viol, vals_n, vals_e = [], [], []
    for j, w in enumerate(fields):
        try:
            vn, ve = _lambda_n(spec, w, 1e-12), _lambda_e(spec, w, 1e-12)
        except FiberError:
            continue
        vals_n.append(vn)
        vals_e.append(ve)
        if vn < ls - CERTIFY_RTOL * ls:
            viol.append({"probe": j, "functional": "lambda_n", "value": vn, "floor": ls})
        if ve < lss - CERTIFY_RTOL * lss:
            viol.append({"probe": j, "functional": "lambda_e", "value": ve, "floor": lss})
    return viol, min(vals_n, default=np.inf), min(vals_e, default=np.inf)


def certify_gap(spec: ProblemSpec, est: ExtremalEstimate, probes: int = 200, seed: int = 0) -> GapReport:
    """Probe audit of the estimates.

    Any probe below ``value * (1 - 1e-6)`` is a violation: the estimate is
    lowered to the smallest probed value and the audit runs once more on a
    fresh probe set.  Violations in the second round mark the estimate as
    not converged.  ``est`` is updated in place.
    """
    if probes < 2:
        raise ValueError("probes must be >= 2")
    if not 0 < est.lambda_substar < est.lambda_star:
        raise ExtremalError("estimate does not satisfy 0 < lambda_substar < lambda_star")
    ls, lss = est.lambda_star, est.lambda_substar
    viol, mn, me = _audit(spec, probe_fields(spec, est, probes, seed), ls, lss)
    rounds, lowered, ok = 1, False, True
    first = len(viol)
    if viol:
        lowered = True
        ls, lss = min(ls, mn), min(lss, me)
        log.info("gap audit: %d violations, lowering floors to %.10g, %.10g", len(viol), ls, lss)
        viol, mn2, me2 = _audit(spec, probe_fields(spec, est, probes, seed + 1), ls, lss)
        mn, me = min(mn, mn2), min(me, me2)
        rounds = 2
        if viol:
            ok = False
            est.converged = [False] * len(est.converged)
        est.lambda_star, est.lambda_substar = ls, lss
    return GapReport(
        lambda_star=ls,
        lambda_substar=lss,
        probes=probes,
        rounds=rounds,
        violations=viol,
        min_probe_n=float(mn),
        min_probe_e=float(me),
        lowered=lowered,
        converged=ok,
        first_round_violations=first,
    )
