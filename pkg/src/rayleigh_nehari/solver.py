"""Minimization of the energy over the two Nehari branches.

Fields are kept on the unit sphere of the V-norm and lifted to the Nehari
set by the fiber projection ``w -> t(w) w`` with ``t = t^{n,+}`` (branch
``N_plus``) or ``t = t^{n,-}`` (branch ``N_minus``).  Descent uses the
preconditioned gradient of the energy at the lifted point, projected onto
the tangent space of the sphere.  Because the lifted point is critical along
its own ray, this is a descent direction for the reduced functional.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    derivative_pairing,
    evaluate,
    precondition,
    residual_field,
    second_derivative_diag,
)
from .extremal import ExtremalEstimate, gaussian_bump
from .fibers import FiberError, Ray, TWO_ROOTS
from .grid import inner_product_V, integrate, norm_V_sq
from .problem import ProblemSpec

log = logging.getLogger(__name__)

N_PLUS = "N_plus"
N_MINUS = "N_minus"

BELOW_SUBSTAR = "below_substar"
AT_SUBSTAR = "at_substar"
BETWEEN = "between"
NOT_APPLICABLE = "not_applicable"

PROJECTION_RTOL = 1e-14
RESIDUAL_ACCEPT = 1e-6
TRICHOTOMY_BAND = 1e-3
TANGENCY_GUARD = 1e-6
ARMIJO = 1e-4
ALPHA_MIN = 1e-3
ALPHA_MAX = 1e3


class SolverError(RuntimeError):
    def __init__(self, message: str, iterate: np.ndarray | None = None):
        super().__init__(message)
        self.iterate = iterate


class RefusedError(SolverError):
    """Parameter outside the range where the method applies."""


@dataclass
class SolveResult:
    u: np.ndarray = field(repr=False)
    lam: float
    branch: str
    j: float
    j2_diag: float
    residual: float
    norm_v: float
    pairing: float
    iterations: int
    converged: bool
    trichotomy: str = NOT_APPLICABLE
    energy_history: list[float] = field(default_factory=list, repr=False)
    pairing_history: list[float] = field(default_factory=list, repr=False)
    j2_history: list[float] = field(default_factory=list, repr=False)
    norm_history: list[float] = field(default_factory=list, repr=False)
    flags: list[str] = field(default_factory=list)

    @property
    def scale(self) -> float:
        return self.norm_v**2

    def to_json(self, field_csv_path: str | None = None) -> dict:
        return {
            "branch": self.branch,
            "lambda": self.lam,
            "j": self.j,
            "j2_diag": self.j2_diag,
            "residual": self.residual,
            "norm_v": self.norm_v,
            "pairing": self.pairing,
            "iterations": self.iterations,
            "converged": self.converged,
            "trichotomy": self.trichotomy,
            "flags": list(self.flags),
            "field_csv_path": field_csv_path,
        }


def check_lambda(spec: ProblemSpec, lambda_star: float | None):
    if lambda_star is None:
        return
    if spec.lam >= lambda_star * (1.0 - TANGENCY_GUARD):
        raise RefusedError(
            f"lambda={spec.lam:.10g} is not below the estimated extremal value "
            f"lambda_star={lambda_star:.10g}; Nehari minimization applies only for "
            "0 < lambda < lambda_star (beyond it the Lagrange multiplier argument is unavailable)"
        )


def project(spec: ProblemSpec, w: np.ndarray, branch: str, rtol: float = PROJECTION_RTOL):
    """Lift ``w`` to the Nehari branch; returns ``(t, t*w)`` or ``None`` without crossing."""
    ray = Ray(spec, w)
    roots = ray.nehari_roots(spec.lam, rtol=rtol)
    if roots.status != TWO_ROOTS:
        return None
    t = roots.plus if branch == N_PLUS else roots.minus
    return t, t * ray.u


def _result(spec, u, branch, iterations, converged, hist, pair_hist, j2_hist, norm_hist, flags):
    fv = evaluate(spec, u)
    r = residual_field(spec, u)
    return SolveResult(
        u=u,
        lam=spec.lam,
        branch=branch,
        j=fv.j,
        j2_diag=second_derivative_diag(spec, u, fv),
        residual=float(np.sqrt(integrate(spec.grid, r**2))),
        norm_v=float(np.sqrt(fv.norm_v_sq)),
        pairing=derivative_pairing(spec, u, fv),
        iterations=iterations,
        converged=converged,
        energy_history=hist,
        pairing_history=pair_hist,
        j2_history=j2_hist,
        norm_history=norm_hist,
        flags=flags,
    )


def solve_branch(
    spec: ProblemSpec,
    branch: str,
    start: np.ndarray,
    max_iter: int = 3000,
    tol: float = 1e-8,
    lambda_star: float | None = None,
) -> SolveResult:
    """Minimize the energy over ``N_plus`` or ``N_minus`` starting from ``start``.

    Stops when the strong-form residual satisfies
    ``||r||_2 <= tol * (1 + ||u||_V)`` or after ``max_iter`` steps.
    """
    if branch not in (N_PLUS, N_MINUS):
        raise ValueError(f"unknown branch {branch!r}")
    check_lambda(spec, lambda_star)
    grid, V = spec.grid, spec.V
    w = grid.check_field(start)
    nw = norm_V_sq(grid, V, w)
    if not nw > 0:
        raise SolverError("start field is zero", w)
    try:
        lifted = project(spec, w / np.sqrt(nw), branch)
    except FiberError as exc:
        raise SolverError(f"start field cannot be projected: {exc}", w) from exc
    if lifted is None:
        raise SolverError("start field has no Nehari crossing at this lambda (Lambda_n(start) <= lambda)", w)
    _, u = lifted

    flags: list[str] = []
    fv = evaluate(spec, u)
    J = fv.j
    hist, pair_hist, j2_hist = [J], [derivative_pairing(spec, u, fv)], [second_derivative_diag(spec, u, fv)]
    norm_hist = [float(np.sqrt(fv.norm_v_sq))]
    alpha = 1.0
    converged = False
    it = 0
    r = residual_field(spec, u)
    res = float(np.sqrt(integrate(grid, r**2)))
    prev = None
    for it in range(1, max_iter + 1):
        norm_u = np.sqrt(norm_V_sq(grid, V, u))
        if res <= tol * (1.0 + norm_u):
            converged = True
            it -= 1
            break
        g, fallback = precondition(spec, r)
        if fallback and "preconditioner_fallback" not in flags:
            flags.append("preconditioner_fallback")
        if prev is not None:
            # Barzilai-Borwein trial step from the last accepted move
            du, dr, dg = u - prev[0], r - prev[1], g - prev[2]
            num, den = integrate(grid, du * dr), integrate(grid, dg * dr)
            if num > 0 and den > 0:
                alpha = min(max(num / den, ALPHA_MIN), ALPHA_MAX)
        w = u / norm_u
        d = g - inner_product_V(grid, V, g, w) * w
        slope = integrate(grid, r * d)
        if slope <= 0:
            flags.append("non_descent_direction")
            break
        accepted = False
        while alpha > 1e-14:
            trial = u - alpha * d
            try:
                nt = norm_V_sq(grid, V, trial)
                lifted = project(spec, trial / np.sqrt(nt), branch) if nt > 0 else None
            except FiberError:
                lifted = None
            if lifted is not None:
                u_new = lifted[1]
                fv_new = evaluate(spec, u_new)
                J_new = fv_new.j
                r_new = residual_field(spec, u_new)
                res_new = float(np.sqrt(integrate(grid, r_new**2)))
                if J_new <= J - ARMIJO * alpha * slope:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            flags.append("line_search_stalled")
            break
        prev = (u, r, g)
        u, J, r, res = u_new, J_new, r_new, res_new
        hist.append(J)
        pair_hist.append(derivative_pairing(spec, u, fv_new))
        j2_hist.append(second_derivative_diag(spec, u, fv_new))
        norm_hist.append(float(np.sqrt(fv_new.norm_v_sq)))
    out = _result(spec, u, branch, it, converged, hist, pair_hist, j2_hist, norm_hist, flags)
    if out.converged and out.residual > RESIDUAL_ACCEPT * (1.0 + out.norm_v):
        out.converged = False
    return out


def default_starts(spec: ProblemSpec, branch: str, starts: int, seed: int) -> list[np.ndarray]:
    """Positive bump first; for ``N_minus`` also a sign-changing field; then random bumps."""
    grid = spec.grid
    L = grid.L
    fields = [gaussian_bump(spec, np.zeros(grid.d), 0.2 * L)]
    if branch == N_MINUS:
        fields.append(grid.coords()[0] * gaussian_bump(spec, np.zeros(grid.d), 0.2 * L))
    children = np.random.SeedSequence(seed).spawn(max(starts, 1))
    i = 0
    while len(fields) < starts:
        rng = np.random.default_rng(children[i])
        center = rng.uniform(-0.2 * L, 0.2 * L, size=grid.d)
        width = rng.uniform(0.1, 0.3) * L
        fields.append(gaussian_bump(spec, center, width))
        i += 1
    return fields[: max(starts, 1)]


def _multistart(spec, branch, starts, seed, lambda_star, max_iter, tol, start_fields=None):
    check_lambda(spec, lambda_star)
    fields = start_fields if start_fields is not None else default_starts(spec, branch, starts, seed)
    results, errors = [], []
    for w in fields:
        try:
            results.append(solve_branch(spec, branch, w, max_iter=max_iter, tol=tol, lambda_star=lambda_star))
        except RefusedError:
            raise
        except SolverError as exc:
            errors.append(str(exc))
    good = [r for r in results if r.converged]
    if not good:
        detail = errors + [f"start ended with residual {r.residual:.3g}, flags {r.flags}" for r in results]
        raise SolverError(f"no {branch} start converged: " + "; ".join(detail))
    return min(good, key=lambda r: r.j)


def solve_ground(
    spec: ProblemSpec,
    starts: int = 2,
    seed: int = 0,
    lambda_star: float | None = None,
    bound: SolveResult | None = None,
    max_iter: int = 3000,
    tol: float = 1e-8,
    start_fields: list[np.ndarray] | None = None,
) -> SolveResult:
    """Lowest-energy converged ``N_plus`` minimizer over several starts."""
    best = _multistart(spec, N_PLUS, starts, seed, lambda_star, max_iter, tol, start_fields)
    if bound is not None and not best.j < bound.j:
        best.flags.append("ground_not_below_bound")
    return best


def solve_bound(
    spec: ProblemSpec,
    starts: int = 2,
    seed: int = 0,
    lambda_star: float | None = None,
    max_iter: int = 3000,
    tol: float = 1e-8,
    start_fields: list[np.ndarray] | None = None,
) -> SolveResult:
    """Lowest-energy converged ``N_minus`` minimizer over several starts."""
    return _multistart(spec, N_MINUS, starts, seed, lambda_star, max_iter, tol, start_fields)


def classify_trichotomy(spec: ProblemSpec, result: SolveResult, extremals: ExtremalEstimate) -> str:
    """Place ``lambda`` relative to ``lambda_substar`` and cross-check the sign of J.

    A sign that disagrees with the label is recorded in ``result.flags``.
    """
    if result.branch != N_MINUS:
        return NOT_APPLICABLE
    ls = extremals.lambda_substar
    band = TRICHOTOMY_BAND * ls
    lam = spec.lam
    if lam < ls - band:
        label, ok = BELOW_SUBSTAR, result.j > 0
    elif lam <= ls + band:
        label, ok = AT_SUBSTAR, abs(result.j) <= TRICHOTOMY_BAND * result.scale
    else:
        label, ok = BETWEEN, result.j < 0
    result.trichotomy = label
    if not ok and "trichotomy_sign_mismatch" not in result.flags:
        result.flags.append("trichotomy_sign_mismatch")
    return label
