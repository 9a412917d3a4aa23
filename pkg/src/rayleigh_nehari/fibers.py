"""Nonlinear Rayleigh quotients along rays and the fibering-map projections.

For a fixed nonzero field ``u`` write ``A = ||u||_V^2`` and
``D = int a |u|^q``.  Along the ray ``t -> t u`` the two quotients become

    q_n(t) = t^(2-q) [A - int b (f(tu)/(tu)) u^2] / D
    q_e(t) = q t^(2-q) [A/2 - int b (F(tu)/(tu)^2) u^2] / D

so ``q_n(t) = lam`` exactly when ``t u`` lies on the Nehari set and
``q_e(t) = lam`` exactly when ``J(t u) = 0``.  Each has a unique maximizer,
characterized by the monotone scalar equations

    (2-q) A     = int b H(t u) u^2        (t_n)
    (2-q) A / 2 = int b G(t u) u^2        (t_e)

which are solved by bisection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import integrate, norm_V_sq
from .problem import ProblemSpec

BISECT_RTOL = 1e-10
MAX_DOUBLINGS = 60
TANGENT_RTOL = 1e-9

TWO_ROOTS = "two_roots"
TANGENT = "tangent"
NO_ROOT = "no_root"


class FiberError(RuntimeError):
    """Raised when a ray cannot be analysed (zero field, lost bracket)."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message if bracket is None else f"{message} (last bracket {bracket})")
        self.bracket = bracket


def bisect_increasing(
    g: Callable[[float], float], lo: float, hi: float, rtol: float = BISECT_RTOL, max_iter: int = 400
) -> float:
    """Root of an increasing ``g`` with ``g(lo) < 0 < g(hi)``.

    Uses the geometric midpoint while the bracket spans more than a factor
    of two, so tiny roots are located to relative accuracy.
    """
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = np.sqrt(lo * hi) if lo > 0 and hi > 2.0 * lo else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


class Ray:
    """Cached quantities for the ray through a fixed field ``u``."""

    def __init__(self, spec: ProblemSpec, u: np.ndarray):
        grid = spec.grid
        u = grid.check_field(u)
        self.spec = spec
        self.u = u
        self.q = spec.q
        self.A = norm_V_sq(grid, spec.V, u)
        self.D = integrate(grid, spec.a * np.abs(u) ** spec.q)
        if not np.any(u != 0) or self.A <= 0:
            raise FiberError("ray through the zero field")
        if not self.D > 0:
            raise FiberError("zero denominator: a*u vanishes identically")
        self._u = u.ravel()
        self._w = (grid.cell_volume * spec.b * u**2).ravel()
        self._nl = spec.nonlinearity

    # integrals along the ray -------------------------------------------
    def int_H(self, t: float) -> float:
        return float(self._w @ self._nl.H(self.q, t * self._u, check=False))

    def int_G(self, t: float) -> float:
        return float(self._w @ self._nl.G(self.q, t * self._u, check=False))

    def int_f_over_t(self, t: float) -> float:
        return float(self._w @ self._nl.f_over_t(t * self._u, check=False))

    def int_F_over_t2(self, t: float) -> float:
        return float(self._w @ self._nl.F_over_t2(t * self._u, check=False))

    # fiber maps ------------------------------------------------------------
    def q_n(self, t: float) -> float:
        if t == 0:
            return 0.0
        return t ** (2.0 - self.q) * (self.A - self.int_f_over_t(t)) / self.D

    def q_e(self, t: float) -> float:
        if t == 0:
            return 0.0
        return self.q * t ** (2.0 - self.q) * (0.5 * self.A - self.int_F_over_t2(t)) / self.D

    def energy(self, t: float, lam: float | None = None) -> float:
        lam = self.spec.lam if lam is None else lam
        return 0.5 * t * t * self.A - lam / self.q * t**self.q * self.D - t * t * self.int_F_over_t2(t)

    def pairing(self, t: float, lam: float | None = None) -> float:
        lam = self.spec.lam if lam is None else lam
        return t * t * self.A - lam * t**self.q * self.D - t * t * self.int_f_over_t(t)

    def second(self, t: float, lam: float | None = None) -> float:
        lam = self.spec.lam if lam is None else lam
        fp = float(self._w @ self._nl.fprime(t * self._u))
        return t * t * self.A - lam * (self.q - 1.0) * t**self.q * self.D - t * t * fp

    # maximizers ------------------------------------------------------------
    def _solve_monotone(self, fn: Callable[[float], float], what: str, rtol: float) -> float:
        lo, hi = 1.0, 1.0
        if fn(1.0) < 0:
            for _ in range(MAX_DOUBLINGS):
                hi *= 2.0
                if fn(hi) >= 0:
                    break
                lo = hi
            else:
                raise FiberError(f"no bracket for {what}", (lo, hi))
        else:
            for _ in range(MAX_DOUBLINGS):
                lo *= 0.5
                if fn(lo) < 0:
                    break
                hi = lo
            else:
                raise FiberError(f"no bracket for {what}", (lo, hi))
        return bisect_increasing(fn, lo, hi, rtol)

    def t_n(self, rtol: float = BISECT_RTOL) -> float:
        target = (2.0 - self.q) * self.A
        return self._solve_monotone(lambda t: self.int_H(t) - target, "t_n", rtol)

    def t_e(self, rtol: float = BISECT_RTOL) -> float:
        target = 0.5 * (2.0 - self.q) * self.A
        return self._solve_monotone(lambda t: self.int_G(t) - target, "t_e", rtol)

    # level crossings ---------------------------------------------------------
    def _roots(self, qfun, t_max: float, lam: float, rtol: float) -> "RootResult":
        peak = qfun(t_max)
        if abs(peak - lam) <= TANGENT_RTOL * max(1.0, lam):
            return RootResult(TANGENT, t_max, t_max, peak)
        if peak < lam:
            return RootResult(NO_ROOT, None, None, peak)
        lo = t_max
        for _ in range(MAX_DOUBLINGS):
            lo *= 0.5
            if qfun(lo) < lam:
                break
        else:
            raise FiberError("left root bracket lost", (lo, t_max))
        hi = t_max
        for _ in range(MAX_DOUBLINGS):
            hi *= 2.0
            if qfun(hi) < lam:
                break
        else:
            raise FiberError("right root bracket lost", (t_max, hi))
        left = bisect_increasing(lambda t: qfun(t) - lam, lo, t_max, rtol)
        right = bisect_increasing(lambda t: lam - qfun(t), t_max, hi, rtol)
        return RootResult(TWO_ROOTS, left, right, peak)

    def nehari_roots(self, lam: float, t_n: float | None = None, rtol: float = BISECT_RTOL) -> "RootResult":
        t_n = self.t_n(min(rtol, BISECT_RTOL)) if t_n is None else t_n
        return self._roots(self.q_n, t_n, lam, rtol)

    def zero_energy_roots(self, lam: float, t_e: float | None = None, rtol: float = BISECT_RTOL) -> "RootResult":
        t_e = self.t_e(min(rtol, BISECT_RTOL)) if t_e is None else t_e
        return self._roots(self.q_e, t_e, lam, rtol)


@dataclass(frozen=True)
class RootResult:
    """Crossings of a fiber map with a level.

    ``plus < minus`` for two roots; both equal the maximizer when tangent.
    """

    status: str
    plus: float | None
    minus: float | None
    peak: float

    def pair(self) -> tuple[float, float] | None:
        return None if self.plus is None else (self.plus, self.minus)


@dataclass(frozen=True)
class FiberReport:
    t_n: float
    lambda_n: float
    t_e: float
    lambda_e: float
    lam: float
    status_n: str
    status_e: str
    roots_n: tuple[float, float] | None = field(default=None)
    roots_e: tuple[float, float] | None = field(default=None)

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "t_n": self.t_n,
            "lambda_n": self.lambda_n,
            "t_e": self.t_e,
            "lambda_e": self.lambda_e,
            "status_n": self.status_n,
            "status_e": self.status_e,
            "roots_n": None if self.roots_n is None else list(self.roots_n),
            "roots_e": None if self.roots_e is None else list(self.roots_e),
        }


def rayleigh_n(spec: ProblemSpec, u: np.ndarray) -> float:
    """``R_n(u) = (||u||_V^2 - int b f(u) u) / ||u||_{q,a}^q``."""
    return Ray(spec, u).q_n(1.0)


def rayleigh_e(spec: ProblemSpec, u: np.ndarray) -> float:
    """``R_e(u) = q (||u||_V^2 / 2 - int b F(u)) / ||u||_{q,a}^q``."""
    return Ray(spec, u).q_e(1.0)


def find_t_n(spec: ProblemSpec, u: np.ndarray, rtol: float = BISECT_RTOL) -> float:
    return Ray(spec, u).t_n(rtol)


def find_t_e(spec: ProblemSpec, u: np.ndarray, rtol: float = BISECT_RTOL) -> float:
    return Ray(spec, u).t_e(rtol)


def lambda_n(spec: ProblemSpec, u: np.ndarray) -> float:
    """``Lambda_n(u) = max_t R_n(t u)``; 0-homogeneous in ``u``."""
    ray = Ray(spec, u)
    return ray.q_n(ray.t_n())


def lambda_e(spec: ProblemSpec, u: np.ndarray) -> float:
    """``Lambda_e(u) = max_t R_e(t u)``; 0-homogeneous in ``u``."""
    ray = Ray(spec, u)
    return ray.q_e(ray.t_e())


def nehari_roots(spec: ProblemSpec, u: np.ndarray, lam: float | None = None, rtol: float = BISECT_RTOL) -> RootResult:
    lam = spec.lam if lam is None else lam
    return Ray(spec, u).nehari_roots(lam, rtol=rtol)


def zero_energy_roots(
    spec: ProblemSpec, u: np.ndarray, lam: float | None = None, rtol: float = BISECT_RTOL
) -> RootResult:
    lam = spec.lam if lam is None else lam
    return Ray(spec, u).zero_energy_roots(lam, rtol=rtol)


def fiber_report(spec: ProblemSpec, u: np.ndarray, lam: float | None = None) -> FiberReport:
    lam = spec.lam if lam is None else lam
    ray = Ray(spec, u)
    tn, te = ray.t_n(), ray.t_e()
    Ln, Le = ray.q_n(tn), ray.q_e(te)
    rn = ray.nehari_roots(lam, t_n=tn)
    re = ray.zero_energy_roots(lam, t_e=te)
    if not tn < te:
        raise FiberError(f"ordering t_n < t_e violated: {tn} >= {te}")
    if not Le < Ln:
        raise FiberError(f"ordering Lambda_e < Lambda_n violated: {Le} >= {Ln}")
    for r, tm in ((rn, tn), (re, te)):
        if r.status == TWO_ROOTS and not (0 < r.plus < tm < r.minus):
            raise FiberError(f"root ordering violated: {r.plus}, {tm}, {r.minus}")
    return FiberReport(
        t_n=tn,
        lambda_n=Ln,
        t_e=te,
        lambda_e=Le,
        lam=lam,
        status_n=rn.status,
        status_e=re.status,
        roots_n=rn.pair() if rn.status == TWO_ROOTS else None,
        roots_e=re.pair() if re.status == TWO_ROOTS else None,
    )


def sample_fiber(
    spec: ProblemSpec, u: np.ndarray, t_min: float, t_max: float, count: int
) -> np.ndarray:
    """Rows ``(t, q_n(t), q_e(t), J(t u))`` on a log-spaced ``t`` grid."""
    if not (0 < t_min < t_max) or count < 2:
        raise ValueError("need 0 < t_min < t_max and count >= 2")
    ray = Ray(spec, u)
    ts = np.geomspace(t_min, t_max, count)
    return np.array([(t, ray.q_n(t), ray.q_e(t), ray.energy(t)) for t in ts])
