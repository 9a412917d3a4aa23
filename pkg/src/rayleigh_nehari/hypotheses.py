"""Sampling audit of the structural hypotheses on f, V, a and b.

Every check is numerical: a pass means no counterexample was found on the
sample set, and every failure names the sample where it was observed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import form_eigenmodes, integrate
from .problem import ProblemSpec

AR_THETAS = (2.1, 2.5, 3.0)
# AR violations for t ln(1+t) only show up at very large t when theta is close to 2
AR_T_MAX = 1e12
GROWTH_EXCESS_PER_DECADE = 10**0.1


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness_t: float | None = None
    witness_x: list[float] | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "pass": bool(self.passed), "detail": self.detail}
        if self.witness_t is not None:
            out["witness_t"] = float(self.witness_t)
        if self.witness_x is not None:
            out["witness_x"] = [float(v) for v in self.witness_x]
        return out


@dataclass
class HypothesisReport:
    f1_growth: Check
    f2_limits: Check
    f3_H_monotone: Check
    f4_strict: Check
    B1_pointwise: Check
    A1_integrability: Check
    V1_bound: Check
    V2_positive: Check
    ar: Check
    growth_constant: float = float("nan")
    V2_min_eigenvalue: float = float("nan")
    extras: dict = field(default_factory=dict)

    @property
    def ar_satisfied(self) -> bool:
        return self.ar.passed

    def checks(self) -> list[Check]:
        return [
            self.f1_growth,
            self.f2_limits,
            self.f3_H_monotone,
            self.f4_strict,
            self.B1_pointwise,
            self.A1_integrability,
            self.V1_bound,
            self.V2_positive,
        ]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks())

    def to_json(self) -> dict:
        return {
            "hypotheses": [c.to_json() for c in self.checks()],
            "ar_diagnostic": self.ar.to_json(),
            "ar_satisfied": bool(self.ar_satisfied),
            "all_passed": bool(self.all_passed),
            "growth_constant": float(self.growth_constant),
            "V2_min_eigenvalue": float(self.V2_min_eigenvalue),
        }


def sample_points(sample_count: int, t_max: float, t_min: float = 1e-6) -> np.ndarray:
    """Increasing positive log-spaced samples on ``[t_min, t_max]``."""
    return np.geomspace(t_min, t_max, sample_count)


def _first_bad(mask: np.ndarray, ts: np.ndarray) -> float | None:
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else float(ts[idx[0]])


def check_growth(nl, p: float, ts: np.ndarray) -> tuple[Check, float]:
    both = np.concatenate([-ts[::-1], ts])
    r1 = np.abs(nl.f(both)) / (1.0 + np.abs(both) ** (p - 1.0))
    r2 = np.abs(nl.fprime(both)) / (1.0 + np.abs(both) ** (p - 2.0))
    C = float(max(r1.max(), r2.max()))
    # envelope ratio may not keep growing over the last decade of samples
    top = ts[-1]
    probe = np.array([top / 10.0, top])
    g1 = np.abs(nl.f(probe)) / (1.0 + probe ** (p - 1.0))
    g2 = np.abs(nl.fprime(probe)) / (1.0 + probe ** (p - 2.0))
    growth = max(g1[1] / max(g1[0], 1e-300), g2[1] / max(g2[0], 1e-300))
    ok = bool(np.isfinite(C) and growth <= GROWTH_EXCESS_PER_DECADE)
    detail = f"fitted C={C:.6g}; envelope ratio growth over last decade {growth:.6g}"
    return Check("f1_growth", ok, detail, None if ok else float(top)), C


def check_limits(nl, ts: np.ndarray) -> Check:
    both = np.concatenate([-ts[::-1], ts])
    ft = np.asarray(nl.f(both)) * both
    bad_sign = ft < 0
    if np.any(bad_sign):
        return Check("f2_limits", False, "f(t) t < 0", _first_bad(bad_sign, both))
    t0 = ts[0]
    near = abs(nl.f(t0) / t0)
    near_m = abs(nl.f(-t0) / -t0)
    ref = abs(nl.f(1e3 * t0) / (1e3 * t0))
    # f(t)/t -> 0: small at the first sample and still decreasing toward it
    zero_ok = max(near, near_m) <= 1e-2 and near <= 0.5 * ref + 1e-300
    if not zero_ok:
        return Check(
            "f2_limits", False, f"f(t)/t = {near:.6g} at t={t0:.3g} does not tend to 0", float(t0)
        )
    t1 = ts[-1]
    far = nl.f(t1) / t1
    far_ref = nl.f(t1 / 1e3) / (t1 / 1e3)
    if not far >= 2.0 * far_ref:
        return Check("f2_limits", False, f"f(t)/t = {far:.6g} at t={t1:.3g} does not blow up", float(t1))
    return Check("f2_limits", True, f"f(t)/t: {near:.3g} at {t0:.3g}, {far:.3g} at {t1:.3g}")


def check_H_monotone(nl, q: float, ts: np.ndarray) -> Check:
    Hp = np.asarray(nl.H(q, ts))
    Hm = np.asarray(nl.H(q, -ts))
    bad_p = np.diff(Hp) <= 0
    if np.any(bad_p):
        return Check("f3_H_monotone", False, "H not increasing on t > 0", _first_bad(bad_p, ts[1:]))
    bad_m = np.diff(Hm) <= 0
    if np.any(bad_m):
        return Check("f3_H_monotone", False, "H not decreasing on t < 0", -_first_bad(bad_m, ts[1:]))
    return Check("f3_H_monotone", True, f"strictly monotone on {ts.size} samples per side")


def check_strict(nl, ts: np.ndarray) -> Check:
    both = np.concatenate([-ts[::-1], ts])
    val = np.asarray(nl.fprime(both)) * both**2 - np.asarray(nl.f(both)) * both
    bad = val <= 0
    if np.any(bad):
        return Check("f4_strict", False, "f'(t)t^2 - f(t)t <= 0", _first_bad(bad, both))
    return Check("f4_strict", True, f"min value {val.min():.3g}")


def check_ar(nl, ts: np.ndarray) -> Check:
    """Ambrosetti-Rabinowitz diagnostic: some theta with theta F <= f t and F > 0."""
    ext = np.geomspace(ts[0], max(ts[-1], AR_T_MAX), max(ts.size, 400))
    both = np.concatenate([-ext[::-1], ext])
    ft = np.asarray(nl.f(both)) * both
    F = np.asarray(nl.F(both))
    worst = {}
    for theta in AR_THETAS:
        gap = ft - theta * F
        i = int(np.argmin(gap))
        worst[theta] = (float(gap[i]), float(both[i]))
        if gap[i] >= 0 and np.all(F > 0):
            return Check("ar_condition", True, f"theta={theta}: min(f t - theta F)={gap[i]:.3g}")
    theta, (val, t) = min(worst.items(), key=lambda kv: kv[1][0])
    detail = "; ".join(f"theta={th}: inf={v:.3g} at t={tt:.3g}" for th, (v, tt) in worst.items())
    return Check("ar_condition", False, detail, t)


def check_weights(spec: ProblemSpec) -> tuple[Check, Check, Check]:
    g = spec.grid
    pts = np.stack([c.ravel() for c in g.coords()], axis=1)
    r = g.radius().ravel()

    Vp = np.maximum(spec.V.ravel(), 0.0)
    bound = spec.b1_C0 * (1.0 + Vp ** (1.0 / spec.b1_alpha))
    b = spec.b.ravel()
    bad = ((r >= spec.b1_R0) & (b > bound)) | (b < 1.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        b1 = Check("B1_pointwise", False, f"b={b[i]:.6g} vs bound {bound[i]:.6g}", witness_x=list(pts[i]))
    else:
        b1 = Check("B1_pointwise", True, f"b within C0(1+(V+)^(1/alpha)) for |x| >= {spec.b1_R0}")

    a = spec.a
    integral = integrate(g, np.abs(a) ** spec.alpha0)
    if np.any(a < 0):
        i = int(np.flatnonzero(a.ravel() < 0)[0])
        a1 = Check("A1_integrability", False, "a < 0", witness_x=list(pts[i]))
    elif not np.any(a > 0):
        a1 = Check("A1_integrability", False, "a vanishes identically")
    elif not np.isfinite(integral):
        a1 = Check("A1_integrability", False, "int a^alpha0 not finite")
    else:
        a1 = Check("A1_integrability", True, f"int a^alpha0 = {integral:.6g} (alpha0={spec.alpha0:.6g})")

    V = spec.V.ravel()
    i = int(np.argmin(V))
    if V[i] < -spec.V_bound:
        v1 = Check("V1_bound", False, f"min V = {V[i]:.6g} < -B = {-spec.V_bound}", witness_x=list(pts[i]))
    else:
        v1 = Check("V1_bound", True, f"min V = {V[i]:.6g} >= -B = {-spec.V_bound}")
    return b1, a1, v1


def check_form_positive(spec: ProblemSpec) -> tuple[Check, float]:
    vals, _ = form_eigenmodes(spec.grid, spec.V, 1)
    lo = float(vals[0])
    return Check("V2_positive", lo > 0, f"smallest discrete eigenvalue {lo:.6g}"), lo


def check_hypotheses(spec: ProblemSpec, sample_count: int = 400, t_max: float = 1e3) -> HypothesisReport:
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    nl = spec.nonlinearity
    ts = sample_points(sample_count, t_max)
    f1, C = check_growth(nl, spec.p, ts)
    b1, a1, v1 = check_weights(spec)
    v2, lo = check_form_positive(spec)
    return HypothesisReport(
        f1_growth=f1,
        f2_limits=check_limits(nl, ts),
        f3_H_monotone=check_H_monotone(nl, spec.q, ts),
        f4_strict=check_strict(nl, ts),
        B1_pointwise=b1,
        A1_integrability=a1,
        V1_bound=v1,
        V2_positive=v2,
        ar=check_ar(nl, ts),
        growth_constant=C,
        V2_min_eigenvalue=lo,
    )
