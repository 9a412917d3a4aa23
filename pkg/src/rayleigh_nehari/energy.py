"""Energy functional, its derivatives along rays and the preconditioned gradient."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .grid import apply_fractional_laplacian, integrate, norm_V_sq
from .problem import ProblemSpec

log = logging.getLogger(__name__)

PRECOND_MAX_ITER = 50


@dataclass(frozen=True)
class FunctionalValue:
    j: float
    norm_v_sq: float
    norm_qa_q: float
    nl_energy: float
    nl_pairing: float
    nl_second: float

    def to_json(self) -> dict:
        return asdict(self)


def sublinear_term(q: float, u: np.ndarray) -> np.ndarray:
    """``|u|^(q-2) u`` written as ``sign(u) |u|^(q-1)`` (0 at u = 0)."""
    return np.sign(u) * np.abs(u) ** (q - 1.0)


def norm_qa_q(spec: ProblemSpec, u: np.ndarray) -> float:
    return integrate(spec.grid, spec.a * np.abs(u) ** spec.q)


def evaluate(spec: ProblemSpec, u: np.ndarray) -> FunctionalValue:
    g = spec.grid
    u = g.check_field(u)
    nl = spec.nonlinearity
    nv = norm_V_sq(g, spec.V, u)
    nq = norm_qa_q(spec, u)
    e = integrate(g, spec.b * nl.F(u))
    pr = integrate(g, spec.b * nl.f(u) * u)
    sec = integrate(g, spec.b * nl.fprime(u) * u**2)
    j = 0.5 * nv - spec.lam / spec.q * nq - e
    return FunctionalValue(j=j, norm_v_sq=nv, norm_qa_q=nq, nl_energy=e, nl_pairing=pr, nl_second=sec)


def energy(spec: ProblemSpec, u: np.ndarray) -> float:
    return evaluate(spec, u).j


def derivative_pairing(spec: ProblemSpec, u: np.ndarray, fv: FunctionalValue | None = None) -> float:
    """``J'(u)u = ||u||_V^2 - lam ||u||_{q,a}^q - int b f(u) u``."""
    fv = fv or evaluate(spec, u)
    return fv.norm_v_sq - spec.lam * fv.norm_qa_q - fv.nl_pairing


def second_derivative_diag(spec: ProblemSpec, u: np.ndarray, fv: FunctionalValue | None = None) -> float:
    """``J''(u)(u,u) = ||u||_V^2 - lam (q-1) ||u||_{q,a}^q - int b f'(u) u^2``."""
    fv = fv or evaluate(spec, u)
    return fv.norm_v_sq - spec.lam * (spec.q - 1.0) * fv.norm_qa_q - fv.nl_second


def nehari_form(spec: ProblemSpec, u: np.ndarray, fv: FunctionalValue | None = None) -> float:
    """``2||u||_V^2 - lam q ||u||_{q,a}^q - int b (f'(u)u^2 + f(u)u)``.

    Equals :func:`second_derivative_diag` on the Nehari set.
    """
    fv = fv or evaluate(spec, u)
    return 2.0 * fv.norm_v_sq - spec.lam * spec.q * fv.norm_qa_q - fv.nl_second - fv.nl_pairing


def residual_field(spec: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """Strong-form defect; also the L2 representative of ``J'(u)``."""
    g = spec.grid
    u = g.check_field(u)
    return (
        apply_fractional_laplacian(g, u)
        + spec.V * u
        - spec.lam * spec.a * sublinear_term(spec.q, u)
        - spec.b * spec.nonlinearity.f(u)
    )


def residual_norm(spec: ProblemSpec, u: np.ndarray) -> float:
    r = residual_field(spec, u)
    return float(np.sqrt(integrate(spec.grid, r**2)))


def precondition(spec: ProblemSpec, r: np.ndarray) -> tuple[np.ndarray, bool]:
    """Approximately apply ``((-Delta)^s + V+ + B + 1)^-1`` to ``r``.

    The fractional part is inverted in Fourier space; the multiplicative part
    ``W = V+ + B + 1`` is handled by the fixed point
    ``(K + c) g_{k+1} = r - (W - c) g_k`` with ``c`` the midrange of ``W``.
    Returns ``(g, fallback)``; ``fallback`` is set when the result failed the
    descent check and the raw residual was returned instead.
    """
    grid = spec.grid
    r = grid.check_field(r)
    W = np.maximum(spec.V, 0.0) + spec.V_bound + 1.0
    c = 0.5 * (W.max() + W.min())
    dev = W - c
    inv = 1.0 / (grid.multipliers + c)
    rhat = np.fft.fftn(r)
    g = np.fft.ifftn(inv * rhat).real
    if np.any(dev != 0.0):
        scale = np.max(np.abs(g)) + 1e-300
        for _ in range(PRECOND_MAX_ITER):
            g_new = np.fft.ifftn(inv * np.fft.fftn(r - dev * g)).real
            step = np.max(np.abs(g_new - g))
            g = g_new
            if step <= 1e-14 * scale:
                break
    pair = integrate(grid, g * r)
    if not np.all(np.isfinite(g)) or pair < 0:
        log.warning("preconditioner failed the descent check; using raw residual")
        return r.copy(), True
    return g, False


def sobolev_gradient(spec: ProblemSpec, u: np.ndarray) -> np.ndarray:
    g, _ = precondition(spec, residual_field(spec, u))
    return g
