"""Superlinear nonlinearities ``f`` with primitive ``F`` and the auxiliary maps G, H.

All evaluators accept scalars or arrays and are vectorized.

``G(t) = f(t)/t - q F(t)/t^2`` and ``H(t) = f'(t) + (1 - q) f(t)/t`` are
extended by 0 at ``t = 0``.

Note on ``t ln(1 + |t|)``: integrating directly gives, for ``t >= 0``,
``F(t) = t^2/2 ln(1+t) - t^2/4 + t/2 - ln(1+t)/2``. The variant with ``-t/2``
that circulates in the literature does not differentiate back to ``f`` and
is not used.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as _quad

ArrayLike = float | np.ndarray

_SERIES_CUTOFF = 0.05
_SERIES_TERMS = 14


def _check_finite(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("nonlinearity evaluated at a non-finite argument")
    return t


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class Nonlinearity:
    """A nonlinearity ``f`` with derivative and primitive.

    Use the factories :func:`power_sum`, :func:`log_power` and :func:`custom`
    rather than constructing this directly.
    """

    kind: str
    exponents: tuple[float, ...] = ()
    label: str = ""
    _f: Callable | None = field(default=None, repr=False, compare=False)
    _fprime: Callable | None = field(default=None, repr=False, compare=False)
    _F: Callable | None = field(default=None, repr=False, compare=False)

    # -- pointwise values -------------------------------------------------
    def f(self, t: ArrayLike) -> ArrayLike:
        t = _check_finite(t)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum(a ** (p - 2.0) * t for p in self.exponents)
        elif self.kind == "log_power":
            val = t * np.log1p(np.abs(t))
        else:
            val = np.asarray(np.vectorize(self._f, otypes=[float])(t), dtype=float)
        return _out(val, t)

    def fprime(self, t: ArrayLike) -> ArrayLike:
        t = _check_finite(t)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum((p - 1.0) * a ** (p - 2.0) for p in self.exponents)
        elif self.kind == "log_power":
            a = np.abs(t)
            val = np.log1p(a) + a / (1.0 + a)
        else:
            val = np.asarray(np.vectorize(self._fprime, otypes=[float])(t), dtype=float)
        return _out(val, t)

    def F(self, t: ArrayLike) -> ArrayLike:
        t = _check_finite(t)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum(a**p / p for p in self.exponents)
        elif self.kind == "log_power":
            val = np.abs(t) ** 2 * _log_F_over_t2(np.abs(t))
        elif self._F is not None:
            val = np.asarray(np.vectorize(self._F, otypes=[float])(t), dtype=float)
        else:
            val = numeric_primitive(self._f, t)
        return _out(val, t)

    # -- derived maps -------------------------------------------------------
    def f_over_t(self, t: ArrayLike, check: bool = True) -> ArrayLike:
        t = _check_finite(t) if check else np.asarray(t, dtype=float)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum(a ** (p - 2.0) for p in self.exponents)
        elif self.kind == "log_power":
            val = np.log1p(np.abs(t))
        else:
            val = _safe_div(np.asarray(self.f(t)), t)
        return _out(val, t)

    def F_over_t2(self, t: ArrayLike, check: bool = True) -> ArrayLike:
        t = _check_finite(t) if check else np.asarray(t, dtype=float)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum(a ** (p - 2.0) / p for p in self.exponents)
        elif self.kind == "log_power":
            val = _log_F_over_t2(np.abs(t))
        else:
            val = _safe_div(np.asarray(self.F(t)), t**2)
        return _out(val, t)

    def G(self, q: float, t: ArrayLike, check: bool = True) -> ArrayLike:
        t = _check_finite(t) if check else np.asarray(t, dtype=float)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum((1.0 - q / p) * a ** (p - 2.0) for p in self.exponents)
        else:
            val = np.asarray(self.f_over_t(t, check)) - q * np.asarray(self.F_over_t2(t, check))
            val = np.where(t == 0.0, 0.0, val)
        return _out(val, t)

    def H(self, q: float, t: ArrayLike, check: bool = True) -> ArrayLike:
        t = _check_finite(t) if check else np.asarray(t, dtype=float)
        if self.kind == "power_sum":
            a = np.abs(t)
            val = sum((p - q) * a ** (p - 2.0) for p in self.exponents)
        elif self.kind == "log_power":
            a = np.abs(t)
            val = (2.0 - q) * np.log1p(a) + a / (1.0 + a)
        else:
            val = np.asarray(self.fprime(t)) + (1.0 - q) * np.asarray(self.f_over_t(t, check))
            val = np.where(t == 0.0, 0.0, val)
        return _out(val, t)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.exponents:
            out["exponents"] = list(self.exponents)
        if self.label:
            out["label"] = self.label
        return out


def _safe_div(num, den):
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))


_SERIES_COEFS = np.array(
    [(-1.0) ** (m + 1) / (m * (m + 2.0)) for m in range(1, _SERIES_TERMS + 1)]
)


def _log_F_over_t2(a: np.ndarray) -> np.ndarray:
    """``F(a)/a^2`` for ``f = t ln(1+|t|)``, ``a >= 0``; series near 0."""
    a = np.asarray(a, dtype=float)
    small = a < _SERIES_CUTOFF
    out = np.empty_like(a)
    if np.any(small):
        x = a[small]
        acc = np.zeros_like(x)
        for coef in _SERIES_COEFS[::-1]:
            acc = acc * x + coef
        out[small] = acc * x
    big = ~small
    if np.any(big):
        x = a[big]
        L = np.log1p(x)
        out[big] = 0.5 * L - 0.25 + 0.5 / x - 0.5 * L / x**2
    return out


def numeric_primitive(f: Callable[[float], float], t: ArrayLike) -> np.ndarray:
    """``int_0^t f`` by adaptive quadrature, elementwise."""

    def one(x):
        if x == 0.0:
            return 0.0
        val, _ = _quad.quad(f, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    return np.asarray(np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float)), dtype=float)


def power_sum(*exponents: float) -> Nonlinearity:
    """``f(t) = sum_i |t|^(p_i - 2) t`` with ``2 < p_1 < ... < p_k``."""
    if not exponents:
        raise ValueError("power_sum needs at least one exponent")
    ex = tuple(sorted(float(p) for p in exponents))
    if ex[0] <= 2.0:
        raise ValueError(f"power_sum exponents must exceed 2, got {ex}")
    return Nonlinearity(kind="power_sum", exponents=ex)


def log_power() -> Nonlinearity:
    """``f(t) = t ln(1 + |t|)``."""
    return Nonlinearity(kind="log_power")


def custom(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    F: Callable[[float], float] | None = None,
    label: str = "custom",
) -> Nonlinearity:
    """User nonlinearity; ``F`` falls back to numeric integration of ``f``."""
    return Nonlinearity(kind="custom", label=label, _f=f, _fprime=fprime, _F=F)


def eval_f(nl: Nonlinearity, t: ArrayLike) -> ArrayLike:
    return nl.f(t)


def eval_fprime(nl: Nonlinearity, t: ArrayLike) -> ArrayLike:
    return nl.fprime(t)


def eval_F(nl: Nonlinearity, t: ArrayLike) -> ArrayLike:
    return nl.F(t)


def eval_G(nl: Nonlinearity, q: float, t: ArrayLike) -> ArrayLike:
    return nl.G(q, t)


def eval_H(nl: Nonlinearity, q: float, t: ArrayLike) -> ArrayLike:
    return nl.H(q, t)
