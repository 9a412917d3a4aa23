"""Problem data: grid, exponents, parameter, coefficient fields and nonlinearity."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .nonlinearity import Nonlinearity


class ProblemError(ValueError):
    pass


def critical_exponent(d: int, s: float) -> float:
    """``2d/(d - 2s)``, infinite when ``d <= 2s``."""
    return np.inf if d <= 2.0 * s else 2.0 * d / (d - 2.0 * s)


@dataclass(frozen=True)
class ProblemSpec:
    """Everything defining the equation on a grid.

    ``V_bound`` is the declared constant ``B`` with ``V >= -B``; ``b1_C0``,
    ``b1_alpha`` and ``b1_R0`` are the declared constants of the weight
    bound ``b <= C0 (1 + (V+)^(1/alpha))`` for ``|x| >= R0``.
    """

    grid: Grid
    q: float
    p: float
    lam: float
    V: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    nonlinearity: Nonlinearity
    V_bound: float = 0.0
    b1_C0: float = 1.0
    b1_alpha: float = 2.0
    b1_R0: float = 0.0
    strict: bool = True

    def __post_init__(self):
        g = self.grid
        for name in ("V", "a", "b"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 0:
                arr = np.full(g.shape, float(arr))
            if arr.shape != g.shape:
                raise ProblemError(f"{name} has shape {arr.shape}, grid is {g.shape}")
            if not np.all(np.isfinite(arr)):
                raise ProblemError(f"{name} has non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not 1.0 < self.q < 2.0:
            raise ProblemError(f"sublinear exponent q must lie in (1, 2), got {self.q}")
        pc = critical_exponent(g.d, g.s)
        if not 2.0 < self.p < pc:
            raise ProblemError(f"growth exponent p must lie in (2, {pc}), got {self.p}")
        if not self.lam > 0:
            raise ProblemError(f"lambda must be positive, got {self.lam}")
        if np.any(self.a < 0) or not np.any(self.a > 0):
            raise ProblemError("weight a must be nonnegative and not identically zero")
        if self.V_bound < 0:
            raise ProblemError("declared bound B must be nonnegative")
        if self.strict:
            if np.any(self.b < 1.0):
                raise ProblemError(f"weight b must be >= 1, min is {self.b.min()}")
            if np.any(self.V < -self.V_bound):
                raise ProblemError(f"potential violates V >= -B with B={self.V_bound}")

    @property
    def s(self) -> float:
        return self.grid.s

    @property
    def alpha0(self) -> float:
        return self.p / (self.p - self.q)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return dataclasses.replace(self, lam=float(lam))

    def describe(self) -> dict:
        g = self.grid
        return {
            "d": g.d,
            "n": g.n,
            "L": g.L,
            "s": g.s,
            "q": self.q,
            "p": self.p,
            "lambda": self.lam,
            "B": self.V_bound,
            "nonlinearity": self.nonlinearity.describe(),
        }
