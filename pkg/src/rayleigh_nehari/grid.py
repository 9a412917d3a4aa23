"""Periodic box discretization and the spectral fractional Laplacian.

Fields are plain numpy arrays of shape ``grid.shape`` (``(n,)`` or ``(n, n)``);
flattening in C order gives the row-major layout used for CSV export.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on ``[-L, L)^d`` with Fourier multipliers ``|xi|^(2s)``."""

    d: int
    n: int
    L: float
    s: float
    multipliers: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.d

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to ``shape`` (``ij`` indexing)."""
        return tuple(np.meshgrid(*([self.axis()] * self.d), indexing="ij"))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords()))

    def frequency_norms(self) -> np.ndarray:
        """``|xi_k|`` in ``np.fft.fftn`` layout, ``xi_k = pi k / L``."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        xi = np.pi * k / self.L
        grids = np.meshgrid(*([xi] * self.d), indexing="ij")
        return np.sqrt(sum(g**2 for g in grids))

    def check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            if u.size == self.size:
                u = u.reshape(self.shape)
            else:
                raise GridError(f"field of shape {u.shape} does not live on grid {self.shape}")
        return u


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def build_grid(d: int, n: int, L: float, s: float, allow_any_s: bool = False) -> Grid:
    """Build a periodic grid and precompute the multipliers ``|xi_k|^(2s)``.

    ``s`` must satisfy ``0 < s < min(1, d/2)`` unless ``allow_any_s`` is set,
    in which case any ``s > 0`` is accepted.
    """
    if d not in (1, 2):
        raise GridError(f"dimension must be 1 or 2, got {d}")
    if not isinstance(n, (int, np.integer)) or n < 8 or not _is_power_of_two(int(n)):
        raise GridError(f"points per axis must be a power of two >= 8, got {n}")
    if not (L > 0 and np.isfinite(L)):
        raise GridError(f"box half-length must be positive, got {L}")
    s_max = min(1.0, d / 2.0)
    if not s > 0:
        raise GridError(f"fractional order must be positive, got {s}")
    if not allow_any_s and not s < s_max:
        raise GridError(
            f"fractional order s={s} outside 0 < s < min(1, d/2) = {s_max}; "
            "pass allow_any_s to override"
        )
    g = Grid(d=int(d), n=int(n), L=float(L), s=float(s), multipliers=np.empty(0))
    mult = g.frequency_norms() ** (2.0 * s)
    mult.flat[0] = 0.0
    mult.setflags(write=False)
    object.__setattr__(g, "multipliers", mult)
    return g


def apply_fractional_laplacian(grid: Grid, u: np.ndarray, s: float | None = None) -> np.ndarray:
    """Spectral ``(-Delta)^s u``; ``s`` overrides the grid order when given."""
    u = grid.check_field(u)
    if s is None:
        mult = grid.multipliers
    else:
        mult = grid.frequency_norms() ** (2.0 * s)
        mult.flat[0] = 0.0
    out = np.fft.ifftn(mult * np.fft.fftn(u))
    return out.real


def integrate(grid: Grid, g: np.ndarray) -> float:
    """Rectangle rule ``h^d * sum(g)``."""
    return float(grid.cell_volume * np.sum(g))


def inner_product_V(grid: Grid, V: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """``(u, v)_V = int u (-Delta)^s v + int V u v``."""
    u = grid.check_field(u)
    v = grid.check_field(v)
    return integrate(grid, u * apply_fractional_laplacian(grid, v)) + integrate(grid, V * u * v)


def norm_V_sq(grid: Grid, V: np.ndarray, u: np.ndarray) -> float:
    return inner_product_V(grid, V, u, u)


def l2_norm(grid: Grid, u: np.ndarray) -> float:
    return float(np.sqrt(integrate(grid, np.asarray(u) ** 2)))


def operator_matrix(grid: Grid, V: np.ndarray) -> np.ndarray:
    """Dense symmetric matrix of ``(-Delta)^s + V`` acting on flattened fields."""
    N = grid.size
    eye = np.eye(N).reshape((N,) + grid.shape)
    axes = tuple(range(1, grid.d + 1))
    K = np.fft.ifftn(grid.multipliers * np.fft.fftn(eye, axes=axes), axes=axes).real
    K = K.reshape(N, N)
    K = 0.5 * (K + K.T)
    K[np.diag_indices(N)] += np.asarray(V, dtype=float).ravel()
    return K


def form_eigenmodes(grid: Grid, V: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs of the discrete V-form relative to the L2 product.

    Returns ``(values, modes)`` with ``modes[j]`` normalized to ``||mode||_V = 1``.
    """
    N = grid.size
    k = min(k, N)
    if N <= 2048:
        vals, vecs = np.linalg.eigh(operator_matrix(grid, V))
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        from scipy.sparse.linalg import LinearOperator, eigsh

        Vf = np.asarray(V, dtype=float)

        def matvec(x):
            x = x.reshape(grid.shape)
            return (apply_fractional_laplacian(grid, x) + Vf * x).ravel()

        op = LinearOperator((N, N), matvec=matvec, dtype=float)
        vals, vecs = eigsh(op, k=k, which="SA")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    modes = []
    for j in range(k):
        m = vecs[:, j].reshape(grid.shape)
        # deterministic sign: largest-magnitude entry positive
        if m.flat[np.argmax(np.abs(m))] < 0:
            m = -m
        nv = norm_V_sq(grid, V, m)
        modes.append(m / np.sqrt(nv) if nv > 0 else m)
    return vals, np.array(modes)
