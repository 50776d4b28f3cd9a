"""Dense Fourier spectral differentiation matrices on uniform periodic grids.

The first-derivative matrix is the classical trigonometric cardinal-function
construction: on n points covering a period, the off-diagonal entries are
(-1)^(j-k)/2 * csc(h(j-k)/2) for odd n and (-1)^(j-k)/2 * cot(h(j-k)/2) for
even n, rescaled for a general period length.  The second-derivative matrix
is the square of the first; for odd n this is the exact spectral second
derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PeriodicGrid", "DiffMatrices", "build_diff_matrices"]

MIN_POINTS = 4


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """Uniform grid on [x_left, x_right) with periodic identification."""

    n: int
    x_left: float
    x_right: float

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} grid points, got {self.n}")
        if not self.x_right > self.x_left:
            raise ValueError("domain length must be positive")

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.x_left + np.arange(self.n) * self.dx


@dataclass(frozen=True, eq=False)
class DiffMatrices:
    dx: np.ndarray
    dxx: np.ndarray
    grid: PeriodicGrid


def build_diff_matrices(grid: PeriodicGrid) -> DiffMatrices:
    """First and second derivative matrices for a periodic uniform grid."""
    n = grid.n
    scale = 2.0 * np.pi / grid.length
    idx = np.arange(n)
    jk = np.subtract.outer(idx, idx)
    signs = np.where(jk % 2 == 0, 1.0, -1.0)
    # Half the rescaled node separation; rows/cols only ever differ by
    # multiples of dx so the argument is pi*(j-k)/n.
    arg = 0.5 * scale * grid.dx * jk
    d = np.zeros((n, n))
    off = jk != 0
    if n % 2:
        d[off] = 0.5 * signs[off] / np.sin(arg[off])
    else:
        d[off] = 0.5 * signs[off] / np.tan(arg[off])
    d *= scale
    d.setflags(write=False)
    dxx = d @ d
    dxx.setflags(write=False)
    return DiffMatrices(dx=d, dxx=dxx, grid=grid)
