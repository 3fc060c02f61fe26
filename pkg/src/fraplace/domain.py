"""Uniform grids on an interval or a rectangle.

Nodes sit strictly inside the domain; a grid function is identified with its
zero extension, so the Dirichlet condition enters only through the exterior
tail of the kernel and no node is ever pinned.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Grid", "RectGrid", "build_grid", "build_rect_grid", "boundary_power"]


@dataclass(frozen=True)
class Grid:
    """Interior nodes of ``(lo, hi)`` with spacing ``h = (hi - lo) / (n + 1)``."""

    lo: float
    hi: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"domain: need hi > lo, got lo={self.lo}, hi={self.hi}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"domain.n: need an integer >= 2, got {self.n}")
        h = (self.hi - self.lo) / (self.n + 1)
        nodes = self.lo + h * np.arange(1, self.n + 1)
        # both one-sided distances, so that the symmetric grid is exactly symmetric
        dist = np.minimum(h * np.arange(1, self.n + 1), h * np.arange(self.n, 0, -1))
        nodes.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "dist", dist)

    dim = 1

    @property
    def cell(self):
        """Measure of the cell owned by one node."""
        return self.h

    @property
    def points(self):
        return self.nodes[:, None]


@dataclass(frozen=True)
class RectGrid:
    """Product grid on ``(lo[0], hi[0]) x (lo[1], hi[1])``, row-major node order.

    Both directions share one spacing ``h``; ``shape = (nx, ny)`` must satisfy
    ``(hi - lo) / (shape + 1) == h`` in each direction up to rounding.
    """

    lo: tuple
    hi: tuple
    shape: tuple
    h: float = field(init=False)
    points: np.ndarray = field(init=False, repr=False)
    dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        nx, ny = (int(m) for m in self.shape)
        if lo.shape != (2,) or hi.shape != (2,) or np.any(hi <= lo):
            raise ValueError("rectangle: need two corners with hi > lo")
        if nx < 2 or ny < 2:
            raise ValueError("rectangle: need at least 2 nodes per direction")
        hx = (hi[0] - lo[0]) / (nx + 1)
        hy = (hi[1] - lo[1]) / (ny + 1)
        if not np.isclose(hx, hy, rtol=1e-12):
            raise ValueError(f"rectangle: spacings differ ({hx} vs {hy})")
        xs = lo[0] + hx * np.arange(1, nx + 1)
        ys = lo[1] + hy * np.arange(1, ny + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        dist = np.minimum.reduce([pts[:, 0] - lo[0], hi[0] - pts[:, 0],
                                  pts[:, 1] - lo[1], hi[1] - pts[:, 1]])
        pts.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))
        object.__setattr__(self, "shape", (nx, ny))
        object.__setattr__(self, "h", hx)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", dist)

    dim = 2

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    @property
    def cell(self):
        return self.h * self.h


def build_grid(lo, hi, n):
    """Uniform interior grid on the interval ``(lo, hi)`` with ``n`` nodes."""
    return Grid(float(lo), float(hi), n)


def build_rect_grid(lo, hi, shape):
    return RectGrid(tuple(lo), tuple(hi), tuple(shape))


def boundary_power(grid, s):
    """Return ``dist(x_i, complement)**s`` at every node.

    ``grid`` may also be a bare array of distances.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return np.asarray(getattr(grid, "dist", grid), dtype=float) ** s
