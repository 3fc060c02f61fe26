"""Discrete Gagliardo energy and the fractional p-Laplacian as its gradient.

With interaction weights ``w_ij`` and exterior tail coefficients ``kappa_i``
the energy of a grid field ``u`` (zero outside the domain) is::

    E(u) = sum_{i != j} |u_i - u_j|^p w_ij + sum_i |u_i|^p kappa_i

and the discrete operator is ``g = grad(E / p)``, so ``<g, u> = E(u)``.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kernel",
    "jp",
    "assemble_kernel",
    "gagliardo_energy",
    "apply_operator",
    "picone_gap",
    "lp_norm",
    "check_params",
]

_GAUSS_ORDER = 64


def check_params(s, p):
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")


def jp(p, t):
    """``|t|^(p-2) t``, with the value 0 at ``t = 0`` for every ``p > 1``."""
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * np.abs(t) ** (p - 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Kernel:
    s: float
    p: float
    weights: np.ndarray = field(repr=False)
    exterior: np.ndarray = field(repr=False)
    grid: object = field(repr=False)

    @property
    def n(self):
        return self.exterior.shape[0]


def _rect_tail(points, lo, hi, ps):
    """Angular integral of ``rho(theta)**(-ps) / ps`` for rays leaving a rectangle.

    ``rho(theta)`` is the distance from the point to the rectangle boundary
    along direction ``theta``; integrating ``r**(-1-ps)`` radially from there to
    infinity gives ``rho**(-ps) / ps``. The circle is split at the corner
    directions so the integrand is smooth on each piece.
    """
    xg, wg = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    out = np.empty(len(points))
    for idx, (x, y) in enumerate(points):
        corners = [(hi[0], hi[1]), (lo[0], hi[1]), (lo[0], lo[1]), (hi[0], lo[1])]
        angles = sorted(np.arctan2(cy - y, cx - x) % (2 * np.pi) for cx, cy in corners)
        cuts = angles + [angles[0] + 2 * np.pi]
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            theta = 0.5 * (b - a) * xg + 0.5 * (a + b)
            c, s = np.cos(theta), np.sin(theta)
            with np.errstate(divide="ignore"):
                tx = np.where(c > 0, (hi[0] - x) / c, np.where(c < 0, (lo[0] - x) / c, np.inf))
                ty = np.where(s > 0, (hi[1] - y) / s, np.where(s < 0, (lo[1] - y) / s, np.inf))
            rho = np.minimum(tx, ty)
            total += 0.5 * (b - a) * np.sum(wg * rho ** (-ps))
        out[idx] = total / ps
    return out


def assemble_kernel(grid, s, p):
    """Dense interaction weights and exterior tail for a grid.

    Pairs inside the domain get the midpoint-rule weight
    ``cell^2 / |x_i - x_j|^(N + ps)``; the self-interaction cell is dropped.
    Pairs with one point outside are integrated exactly in the outer variable
    and folded, with the factor 2 for both orderings, into ``exterior``.
    """
    check_params(s, p)
    ps = p * s
    pts = np.asarray(grid.points, dtype=float)
    N = pts.shape[1]
    if N == 1:
        # Toeplitz in |i - j|: exactly symmetric under node reversal
        idx = np.arange(grid.n)
        r = grid.h * np.abs(idx[:, None] - idx[None, :]).astype(float)
    else:
        diff = pts[:, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(r, 1.0)
    W = grid.cell ** 2 / r ** (N + ps)
    np.fill_diagonal(W, 0.0)
    if N == 1:
        # one-sided distances as integer multiples of h keep the tail mirror-symmetric
        left = grid.h * np.arange(1, grid.n + 1)
        right = grid.h * np.arange(grid.n, 0, -1)
        tail = (left ** (-ps) + right ** (-ps)) / ps
    else:
        tail = _rect_tail(pts, grid.lo, grid.hi, ps)
    kappa = 2.0 * grid.cell * tail
    W.setflags(write=False)
    kappa.setflags(write=False)
    return Kernel(float(s), float(p), W, kappa, grid)


def _field(kernel, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (kernel.n,):
        raise ValueError(f"field has shape {u.shape}, kernel expects ({kernel.n},)")
    return u


def gagliardo_energy(kernel, u):
    u = _field(kernel, u)
    p = kernel.p
    rows = np.sum(np.abs(u[:, None] - u[None, :]) ** p * kernel.weights, axis=1)
    return float(np.sum(rows) + np.sum(np.abs(u) ** p * kernel.exterior))


def apply_operator(kernel, u):
    """Gradient of ``E(u) / p`` with respect to the nodal values."""
    u = _field(kernel, u)
    p = kernel.p
    D = jp(p, u[:, None] - u[None, :])
    return 2.0 * np.sum(D * kernel.weights, axis=1) + jp(p, u) * kernel.exterior


def energy_and_operator(kernel, u):
    """``(E(u), grad(E/p))`` sharing the pairwise differences."""
    u = _field(kernel, u)
    p = kernel.p
    D = u[:, None] - u[None, :]
    A = np.abs(D)
    Ap = A ** (p - 1.0)
    e = np.sum(np.sum(Ap * A * kernel.weights, axis=1)) + np.sum(np.abs(u) ** p * kernel.exterior)
    g = 2.0 * np.sum(np.sign(D) * Ap * kernel.weights, axis=1) + jp(p, u) * kernel.exterior
    return float(e), g


def picone_gap(p, a, b, c, d):
    """Slack ``|c-d|^p - j_p(a-b) (c^p / a^(p-1) - d^p / b^(p-1))``; never negative."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("picone_gap needs a, b > 0")
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    gap = np.abs(c - d) ** p - jp(p, a - b) * (c ** p / a ** (p - 1) - d ** p / b ** (p - 1))
    return gap if np.ndim(gap) else float(gap)


def lp_norm(grid, u, q):
    """Discrete L^q norm ``(sum |u_i|^q cell)^(1/q)``; ``q = inf`` gives the max."""
    u = np.asarray(u, dtype=float)
    if q == np.inf:
        return float(np.max(np.abs(u))) if u.size else 0.0
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return float(np.sum(np.abs(u) ** q * grid.cell) ** (1.0 / q))
