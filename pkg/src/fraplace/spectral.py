"""Weighted principal eigenvalue by Rayleigh-quotient descent.

For a weight ``a`` (finite, or ``+-inf`` per node) the discrete quotient is::

    R(v) = (E(v) - sum_{v_i != 0} a_i |v_i|^p h) / sum_i |v_i|^p h

and ``lambda_1(a) = min R``. Nodes with ``a_i = -inf`` are removed from the
admissible support; any ``a_i = +inf`` makes the infimum ``-inf``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .nonlocal_core import energy_and_operator, gagliardo_energy, jp, lp_norm
from .reactions import ExtendedReal

__all__ = [
    "EigenOptions",
    "EigenResult",
    "MonotonicityReport",
    "weight_array",
    "rayleigh_quotient",
    "principal_eigenpair",
    "dense_oracle_p2",
    "lambda_monotonicity_check",
]


@dataclass(frozen=True)
class EigenOptions:
    tol: float = 1e-9
    max_iter: int = 50000
    restarts: int = 3
    seed: int = 0
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    initial_step: float = 1.0
    bb_step: bool = True
    stall_window: int = 10
    stall_rtol: float = 1e-12
    rounding_slack: float = 1e-12


@dataclass
class EigenResult:
    lam: ExtendedReal
    v: np.ndarray = field(default=None, repr=False)
    residual: float = 0.0
    iterations: int = 0
    converged: bool = True
    start_values: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def value(self):
        return float(self.lam)

    def to_json(self):
        return {
            "lambda": self.lam.to_json(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_values": self.start_values,
            "flags": self.flags,
        }


def weight_array(a, n):
    """Coerce a scalar, a float array with infinities, or ExtendedReals to floats."""
    if isinstance(a, ExtendedReal) or np.ndim(a) == 0:
        return np.full(n, float(a))
    arr = np.array([float(x) for x in a], dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"weight has {arr.size} entries, grid has {n} nodes")
    if np.any(np.isnan(arr)):
        raise ValueError("weight contains NaN")
    return arr


def rayleigh_quotient(kernel, grid, a, v):
    v = np.asarray(v, dtype=float)
    a = weight_array(a, kernel.n)
    nz = v != 0
    if not np.any(nz):
        raise ValueError("Rayleigh quotient of the zero field")
    if np.any(~np.isfinite(a[nz])):
        raise ValueError("infinite weight met by a nonzero entry")
    p = kernel.p
    vp = np.abs(v) ** p * grid.cell
    return (gagliardo_energy(kernel, v) - np.sum(a[nz] * vp[nz])) / np.sum(vp)


class _Quotient:
    """Value and Euclidean gradient of R on a fixed support with finite weights."""

    def __init__(self, kernel, grid, a, support):
        self.kernel = kernel
        self.cell = grid.cell
        self.p = kernel.p
        self.support = support
        self.a = np.where(support, a, 0.0)

    def normalize(self, v):
        v = np.where(self.support, np.abs(v), 0.0)
        return v / np.sum(v ** self.p * self.cell) ** (1.0 / self.p)

    def __call__(self, v):
        # v is normalized: sum |v|^p h = 1
        e, g = energy_and_operator(self.kernel, v)
        vp = np.abs(v) ** self.p * self.cell
        R = e - np.sum(self.a * vp)
        jv = jp(self.p, v)
        el = g - (self.a + R) * jv * self.cell
        grad = np.where(self.support, self.p * el, 0.0)
        return R, grad, el

    def residual(self, el):
        return float(np.max(np.abs(el[self.support]))) / self.cell


def _bb_step(s, y, fallback):
    sy = float(np.dot(s, y))
    if sy <= 0 or not np.isfinite(sy):
        return fallback
    return min(max(float(np.dot(s, s)) / sy, 1e-10), 1e10)


def _descend(Q, v0, opts):
    """Projected gradient descent on the unit L^p sphere intersected with v >= 0."""
    v = Q.normalize(v0)
    R, grad, el = Q(v)
    history = [R]
    converged = False
    it = 0
    t0 = opts.initial_step
    for it in range(1, opts.max_iter + 1):
        if Q.residual(el) < opts.tol:
            converged = True
            break
        gg = float(np.dot(grad, grad))
        t = t0
        slack = opts.rounding_slack * abs(R)
        while True:
            w = Q.normalize(v - t * grad)
            Rw, gw, elw = Q(w)
            if Rw <= R - opts.armijo_slope * t * gg:
                break
            # approximate Armijo below the rounding level of R
            if Rw <= R + slack and np.dot(gw, grad) >= -(1.0 - 2.0 * opts.armijo_slope) * gg:
                break
            t *= opts.armijo_shrink
            if t < 1e-20:
                break
        if t < 1e-20:
            # no descent possible at working precision
            converged = Q.residual(el) < 1e3 * opts.tol
            break
        if opts.bb_step:
            t0 = _bb_step(w - v, gw - grad, opts.initial_step)
        v, R, grad, el = w, Rw, gw, elw
        history.append(R)
        if len(history) > opts.stall_window:
            old = history[-1 - opts.stall_window]
            if old - R < opts.stall_rtol * abs(R):
                converged = True
                break
    return v, R, Q.residual(el), it, converged


def principal_eigenpair(kernel, grid, a, opts=None):
    """Smallest value of the weighted Rayleigh quotient and its nonnegative minimizer.

    Starts from the positive constant field and ``opts.restarts`` random
    positive fields; the smallest value wins. For ``p != 2`` this is a local
    search and agreement between starts is reported, not guaranteed.
    """
    opts = opts or EigenOptions()
    a = weight_array(a, kernel.n)
    flags = []
    if np.any(a == math.inf):
        return EigenResult(ExtendedReal("minus_infinity"), None, 0.0, 0, True, [], ["plus_infinity_weight"])
    support = a > -math.inf
    if not np.any(support):
        return EigenResult(ExtendedReal("plus_infinity"), None, 0.0, 0, True, [], ["empty_support"])
    if not np.all(support):
        flags.append("restricted_support")
    Q = _Quotient(kernel, grid, a, support)
    rng = np.random.default_rng(opts.seed)
    starts = [np.ones(kernel.n)]
    starts += [rng.uniform(0.1, 1.0, kernel.n) for _ in range(opts.restarts)]
    best = None
    values = []
    total_iter = 0
    for v0 in starts:
        v, R, res, it, ok = _descend(Q, v0, opts)
        values.append(float(R))
        total_iter += it
        if best is None or R < best[1]:
            best = (v, R, res, ok)
    v, R, res, ok = best
    if len(values) > 1 and max(values) - min(values) > 1e-6 * max(1.0, abs(min(values))):
        flags.append("starts_disagree")
    return EigenResult(ExtendedReal.of(R), v, res, total_iter, ok, values, flags)


def _p2_matrix(kernel, grid, a):
    W = kernel.weights
    K = 2.0 * (np.diag(W.sum(axis=1)) - W) + np.diag(kernel.exterior)
    return K / grid.cell - np.diag(a)


def dense_oracle_p2(kernel, grid, a):
    """Exact principal pair for ``p = 2`` from a dense symmetric eigensolve."""
    if kernel.p != 2:
        raise ValueError("dense oracle is only valid for p = 2")
    a = weight_array(a, kernel.n)
    if not np.all(np.isfinite(a)):
        raise ValueError("dense oracle needs finite weights")
    A = _p2_matrix(kernel, grid, a)
    w, V = scipy.linalg.eigh(A, subset_by_index=[0, 0])
    v = V[:, 0]
    if v.mean() < 0:
        v = -v
    v = np.abs(v)
    v = v / lp_norm(grid, v, 2)
    res = float(np.max(np.abs(A @ v - w[0] * v)))
    return EigenResult(ExtendedReal.of(w[0]), v, res, 0, True, [float(w[0])], ["dense"])


@dataclass
class MonotonicityReport:
    lambda_a: float
    lambda_b: float
    tol: float
    ok: bool

    def to_json(self):
        return {"lambda_a": self.lambda_a, "lambda_b": self.lambda_b, "tol": self.tol, "ok": self.ok}


def lambda_monotonicity_check(kernel, grid, a, b, opts=None, tol=2e-8):
    """Check ``a <= b`` implies ``lambda_1(a) >= lambda_1(b) - tol``."""
    a = weight_array(a, kernel.n)
    b = weight_array(b, kernel.n)
    if np.any(a > b):
        raise ValueError("monotonicity check needs a <= b pointwise")
    la = principal_eigenpair(kernel, grid, a, opts).value
    lb = principal_eigenpair(kernel, grid, b, opts).value
    return MonotonicityReport(la, lb, tol, bool(la >= lb - tol))
