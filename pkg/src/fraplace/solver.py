"""Energy minimization for the nonlocal Dirichlet problem with truncated reactions.

``phi(u) = E(u) / p - sum_i F(x_i, u_i) h``. The truncated functional ``phi_k``
uses ``F_k`` and is differentiable, so it is minimized by Armijo descent; the
truncation level is doubled until two consecutive minimizers agree and the
clamp is inactive on the result, at which point the minimizer also solves the
untruncated discrete equation.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import boundary_power
from .nonlocal_core import energy_and_operator, gagliardo_energy
from .reactions import clamp_breakpoints, eval_F, eval_f, truncate
from .spectral import EigenOptions

log = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "SolveResult",
    "UniquenessReport",
    "NonCoerciveError",
    "phi",
    "phi_gradient",
    "minimize_truncated",
    "solve",
    "multi_start_uniqueness",
    "boundary_behavior",
    "initial_fields",
]


class NonCoerciveError(RuntimeError):
    """Descent ran off to minus infinity: the truncated functional is not coercive."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 50000
    starts: int = 1
    k_max: int = 1024
    stabilize_tol: float = 1e-6
    seed: int = 0
    zero_tol: float = 1e-8
    boundary_fraction: float = 0.1
    init_scale: float = 0.1
    init_noise: float = 0.01
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    initial_step: float = 1.0
    bb_step: bool = True
    stall_window: int = 0
    stall_rtol: float = 1e-12
    rounding_slack: float = 1e-12
    divergence_bound: float = 1e12
    workers: int = 1


@dataclass
class SolveResult:
    u: np.ndarray = field(repr=False)
    phi: float
    residual: float
    k_final: int
    iterations: int
    min_u: float
    boundary_ratio_lo: float
    boundary_ratio_hi: float
    converged: bool
    classification: str = ""
    verdict: object = None
    levels: list = field(default_factory=list)
    clamp_inactive: bool = True
    message: str = ""

    @property
    def sup_u(self):
        return float(np.max(np.abs(self.u))) if self.u.size else 0.0

    def to_json(self):
        return {
            "phi": self.phi,
            "residual": self.residual,
            "k_final": self.k_final,
            "iterations": self.iterations,
            "min_u": self.min_u,
            "sup_u": self.sup_u,
            "boundary_ratio_lo": self.boundary_ratio_lo,
            "boundary_ratio_hi": self.boundary_ratio_hi,
            "converged": self.converged,
            "classification": self.classification,
            "clamp_inactive": self.clamp_inactive,
            "levels": self.levels,
            "message": self.message,
        }


@dataclass
class UniquenessReport:
    starts: int
    max_pairwise_dist: float
    verdict: str
    tol: float
    sup_norms: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    note: str = "agreement of independent starts is evidence of uniqueness, not a proof"

    def to_json(self):
        return {"starts": self.starts, "max_pairwise_dist": self.max_pairwise_dist,
                "verdict": self.verdict, "tol": self.tol, "sup_norms": self.sup_norms,
                "errors": self.errors, "note": self.note}


def _nodes_x(grid):
    return np.asarray(grid.points)[:, 0]


def phi(kernel, grid, reaction, u):
    u = np.asarray(u, dtype=float)
    F = eval_F(reaction, _nodes_x(grid), u)
    return gagliardo_energy(kernel, u) / kernel.p - float(np.sum(F * grid.cell))


def phi_gradient(kernel, grid, reaction, u):
    """``apply_operator(u) - f_k(x, u) h``; only truncated reactions are differentiable."""
    if reaction.k is None:
        raise ValueError("phi_gradient needs a truncated reaction (set k)")
    u = np.asarray(u, dtype=float)
    _, g = energy_and_operator(kernel, u)
    return g - eval_f(reaction, _nodes_x(grid), u) * grid.cell


class _Functional:
    def __init__(self, kernel, grid, reaction):
        self.kernel = kernel
        self.cell = grid.cell
        self.x = _nodes_x(grid)
        self.reaction = reaction
        self.tstar = clamp_breakpoints(reaction, self.x)

    def __call__(self, u):
        e, g = energy_and_operator(self.kernel, u)
        F = eval_F(self.reaction, self.x, u)
        val = e / self.kernel.p - float(np.sum(F * self.cell))
        grad = g - eval_f(self.reaction, self.x, u) * self.cell
        return val, grad

    def residual(self, grad):
        return float(np.max(np.abs(grad))) / self.cell


def initial_fields(grid, s, opts, count=None, seed=None):
    """``c d^s`` plus uniform noise of amplitude ``init_noise``, one field per start."""
    ds = boundary_power(grid, s)
    rng = np.random.default_rng(opts.seed if seed is None else seed)
    count = opts.starts if count is None else count
    return [opts.init_scale * ds + opts.init_noise * rng.uniform(-1.0, 1.0, grid.n)
            for _ in range(count)]


def _bb_step(s, y, fallback):
    sy = float(np.dot(s, y))
    if sy <= 0 or not np.isfinite(sy):
        return fallback
    return min(max(float(np.dot(s, s)) / sy, 1e-10), 1e10)


def _descend(J, u0, opts, trace=None):
    u = np.array(u0, dtype=float)
    val, grad = J(u)
    history = [val]
    t0 = opts.initial_step
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        if J.residual(grad) < opts.tol:
            converged = True
            break
        gg = float(np.dot(grad, grad))
        t = t0
        slack = opts.rounding_slack * abs(val)
        while True:
            w = u - t * grad
            vw, gw = J(w)
            if vw <= val - opts.armijo_slope * t * gg:
                break
            # approximate Armijo: below the rounding level of phi, judge the
            # step by the directional derivative at the trial point instead
            if vw <= val + slack and np.dot(gw, grad) >= -(1.0 - 2.0 * opts.armijo_slope) * gg:
                break
            t *= opts.armijo_shrink
            if t < 1e-20:
                break
        if t < 1e-20:
            converged = J.residual(grad) < 1e3 * opts.tol
            break
        if opts.bb_step:
            t0 = _bb_step(w - u, gw - grad, opts.initial_step)
        u, val, grad = w, vw, gw
        if trace is not None:
            trace.append(u.copy())
        if not math.isfinite(val) or val < -opts.divergence_bound or \
                np.max(np.abs(u)) > opts.divergence_bound:
            raise NonCoerciveError(f"phi_k reached {val:.3e} after {it} iterations")
        history.append(val)
        if opts.stall_window and len(history) > opts.stall_window:
            old = history[-1 - opts.stall_window]
            if old - val < opts.stall_rtol * max(abs(val), 1e-300):
                converged = True
                break
    return u, val, grad, it, converged


def boundary_behavior(grid, u, s, fraction=0.1):
    """Min and max of ``u / d^s`` over the nodes closest to the boundary.

    The band is the nodes whose distance lies in the lowest ``fraction``
    quantile of all node distances.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("boundary_behavior needs a nonnegative field")
    if not 0.0 < fraction <= 0.5:
        raise ValueError("fraction must lie in (0, 0.5]")
    d = np.asarray(grid.dist)
    band = d <= np.quantile(d, fraction)
    ratio = u[band] / boundary_power(grid, s)[band]
    return float(np.min(ratio)), float(np.max(ratio))


def _package(kernel, grid, reaction_for_residual, u, val, it, converged, k, opts):
    J = _Functional(kernel, grid, reaction_for_residual)
    _, grad = J(u)
    pos = np.maximum(u, 0.0)
    if np.max(np.abs(u)) > 0 and np.min(u) >= 0:
        lo, hi = boundary_behavior(grid, pos, kernel.s, opts.boundary_fraction)
    else:
        lo = hi = 0.0
    return SolveResult(u=u, phi=val, residual=J.residual(grad), k_final=k, iterations=it,
                       min_u=float(np.min(u)), boundary_ratio_lo=lo, boundary_ratio_hi=hi,
                       converged=converged)


def minimize_truncated(kernel, grid, reaction, k, opts=None, init=None, trace=None):
    """Minimize ``phi_k`` from several starts and the zero field; keep the lowest.

    Each descent result is replaced by its positive part when that does not
    raise ``phi_k``.
    """
    opts = opts or SolverOptions()
    if reaction.k is None:
        reaction = truncate(reaction, k)
    elif reaction.k != k:
        raise ValueError(f"reaction is truncated at {reaction.k}, asked for {k}")
    J = _Functional(kernel, grid, reaction)
    starts = list(init) if init is not None else initial_fields(grid, kernel.s, opts)
    best = None
    total = 0
    for u0 in starts:
        u, val, grad, it, ok = _descend(J, u0, opts, trace)
        total += it
        if np.any(u < 0):
            up = np.maximum(u, 0.0)
            vp, _ = J(up)
            if vp <= val:
                u, val = up, vp
        if best is None or val < best[1]:
            best = (u, val, ok)
    u, val, ok = best
    zero = np.zeros(grid.n)
    v0, g0 = J(zero)
    if v0 <= val:
        u, val, ok = zero, v0, J.residual(g0) < opts.tol
    return _package(kernel, grid, reaction, u, val, total, ok, k, opts)


def _levels(k_max):
    k = 1
    while k <= k_max:
        yield k
        k *= 2


def solve(kernel, grid, reaction, opts=None, eigen_opts=None, init=None, verdict=None):
    """Evaluate the solvability criterion, then minimize with escalating truncation.

    When the criterion says no positive solution exists the truncated problem is
    still minimized once (``k = 1``) so the outcome can be checked empirically.
    """
    from .verify import evaluate_criterion

    opts = opts or SolverOptions()
    if verdict is None:
        verdict = evaluate_criterion(kernel, grid, reaction, eigen_opts or EigenOptions())
    base = reaction if reaction.k is None else None
    if base is None:
        raise ValueError("solve expects an untruncated reaction")
    x = _nodes_x(grid)
    levels = []
    prev = None
    result = None
    total_iter = 0
    for k in _levels(opts.k_max if verdict.solvable else 1):
        starts = list(init) if init is not None else initial_fields(grid, kernel.s, opts)
        if prev is not None:
            starts.append(prev.u)
        result = minimize_truncated(kernel, grid, base, k, opts, starts)
        total_iter += result.iterations
        fk = eval_f(truncate(base, k), x, result.u)
        f = eval_f(base, x, result.u)
        inactive = bool(np.all(fk == f))
        step = None if prev is None else float(np.max(np.abs(result.u - prev.u)))
        levels.append({"k": k, "phi_k": result.phi, "sup_u": result.sup_u,
                       "clamp_inactive": inactive, "change": step,
                       "iterations": result.iterations})
        log.debug("level k=%d phi_k=%.6e sup=%.6e", k, result.phi, result.sup_u)
        if not verdict.solvable:
            break
        if prev is not None and step < opts.stabilize_tol and inactive:
            break
        prev = result
    else:
        result.message = f"k_max={opts.k_max} exhausted without stabilization"
    final = _package(kernel, grid, base, result.u, phi(kernel, grid, base, result.u),
                     total_iter, result.converged, result.k_final, opts)
    final.levels = levels
    final.verdict = verdict
    final.clamp_inactive = levels[-1]["clamp_inactive"]
    final.message = result.message
    if final.sup_u < opts.zero_tol:
        final.classification = "zero"
    elif final.min_u > 0 and final.residual < opts.tol and final.clamp_inactive:
        final.classification = "positive_solution"
    else:
        final.classification = "unresolved"
    if verdict.solvable and final.message:
        final.converged = False
    return final


def _pairwise_sup(fields):
    best = 0.0
    for a, b in itertools.combinations(fields, 2):
        best = max(best, float(np.max(np.abs(a - b))))
    return best


def multi_start_uniqueness(kernel, grid, reaction, m, opts=None, eigen_opts=None, tol=1e-6):
    """Solve from the default field and ``m`` random positive fields and compare.

    Starts ``i = 1..m`` use seed ``opts.seed + i``, so the report does not
    depend on the worker count.
    """
    from .verify import evaluate_criterion

    opts = opts or SolverOptions()
    verdict = evaluate_criterion(kernel, grid, reaction, eigen_opts or EigenOptions())
    ds = boundary_power(grid, kernel.s)

    def start(i):
        if i == 0:
            return initial_fields(grid, kernel.s, opts, count=1)[0]
        rng = np.random.default_rng(opts.seed + i)
        amp = 10.0 ** rng.uniform(-2.0, 1.0)
        return amp * ds * rng.uniform(0.2, 1.8, grid.n)

    def run(i):
        try:
            return solve(kernel, grid, reaction, opts, init=[start(i)], verdict=verdict), None
        except (RuntimeError, ValueError) as exc:
            return None, f"start {i}: {exc}"

    idx = range(m + 1) if m > 1 else range(1)
    if opts.workers > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            outcomes = list(pool.map(run, idx))
    else:
        outcomes = [run(i) for i in idx]
    results = [r for r, _ in outcomes if r is not None]
    errors = [e for _, e in outcomes if e is not None]
    dist = _pairwise_sup([r.u for r in results]) if len(results) > 1 else 0.0
    verdict_txt = "unique_within_tol" if dist < tol and not errors else "divergent"
    return UniquenessReport(len(results), dist, verdict_txt, tol,
                            [r.sup_u for r in results], errors)
