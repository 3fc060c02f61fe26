"""Randomized and structured checks of the inequalities behind the theory.

Every check returns a :class:`PropertyReport` holding the most negative slack
seen, so tolerances can be judged from data rather than from a boolean.
Random draws come from a Philox counter-based generator keyed by the seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import boundary_power
from .nonlocal_core import gagliardo_energy, apply_operator, jp, picone_gap
from .reactions import ExtendedReal, validate_hypotheses, weights_array
from .spectral import EigenOptions, principal_eigenpair

__all__ = [
    "PropertyReport",
    "CriterionVerdict",
    "check_picone",
    "check_submodularity",
    "check_comparison",
    "check_quotient_bound",
    "check_sign_part",
    "check_contraction",
    "evaluate_criterion",
    "check_necessity",
    "merge_reports",
]

MAX_FAILURES = 10


@dataclass
class PropertyReport:
    property: str
    trials: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    failures: list = field(default_factory=list)
    tol: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.violations == 0

    def record(self, margins, inputs=None):
        """Fold an array of slacks into the report; ``inputs(i)`` describes trial ``i``."""
        margins = np.atleast_1d(np.asarray(margins, dtype=float))
        self.trials += margins.size
        if margins.size == 0:
            return
        bad = np.flatnonzero(~(margins >= -self.tol))
        self.violations += int(bad.size)
        self.worst_margin = min(self.worst_margin, float(np.nanmin(margins)) if not np.all(np.isnan(margins)) else -math.inf)
        for i in bad[: max(0, MAX_FAILURES - len(self.failures))]:
            item = {"margin": float(margins[i])}
            if inputs is not None:
                item.update(inputs(int(i)))
            self.failures.append(item)

    def to_json(self):
        worst = self.worst_margin if math.isfinite(self.worst_margin) else None
        out = {"property": self.property, "trials": self.trials, "violations": self.violations,
               "worst_margin": worst, "failures": self.failures}
        if self.extra:
            out["extra"] = self.extra
        return out


def merge_reports(reports):
    """Combine reports of one property by summing counts and taking the worst margin."""
    reports = list(reports)
    out = PropertyReport(reports[0].property, tol=reports[0].tol)
    for r in reports:
        out.trials += r.trials
        out.violations += r.violations
        out.worst_margin = min(out.worst_margin, r.worst_margin)
        out.failures.extend(r.failures[: MAX_FAILURES - len(out.failures)])
    return out


def _rng(seed, stream=0):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _picone_corners(p):
    vals = [1e-6, 1e-3, 0.5, 1.0, 1.0 + 1e-9, 2.0, 10.0]
    cd = [0.0, 1e-6, 1.0, 3.0, 10.0]
    a, b, c, d = np.meshgrid(vals, vals, cd, cd, indexing="ij")
    return a.ravel(), b.ravel(), c.ravel(), d.ravel()


def check_picone(p_values, trials, seed=0, tol=1e-12):
    """Random and corner draws of ``j_p(a-b)(c^p/a^(p-1) - d^p/b^(p-1)) <= |c-d|^p``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = PropertyReport("picone", tol=tol)
    for idx, p in enumerate(p_values):
        rng = _rng(seed, idx)
        a = rng.uniform(0.0, 10.0, trials)
        b = rng.uniform(0.0, 10.0, trials)
        a = np.where(a <= 0, 10.0, a)
        b = np.where(b <= 0, 10.0, b)
        c = rng.uniform(0.0, 10.0, trials)
        d = rng.uniform(0.0, 10.0, trials)
        gap = picone_gap(p, a, b, c, d)
        report.record(gap, lambda i, p=p, a=a, b=b, c=c, d=d: {
            "p": p, "a": a[i], "b": b[i], "c": c[i], "d": d[i]})
        ca, cb, cc, cd = _picone_corners(p)
        gap = picone_gap(p, ca, cb, cc, cd)
        report.record(gap, lambda i, p=p: {"p": p, "a": ca[i], "b": cb[i], "c": cc[i], "d": cd[i]})
    return report


def _pair_energy_terms(p, U):
    # |U_i - U_j|^p for a batch of fields U of shape (m, n)
    return np.abs(U[:, :, None] - U[:, None, :]) ** p


def check_submodularity(kernel, trials, seed=0, tol=1e-10, batch=64):
    """``E(u v v) + E(u ^ v) <= E(u) + E(v)``, aggregated and for every node pair."""
    p = kernel.p
    n = kernel.n
    W = kernel.weights
    kap = kernel.exterior
    rng = _rng(seed, 1000 + int(round(100 * p)))
    agg = PropertyReport("submodularity", tol=tol)
    pair = PropertyReport("submodularity_pairwise", tol=tol)
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        scale = 10.0 ** rng.uniform(-2, 1, (m, 1))
        U = scale * rng.normal(size=(m, n))
        V = scale * rng.normal(size=(m, n))
        if done == 0:
            # identical fields and disjoint supports
            U[0] = V[0]
            if m > 1:
                half = n // 2
                U[1, half:] = 0.0
                V[1, :half] = 0.0
                U[1] = np.abs(U[1])
                V[1] = np.abs(V[1])
        Mx, Mn = np.maximum(U, V), np.minimum(U, V)
        tu, tv = _pair_energy_terms(p, U), _pair_energy_terms(p, V)
        tM, tm = _pair_energy_terms(p, Mx), _pair_energy_terms(p, Mn)
        slack = (tu + tv) - (tM + tm)
        # exterior pairs: |max|^p + |min|^p == |u|^p + |v|^p exactly
        ext = (np.abs(U) ** p + np.abs(V) ** p) - (np.abs(Mx) ** p + np.abs(Mn) ** p)
        off = ~np.eye(n, dtype=bool)
        pair.record(np.concatenate([slack[:, off].ravel(), ext.ravel()]))

        def energy(X):
            inner = np.einsum("mij,ij->m", _pair_energy_terms(p, X), W)
            return inner + (np.abs(X) ** p) @ kap

        margin = energy(U) + energy(V) - energy(Mx) - energy(Mn)
        agg.record(margin, lambda i, U=U, V=V: {"u": U[i].tolist(), "v": V[i].tolist()})
        done += m
    agg.extra["pairwise"] = pair.to_json()
    agg.violations += pair.violations
    agg.worst_margin = min(agg.worst_margin, pair.worst_margin)
    agg.extra["p"] = p
    return agg


def comparison_slack(p, u, v):
    """Slack of the comparison inequality for every ordered pair, exterior last.

    Returns ``(interior, exterior, cases)`` where ``interior`` is ``n x n``,
    ``exterior`` has one entry per node (partner outside the domain) and
    ``cases`` labels interior pairs by the sign pattern of ``u - v``.
    """
    w = np.maximum(u ** p - v ** p, 0.0)
    qu = w / u ** (p - 1)
    qv = w / v ** (p - 1)
    lhs = jp(p, u[:, None] - u[None, :]) * (qu[:, None] - qu[None, :])
    rhs = jp(p, v[:, None] - v[None, :]) * (qv[:, None] - qv[None, :])
    interior = lhs - rhs
    # partner outside: u = v = w = 0 there
    exterior = jp(p, u) * qu - jp(p, v) * qv
    big = u > v
    cases = np.where(big[:, None] & big[None, :], "a",
                     np.where(big[:, None], "b", np.where(big[None, :], "c", "d")))
    return interior, exterior, cases


def check_comparison(kernel, u, v, tol=1e-10):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u <= 0) or np.any(v <= 0):
        raise ValueError("check_comparison needs strictly positive fields")
    p = kernel.p
    interior, exterior, cases = comparison_slack(p, u, v)
    off = ~np.eye(len(u), dtype=bool)
    report = PropertyReport("comparison", tol=tol)
    ii, jj = np.nonzero(off)
    report.record(interior[off], lambda k: {"i": int(ii[k]), "j": int(jj[k]), "case": str(cases[ii[k], jj[k]])})
    report.record(exterior, lambda k: {"i": int(k), "j": "exterior"})
    labels, counts = np.unique(cases[off], return_counts=True)
    report.extra["cases"] = {str(c): int(m) for c, m in zip(labels, counts)}
    return report


def check_quotient_bound(grid, u, v, s, p, tol=1e-10):
    """Lipschitz-type bound for ``u^p / v^(p-1)`` between node pairs.

    Requires ``d^s / C <= u, v <= C d^s``; the constant ``C`` found is reported
    and a failed hypothesis is not counted as a violation.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    report = PropertyReport("quotient_bound", tol=tol)
    ds = boundary_power(grid, s)
    if np.any(u <= 0) or np.any(v <= 0):
        report.extra["hypothesis"] = "failed: fields must be positive"
        return report
    C = float(max(np.max(u / ds), np.max(ds / u), np.max(v / ds), np.max(ds / v)))
    report.extra["hypothesis_C"] = C
    if not math.isfinite(C):
        report.extra["hypothesis"] = "failed"
        return report
    report.extra["hypothesis"] = "ok"
    ratio = float(np.max(u / v))
    c1 = p * ratio ** (p - 1)
    c2 = (p - 1) * ratio ** p
    q = u ** p / v ** (p - 1)
    lhs = np.abs(q[:, None] - q[None, :])
    rhs = c1 * np.abs(u[:, None] - u[None, :]) + c2 * np.abs(v[:, None] - v[None, :])
    off = ~np.eye(len(u), dtype=bool)
    report.record((rhs - lhs)[off])
    report.record(c1 * u + c2 * v - q)
    report.extra.update({"C1": c1, "C2": c2})
    return report


def check_sign_part(kernel, trials, seed=0, tol=1e-10):
    """``E(u+) <= <(-Delta)_p^s u, u+>`` and ``E(u-) <= <(-Delta)_p^s u, -u->``."""
    rng = _rng(seed, 2000)
    report = PropertyReport("sign_part", tol=tol)
    for _ in range(trials):
        u = rng.normal(size=kernel.n) * 10.0 ** rng.uniform(-2, 1)
        g = apply_operator(kernel, u)
        up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
        report.record([g @ up - gagliardo_energy(kernel, up), -(g @ um) - gagliardo_energy(kernel, um)])
    return report


def check_contraction(kernel, trials, seed=0, tol=1e-10):
    """``E(|u|) <= E(u)``."""
    rng = _rng(seed, 3000)
    report = PropertyReport("contraction", tol=tol)
    for _ in range(trials):
        u = rng.normal(size=kernel.n) * 10.0 ** rng.uniform(-2, 1)
        report.record(gagliardo_energy(kernel, u) - gagliardo_energy(kernel, np.abs(u)))
    return report


@dataclass
class CriterionVerdict:
    lambda_a0: ExtendedReal
    lambda_ainf: ExtendedReal
    solvable: bool
    reason: str
    warnings: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)

    def to_json(self):
        return {"lambda_a0": self.lambda_a0.to_json(), "lambda_ainf": self.lambda_ainf.to_json(),
                "solvable": self.solvable, "reason": self.reason, "warnings": self.warnings,
                "hypotheses": self.hypotheses}


def _weight_flags(name, a):
    finite = np.isfinite(a)
    flags = []
    if np.any(a == math.inf) and np.any(a == -math.inf):
        flags.append(f"{name}: mixed-sign infinities (experimental)")
    elif not np.all(finite) and np.any(finite):
        flags.append(f"{name}: infinite on a strict subset of nodes (experimental)")
    return flags


DEFAULT_T_SAMPLES = np.logspace(-3, 2, 51)


def evaluate_criterion(kernel, grid, reaction, eigen_opts=None, t_samples=None):
    """Solvable iff ``lambda_1(a_0) < 0 < lambda_1(a_inf)``."""
    eigen_opts = eigen_opts or EigenOptions()
    x = np.asarray(grid.points)[:, 0]
    warnings = []
    hyp = validate_hypotheses(reaction, grid, DEFAULT_T_SAMPLES if t_samples is None else t_samples)
    if not hyp.ok:
        warnings.append("reaction fails hypotheses on the sample set")
    a0 = weights_array(reaction, x, "zero")
    ainf = weights_array(reaction, x, "infty")
    warnings += _weight_flags("a0", a0) + _weight_flags("a_inf", ainf)
    if np.all(a0 == -math.inf):
        warnings.append("a0 = -inf everywhere: admissible set is empty (degenerate)")
    la0 = principal_eigenpair(kernel, grid, a0, eigen_opts)
    lainf = principal_eigenpair(kernel, grid, ainf, eigen_opts)
    for name, res in (("lambda_1(a0)", la0), ("lambda_1(a_inf)", lainf)):
        if not res.converged:
            warnings.append(f"{name}: eigen descent did not converge")
    solvable = bool(la0.lam < 0.0 < lainf.lam)
    if solvable:
        reason = f"lambda_1(a0) = {la0.lam} < 0 < lambda_1(a_inf) = {lainf.lam}"
    elif not la0.lam < 0.0:
        reason = f"lambda_1(a0) = {la0.lam} >= 0"
    else:
        reason = f"lambda_1(a_inf) = {lainf.lam} <= 0"
    return CriterionVerdict(la0.lam, lainf.lam, solvable, reason, warnings, hyp.to_json())


def check_necessity(kernel, grid, reaction, solve_result, verdict=None, eigen_opts=None):
    """A positive solution must come with a solvable verdict."""
    report = PropertyReport("necessity", tol=0.0)
    if solve_result.classification != "positive_solution":
        report.extra["note"] = "vacuous: no positive solution"
        return report
    if verdict is None:
        verdict = evaluate_criterion(kernel, grid, reaction, eigen_opts)
    report.record([1.0 if verdict.solvable else -1.0],
                  lambda i: {"verdict": verdict.to_json()})
    return report
